//! Joint activity detection and channel estimation.
//!
//! All solvers work on subarray blocks `(k, m)`, block index `k·M + m`,
//! covering entries `(k·M + m)·N_s .. +N_s` of the stacked channel. Since
//! `F_p` row `g·M + m` only sees subarray `m`, the least-squares problem on
//! any block support splits into M independent problems, one per subarray,
//! each with G rows. Only the partitions touched by a support change are
//! re-solved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{MeasurementSet, SensingOperator};
use crate::linalg::{pinv_solve, CMatrix, CVector, LeastSquares};

/// Relative floor applied to a zero stopping threshold.
pub const NOISELESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockGranularity {
    /// One block per subarray of one user (N_s entries).
    Subarray,
    /// One block per user (N_BS entries).
    User,
}

/// `[recovery]` section. Unset values are filled by [`RecoverySettings::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySettings {
    /// Stopping threshold in W; defaults to the true noise variance.
    pub epsilon_th: Option<f64>,
    /// Iteration cap; defaults to `K_a·M`.
    pub max_iterations: Option<usize>,
    pub ls_rank_tolerance: f64,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        Self {
            epsilon_th: None,
            max_iterations: None,
            ls_rank_tolerance: 1e-10,
        }
    }
}

impl RecoverySettings {
    pub fn resolve(&self, noise_var: f64, active_users: usize, subarrays: usize) -> RecoveryConfig {
        RecoveryConfig {
            epsilon_th: self.epsilon_th.unwrap_or(noise_var),
            max_iterations: self.max_iterations.unwrap_or((active_users * subarrays).max(1)),
            ls_rank_tolerance: self.ls_rank_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub epsilon_th: f64,
    pub max_iterations: usize,
    pub ls_rank_tolerance: f64,
}

impl RecoveryConfig {
    pub fn new(epsilon_th: f64, max_iterations: usize) -> Self {
        Self {
            epsilon_th,
            max_iterations,
            ls_rank_tolerance: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_th >= 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "epsilon_th must be non-negative and max_iterations at least 1".into(),
            ));
        }
        if !(self.ls_rank_tolerance >= 0.0 && self.ls_rank_tolerance < 1.0) {
            return Err(Error::InvalidConfig("ls_rank_tolerance must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    BelowThreshold,
    ResidualIncrease,
    MaxIterations,
    /// Every block is already in the support.
    Exhausted,
    /// The measurements already satisfied the threshold.
    EmptyInput,
    /// Support supplied by a genie.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "action")]
pub enum Refinement {
    None,
    Deleted { users: Vec<usize> },
    Added { user: usize, block: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "strbomp")]
    StrBomp,
    #[serde(rename = "bomp")]
    Bomp,
    #[serde(rename = "bomp-sa")]
    BompSa,
    #[serde(rename = "oracle-ls")]
    OracleLs,
    #[serde(rename = "oracle-ls-sa")]
    OracleLsSa,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::StrBomp,
        SolverKind::Bomp,
        SolverKind::BompSa,
        SolverKind::OracleLs,
        SolverKind::OracleLsSa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::StrBomp => "strbomp",
            Self::Bomp => "bomp",
            Self::BompSa => "bomp-sa",
            Self::OracleLs => "oracle-ls",
            Self::OracleLsSa => "oracle-ls-sa",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, Self::OracleLs | Self::OracleLsSa)
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownSolver(s.to_string()))
    }
}

fn empty_matrix() -> CMatrix {
    CMatrix::zeros(0, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub solver: SolverKind,
    pub zeta_hat: Vec<bool>,
    /// `K·N_BS × P`; stored separately as a binary dump.
    #[serde(skip, default = "empty_matrix")]
    pub h_hat: CMatrix,
    /// Selected subarray blocks in order of selection.
    pub block_support: Vec<usize>,
    /// Ascending channel entries covered by `block_support`.
    pub element_support: Vec<usize>,
    /// ε after every loop iteration.
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub estimated_active: usize,
    pub termination: Termination,
    /// ε when the greedy loop stopped.
    pub loop_residual: f64,
    /// ε after refinement.
    pub final_residual: f64,
    pub epsilon_th: f64,
    pub refinement: Refinement,
    pub rank_deficient: bool,
}

impl RecoveryResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Subarray blocks `(k, m)` per user.
    pub fn blocks_by_user(&self, subarrays: usize) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &b in &self.block_support {
            out.entry(b / subarrays).or_default().push(b % subarrays);
        }
        out
    }
}

/// `(1/(GMP))·Σ_p ‖r_p‖²`.
pub fn residual_mean(r: &CMatrix, g: usize, m: usize, p: usize) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>() / (g * m * p) as f64
}

/// Minimum-norm LS with rank reporting.
pub fn ls_estimate(f_sub: &CMatrix, y: &CVector, tol: f64) -> LeastSquares {
    pinv_solve(f_sub, y, tol)
}

/// `d = Σ_p |F_pᴴ r_p|`, length `K·N_BS`.
pub fn correlation(op: &SensingOperator<'_>, r: &CMatrix) -> Vec<f64> {
    let mut d = vec![0.0; op.cols()];
    for p in 0..op.pilot_count() {
        let c = op.adjoint(p, &r.column(p).clone_owned());
        for (acc, z) in d.iter_mut().zip(c.iter()) {
            *acc += z.norm();
        }
    }
    d
}

/// Sums `d` over each block at the given granularity.
pub fn block_scores(d: &[f64], subarrays: usize, ns: usize, granularity: BlockGranularity) -> Vec<f64> {
    let size = match granularity {
        BlockGranularity::Subarray => ns,
        BlockGranularity::User => ns * subarrays,
    };
    d.chunks(size).map(|c| c.iter().sum()).collect()
}

/// Index of the largest score not excluded; ties go to the lowest index.
fn argmax_excluding(scores: &[f64], excluded: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if excluded(i) {
            continue;
        }
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Block-sparse LS state split across subarray partitions.
struct BlockLs<'a> {
    op: SensingOperator<'a>,
    y: &'a CMatrix,
    tol: f64,
    /// `[m]` ascending users holding block `(k, m)`.
    users: Vec<Vec<usize>>,
    /// `[m][p]` LS coefficients in `(user, n)` order.
    coeffs: Vec<Vec<CVector>>,
    rank_deficient: Vec<bool>,
    residual: CMatrix,
}

impl<'a> BlockLs<'a> {
    fn new(op: SensingOperator<'a>, y: &'a CMatrix, tol: f64) -> Self {
        let m_n = op.subarrays();
        Self {
            op,
            y,
            tol,
            users: vec![Vec::new(); m_n],
            coeffs: vec![Vec::new(); m_n],
            rank_deficient: vec![false; m_n],
            residual: y.clone(),
        }
    }

    fn contains(&self, k: usize, m: usize) -> bool {
        self.users[m].binary_search(&k).is_ok()
    }

    fn insert(&mut self, k: usize, m: usize) -> bool {
        match self.users[m].binary_search(&k) {
            Ok(_) => false,
            Err(pos) => {
                self.users[m].insert(pos, k);
                true
            }
        }
    }

    fn remove(&mut self, k: usize, m: usize) -> bool {
        match self.users[m].binary_search(&k) {
            Ok(pos) => {
                self.users[m].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    fn solve(&mut self, m: usize) {
        let m_n = self.op.subarrays();
        let users = &self.users[m];
        let mut coeffs = Vec::with_capacity(self.op.pilot_count());
        let mut deficient = false;
        for p in 0..self.op.pilot_count() {
            let b = self.op.partition_rows(m, &self.y.column(p).clone_owned());
            let (x, r) = if users.is_empty() {
                (CVector::zeros(0), b)
            } else {
                let a = self.op.partition(p, m, users);
                let ls = pinv_solve(&a, &b, self.tol);
                deficient |= ls.is_rank_deficient();
                let r = &b - &a * &ls.solution;
                (ls.solution, r)
            };
            for (g, v) in r.iter().enumerate() {
                self.residual[(g * m_n + m, p)] = *v;
            }
            coeffs.push(x);
        }
        self.coeffs[m] = coeffs;
        self.rank_deficient[m] = deficient;
    }

    fn epsilon(&self) -> f64 {
        residual_mean(
            &self.residual,
            self.op.symbols(),
            self.op.subarrays(),
            self.op.pilot_count(),
        )
    }

    fn h_hat(&self) -> CMatrix {
        let (m_n, ns) = (self.op.subarrays(), self.op.antennas_per_subarray());
        let mut h = CMatrix::zeros(self.op.cols(), self.op.pilot_count());
        for m in 0..m_n {
            for (p, x) in self.coeffs[m].iter().enumerate() {
                for (i, &k) in self.users[m].iter().enumerate() {
                    for n in 0..ns {
                        h[((k * m_n + m) * ns + n, p)] = x[i * ns + n];
                    }
                }
            }
        }
        h
    }

    fn any_rank_deficient(&self) -> bool {
        self.rank_deficient.iter().any(|&b| b)
    }
}

fn check_inputs(meas: &MeasurementSet, cfg: &RecoveryConfig) -> Result<()> {
    cfg.validate()?;
    let op = meas.operator();
    if meas.y.nrows() != op.rows() || meas.y.ncols() != op.pilot_count() {
        return Err(Error::Shape("measurements do not match the sensing operator".into()));
    }
    Ok(())
}

fn effective_threshold(meas: &MeasurementSet, cfg: &RecoveryConfig) -> f64 {
    if cfg.epsilon_th > 0.0 {
        cfg.epsilon_th
    } else {
        NOISELESS_FLOOR * meas.mean_power()
    }
}

fn element_support(blocks: &[usize], ns: usize) -> Vec<usize> {
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable();
    sorted.iter().flat_map(|&b| b * ns..(b + 1) * ns).collect()
}

struct LoopOutcome {
    order: Vec<usize>,
    trace: Vec<f64>,
    iterations: usize,
    termination: Termination,
    eps: f64,
}

/// Greedy block selection loop shared by the three pursuit solvers.
fn pursue(ls: &mut BlockLs<'_>, cfg: &RecoveryConfig, eps_th: f64, granularity: BlockGranularity) -> LoopOutcome {
    let op = ls.op;
    let (k_n, m_n, ns) = (op.users(), op.subarrays(), op.antennas_per_subarray());
    let mut order = Vec::new();
    let mut trace = Vec::new();
    let mut eps_prev = ls.epsilon();
    if eps_prev <= eps_th {
        return LoopOutcome {
            order,
            trace,
            iterations: 0,
            termination: Termination::EmptyInput,
            eps: eps_prev,
        };
    }
    let total_blocks = match granularity {
        BlockGranularity::Subarray => k_n * m_n,
        BlockGranularity::User => k_n,
    };
    let cap = cfg.max_iterations.min(total_blocks);
    let mut chosen = vec![false; total_blocks];
    let mut iterations = 0;
    let termination = loop {
        if iterations >= cap {
            break if cap == total_blocks && iterations == total_blocks {
                Termination::Exhausted
            } else {
                Termination::MaxIterations
            };
        }
        let d = correlation(&op, &ls.residual);
        let scores = block_scores(&d, m_n, ns, granularity);
        let Some(s) = argmax_excluding(&scores, |i| chosen[i]) else {
            break Termination::Exhausted;
        };
        chosen[s] = true;
        iterations += 1;
        match granularity {
            BlockGranularity::Subarray => {
                let (k, m) = (s / m_n, s % m_n);
                ls.insert(k, m);
                ls.solve(m);
                order.push(s);
            }
            BlockGranularity::User => {
                for m in 0..m_n {
                    ls.insert(s, m);
                    ls.solve(m);
                    order.push(s * m_n + m);
                }
            }
        }
        let eps = ls.epsilon();
        trace.push(eps);
        if eps <= eps_th {
            break Termination::BelowThreshold;
        }
        if eps >= eps_prev {
            break Termination::ResidualIncrease;
        }
        eps_prev = eps;
    };
    let eps = ls.epsilon();
    LoopOutcome {
        order,
        trace,
        iterations,
        termination,
        eps,
    }
}

/// Subarray-level pruning and completion after the greedy loop.
fn refine(ls: &mut BlockLs<'_>, order: &mut Vec<usize>) -> Refinement {
    let op = ls.op;
    let (m_n, ns) = (op.subarrays(), op.antennas_per_subarray());
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &b in order.iter() {
        *counts.entry(b / m_n).or_default() += 1;
    }
    let singles: Vec<usize> = counts.iter().filter(|(_, &c)| c == 1).map(|(&k, _)| k).collect();
    match singles.len() {
        0 => Refinement::None,
        1 => {
            let k = singles[0];
            let d = correlation(&op, &ls.residual);
            let scores = block_scores(&d, m_n, ns, BlockGranularity::Subarray);
            let own = &scores[k * m_n..(k + 1) * m_n];
            let Some(m) = argmax_excluding(own, |m| ls.contains(k, m)) else {
                return Refinement::None;
            };
            ls.insert(k, m);
            ls.solve(m);
            order.push(k * m_n + m);
            Refinement::Added {
                user: k,
                block: k * m_n + m,
            }
        }
        _ => {
            let mut dirty = vec![false; m_n];
            order.retain(|&b| {
                let (k, m) = (b / m_n, b % m_n);
                if singles.binary_search(&k).is_ok() {
                    dirty[m] = true;
                    false
                } else {
                    true
                }
            });
            for &k in &singles {
                for m in 0..m_n {
                    ls.remove(k, m);
                }
            }
            for (m, _) in dirty.iter().enumerate().filter(|(_, &d)| d) {
                ls.solve(m);
            }
            Refinement::Deleted { users: singles }
        }
    }
}

fn finish(
    solver: SolverKind,
    ls: &BlockLs<'_>,
    order: Vec<usize>,
    outcome: &LoopOutcome,
    eps_th: f64,
    refinement: Refinement,
) -> RecoveryResult {
    let op = ls.op;
    let (k_n, m_n, ns) = (op.users(), op.subarrays(), op.antennas_per_subarray());
    let mut zeta_hat = vec![false; k_n];
    for &b in &order {
        zeta_hat[b / m_n] = true;
    }
    RecoveryResult {
        solver,
        estimated_active: zeta_hat.iter().filter(|&&z| z).count(),
        zeta_hat,
        h_hat: ls.h_hat(),
        element_support: element_support(&order, ns),
        block_support: order,
        residual_trace: outcome.trace.clone(),
        iterations: outcome.iterations,
        termination: outcome.termination,
        loop_residual: outcome.eps,
        final_residual: ls.epsilon(),
        epsilon_th: eps_th,
        refinement,
        rank_deficient: ls.any_rank_deficient(),
    }
}

fn pursuit(
    meas: &MeasurementSet,
    cfg: &RecoveryConfig,
    solver: SolverKind,
    granularity: BlockGranularity,
    with_refinement: bool,
) -> Result<RecoveryResult> {
    check_inputs(meas, cfg)?;
    let eps_th = effective_threshold(meas, cfg);
    let mut ls = BlockLs::new(meas.operator(), &meas.y, cfg.ls_rank_tolerance);
    let outcome = pursue(&mut ls, cfg, eps_th, granularity);
    let mut order = outcome.order.clone();
    let refinement = if with_refinement && !order.is_empty() {
        refine(&mut ls, &mut order)
    } else {
        Refinement::None
    };
    Ok(finish(solver, &ls, order, &outcome, eps_th, refinement))
}

/// Structured block OMP with subarray blocks and refinement.
pub fn strbomp(meas: &MeasurementSet, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    pursuit(meas, cfg, SolverKind::StrBomp, BlockGranularity::Subarray, true)
}

/// Block OMP with whole-array user blocks.
pub fn bomp(meas: &MeasurementSet, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    pursuit(meas, cfg, SolverKind::Bomp, BlockGranularity::User, false)
}

/// Subarray blocks without refinement.
pub fn bomp_sa(meas: &MeasurementSet, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    pursuit(meas, cfg, SolverKind::BompSa, BlockGranularity::Subarray, false)
}

fn oracle(
    meas: &MeasurementSet,
    cfg: &RecoveryConfig,
    solver: SolverKind,
    blocks: Vec<usize>,
) -> Result<RecoveryResult> {
    check_inputs(meas, cfg)?;
    let op = meas.operator();
    let m_n = op.subarrays();
    let mut ls = BlockLs::new(op, &meas.y, cfg.ls_rank_tolerance);
    for &b in &blocks {
        ls.insert(b / m_n, b % m_n);
    }
    for m in 0..m_n {
        if !ls.users[m].is_empty() {
            ls.solve(m);
        }
    }
    let eps = ls.epsilon();
    let outcome = LoopOutcome {
        order: blocks.clone(),
        trace: Vec::new(),
        iterations: 0,
        termination: Termination::Oracle,
        eps,
    };
    Ok(finish(
        solver,
        &ls,
        blocks,
        &outcome,
        effective_threshold(meas, cfg),
        Refinement::None,
    ))
}

/// LS over every antenna of the truly active users.
pub fn oracle_ls(meas: &MeasurementSet, cfg: &RecoveryConfig, zeta: &[bool]) -> Result<RecoveryResult> {
    let m_n = meas.operator().subarrays();
    if zeta.len() != meas.operator().users() {
        return Err(Error::Shape("activity vector length differs from K".into()));
    }
    let blocks = zeta
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .flat_map(|(k, _)| (0..m_n).map(move |m| k * m_n + m))
        .collect();
    oracle(meas, cfg, SolverKind::OracleLs, blocks)
}

/// LS over the truly active subarrays of the truly active users.
pub fn oracle_ls_sa(
    meas: &MeasurementSet,
    cfg: &RecoveryConfig,
    zeta: &[bool],
    pi: &[Vec<bool>],
) -> Result<RecoveryResult> {
    let m_n = meas.operator().subarrays();
    if zeta.len() != meas.operator().users() || pi.len() != zeta.len() || pi.iter().any(|v| v.len() != m_n) {
        return Err(Error::Shape("activity masks do not match K × M".into()));
    }
    let blocks = zeta
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .flat_map(|(k, _)| (0..m_n).filter(move |&m| pi[k][m]).map(move |m| k * m_n + m))
        .collect();
    oracle(meas, cfg, SolverKind::OracleLsSa, blocks)
}

/// Ground truth needed by the oracle solvers.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub activity: &'a [bool],
    pub subarray_activity: &'a [Vec<bool>],
}

pub fn run_solver(
    kind: SolverKind,
    meas: &MeasurementSet,
    cfg: &RecoveryConfig,
    truth: Truth<'_>,
) -> Result<RecoveryResult> {
    match kind {
        SolverKind::StrBomp => strbomp(meas, cfg),
        SolverKind::Bomp => bomp(meas, cfg),
        SolverKind::BompSa => bomp_sa(meas, cfg),
        SolverKind::OracleLs => oracle_ls(meas, cfg, truth.activity),
        SolverKind::OracleLsSa => oracle_ls_sa(meas, cfg, truth.activity, truth.subarray_activity),
    }
}

/// `y_p − F_p ĥ_p` for every p.
pub fn residual_of(meas: &MeasurementSet, h_hat: &CMatrix) -> CMatrix {
    let op = meas.operator();
    let mut r = meas.y.clone();
    for p in 0..op.pilot_count() {
        let fy = op.apply(p, &h_hat.column(p).clone_owned());
        let mut col = r.column_mut(p);
        col -= fy;
    }
    r
}
