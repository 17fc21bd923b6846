//! Static SVG figures and gnuplot-ready data tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::sweep::MetricSummary;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn bounds(series: &[Series]) -> Option<((f64, f64), (f64, f64))> {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let mut it = pts.peekable();
    it.peek()?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in it {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| if b > a { (b - a) * 0.05 } else { a.abs().max(1.0) * 0.05 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));
    Some(((x0 - px, x1 + px), (y0 - py, y1 + py)))
}

/// Line chart with one polyline per series.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let Some(((x0, x1), (y0, y1))) = bounds(series) else {
        return Ok(());
    };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Whitespace-separated table: x then one column per series, `nan` for gaps.
pub fn write_dat(path: &Path, x_label: &str, series: &[Series]) -> Result<()> {
    let mut xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = String::new();
    let _ = write!(out, "# {}", x_label.replace(' ', "_"));
    for s in series {
        let _ = write!(out, " {}", s.name);
    }
    out.push('\n');
    for x in xs {
        let _ = write!(out, "{x}");
        for s in series {
            match s.points.iter().find(|p| p.0 == x) {
                Some(p) => {
                    let _ = write!(out, " {}", p.1);
                }
                None => out.push_str(" nan"),
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Pe and NMSE versus the sweep value, plus one RMSE CDF per point.
pub fn write_figures(cfg: &ExperimentConfig, summary: &MetricSummary, dir: &Path) -> Result<()> {
    let axis = cfg.sweep.axis;
    let mk = |f: &dyn Fn(&super::sweep::PointSummary) -> f64| -> Vec<Series> {
        cfg.sweep
            .solvers
            .iter()
            .map(|&s| Series {
                name: s.name().to_string(),
                points: summary.series(s, f),
            })
            .collect()
    };
    let pe = mk(&|r| r.pe.mean);
    line_chart(&dir.join("pe.svg"), "Activity detection error", axis.label(), "Pe", &pe)?;
    write_dat(&dir.join("pe.dat"), axis.name(), &pe)?;
    let nmse = mk(&|r| r.nmse_db);
    line_chart(
        &dir.join("nmse.svg"),
        "Channel estimation NMSE",
        axis.label(),
        "NMSE (dB)",
        &nmse,
    )?;
    write_dat(&dir.join("nmse.dat"), axis.name(), &nmse)?;

    for (point, value) in cfg.sweep.values.iter().enumerate() {
        let cdfs: Vec<Series> = cfg
            .sweep
            .solvers
            .iter()
            .filter_map(|&s| summary.get(point, s).map(|r| (s, r)))
            .filter(|(_, r)| !r.rmse_cdf.is_empty())
            .map(|(s, r)| Series {
                name: s.name().to_string(),
                points: r.rmse_cdf.steps().into_iter().map(|(x, y)| (x * 100.0, y)).collect(),
            })
            .collect();
        if cdfs.is_empty() {
            continue;
        }
        let title = format!("RMSE CDF at {} = {value}", axis.name());
        line_chart(
            &dir.join(format!("rmse_cdf_{point}.svg")),
            &title,
            "RMSE (cm)",
            "CDF",
            &cdfs,
        )?;
        write_dat(&dir.join(format!("rmse_cdf_{point}.dat")), "rmse_cm", &cdfs)?;
    }
    Ok(())
}
