//! Static log-log plot of median error against sample size.

use std::path::Path;

use plotters::prelude::*;

use crate::experiment::ExperimentResult;
use crate::{Error, Result};

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// Medians as points, fitted power laws as lines; one colour per estimator.
pub fn write_rate_plot(result: &ExperimentResult, path: &Path) -> Result<()> {
    let points: Vec<&crate::experiment::Aggregate> = result.aggregates.iter().filter(|a| a.succeeded > 0 && a.median > 0.0).collect();
    if points.is_empty() {
        return Err(Error::Runtime("nothing to plot: no successful replications".into()));
    }
    let (nmin, nmax) = points.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.n as f64), b.max(p.n as f64)));
    let (emin, emax) = points.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.median), b.max(p.median)));
    let draw_err = |e: &dyn std::fmt::Display| Error::Runtime(format!("plot: {e}"));

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("median error vs n", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((nmin / 1.5..nmax * 1.5).log_scale(), (emin / 2.0..emax * 2.0).log_scale())
        .map_err(|e| draw_err(&e))?;
    chart.configure_mesh().x_desc("n").y_desc("median L_p error").draw().map_err(|e| draw_err(&e))?;

    let mut names: Vec<&str> = Vec::new();
    for p in &points {
        if !names.contains(&p.estimator.as_str()) {
            names.push(&p.estimator);
        }
    }
    for (k, name) in names.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.estimator == *name).map(|p| (p.n as f64, p.median)).collect();
        chart
            .draw_series(pts.iter().map(|&(x, y)| Circle::new((x, y), 4, colour.filled())))
            .map_err(|e| draw_err(&e))?
            .label(*name)
            .legend(move |(x, y)| Circle::new((x, y), 4, colour.filled()));
        if let Some((_, f)) = result.rate_fits.iter().find(|(n, _)| n == name) {
            let line = [nmin, nmax].map(|x| (x, (f.intercept + f.slope * x.ln()).exp()));
            chart.draw_series(LineSeries::new(line, colour)).map_err(|e| draw_err(&e))?;
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| draw_err(&e))?;
    root.present().map_err(|e| draw_err(&e))?;
    Ok(())
}
