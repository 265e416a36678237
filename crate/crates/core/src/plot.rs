// SPDX-License-Identifier: Apache-2.0

//! Static SVG charts of sweep results.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::harness::LoadCurve;

fn draw_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e:?}")))
}

/// Average latency against offered load, one line per labelled curve.
/// Points without a latency are skipped.
pub fn latency_curves(path: &Path, title: &str, curves: &[(String, LoadCurve)]) -> Result<()> {
    let pts: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(l, c)| {
            (l.clone(), c.points.iter().filter_map(|p| Some((p.load, p.summary.avg_latency?))).collect())
        })
        .collect();
    let x_max = pts.iter().flat_map(|(_, v)| v.iter().map(|p| p.0)).fold(0.0, f64::max).max(1e-3);
    let y_max = pts.iter().flat_map(|(_, v)| v.iter().map(|p| p.1)).fold(0.0, f64::max).max(1.0);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max * 1.05, 0.0..y_max * 1.1)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("injection load (flits/core/cycle)")
        .y_desc("average latency (cycles)")
        .draw()
        .map_err(draw_err)?;
    for (i, (label, series)) in pts.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(series.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// One bar per label.
pub fn bar_chart(path: &Path, title: &str, y_desc: &str, bars: &[(String, f64)]) -> Result<()> {
    let n = bars.len().max(1);
    let y_max = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-9);
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..n as f64, 0.0..y_max * 1.1)
        .map_err(draw_err)?;
    let labels: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n * 2 + 1)
        .x_label_formatter(&|x| {
            let i = (*x - 0.5).round();
            if (x - 0.5 - i).abs() < 1e-6 && i >= 0.0 {
                labels.get(i as usize).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .y_desc(y_desc)
        .draw()
        .map_err(draw_err)?;
    chart
        .draw_series(bars.iter().enumerate().map(|(i, (_, v))| {
            let color = Palette99::pick(i).to_rgba();
            Rectangle::new([(i as f64 + 0.15, 0.0), (i as f64 + 0.85, *v)], color.filled())
        }))
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_svg_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bars.svg");
        bar_chart(&p, "peak", "Gbps", &[("a".into(), 1.0), ("b".into(), 2.0)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<svg"));
        let p = dir.path().join("lat.svg");
        latency_curves(&p, "latency", &[]).unwrap();
        assert!(std::fs::metadata(&p).unwrap().len() > 0);
    }
}
