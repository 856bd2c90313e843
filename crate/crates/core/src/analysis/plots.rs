//! SVG figures with CSV sidecars holding the exact plotted values.

use std::fmt::Write as _;
use std::path::Path;

use plotters::prelude::*;

use super::landscape::LandscapeScan;
use super::metrics::MetricsRow;
use crate::{Error, Result};

const SIZE: (u32, u32) = (800, 500);

/// Fixed series colours, assigned by series order.
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Reward,
    Utility,
}

impl Metric {
    fn of(self, row: &MetricsRow) -> f64 {
        match self {
            Metric::Reward => row.mean_reward,
            Metric::Utility => row.mean_utility,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Metric::Reward => "mean reward",
            Metric::Utility => "mean utility",
        }
    }
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn bounds(series: &[Series]) -> Result<((f64, f64), (f64, f64))> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    if pts.is_empty() {
        return Err(Error::Validation("nothing to plot".into()));
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Validation("non-finite value in plot input".into()));
    }
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { 1.0 };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let fold = |sel: fn(&(f64, f64)) -> f64| {
        pts.iter()
            .map(sel)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            })
    };
    let (x0, x1) = fold(|p| p.0);
    let (y0, y1) = fold(|p| p.1);
    Ok((pad(x0, x1), pad(y0, y1)))
}

fn write_csv(path: &Path, series: &[Series], x: &str, y: &str) -> Result<()> {
    let mut out = format!("series,{x},{y}\n");
    for s in series {
        for (a, b) in &s.points {
            let _ = writeln!(out, "{},{a},{b}", s.label);
        }
    }
    std::fs::write(path.with_extension("csv"), out)?;
    Ok(())
}

/// Line chart of several series; also writes `<path>.csv`.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let ((x0, x1), (y0, y1)) = bounds(series)?;
    {
        let root = SVGBackend::new(path, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
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
            let colour = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(
                    s.points.iter().copied(),
                    colour.stroke_width(2),
                ))
                .map_err(plot_err)?
                .label(s.label)
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 20, y)], colour.stroke_width(2))
                });
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    write_csv(path, series, x_label, y_label)
}

/// Per-round metric against cumulative real interactions, one line per run.
pub fn rounds_chart(path: &Path, metric: Metric, runs: &[(&str, &[MetricsRow])]) -> Result<()> {
    let series: Vec<Series> = runs
        .iter()
        .map(|(label, rows)| Series {
            label,
            points: rows
                .iter()
                .map(|r| (r.real_interactions as f64, metric.of(r)))
                .collect(),
        })
        .collect();
    line_chart(
        path,
        metric.name(),
        "real interactions",
        metric.name(),
        &series,
    )
}

pub fn landscape_chart(path: &Path, scans: &[(&str, &LandscapeScan)]) -> Result<()> {
    let series: Vec<Series> = scans
        .iter()
        .map(|(label, s)| Series {
            label,
            points: s
                .lambdas
                .iter()
                .copied()
                .zip(s.losses.iter().copied())
                .collect(),
        })
        .collect();
    line_chart(
        path,
        "loss along the gradient direction",
        "lambda",
        "loss",
        &series,
    )
}

/// Bar chart of `(label, value)` pairs in `[0, 1]`; also writes `<path>.csv`.
pub fn bar_chart(path: &Path, title: &str, bars: &[(&str, f64)]) -> Result<()> {
    if bars.is_empty() {
        return Err(Error::Validation("nothing to plot".into()));
    }
    if bars.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in plot input".into()));
    }
    let top = bars.iter().map(|b| b.1).fold(1.0_f64, f64::max);
    {
        let root = SVGBackend::new(path, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let labels: Vec<String> = bars.iter().map(|b| b.0.to_string()).collect();
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..bars.len() as f64, 0.0..top * 1.05)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(bars.len() + 1)
            .x_label_formatter(&|x| {
                let i = x.floor() as usize;
                labels
                    .get(i)
                    .filter(|_| x.fract() == 0.0)
                    .cloned()
                    .unwrap_or_default()
            })
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(bars.iter().enumerate().map(|(i, (_, v))| {
                let c = PALETTE[i % PALETTE.len()];
                Rectangle::new([(i as f64 + 0.15, 0.0), (i as f64 + 0.85, *v)], c.filled())
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    let mut out = String::from("label,value\n");
    for (l, v) in bars {
        let _ = writeln!(out, "{l},{v}");
    }
    std::fs::write(path.with_extension("csv"), out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, r: f64) -> MetricsRow {
        MetricsRow {
            round: i,
            mean_reward: r,
            mean_utility: r * 0.5,
            mean_se: 1.0,
            ssr: vec![0.5, 0.5],
            real_interactions: 200 * (i as u64 + 1),
            twin_interactions: 0,
        }
    }

    #[test]
    fn writes_svg_and_exact_csv() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<MetricsRow> = (0..5).map(|i| row(i, 0.1 * i as f64)).collect();
        let b: Vec<MetricsRow> = (0..5).map(|i| row(i, 1.0 / 3.0)).collect();
        let p = dir.path().join("reward.svg");
        rounds_chart(&p, Metric::Reward, &[("dt", &a), ("baseline", &b)]).unwrap();
        let svg = std::fs::read_to_string(&p).unwrap();
        assert!(svg.starts_with("<svg"));
        let csv = std::fs::read_to_string(dir.path().join("reward.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[6], format!("baseline,200,{}", 1.0 / 3.0));
        let back: f64 = lines[6].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn empty_and_nan_inputs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.svg");
        assert!(matches!(
            rounds_chart(&p, Metric::Utility, &[]),
            Err(Error::Validation(_))
        ));
        let bad = [Series {
            label: "a",
            points: vec![(0.0, f64::NAN)],
        }];
        assert!(matches!(
            line_chart(&p, "t", "x", "y", &bad),
            Err(Error::Validation(_))
        ));
        assert!(matches!(bar_chart(&p, "t", &[]), Err(Error::Validation(_))));
    }

    #[test]
    fn bars() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("agree.svg");
        bar_chart(&p, "agreement", &[("dt", 0.93), ("baseline", 0.9)]).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("agree.csv")).unwrap();
        assert_eq!(csv, "label,value\ndt,0.93\nbaseline,0.9\n");
    }
}
