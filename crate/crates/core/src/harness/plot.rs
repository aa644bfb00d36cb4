use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::config::RunConfig;
use super::metrics::{read_metrics, read_timing, RecordKind};
use super::trainer::{CONFIG_FILE, METRICS_FILE, TIMING_FILE};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Evaluation score against environment steps.
    Return,
    /// Mean network energy per episode.
    Energy,
    /// Mean energy per slice per episode.
    EnergyPerSlice,
    /// Mean CPU utilization per episode.
    Cpu,
    /// Seconds per timing window.
    Wallclock,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "return" => PlotKind::Return,
            "energy" => PlotKind::Energy,
            "energy_per_slice" => PlotKind::EnergyPerSlice,
            "cpu" => PlotKind::Cpu,
            "wallclock" => PlotKind::Wallclock,
            _ => return Err(Error::Config(format!("unknown plot kind {s:?}"))),
        })
    }
}

impl PlotKind {
    fn y_label(self) -> &'static str {
        match self {
            PlotKind::Return => "evaluation return",
            PlotKind::Energy => "energy (W)",
            PlotKind::EnergyPerSlice => "energy per slice (W)",
            PlotKind::Cpu => "CPU utilization",
            PlotKind::Wallclock => "seconds per window",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlotOptions {
    /// Trailing moving-average window; 1 plots the raw series.
    pub smoothing: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { smoothing: 1, width: 900, height: 540 }
    }
}

/// One plotted line: the mean over runs and its ±1 standard deviation band.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut acc = 0.0;
    y.iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            if i >= w {
                acc -= y[i - w];
            }
            acc / (i + 1).min(w) as f64
        })
        .collect()
}

/// Linear interpolation of `(x, y)` onto `grid`, clamped at the ends.
pub fn resample(x: &[f64], y: &[f64], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&g| {
            let k = x.partition_point(|&v| v < g);
            if k == 0 {
                y[0]
            } else if k == x.len() {
                y[x.len() - 1]
            } else {
                let t = (g - x[k - 1]) / (x[k] - x[k - 1]);
                y[k - 1] + t * (y[k] - y[k - 1])
            }
        })
        .collect()
}

type Curve = (Vec<f64>, Vec<f64>);

fn run_curves(dir: &Path, kind: PlotKind) -> Result<(String, Vec<(String, Curve)>)> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let algo = cfg.algorithm.to_string();
    if kind == PlotKind::Wallclock {
        let t = read_timing(&dir.join(TIMING_FILE))?;
        let x = t.iter().map(|r| r.end_step as f64).collect();
        let y = t.iter().map(|r| r.seconds).collect();
        return Ok((algo.clone(), vec![(algo, (x, y))]));
    }
    let recs = read_metrics(&dir.join(METRICS_FILE))?;
    let pick = |want: RecordKind| recs.iter().filter(move |r| r.kind == want);
    let curve = |f: &dyn Fn(&super::metrics::MetricsRecord) -> Option<f64>, want| {
        let pts: Vec<(f64, f64)> =
            pick(want).filter_map(|r| f(r).map(|v| (r.global_step as f64, v))).collect();
        (pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())
    };
    let curves = match kind {
        PlotKind::Return => vec![(algo.clone(), curve(&|r| r.eval_score, RecordKind::Eval))],
        PlotKind::Energy => vec![(algo.clone(), curve(&|r| r.energy_total_w, RecordKind::Episode))],
        PlotKind::Cpu => vec![(algo.clone(), curve(&|r| r.cpu_utilization, RecordKind::Episode))],
        PlotKind::EnergyPerSlice => cfg
            .env
            .slices
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let c = curve(&|r| r.energy_per_slice_w.get(k).copied(), RecordKind::Episode);
                (format!("{algo} slice {}", s.id), c)
            })
            .collect(),
        PlotKind::Wallclock => unreachable!(),
    };
    Ok((algo, curves))
}

/// Aggregates runs into mean/std series per label.
pub fn collect_series(run_dirs: &[PathBuf], kind: PlotKind, smoothing: usize) -> Result<Vec<Series>> {
    if run_dirs.is_empty() {
        return Err(Error::Config("no runs to plot".into()));
    }
    let mut groups: BTreeMap<String, Vec<Curve>> = BTreeMap::new();
    for dir in run_dirs {
        let (_, curves) = run_curves(dir, kind)?;
        for (label, (x, y)) in curves {
            if x.is_empty() {
                log::warn!("{}: no data for {label}", dir.display());
                continue;
            }
            groups.entry(label).or_default().push((x, moving_average(&y, smoothing)));
        }
    }
    let mut out = Vec::new();
    for (label, runs) in groups {
        let coarsest = runs.iter().min_by_key(|(x, _)| x.len()).expect("group is non-empty").0.clone();
        let ys: Vec<Vec<f64>> = runs
            .iter()
            .map(|(x, y)| {
                if *x == coarsest {
                    y.clone()
                } else {
                    log::warn!("{label}: step grids differ across runs; resampling to the coarsest");
                    resample(x, y, &coarsest)
                }
            })
            .collect();
        let n = ys.len() as f64;
        let mean: Vec<f64> = (0..coarsest.len()).map(|i| ys.iter().map(|y| y[i]).sum::<f64>() / n).collect();
        let std = (0..coarsest.len())
            .map(|i| (ys.iter().map(|y| (y[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        out.push(Series { label, x: coarsest, mean, std });
    }
    if out.is_empty() {
        return Err(Error::Metrics("runs contain no data for this plot".into()));
    }
    Ok(out)
}

fn draw(series: &[Series], kind: PlotKind, out: &Path, opts: &PlotOptions) -> Result<()> {
    let err = |e: &dyn std::fmt::Display| Error::Metrics(format!("plot: {e}"));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for s in series {
        for i in 0..s.x.len() {
            x0 = x0.min(s.x[i]);
            x1 = x1.max(s.x[i]);
            y0 = y0.min(s.mean[i] - s.std[i]);
            y1 = y1.max(s.mean[i] + s.std[i]);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.5 * y0.abs().max(1.0) };
    let root = SVGBackend::new(out, (opts.width, opts.height)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("environment step")
        .y_desc(kind.y_label())
        .draw()
        .map_err(|e| err(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let mut band: Vec<(f64, f64)> = s.x.iter().zip(&s.mean).zip(&s.std).map(|((x, m), d)| (*x, m + d)).collect();
        band.extend(s.x.iter().zip(&s.mean).zip(&s.std).rev().map(|((x, m), d)| (*x, m - d)));
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled()))).map_err(|e| err(&e))?;
        chart
            .draw_series(LineSeries::new(s.x.iter().copied().zip(s.mean.iter().copied()), color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

fn write_sidecar(series: &[Series], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "mean", "std"])?;
    for s in series {
        for i in 0..s.x.len() {
            w.write_record([s.label.clone(), format!("{:?}", s.x[i]), format!("{:?}", s.mean[i]), format!("{:?}", s.std[i])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `out` (SVG) and a `.csv` sidecar with the plotted numbers.
pub fn plot_runs(run_dirs: &[PathBuf], kind: PlotKind, out: &Path, opts: &PlotOptions) -> Result<Vec<Series>> {
    let series = collect_series(run_dirs, kind, opts.smoothing)?;
    draw(&series, kind, out, opts)?;
    write_sidecar(&series, &out.with_extension("csv"))?;
    Ok(series)
}
