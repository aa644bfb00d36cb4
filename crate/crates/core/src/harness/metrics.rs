//! Append-only metrics files.
//!
//! `metrics.csv` starts with a `# nslice-metrics v1` line, then a CSV header.
//! Optional values are empty cells. Floats use the shortest representation
//! that parses back to the same bits, so the file round-trips losslessly.
//! Wall-clock data goes to `timing.csv` so that metrics stay reproducible.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

pub const METRICS_SCHEMA: &str = "# nslice-metrics v1";
pub const TIMING_SCHEMA: &str = "# nslice-timing v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Episode,
    Window,
    Eval,
    Final,
}

impl RecordKind {
    fn as_str(self) -> &'static str {
        match self {
            RecordKind::Episode => "episode",
            RecordKind::Window => "window",
            RecordKind::Eval => "eval",
            RecordKind::Final => "final",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "episode" => RecordKind::Episode,
            "window" => RecordKind::Window,
            "eval" => RecordKind::Eval,
            "final" => RecordKind::Final,
            _ => return Err(Error::Metrics(format!("unknown record kind {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    pub global_step: u64,
    pub episode: u64,
    pub episode_return: Option<f64>,
    pub mean_reward: Option<f64>,
    pub energy_total_w: Option<f64>,
    /// Empty when not applicable, else one entry per slice.
    pub energy_per_slice_w: Vec<f64>,
    pub cpu_utilization: Option<f64>,
    pub sinr_violations: Option<u64>,
    pub cpu_violations: Option<u64>,
    pub critic1_loss: Option<f64>,
    pub critic2_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub alpha: Option<f64>,
    pub mean_q: Option<f64>,
    pub eval_score: Option<f64>,
}

impl MetricsRecord {
    pub fn new(kind: RecordKind, global_step: u64, episode: u64) -> Self {
        Self {
            kind,
            global_step,
            episode,
            episode_return: None,
            mean_reward: None,
            energy_total_w: None,
            energy_per_slice_w: Vec::new(),
            cpu_utilization: None,
            sinr_violations: None,
            cpu_violations: None,
            critic1_loss: None,
            critic2_loss: None,
            actor_loss: None,
            alpha_loss: None,
            alpha: None,
            mean_q: None,
            eval_score: None,
        }
    }
}

const FIXED_COLUMNS: [&str; 16] = [
    "kind",
    "global_step",
    "episode",
    "episode_return",
    "mean_reward",
    "energy_total_w",
    "cpu_utilization",
    "sinr_violations",
    "cpu_violations",
    "critic1_loss",
    "critic2_loss",
    "actor_loss",
    "alpha_loss",
    "alpha",
    "mean_q",
    "eval_score",
];

pub fn metrics_header(slice_ids: &[String]) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend(slice_ids.iter().map(|id| format!("energy_w_{id}")));
    h
}

/// Shortest round-trip form, with exponents for very large or small values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn opt_count(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row(r: &MetricsRecord, n_slices: usize) -> Vec<String> {
    let mut out = vec![
        r.kind.as_str().to_string(),
        r.global_step.to_string(),
        r.episode.to_string(),
        opt(r.episode_return),
        opt(r.mean_reward),
        opt(r.energy_total_w),
        opt(r.cpu_utilization),
        opt_count(r.sinr_violations),
        opt_count(r.cpu_violations),
        opt(r.critic1_loss),
        opt(r.critic2_loss),
        opt(r.actor_loss),
        opt(r.alpha_loss),
        opt(r.alpha),
        opt(r.mean_q),
        opt(r.eval_score),
    ];
    if r.energy_per_slice_w.is_empty() {
        out.extend(std::iter::repeat_n(String::new(), n_slices));
    } else {
        out.extend(r.energy_per_slice_w.iter().copied().map(num));
    }
    out
}

pub struct MetricsWriter {
    csv: csv::Writer<BufWriter<File>>,
    n_slices: usize,
}

impl MetricsWriter {
    /// Creates the file with its schema line and header.
    pub fn create(path: &Path, slice_ids: &[String]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{METRICS_SCHEMA}")?;
        let mut csv = csv::Writer::from_writer(file);
        csv.write_record(metrics_header(slice_ids))?;
        Ok(Self { csv, n_slices: slice_ids.len() })
    }

    /// Opens an existing file for appending after a resume. Rows past
    /// `keep_through_step` (written after the checkpoint) are dropped first.
    pub fn resume(path: &Path, slice_ids: &[String], keep_through_step: u64) -> Result<Self> {
        let kept: Vec<MetricsRecord> = read_metrics(path)?
            .into_iter()
            .filter(|r| r.global_step <= keep_through_step && r.kind != RecordKind::Final)
            .collect();
        let mut w = Self::create(path, slice_ids)?;
        for r in &kept {
            w.write(r)?;
        }
        w.flush()?;
        Ok(w)
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        self.csv.write_record(row(r, self.n_slices))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}

fn parse_opt<T: std::str::FromStr>(s: &str, field: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Metrics(format!("bad value {s:?} in column {field}")))
}

fn parse_req<T: std::str::FromStr>(s: &str, field: &str) -> Result<T> {
    parse_opt(s, field)?.ok_or_else(|| Error::Metrics(format!("missing {field}")))
}

/// Parses a metrics file written by [`MetricsWriter`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next() != Some(METRICS_SCHEMA) {
        return Err(Error::Metrics(format!("{}: missing schema line", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let fixed = FIXED_COLUMNS.len();
    if header.len() < fixed || header.iter().take(fixed).ne(FIXED_COLUMNS) {
        return Err(Error::Metrics(format!("{}: unexpected header", path.display())));
    }
    let n_slices = header.len() - fixed;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| &rec[i];
        let slices: Vec<Option<f64>> =
            (0..n_slices).map(|k| parse_opt(f(fixed + k), "energy_w")).collect::<Result<_>>()?;
        out.push(MetricsRecord {
            kind: RecordKind::parse(f(0))?,
            global_step: parse_req(f(1), "global_step")?,
            episode: parse_req(f(2), "episode")?,
            episode_return: parse_opt(f(3), "episode_return")?,
            mean_reward: parse_opt(f(4), "mean_reward")?,
            energy_total_w: parse_opt(f(5), "energy_total_w")?,
            cpu_utilization: parse_opt(f(6), "cpu_utilization")?,
            sinr_violations: parse_opt(f(7), "sinr_violations")?,
            cpu_violations: parse_opt(f(8), "cpu_violations")?,
            critic1_loss: parse_opt(f(9), "critic1_loss")?,
            critic2_loss: parse_opt(f(10), "critic2_loss")?,
            actor_loss: parse_opt(f(11), "actor_loss")?,
            alpha_loss: parse_opt(f(12), "alpha_loss")?,
            alpha: parse_opt(f(13), "alpha")?,
            mean_q: parse_opt(f(14), "mean_q")?,
            eval_score: parse_opt(f(15), "eval_score")?,
            energy_per_slice_w: slices.into_iter().collect::<Option<Vec<_>>>().unwrap_or_default(),
        });
    }
    Ok(out)
}

/// One wall-clock window: seconds spent on `timing_window` training steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRecord {
    pub window: u64,
    pub end_step: u64,
    pub seconds: f64,
}

pub struct TimingWriter {
    csv: csv::Writer<BufWriter<File>>,
}

impl TimingWriter {
    pub fn open(path: &Path, append: bool) -> Result<Self> {
        let fresh = !append || !path.exists();
        let mut file = BufWriter::new(
            OpenOptions::new().create(true).write(true).append(!fresh).truncate(fresh).open(path)?,
        );
        if fresh {
            writeln!(file, "{TIMING_SCHEMA}")?;
            writeln!(file, "window,end_step,seconds")?;
        }
        Ok(Self { csv: csv::WriterBuilder::new().has_headers(false).from_writer(file) })
    }

    pub fn write(&mut self, r: &TimingRecord) -> Result<()> {
        self.csv.write_record([r.window.to_string(), r.end_step.to_string(), num(r.seconds)])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRecord>> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next() != Some(TIMING_SCHEMA) {
        return Err(Error::Metrics(format!("{}: missing schema line", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TimingRecord {
                window: parse_req(&rec[0], "window")?,
                end_step: parse_req(&rec[1], "end_step")?,
                seconds: parse_req(&rec[2], "seconds")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let ids = vec!["A".to_string(), "B".to_string()];
        let mut a = MetricsRecord::new(RecordKind::Episode, 200, 1);
        a.episode_return = Some(-1.0 / 3.0);
        a.energy_per_slice_w = vec![0.1 + 0.2, 1e-300];
        a.sinr_violations = Some(7);
        let mut b = MetricsRecord::new(RecordKind::Eval, 400, 2);
        b.eval_score = Some(f64::MIN_POSITIVE);
        b.alpha = Some(std::f64::consts::PI);
        let mut w = MetricsWriter::create(&path, &ids).unwrap();
        w.write(&a).unwrap();
        w.write(&b).unwrap();
        w.flush().unwrap();
        drop(w);
        assert_eq!(read_metrics(&path).unwrap(), vec![a.clone(), b]);
        let w = MetricsWriter::resume(&path, &ids, 200).unwrap();
        drop(w);
        assert_eq!(read_metrics(&path).unwrap(), vec![a]);
    }

    #[test]
    fn timing_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let r = TimingRecord { window: 0, end_step: 50, seconds: 0.125 };
        let mut w = TimingWriter::open(&path, false).unwrap();
        w.write(&r).unwrap();
        w.flush().unwrap();
        drop(w);
        let mut w = TimingWriter::open(&path, true).unwrap();
        w.write(&TimingRecord { window: 1, ..r }).unwrap();
        w.flush().unwrap();
        drop(w);
        assert_eq!(read_timing(&path).unwrap().len(), 2);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_metrics(&path).is_err());
    }
}
