//! Result files.
//!
//! Floats in CSV files are written with 17 significant digits, so identical
//! results give byte-identical files. Trajectories are JSON lines of the form
//! `{"source": "truth", "id": 0, "start": 1, "states": [[x, vx, y, vy], ...]}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use phdpmb_core::metrics::GospaResult;
use phdpmb_core::{Trajectory, Vector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::campaign::CampaignResult;
use crate::HarnessError;

pub const GOSPA_TIMESERIES: &str = "gospa_timeseries.csv";
pub const TGOSPA_SUMMARY: &str = "tgospa_summary.csv";
pub const SUMMARY: &str = "summary.json";
pub const TRAJECTORIES_RUN0: &str = "trajectories_run0.jsonl";

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(io_error(path))
}

/// One trajectory line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub source: String,
    pub id: usize,
    pub start: usize,
    pub states: Vec<Vec<f64>>,
}

pub fn write_trajectories<const N: usize>(
    out: &mut impl Write,
    source: &str,
    trajectories: &[Trajectory<N>],
) -> std::io::Result<()> {
    for (id, t) in trajectories.iter().enumerate() {
        let line = TrajectoryLine {
            source: source.to_string(),
            id,
            start: t.start,
            states: t.states.iter().map(|x| x.iter().copied().collect()).collect(),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the trajectories of a JSON-lines file whose source tag is `source`.
pub fn read_trajectories<const N: usize>(path: &Path, source: &str) -> Result<Vec<Trajectory<N>>, HarnessError> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrajectoryLine = serde_json::from_str(&line).map_err(|e| HarnessError::Json { path: path.into(), source: e })?;
        if t.source != source {
            continue;
        }
        let states = t
            .states
            .iter()
            .map(|s| {
                (s.len() == N).then(|| Vector::<N>::from_column_slice(s)).ok_or_else(|| HarnessError::Io {
                    path: path.into(),
                    source: std::io::Error::other(format!("state of dimension {} where {N} was expected", s.len())),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Trajectory::new(t.start, states)?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| HarnessError::Json { path: path.into(), source: e })?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(io_error(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let file = File::open(path).map_err(io_error(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| HarnessError::Json { path: path.into(), source: e })
}

fn gospa_fields(g: &GospaResult) -> [String; 4] {
    [float(g.total), float(g.localization), float(g.missed), float(g.false_det)]
}

/// Writes the four result files into `dir`, creating it if needed, and
/// returns their paths.
pub fn emit_outputs(result: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;

    let path = dir.join(GOSPA_TIMESERIES);
    let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
    w.write_record(["method", "run", "k", "total", "localization", "missed", "false"]).map_err(csv_error(&path))?;
    for r in &result.runs {
        for (method, series) in [("phd", &r.phd), ("hybrid", &r.hybrid)] {
            for (i, g) in series.iter().enumerate() {
                let [t, l, m, f] = gospa_fields(g);
                w.write_record([method, &r.run.to_string(), &(i + 1).to_string(), &t, &l, &m, &f])
                    .map_err(csv_error(&path))?;
            }
        }
    }
    w.flush().map_err(io_error(&path))?;
    let timeseries = path;

    let path = dir.join(TGOSPA_SUMMARY);
    let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
    w.write_record(["method", "run", "total", "localization", "missed", "false", "switch"]).map_err(csv_error(&path))?;
    for r in &result.runs {
        let t = &r.tgospa;
        w.write_record([
            "hybrid",
            &r.run.to_string(),
            &float(t.total),
            &float(t.localization),
            &float(t.missed),
            &float(t.false_det),
            &float(t.switch),
        ])
        .map_err(csv_error(&path))?;
    }
    w.flush().map_err(io_error(&path))?;
    let tgospa = path;

    let summary = dir.join(SUMMARY);
    write_json(&summary, &result.summary())?;

    let path = dir.join(TRAJECTORIES_RUN0);
    let mut out = create(&path)?;
    if let Some(r) = result.runs.iter().find(|r| r.run == 0) {
        write_trajectories(&mut out, "truth", &r.truth).map_err(io_error(&path))?;
        write_trajectories(&mut out, "estimate", &r.estimate).map_err(io_error(&path))?;
    }
    out.flush().map_err(io_error(&path))?;

    Ok(vec![timeseries, tgospa, summary, path])
}
