//! File layout of experiment outputs:
//!
//! ```text
//! <out>/<scenario_hash>/experiment.json
//! <out>/<scenario_hash>/r<i>/{census.csv, moments.json, distances.csv, summary.json}
//! <out>/<scenario_hash>/r<i>/{points.csv, edges.csv}    (sample only)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{RcmError, Result};
use crate::experiments::runner::{Experiment, ExperimentResult, Predictions, Provenance, RungRecord, RungTables};

/// Seventeen significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RcmError + '_ {
    move |source| RcmError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RcmError + '_ {
    move |e| RcmError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[derive(Serialize)]
struct MomentsDoc<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    rung: usize,
    predictions: &'a Predictions,
}

fn emit_rung(dir: &Path, result: &ExperimentResult, rung: &RungRecord, tables: &RungTables) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let labels: Vec<String> = result.scenario.statistics.iter().map(|s| s.label()).collect();

    let census = dir.join("census.csv");
    write_csv(
        &census,
        &strings(&["replicate", "seed", "statistic", "value", "points_in_window"]),
        tables.rows.iter().flat_map(|r| {
            labels.iter().zip(&r.values).map(move |(l, v)| {
                vec![
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    l.clone(),
                    num(*v),
                    r.points_in_window.to_string(),
                ]
            })
        }),
    )?;

    let distances = dir.join("distances.csv");
    write_csv(
        &distances,
        &strings(&["statistic", "source", "mean", "sd", "kolmogorov", "wasserstein"]),
        rung.distances.iter().map(|d| {
            vec![
                d.label.clone(),
                serde_json::to_value(d.standardization.source)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                num(d.standardization.mean),
                num(d.standardization.sd),
                num(d.kolmogorov),
                num(d.wasserstein),
            ]
        }),
    )?;

    write_json(
        &dir.join("moments.json"),
        &MomentsDoc {
            provenance: &result.provenance,
            rung: rung.index,
            predictions: &result.predictions,
        },
    )?;
    write_json(&dir.join("summary.json"), rung)?;

    if let Some(sample) = &tables.sample {
        let pts = sample.graph.points();
        let dim = pts.dim();
        let mut header = vec!["index".to_string(), "id".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("in_window".into());
        let path = dir.join("points.csv");
        write_csv(
            &path,
            &header,
            (0..pts.len()).map(|i| {
                let p = pts.point(i);
                let mut row = vec![i.to_string(), pts.id(i).to_string()];
                row.extend(p.iter().map(|c| num(*c)));
                row.push(u8::from(sample.window.contains(p)).to_string());
                row
            }),
        )?;
        let path = dir.join("edges.csv");
        let psi = sample.psi_edges.as_deref().unwrap_or(&[]);
        let mut edges: Vec<(usize, usize, &str)> = sample.graph.edges().map(|(a, b)| (a, b, "phi")).collect();
        edges.extend(psi.iter().map(|&(a, b)| (a, b, "psi")));
        write_csv(
            &path,
            &strings(&["source", "target", "graph"]),
            edges.into_iter().map(|(a, b, g)| vec![a.to_string(), b.to_string(), g.to_string()]),
        )?;
    }
    Ok(())
}

/// Writes every file of the experiment under `out` and returns the
/// scenario directory.
pub fn emit(experiment: &Experiment, out: &Path) -> Result<PathBuf> {
    let result = &experiment.result;
    let root = out.join(&result.provenance.scenario_hash);
    fs::create_dir_all(&root).map_err(io(&root))?;
    for (rung, tables) in result.rungs.iter().zip(&experiment.tables) {
        emit_rung(&root.join(rung.dir_name()), result, rung, tables)?;
    }
    write_json(&root.join("experiment.json"), result)?;
    Ok(root)
}

pub fn load_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| RcmError::config(path.display().to_string(), e.to_string()))
}

pub fn load_rung(path: &Path) -> Result<RungRecord> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| RcmError::config(path.display().to_string(), e.to_string()))
}
