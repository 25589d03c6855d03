//! Restartable phase sweeps: rows are appended to the CSV in job-key order,
//! and a rerun skips every key already present in the file.

use crate::CliError;
use lrl1::classify::{summarize, CellSummary, Classification, JobKey, PhaseRow, SolutionKind, SweepConfig};
use lrl1::optimizer::fmt_f64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

pub const HEADER: &str =
    "grid_index,kind_index,trial,grid_value,m,solution_kind,seed,status,classification,alpha,first_order_min,best_delta_at_gamma_max";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: JobKey,
    pub grid_value: f64,
    pub m: usize,
    pub kind: SolutionKind,
    pub seed: u64,
    /// "ok" or "error: ...".
    pub status: String,
    pub classification: Option<Classification>,
    pub alpha: Option<f64>,
    pub first_order_min: f64,
    pub best_delta: f64,
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.key.grid_index,
            self.key.kind_index,
            self.key.trial,
            fmt_f64(self.grid_value),
            self.m,
            self.kind.name(),
            self.seed,
            self.status.replace([',', '\n'], ";"),
            self.classification.map_or("", |c| c.name()),
            self.alpha.map_or(String::new(), fmt_f64),
            fmt_f64(self.first_order_min),
            fmt_f64(self.best_delta),
        )
    }

    fn from_csv(line: &str) -> Option<Row> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return None;
        }
        let opt = |s: &str| if s.is_empty() { Some(None) } else { s.parse().ok().map(Some) };
        Some(Row {
            key: JobKey { grid_index: f[0].parse().ok()?, kind_index: f[1].parse().ok()?, trial: f[2].parse().ok()? },
            grid_value: f[3].parse().ok()?,
            m: f[4].parse().ok()?,
            kind: f[5].parse().ok()?,
            seed: f[6].parse().ok()?,
            status: f[7].to_string(),
            classification: if f[8].is_empty() { None } else { Some(f[8].parse().ok()?) },
            alpha: opt(f[9])?,
            first_order_min: f[10].parse().ok()?,
            best_delta: f[11].parse().ok()?,
        })
    }

    pub fn phase_row(&self) -> Option<PhaseRow> {
        Some(PhaseRow {
            key: self.key,
            m: self.m,
            kind: self.kind,
            seed: self.seed,
            classification: self.classification?,
            alpha: self.alpha,
            first_order_min: self.first_order_min,
            best_delta_max: self.best_delta,
        })
    }
}

fn run_one(cfg: &SweepConfig, key: &JobKey) -> Row {
    let kind = cfg.kinds[key.kind_index];
    let grid_value = cfg.grid[key.grid_index];
    let seed = cfg.job_seed(key);
    match cfg.run_job(key) {
        Ok((r, _)) => Row {
            key: *key,
            grid_value,
            m: r.m,
            kind,
            seed,
            status: "ok".into(),
            classification: Some(r.classification),
            alpha: r.alpha,
            first_order_min: r.first_order_min,
            best_delta: r.best_delta_max,
        },
        Err(e) => Row {
            key: *key,
            grid_value,
            m: cfg.spec_at(key.grid_index).m,
            kind,
            seed,
            status: format!("error: {e}"),
            classification: None,
            alpha: None,
            first_order_min: f64::NAN,
            best_delta: f64::NAN,
        },
    }
}

/// Reads complete rows from an earlier run, truncating any partial tail.
fn resume(path: &Path) -> Result<Vec<Row>, CliError> {
    let Ok(text) = fs::read_to_string(path) else { return Ok(Vec::new()) };
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        None => return Ok(Vec::new()),
        Some(h) if h.trim_end() == HEADER => {}
        Some(_) => return Err(CliError::Usage(format!("{} exists with a different header", path.display()))),
    }
    let mut rows = Vec::new();
    for line in lines {
        match line.strip_suffix('\n').and_then(Row::from_csv) {
            Some(r) => rows.push(r),
            None => break,
        }
    }
    let mut clean = String::from(HEADER);
    clean.push('\n');
    for r in &rows {
        clean.push_str(&r.to_csv());
        clean.push('\n');
    }
    if clean != text {
        fs::write(path, clean).map_err(CliError::io(path))?;
    }
    Ok(rows)
}

/// Runs the missing jobs of `cfg`, appending to `dir/phase.csv`.
pub fn run(cfg: &SweepConfig, dir: &Path, pool: &rayon::ThreadPool) -> Result<Vec<Row>, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let path = dir.join("phase.csv");
    let mut done: BTreeMap<JobKey, Row> = resume(&path)?.into_iter().map(|r| (r.key, r)).collect();
    if done.is_empty() {
        fs::write(&path, format!("{HEADER}\n")).map_err(CliError::io(&path))?;
    }
    let all = cfg.jobs();
    if let Some(bad) = done.keys().find(|k| !all.contains(k)) {
        return Err(CliError::Usage(format!("{} holds job {bad:?} outside this sweep", path.display())));
    }
    let pending: Vec<JobKey> = all.iter().filter(|k| !done.contains_key(k)).copied().collect();
    let batch = pool.current_num_threads().max(1) * 2;
    for chunk in pending.chunks(batch) {
        let rows: Vec<Row> = pool.install(|| chunk.par_iter().map(|k| run_one(cfg, k)).collect());
        let mut f = OpenOptions::new().append(true).open(&path).map_err(CliError::io(&path))?;
        let mut text = String::new();
        for r in &rows {
            text.push_str(&r.to_csv());
            text.push('\n');
        }
        f.write_all(text.as_bytes()).map_err(CliError::io(&path))?;
        for r in rows {
            done.insert(r.key, r);
        }
    }
    // A resumed file may hold keys in a different order; rewrite sorted.
    let rows: Vec<Row> = done.into_values().collect();
    let mut text = format!("{HEADER}\n");
    for r in &rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    if fs::read_to_string(&path).map_err(CliError::io(&path))? != text {
        fs::write(&path, text).map_err(CliError::io(&path))?;
    }
    Ok(rows)
}

pub fn cells(cfg: &SweepConfig, rows: &[Row]) -> Vec<CellSummary> {
    let ok: Vec<PhaseRow> = rows.iter().filter_map(Row::phase_row).collect();
    summarize(cfg, &ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let r = Row {
            key: JobKey { grid_index: 1, kind_index: 0, trial: 3 },
            grid_value: 120.0,
            m: 120,
            kind: SolutionKind::Imbalanced,
            seed: 42,
            status: "ok".into(),
            classification: Some(Classification::NonCritical),
            alpha: Some(1.0000000000000002),
            first_order_min: -0.1,
            best_delta: f64::INFINITY,
        };
        assert_eq!(Row::from_csv(&r.to_csv()), Some(r.clone()));
        let e = Row { status: "error: x".into(), classification: None, alpha: None, ..r };
        assert_eq!(Row::from_csv(&e.to_csv()), Some(e));
        assert_eq!(Row::from_csv("1,2,3"), None);
    }
}
