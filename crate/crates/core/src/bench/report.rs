use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::ClassId;

/// One algorithm's result in one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub stage: u8,
    pub algorithm: String,
    pub accuracy: f64,
    pub train_time_s: f64,
    pub predict_time_s: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub workers: usize,
    pub seed: u64,
    pub env: String,
    /// Hyperparameter summary; kept out of the CSV.
    #[serde(skip)]
    pub hyperparameters: String,
    /// Evaluation predictions, kept when the plan asks for an audit trail.
    #[serde(skip)]
    pub predictions: Option<Vec<ClassId>>,
}

impl BenchRecord {
    pub fn total_time_s(&self) -> f64 {
        self.train_time_s + self.predict_time_s
    }
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "stage",
    "algorithm",
    "accuracy",
    "train_time_s",
    "predict_time_s",
    "n_train",
    "n_eval",
    "workers",
    "seed",
    "env",
];

/// How many times faster `a` is than `b` end to end.
pub fn efficiency_ratio(a: &BenchRecord, b: &BenchRecord) -> Result<f64> {
    let denom = a.total_time_s();
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{} has zero total time; ratio undefined",
            a.algorithm
        )));
    }
    Ok(b.total_time_s() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminationGate {
    /// Drop the single strictly least accurate algorithm.
    LowestAccuracy,
    /// Drop algorithms below this accuracy.
    AccuracyThreshold(f64),
    /// Drop algorithms whose train + predict time exceeds this many seconds.
    TimeBudget(f64),
    /// Drop the named algorithms regardless of their numbers.
    NamedDrop(Vec<String>),
}

impl Default for EliminationGate {
    fn default() -> Self {
        EliminationGate::LowestAccuracy
    }
}

impl std::str::FromStr for EliminationGate {
    type Err = Error;

    /// `lowest`, `threshold:<acc>`, `budget:<seconds>` or `drop:<A>,<B>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("gate {s:?}: {v:?} is not a number")))
        };
        match kind {
            "lowest" => Ok(EliminationGate::LowestAccuracy),
            "threshold" => Ok(EliminationGate::AccuracyThreshold(num(arg)?)),
            "budget" => Ok(EliminationGate::TimeBudget(num(arg)?)),
            "drop" if !arg.is_empty() => Ok(EliminationGate::NamedDrop(
                arg.split(',').map(|a| a.trim().to_string()).collect(),
            )),
            _ => Err(Error::Config(format!("unknown elimination gate {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    pub survivors: Vec<String>,
    pub dropped: Vec<String>,
    /// One line per decision naming the metric that triggered it.
    pub audit: Vec<String>,
}

/// Applies `gate` to `records`. At least one algorithm always survives.
pub fn apply_elimination(records: &[BenchRecord], gate: &EliminationGate) -> Result<Elimination> {
    if records.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "elimination needs at least 2 records, got {}",
            records.len()
        )));
    }
    let mut drop = vec![false; records.len()];
    let mut audit = Vec::new();
    match gate {
        EliminationGate::LowestAccuracy => {
            let min = records.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min);
            let lowest: Vec<usize> = (0..records.len()).filter(|&i| records[i].accuracy == min).collect();
            if lowest.len() == 1 {
                let r = &records[lowest[0]];
                drop[lowest[0]] = true;
                audit.push(format!("dropped {}: lowest accuracy {:.4}", r.algorithm, r.accuracy));
            } else {
                audit.push(format!("no drop: {} algorithms tie at lowest accuracy {min:.4}", lowest.len()));
            }
        }
        EliminationGate::AccuracyThreshold(t) => {
            for (i, r) in records.iter().enumerate() {
                if r.accuracy < *t {
                    drop[i] = true;
                    audit.push(format!("dropped {}: accuracy {:.4} < threshold {t}", r.algorithm, r.accuracy));
                }
            }
        }
        EliminationGate::TimeBudget(b) => {
            for (i, r) in records.iter().enumerate() {
                if r.total_time_s() > *b {
                    drop[i] = true;
                    audit.push(format!(
                        "dropped {}: total time {:.3}s > budget {b}s",
                        r.algorithm,
                        r.total_time_s()
                    ));
                }
            }
        }
        EliminationGate::NamedDrop(names) => {
            for (i, r) in records.iter().enumerate() {
                if names.iter().any(|n| n.eq_ignore_ascii_case(&r.algorithm)) {
                    drop[i] = true;
                    audit.push(format!("dropped {}: named in the gate", r.algorithm));
                }
            }
        }
    }
    if drop.iter().all(|&d| d) {
        let best = (0..records.len())
            .max_by(|&a, &b| {
                records[a]
                    .accuracy
                    .total_cmp(&records[b].accuracy)
                    .then(records[b].total_time_s().total_cmp(&records[a].total_time_s()))
                    .then(b.cmp(&a))
            })
            .expect("non-empty");
        drop[best] = false;
        audit.push(format!("kept {}: at least one algorithm must survive", records[best].algorithm));
    }
    let (mut survivors, mut dropped) = (Vec::new(), Vec::new());
    for (r, d) in records.iter().zip(drop) {
        if d {
            dropped.push(r.algorithm.clone());
        } else {
            survivors.push(r.algorithm.clone());
        }
    }
    Ok(Elimination {
        survivors,
        dropped,
        audit,
    })
}

/// Readable table plus efficiency ratios against the most accurate algorithm.
pub fn summarize(records: &[BenchRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<5} {:>8} {:>10} {:>10} {:>8} {:>8}  hyperparameters",
        "stage", "algo", "accuracy", "train_s", "predict_s", "n_train", "n_eval"
    );
    for r in records {
        let _ = writeln!(
            s,
            "{:<6} {:<5} {:>8.4} {:>10.3} {:>10.3} {:>8} {:>8}  {}",
            r.stage, r.algorithm, r.accuracy, r.train_time_s, r.predict_time_s, r.n_train, r.n_eval, r.hyperparameters
        );
    }
    if let Some(best) = records.iter().reduce(|a, b| if b.accuracy > a.accuracy { b } else { a }) {
        let _ = writeln!(s, "\nefficiency vs {} (most accurate): other total / its total", best.algorithm);
        for r in records.iter().filter(|r| !std::ptr::eq(*r, best)) {
            match efficiency_ratio(best, r) {
                Ok(x) => {
                    let _ = writeln!(s, "  {} / {} = {x:.2}x", r.algorithm, best.algorithm);
                }
                Err(_) => {
                    let _ = writeln!(s, "  {} / {} = undefined", r.algorithm, best.algorithm);
                }
            }
        }
    }
    let find = |name: &str| records.iter().find(|r| r.algorithm == name);
    if let (Some(rf), Some(dnn)) = (find("RF"), find("DNN")) {
        if let Ok(x) = efficiency_ratio(rf, dnn) {
            let _ = writeln!(s, "RF is {x:.2}x faster than DNN end to end");
        }
    }
    if let Some(r) = records.first() {
        let _ = writeln!(s, "workers={} env: {}", r.workers, r.env);
    }
    s
}

/// Path of the summary written next to a report CSV.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.txt")
}

/// Writes the CSV report and its summary (see [`summary_path`]).
pub fn emit_report(records: &[BenchRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty("report needs at least one record".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let sp = summary_path(path);
    std::fs::write(&sp, summarize(records)).map_err(|e| Error::io(&sp, e))
}

pub fn load_report(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header != REPORT_COLUMNS {
        return Err(Error::format(path, format!("unexpected columns {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}
