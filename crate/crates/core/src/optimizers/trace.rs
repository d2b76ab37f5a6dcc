use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "t,epoch,objective,duality_gap,seconds,grad_evals,batch_size";

/// One row of a trace. `batch_size` is the batch that produced `x_t`
/// (zero at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub epoch: f64,
    pub objective: f64,
    pub duality_gap: f64,
    pub seconds: f64,
    pub grad_evals: u64,
    pub batch_size: usize,
}

/// Invariant counters collected during a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub iterations: usize,
    /// Outer iterations ran through the inner solver.
    pub inner_loops: usize,
    pub inner_steps: usize,
    /// Inner steps where the model value rose by more than the tolerance.
    pub monotonicity_violations: usize,
    pub max_model_increase: f64,
    /// Outer steps longer than `K·D·γ_t`.
    pub displacement_violations: usize,
    /// Largest `‖x_{t+1} − x_t‖₂ / (K·D·γ_t)` seen.
    pub max_displacement_ratio: f64,
    pub feasibility_violations: usize,
    /// Decreases of the AdaGrad sum or the AMSGrad running maximum.
    pub metric_violations: usize,
    pub max_csfw_drift: Option<f64>,
}

impl RunDiagnostics {
    pub fn total_violations(&self) -> usize {
        self.monotonicity_violations
            + self.displacement_violations
            + self.feasibility_violations
            + self.metric_violations
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
    pub final_point: Vec<f64>,
    /// Every iterate, when requested by the config.
    pub iterates: Vec<Vec<f64>>,
    pub diagnostics: RunDiagnostics,
}

impl OptimizerTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.duality_gap).collect()
    }

    /// Best duality gap among records up to each position.
    pub fn best_gap_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.duality_gap);
                best
            })
            .collect()
    }

    pub fn best_gap(&self) -> Option<f64> {
        self.records.iter().map(|r| r.duality_gap).reduce(f64::min)
    }

    /// Gap of a record drawn uniformly from the first `upto + 1` records.
    pub fn sampled_gap(&self, upto: usize, seed: u64) -> Result<f64> {
        let idx = sample_uniform_iterate(self.records.len(), upto, seed)?;
        Ok(self.records[idx].duality_gap)
    }

    /// First record whose epoch reaches `epoch`, else the last one.
    pub fn at_epoch(&self, epoch: f64) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.epoch >= epoch).or(self.records.last())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(&self.records, out)
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_atomic(path, &buf)
    }

    /// Records equal apart from the timing column.
    pub fn same_ignoring_time(&self, other: &OptimizerTrace) -> bool {
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| TraceRecord { seconds: 0.0, ..*a } == TraceRecord { seconds: 0.0, ..*b })
    }
}

pub fn write_records<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        // `{}` prints the shortest string that parses back to the same f64
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.epoch, r.objective, r.duality_gap, r.seconds, r.grad_evals, r.batch_size
        )?;
    }
    Ok(())
}

pub fn read_records<R: Read>(input: R, origin: &Path) -> Result<Vec<TraceRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != TRACE_HEADER {
                return Err(parse_err(lineno, format!("expected header {TRACE_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(lineno, format!("expected 7 fields, found {}", fields.len())));
        }
        let float = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("field {}: {e}", k + 1)))
        };
        let int = |k: usize| {
            fields[k]
                .parse::<u64>()
                .map_err(|e| parse_err(lineno, format!("field {}: {e}", k + 1)))
        };
        records.push(TraceRecord {
            t: int(0)? as usize,
            epoch: float(1)?,
            objective: float(2)?,
            duality_gap: float(3)?,
            seconds: float(4)?,
            grad_evals: int(5)?,
            batch_size: int(6)? as usize,
        });
    }
    if records.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(parse_err(0, "iterations must be strictly increasing".into()));
    }
    Ok(records)
}

pub fn read_trace_csv(path: &Path) -> Result<OptimizerTrace> {
    let file = std::fs::File::open(path)?;
    Ok(OptimizerTrace {
        records: read_records(file, path)?,
        ..Default::default()
    })
}

/// Write-temp-then-rename in the target directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Index drawn uniformly from `0..=t`, as used to report the gap of a
/// randomly chosen iterate.
pub fn sample_uniform_iterate(len: usize, t: usize, seed: u64) -> Result<usize> {
    if len == 0 {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    if t >= len {
        return Err(Error::IndexOutOfRange { index: t, len });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rng.random_range(0..=t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> OptimizerTrace {
        OptimizerTrace {
            records: (0..5)
                .map(|t| TraceRecord {
                    t: t * 3,
                    epoch: t as f64 / 3.0,
                    objective: 1.0 / (t as f64 + 1.0),
                    duality_gap: 0.1f64.powi(t as i32) + 1e-300,
                    seconds: 0.0,
                    grad_evals: 7 * t as u64,
                    batch_size: t,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
        let back = read_records(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, trace.records);
    }

    #[test]
    fn atomic_write_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/trace.csv");
        let trace = sample_trace();
        trace.write_csv_file(&path).unwrap();
        assert_eq!(read_trace_csv(&path).unwrap().records, trace.records);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = format!("{TRACE_HEADER}\n0,0,1,1,0,0,0\n1,0,x,1,0,0,0\n");
        match read_records(text.as_bytes(), Path::new("t.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_records("a,b\n".as_bytes(), Path::new("t.csv")).is_err());
    }

    #[test]
    fn uniform_iterate() {
        assert_eq!(sample_uniform_iterate(10, 0, 3).unwrap(), 0);
        assert_eq!(
            sample_uniform_iterate(10, 9, 3).unwrap(),
            sample_uniform_iterate(10, 9, 3).unwrap()
        );
        assert!(sample_uniform_iterate(0, 0, 0).is_err());
        assert!(sample_uniform_iterate(3, 3, 0).is_err());
    }

    #[test]
    fn best_gap_tracks_minimum() {
        let mut trace = sample_trace();
        trace.records[2].duality_gap = 5.0;
        let best = trace.best_gap_so_far();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(trace.best_gap(), Some(*best.last().unwrap()));
    }
}
