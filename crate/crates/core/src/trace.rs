//! Timed solver traces, their CSV encoding, and the JSON run summary.
//!
//! CSV columns, in order:
//!
//! ```text
//! solver,k,t_sec,fit,L,Lhat,R1,R2,R3,Ry,Rc,dx,dy,dw
//! ```
//!
//! Reals are written with 17 significant digits (`{:.16e}`); quantities a
//! solver does not define are written as `NaN`.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::madmm::Residuals;

pub const CSV_HEADER: &str = "solver,k,t_sec,fit,L,Lhat,R1,R2,R3,Ry,Rc,dx,dy,dw";
const CSV_COLUMNS: usize = 14;
const TIME_COLUMN: usize = 2;

/// One sample of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub solver: String,
    pub k: usize,
    pub t_sec: f64,
    pub fit: f64,
    pub lagrangian: f64,
    pub lyapunov: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r_y: f64,
    pub r_c: f64,
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
}

impl TraceRecord {
    /// Record with only the solver-agnostic fields set.
    pub fn basic(solver: &str, k: usize, t_sec: f64, fit: f64) -> Self {
        Self {
            solver: solver.to_owned(),
            k,
            t_sec,
            fit,
            lagrangian: f64::NAN,
            lyapunov: f64::NAN,
            r1: f64::NAN,
            r2: f64::NAN,
            r3: f64::NAN,
            r_y: f64::NAN,
            r_c: f64::NAN,
            dx: f64::NAN,
            dy: f64::NAN,
            dw: f64::NAN,
        }
    }

    pub fn set_residuals(&mut self, residuals: &Residuals) {
        let block = |i: usize| residuals.blocks.get(i).copied().unwrap_or(f64::NAN);
        self.r1 = block(0);
        self.r2 = block(1);
        self.r3 = block(2);
        self.r_y = residuals.r_y;
        self.r_c = residuals.r_c;
    }

    /// Max of the defined residual columns, NaN when none is defined.
    pub fn combined_residual(&self) -> f64 {
        [self.r1, self.r2, self.r3, self.r_y, self.r_c]
            .into_iter()
            .filter(|v| !v.is_nan())
            .fold(f64::NAN, f64::max)
    }

    pub fn to_csv_row(&self) -> String {
        let mut row = String::with_capacity(256);
        row.push_str(&self.solver);
        write!(row, ",{}", self.k).unwrap();
        for v in [
            self.t_sec,
            self.fit,
            self.lagrangian,
            self.lyapunov,
            self.r1,
            self.r2,
            self.r3,
            self.r_y,
            self.r_c,
            self.dx,
            self.dy,
            self.dw,
        ] {
            write!(row, ",{v:.16e}").unwrap();
        }
        row
    }

    pub fn from_csv_row(line: &str) -> Result<Self, TraceParseError> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
        if fields.len() != CSV_COLUMNS {
            return Err(TraceParseError::ColumnCount(fields.len()));
        }
        let real = |i: usize| -> Result<f64, TraceParseError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| TraceParseError::Field(i, fields[i].to_owned()))
        };
        Ok(Self {
            solver: fields[0].to_owned(),
            k: fields[1]
                .parse()
                .map_err(|_| TraceParseError::Field(1, fields[1].to_owned()))?,
            t_sec: real(2)?,
            fit: real(3)?,
            lagrangian: real(4)?,
            lyapunov: real(5)?,
            r1: real(6)?,
            r2: real(7)?,
            r3: real(8)?,
            r_y: real(9)?,
            r_c: real(10)?,
            dx: real(11)?,
            dy: real(12)?,
            dw: real(13)?,
        })
    }

    /// Field-wise equality where NaN matches NaN; timing ignored when asked.
    pub fn same_values(&self, other: &Self, ignore_time: bool) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        self.solver == other.solver
            && self.k == other.k
            && (ignore_time || eq(self.t_sec, other.t_sec))
            && eq(self.fit, other.fit)
            && eq(self.lagrangian, other.lagrangian)
            && eq(self.lyapunov, other.lyapunov)
            && eq(self.r1, other.r1)
            && eq(self.r2, other.r2)
            && eq(self.r3, other.r3)
            && eq(self.r_y, other.r_y)
            && eq(self.r_c, other.r_c)
            && eq(self.dx, other.dx)
            && eq(self.dy, other.dy)
            && eq(self.dw, other.dw)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error("expected 14 columns, found {0}")]
    ColumnCount(usize),
    #[error("column {0}: cannot parse {1:?}")]
    Field(usize, String),
    #[error("missing or unexpected header")]
    Header,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Budget,
}

/// Completed run of one solver.
#[derive(Debug, Clone)]
pub struct Trace {
    pub solver: String,
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Solver wall-clock seconds, excluding trace bookkeeping.
    pub elapsed_sec: f64,
    pub final_fit: f64,
    pub final_residuals: Option<Residuals>,
    pub violations: Vec<crate::madmm::Violation>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{}", r.to_csv_row())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or(TraceParseError::Header)?;
    if header.trim_end() != CSV_HEADER {
        return Err(TraceParseError::Header);
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(TraceRecord::from_csv_row(&line)?);
    }
    Ok(out)
}

/// SHA-256 of a trace CSV with the `t_sec` column removed.
pub fn checksum_without_timing(csv: &str) -> String {
    let mut hasher = Sha256::new();
    for line in csv.lines() {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .filter(|(i, _)| *i != TIME_COLUMN)
            .map(|(_, f)| f)
            .collect();
        hasher.update(kept.join(",").as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub blocks: Vec<f64>,
    pub r_y: f64,
    pub r_c: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub final_fitting_error: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub wall_clock_sec: f64,
    pub final_residuals: Option<ResidualSummary>,
    pub diagnostic_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: String,
    pub d: usize,
    pub q: usize,
    pub checksum: String,
}

/// Table of final fitting errors, one row per solver, plus the config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub data: DataSummary,
    pub config: serde_json::Value,
    pub solvers: Vec<SolverSummary>,
}

impl Summary {
    /// Copy with every wall-clock field zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.solvers {
            s.wall_clock_sec = 0.0;
            if s.stop_reason == StopReason::Budget {
                s.iterations = 0;
            }
        }
        out
    }
}

pub fn emit_summary(traces: &[Trace], data: DataSummary, config: serde_json::Value) -> Summary {
    let solvers = traces
        .iter()
        .map(|t| SolverSummary {
            solver: t.solver.clone(),
            final_fitting_error: t.final_fit,
            iterations: t.iterations,
            stop_reason: t.stop_reason,
            wall_clock_sec: t.elapsed_sec,
            final_residuals: t.final_residuals.as_ref().map(|r| ResidualSummary {
                blocks: r.blocks.clone(),
                r_y: r.r_y,
                r_c: r.r_c,
                combined: r.combined,
            }),
            diagnostic_violations: t.violations.len(),
        })
        .collect();
    Summary { data, config, solvers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(k: usize) -> TraceRecord {
        let mut r = TraceRecord::basic("madmm", k, 0.125, std::f64::consts::LN_2);
        r.lagrangian = -1.0 / 3.0;
        r.r1 = 1e-300;
        r.dx = f64::INFINITY;
        r
    }

    #[test]
    fn header_has_fixed_column_order() {
        assert_eq!(CSV_HEADER.split(',').count(), CSV_COLUMNS);
        let row = sample(3).to_csv_row();
        assert_eq!(row.split(',').count(), CSV_COLUMNS);
        assert!(row.starts_with("madmm,3,1.2500000000000000e-1,"));
    }

    #[test]
    fn csv_round_trip_through_reader() {
        let trace = Trace {
            solver: "madmm".into(),
            records: vec![sample(0), sample(1)],
            iterations: 1,
            stop_reason: StopReason::MaxIterations,
            elapsed_sec: 0.0,
            final_fit: 0.0,
            final_residuals: None,
            violations: vec![],
        };
        let text = trace.to_csv_string();
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&trace.records) {
            assert!(a.same_values(b, false));
        }
    }

    #[test]
    fn checksum_ignores_only_time() {
        let a = sample(1);
        let mut b = a.clone();
        b.t_sec = 99.0;
        let csv_a = format!("{CSV_HEADER}\n{}\n", a.to_csv_row());
        let csv_b = format!("{CSV_HEADER}\n{}\n", b.to_csv_row());
        assert_eq!(checksum_without_timing(&csv_a), checksum_without_timing(&csv_b));
        b.fit += 1e-16;
        let csv_b = format!("{CSV_HEADER}\n{}\n", b.to_csv_row());
        assert_ne!(checksum_without_timing(&csv_a), checksum_without_timing(&csv_b));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            TraceRecord::from_csv_row("madmm,1,2"),
            Err(TraceParseError::ColumnCount(3))
        ));
        assert!(read_csv("nope\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn any_finite_record_round_trips(
            k in 0usize..1_000_000,
            vals in proptest::collection::vec(proptest::num::f64::ANY, 12),
        ) {
            let mut r = TraceRecord::basic("proxlinear", k, vals[0], vals[1]);
            r.lagrangian = vals[2];
            r.lyapunov = vals[3];
            r.r1 = vals[4];
            r.r2 = vals[5];
            r.r3 = vals[6];
            r.r_y = vals[7];
            r.r_c = vals[8];
            r.dx = vals[9];
            r.dy = vals[10];
            r.dw = vals[11];
            let back = TraceRecord::from_csv_row(&r.to_csv_row()).unwrap();
            prop_assert!(back.same_values(&r, false));
        }
    }
}
