//! Trace files: CSV with one row per sample, or JSON with the scenario embedded.
//!
//! Columns are `t, x1..n, v1..n, y1..n, xhat1_1..n, zstar_1..n, M_11..M_nn,
//! xhat_1..n, ahat_1..n, err_xz, err_x, err_a`. Numbers are written with 17
//! significant digits so reading a file back reproduces every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use bearing_core::observer::{dual_output, dual_velocity};
use bearing_core::{
    DirectionVector, Gains, Matrix, NoiseSpec, ObserverMode, ObserverOutput, ObserverState,
    Scenario, SimFailure, SimulationTrace, TraceSample, Trajectory, Vector,
};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::CliError;

/// Column names for dimension `n`.
pub fn header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let block = |cols: &mut Vec<String>, f: &dyn Fn(usize) -> String| cols.extend((1..=n).map(f));
    block(&mut cols, &|i| format!("x{i}"));
    block(&mut cols, &|i| format!("v{i}"));
    block(&mut cols, &|i| format!("y{i}"));
    block(&mut cols, &|i| format!("xhat1_{i}"));
    block(&mut cols, &|i| format!("zstar_{i}"));
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("M_{i}{j}"));
        }
    }
    block(&mut cols, &|i| format!("xhat_{i}"));
    block(&mut cols, &|i| format!("ahat_{i}"));
    cols.extend(["err_xz", "err_x", "err_a"].map(String::from));
    cols
}

/// `1 + 7n + n² + 3`
pub fn column_count(n: usize) -> usize {
    1 + 7 * n + n * n + 3
}

fn dimension_for(cols: usize) -> Option<usize> {
    (2..=64).find(|&n| column_count(n) == cols)
}

fn row(s: &TraceSample<f64>) -> Vec<f64> {
    let mut r = Vec::with_capacity(column_count(s.x_true.dim()));
    r.push(s.t);
    r.extend_from_slice(s.x_true.as_slice());
    r.extend_from_slice(s.v_meas.as_slice());
    r.extend_from_slice(s.y.as_slice());
    r.extend_from_slice(s.state.x_hat_1.as_slice());
    r.extend_from_slice(s.state.z_hat_star.as_slice());
    r.extend_from_slice(s.state.m.as_slice());
    r.extend_from_slice(s.output.x_hat.as_slice());
    r.extend_from_slice(s.output.a_hat.as_slice());
    r.extend([s.err_xz, s.err_x, s.err_a]);
    r
}

/// Rows of numbers with a known dimension, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Borrowed view of one row.
struct RowView<'a> {
    n: usize,
    r: &'a [f64],
}

impl RowView<'_> {
    fn block(&self, k: usize) -> Vector<f64> {
        Vector::from_slice(&self.r[1 + k * self.n..1 + (k + 1) * self.n])
    }
    fn t(&self) -> f64 {
        self.r[0]
    }
    fn x(&self) -> Vector<f64> {
        self.block(0)
    }
    fn v(&self) -> Vector<f64> {
        self.block(1)
    }
    fn y(&self) -> Vector<f64> {
        self.block(2)
    }
    fn x_hat_1(&self) -> Vector<f64> {
        self.block(3)
    }
    fn z_hat_star(&self) -> Vector<f64> {
        self.block(4)
    }
    fn m(&self) -> Matrix<f64> {
        let off = 1 + 5 * self.n;
        Matrix::from_row_major(self.r[off..off + self.n * self.n].to_vec())
            .expect("row width checked")
    }
    fn tail(&self, k: usize) -> Vector<f64> {
        let off = 1 + 5 * self.n + self.n * self.n + k * self.n;
        Vector::from_slice(&self.r[off..off + self.n])
    }
    fn err(&self, k: usize) -> f64 {
        self.r[self.r.len() - 3 + k]
    }
}

impl TraceTable {
    pub fn from_trace(trace: &SimulationTrace<f64>) -> Self {
        Self {
            n: trace.dim(),
            rows: trace.samples.iter().map(row).collect(),
        }
    }

    fn view(&self, i: usize) -> RowView<'_> {
        RowView {
            n: self.n,
            r: &self.rows[i],
        }
    }

    /// Sample spacing; every timestamp must sit on `i·h` (relative 1e-9).
    pub fn step(&self) -> Result<f64, CliError> {
        if self.rows.len() < 2 {
            return Err(CliError::Input("trace needs at least two samples".into()));
        }
        if self.rows[0][0] != 0.0 {
            return Err(CliError::Input(format!(
                "trace must start at t = 0, got {}",
                self.rows[0][0]
            )));
        }
        let h = self.rows[1][0];
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Input(format!("invalid time step {h}")));
        }
        for (i, r) in self.rows.iter().enumerate() {
            let expect = i as f64 * h;
            if (r[0] - expect).abs() > 1e-9 * expect.max(1.0) {
                return Err(CliError::Input(format!(
                    "row {} has t = {}, expected {expect}",
                    i + 1,
                    r[0]
                )));
            }
        }
        Ok(h)
    }

    /// Rebuilds a simulation trace under `scenario` (which supplies `a_true`, gains and mode).
    pub fn into_trace(&self, scenario: &Scenario<f64>) -> Result<SimulationTrace<f64>, CliError> {
        if scenario.n != self.n {
            return Err(CliError::Input(format!(
                "trace has dimension {}, config has {}",
                self.n, scenario.n
            )));
        }
        let mut samples = Vec::with_capacity(self.rows.len());
        for i in 0..self.rows.len() {
            let r = self.view(i);
            let y = DirectionVector::new(r.y())
                .map_err(|e| CliError::Input(format!("row {}: bearing: {e}", i + 1)))?;
            let state = ObserverState {
                x_hat_1: r.x_hat_1(),
                m: r.m(),
                z_hat_star: r.z_hat_star(),
                t: r.t(),
            };
            let v = r.v();
            // dual quantities are not stored; a singular M leaves them at y and v
            let (y_star, v_star) = match (
                dual_output(&state.m, &y),
                dual_velocity(&state.m, &v, &state.x_hat_1),
            ) {
                (Ok(ys), Ok(vs)) if scenario.mode == ObserverMode::Cascade => (ys, vs),
                _ => (y.clone(), v.clone()),
            };
            samples.push(TraceSample {
                t: r.t(),
                x_true: r.x(),
                v_meas: v,
                y,
                output: ObserverOutput {
                    x_hat: r.tail(0),
                    a_hat: r.tail(1),
                    y_star,
                    v_star,
                },
                state,
                err_xz: r.err(0),
                err_x: r.err(1),
                err_a: r.err(2),
            });
        }
        let mut scenario = scenario.clone();
        scenario.duration = samples.last().map_or(0.0, |s| s.t);
        Ok(SimulationTrace {
            scenario,
            samples,
            failure: None,
        })
    }

    /// Infers the scenario behind a bare CSV trace.
    ///
    /// The mode is `basic_filter` when `M`, `ẑ⋆` and `â` never move. `k` is the
    /// least-squares fit of `M' = I − kπ_y M` (or of the basic filter when `M` is
    /// constant), using one-step differences with `y` and `v` held as the observer
    /// holds them. `a` is the mean of `(x_{i+1} − x_i)/h − v_i`.
    pub fn estimate_scenario(&self) -> Result<Scenario<f64>, CliError> {
        let h = self.step()?;
        let n = self.n;
        let count = self.rows.len();
        let first = self.view(0);
        let m_moves = (1..count).any(|i| self.view(i).m() != first.m());
        let z_moves = (0..count).any(|i| self.view(i).z_hat_star().norm_inf() != 0.0);
        let mode = if m_moves || z_moves {
            ObserverMode::Cascade
        } else {
            ObserverMode::BasicFilter
        };

        let mut num = 0.0;
        let mut den = 0.0;
        let mut a = Vector::zeros(n);
        for i in 0..count - 1 {
            let (r0, r1) = (self.view(i), self.view(i + 1));
            let y = DirectionVector::new(r0.y())
                .map_err(|e| CliError::Input(format!("row {}: bearing: {e}", i + 1)))?;
            let p = y.projector();
            if m_moves {
                let mid = (&r0.m() + &r1.m()).scale(0.5);
                let rate = (&r1.m() - &r0.m()).scale(1.0 / h);
                let lhs = &Matrix::identity(n) - &rate;
                let rhs = p.matmul(&mid);
                num += dot(lhs.as_slice(), rhs.as_slice());
                den += dot(rhs.as_slice(), rhs.as_slice());
            } else {
                let mid = (&r0.x_hat_1() + &r1.x_hat_1()).scale(0.5);
                let rate = (&r1.x_hat_1() - &r0.x_hat_1()).scale(1.0 / h);
                let lhs = &r0.v() - &rate;
                let rhs = p.mul_vec(&mid);
                num += lhs.dot(&rhs);
                den += rhs.dot(&rhs);
            }
            a = &a + &(&(&r1.x() - &r0.x()).scale(1.0 / h) - &r0.v());
        }
        let k = num / den;
        if !(k > 0.0 && k.is_finite()) {
            return Err(CliError::Input(format!(
                "cannot estimate the gain k from the trace (got {k}); pass --config"
            )));
        }
        let a_true = a.scale(1.0 / (count - 1) as f64);
        let last = self.view(count - 1);
        Ok(Scenario {
            n,
            trajectory: Trajectory::Constant {
                velocity: &first.v() + &a_true,
            },
            a_true,
            x0: first.x(),
            gains: Gains { k, k_star: k },
            mode,
            m0: first.m(),
            x_hat_1_0: first.x_hat_1(),
            z_hat_star_0: first.z_hat_star(),
            h,
            duration: last.t(),
            noise: NoiseSpec::none(),
            seed: 0,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(trace: &SimulationTrace<f64>, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(trace.dim())).map_err(io)?;
    for s in &trace.samples {
        w.write_record(row(s).into_iter().map(fmt)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn read_csv<R: Read>(input: R) -> Result<TraceTable, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Input(format!("bad CSV header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let n = dimension_for(head.len()).ok_or_else(|| {
        CliError::Input(format!(
            "{} columns do not match any trace layout",
            head.len()
        ))
    })?;
    if head != header(n) {
        return Err(CliError::Input(
            "CSV header does not match the trace layout".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("row {}: {e}", i + 1)))?;
        if rec.len() != head.len() {
            return Err(CliError::Input(format!(
                "row {} has {} fields",
                i + 1,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("row {}: {e}", i + 1)))?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Input(format!("row {}: non-finite value", i + 1)));
        }
        rows.push(vals);
    }
    Ok(TraceTable { n, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub t: f64,
    pub message: String,
}

/// JSON trace: the scenario, the CSV columns and the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonTrace {
    pub scenario: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub failure: Option<FailureRecord>,
}

impl JsonTrace {
    pub fn from_trace(trace: &SimulationTrace<f64>) -> Self {
        Self {
            scenario: ScenarioConfig::from_scenario(&trace.scenario),
            columns: header(trace.dim()),
            rows: TraceTable::from_trace(trace).rows,
            failure: trace.failure.as_ref().map(|f: &SimFailure| FailureRecord {
                t: f.t,
                message: f.error.to_string(),
            }),
        }
    }
}

pub fn write_json<W: Write>(trace: &SimulationTrace<f64>, out: W) -> Result<(), CliError> {
    serde_json::to_writer(out, &JsonTrace::from_trace(trace))
        .map_err(|e| CliError::Io(e.to_string()))
}

/// A trace read from disk, with its scenario when the file carries one.
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub table: TraceTable,
    pub scenario: Option<Scenario<f64>>,
}

pub fn read_json<R: Read>(input: R) -> Result<LoadedTrace, CliError> {
    let j: JsonTrace = serde_json::from_reader(input)
        .map_err(|e| CliError::Input(format!("bad JSON trace: {e}")))?;
    let scenario = j
        .scenario
        .to_scenario()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let n = scenario.n;
    if j.columns != header(n) {
        return Err(CliError::Input(
            "JSON trace columns do not match its scenario".into(),
        ));
    }
    if let Some(i) = j.rows.iter().position(|r| r.len() != column_count(n)) {
        return Err(CliError::Input(format!(
            "row {} has {} fields",
            i + 1,
            j.rows[i].len()
        )));
    }
    Ok(LoadedTrace {
        table: TraceTable { n, rows: j.rows },
        scenario: Some(scenario),
    })
}

/// Reads a `.json` or CSV trace.
pub fn load_trace(path: &Path) -> Result<LoadedTrace, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open trace {}: {e}", path.display())))?;
    let input = std::io::BufReader::new(file);
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        read_json(input)
    } else {
        Ok(LoadedTrace {
            table: read_csv(input)?,
            scenario: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bearing_core::{circle_scenario, simulate};

    #[test]
    fn header_layout() {
        let h = header(3);
        assert_eq!(h.len(), column_count(3));
        assert_eq!(h.len(), 1 + 21 + 9 + 3);
        assert_eq!(&h[..4], &["t", "x1", "x2", "x3"]);
        assert_eq!(h[16], "M_11");
        assert_eq!(h[24], "M_33");
        assert_eq!(&h[h.len() - 3..], &["err_xz", "err_x", "err_a"]);
        assert_eq!(dimension_for(column_count(5)), Some(5));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn estimates_gain_and_bias() {
        let mut sc = circle_scenario::<f64>();
        sc.duration = 4.0 * std::f64::consts::PI * 4.0;
        let tr = simulate(&sc).unwrap();
        let est = TraceTable::from_trace(&tr).estimate_scenario().unwrap();
        assert_eq!(est.mode, ObserverMode::Cascade);
        assert!((est.gains.k - 0.5).abs() < 1e-6, "{}", est.gains.k);
        assert!((&est.a_true - &sc.a_true).norm() < 1e-3, "{:?}", est.a_true);

        sc.mode = ObserverMode::BasicFilter;
        let tr = simulate(&sc).unwrap();
        let est = TraceTable::from_trace(&tr).estimate_scenario().unwrap();
        assert_eq!(est.mode, ObserverMode::BasicFilter);
        assert!((est.gains.k - 0.5).abs() < 1e-6, "{}", est.gains.k);
    }
}
