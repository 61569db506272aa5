//! Oscillator states on the unit sphere and their time evolution.
//!
//! States are stored as an `m x n` matrix whose rows are the unit vectors
//! `r_i`. The coupled dynamics
//!
//! ```text
//! r_i' = Omega r_i + k * sum_j a_ij * (r_j - <r_i, r_j> r_i)
//! ```
//!
//! are integrated with a classical fixed-step RK4 scheme; every accepted step
//! renormalizes the rows, which keeps the stored trajectory on the sphere
//! without changing the scheme's fourth order.

use nalgebra::{DMatrix, DVector};

use crate::digraph::Digraph;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Allowed deviation of a stored row norm from one.
const UNIT_NORM_TOL: f64 = 1e-9;
/// Rows below this norm cannot be meaningfully normalized on input.
const MIN_INPUT_NORM: f64 = 1e-6;
/// Max `|W + W'|` entry accepted as skew-symmetric.
const SKEW_TOL: f64 = 1e-12;
/// Minimum-norm threshold deciding the open-hemisphere verdict.
const HEMISPHERE_NORM_TOL: f64 = 1e-6;
/// Iteration cap for the minimum-norm-point search.
const HEMISPHERE_MAX_ITERS: usize = 10_000;

/// Oscillator configuration: `m` unit rows in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    rows: DMatrix<f64>,
}

impl StateMatrix {
    /// Wraps a matrix whose rows are already unit vectors (within 1e-9).
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::Validation("state matrix must be nonempty".into()));
        }
        for i in 0..rows.nrows() {
            let norm = rows.row(i).norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Validation(format!(
                    "row {i} has norm {norm}, expected 1 within {UNIT_NORM_TOL:e}"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Normalizes each row onto the sphere, rejecting rows with norm below
    /// 1e-6.
    pub fn renormalized(mut rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::Validation("state matrix must be nonempty".into()));
        }
        for i in 0..rows.nrows() {
            let norm = rows.row(i).norm();
            if !norm.is_finite() || norm < MIN_INPUT_NORM {
                return Err(Error::Validation(format!(
                    "row {i} has norm {norm}, too small to normalize"
                )));
            }
            rows.row_mut(i).scale_mut(1.0 / norm);
        }
        Ok(Self { rows })
    }

    /// Parses the initial-state file format:
    ///
    /// ```text
    /// state 2 3
    /// 1.0 0.0 0.0
    /// 0.0 1.0 0.0
    /// ```
    ///
    /// Rows are normalized on ingestion; rows with norm below 1e-6 are
    /// rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut header: Option<(usize, usize)> = None;
        let mut rows: Vec<f64> = Vec::new();
        let mut row_count = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (&mut header, fields.as_slice()) {
                (None, ["state", m, n]) => {
                    let m: usize = m
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid row count `{m}`")))?;
                    let n: usize = n
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid dimension `{n}`")))?;
                    if m == 0 || n == 0 {
                        return Err(parse_err(
                            line_no,
                            "state dimensions must be positive".into(),
                        ));
                    }
                    header = Some((m, n));
                }
                (None, _) => {
                    return Err(parse_err(
                        line_no,
                        "expected `state <m> <n>` header first".into(),
                    ));
                }
                (Some((m, n)), coords) => {
                    if row_count >= *m {
                        return Err(parse_err(line_no, format!("more than {m} state rows")));
                    }
                    if coords.len() != *n {
                        return Err(parse_err(
                            line_no,
                            format!("expected {n} coordinates, got {}", coords.len()),
                        ));
                    }
                    for c in coords {
                        let v: f64 = c
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("invalid coordinate `{c}`")))?;
                        if !v.is_finite() {
                            return Err(parse_err(line_no, format!("non-finite coordinate `{c}`")));
                        }
                        rows.push(v);
                    }
                    row_count += 1;
                }
            }
        }
        let (m, n) = header.ok_or_else(|| parse_err(1, "missing `state <m> <n>` header".into()))?;
        if row_count != m {
            return Err(parse_err(
                0,
                format!("expected {m} state rows, got {row_count}"),
            ));
        }
        Self::renormalized(DMatrix::from_row_slice(m, n, &rows))
    }

    /// Draws `m` unit vectors in `R^n` confined to an open hemisphere.
    ///
    /// A pivot direction `u` is sampled first (n standard normals,
    /// normalized). Each oscillator then redraws until `|<r_i, u>| >= margin`
    /// and flips sign when the inner product is negative, so every row
    /// satisfies `<r_i, u> >= margin`. Draw order is fixed: consumption is
    /// strictly sequential from the splitmix64 stream seeded with `seed`.
    pub fn random_hemisphere(m: usize, n: usize, seed: u64, margin: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Validation(
                "state dimensions must be positive".into(),
            ));
        }
        if !(0.0 < margin && margin < 1.0) {
            return Err(Error::Validation(format!(
                "hemisphere margin must lie in (0, 1), got {margin}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let draw_unit = |rng: &mut SplitMix64| loop {
            let v = DVector::from_fn(n, |_, _| rng.next_normal());
            let norm = v.norm();
            if norm > 1e-9 {
                return v / norm;
            }
        };
        let pivot = draw_unit(&mut rng);
        let mut rows = DMatrix::zeros(m, n);
        for i in 0..m {
            let r = loop {
                let candidate = draw_unit(&mut rng);
                let d = candidate.dot(&pivot);
                if d.abs() >= margin {
                    break if d < 0.0 { -candidate } else { candidate };
                }
            };
            rows.row_mut(i).copy_from(&r.transpose());
        }
        Self::new(rows)
    }

    /// Number of oscillators.
    pub fn m(&self) -> usize {
        self.rows.nrows()
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Row `i` as a column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }
}

/// Model parameters: coupling gain `k > 0` and an optional skew-symmetric
/// drift matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    k: f64,
    omega: Option<DMatrix<f64>>,
}

impl ModelParams {
    pub fn new(k: f64, omega: Option<DMatrix<f64>>) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::Validation(format!(
                "coupling gain must be positive, got {k}"
            )));
        }
        if let Some(omega) = &omega {
            check_skew(omega)?;
        }
        Ok(Self { k, omega })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn omega(&self) -> Option<&DMatrix<f64>> {
        self.omega.as_ref()
    }
}

fn check_skew(omega: &DMatrix<f64>) -> Result<()> {
    if omega.nrows() != omega.ncols() {
        return Err(Error::Validation(format!(
            "drift matrix must be square, got {}x{}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let sym = (omega + omega.transpose()).amax();
    if !sym.is_finite() || sym > SKEW_TOL {
        return Err(Error::NotSkewSymmetric(sym));
    }
    Ok(())
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::Validation(format!("dt must be positive, got {dt}")));
        }
        if !t_end.is_finite() || t_end < dt {
            return Err(Error::Validation(format!(
                "t_end must be at least dt, got t_end = {t_end}, dt = {dt}"
            )));
        }
        if record_every == 0 {
            return Err(Error::Validation("record_every must be at least 1".into()));
        }
        Ok(Self {
            dt,
            t_end,
            record_every,
        })
    }

    /// Number of full steps plus an optional shorter final step landing
    /// exactly on `t_end`.
    fn step_plan(&self) -> (usize, Option<f64>) {
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            (rounded as usize, None)
        } else {
            let full = ratio.floor() as usize;
            (full, Some(self.t_end - full as f64 * self.dt))
        }
    }
}

/// Recorded samples of an integrated run; times are strictly increasing and
/// always include `t = 0` and `t = t_end`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateMatrix>,
}

impl Trajectory {
    /// Reassembles a trajectory from recorded samples, e.g. when reloading
    /// an emitted run for re-analysis. Times must be finite and strictly
    /// increasing, and every state must share one shape.
    pub fn from_samples(times: Vec<f64>, states: Vec<StateMatrix>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times vs {} states",
                times.len(),
                states.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFinite(*t));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "sample times must strictly increase".into(),
            ));
        }
        let (m, n) = (states[0].m(), states[0].n());
        if states.iter().any(|s| s.m() != m || s.n() != n) {
            return Err(Error::DimensionMismatch(
                "all recorded states must share one shape".into(),
            ));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateMatrix {
        self.states.last().expect("a trajectory is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &StateMatrix)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Coupling-only right-hand side; every output row is tangent to the sphere
/// at the corresponding state row.
pub fn lohe_rhs(state: &StateMatrix, g: &Digraph, k: f64) -> Result<DMatrix<f64>> {
    if state.m() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} oscillators vs {} graph nodes",
            state.m(),
            g.node_count()
        )));
    }
    Ok(rhs_raw(state.matrix(), g, k, None))
}

/// Full right-hand side including the common skew-symmetric drift.
pub fn general_rhs(state: &StateMatrix, g: &Digraph, params: &ModelParams) -> Result<DMatrix<f64>> {
    if state.m() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} oscillators vs {} graph nodes",
            state.m(),
            g.node_count()
        )));
    }
    if let Some(omega) = params.omega() {
        if omega.nrows() != state.n() {
            return Err(Error::DimensionMismatch(format!(
                "drift matrix is {}x{} but states live in R^{}",
                omega.nrows(),
                omega.ncols(),
                state.n()
            )));
        }
    }
    Ok(rhs_raw(state.matrix(), g, params.k(), params.omega()))
}

/// RHS on raw row matrices (intermediate RK4 stages are not unit-norm).
fn rhs_raw(r: &DMatrix<f64>, g: &Digraph, k: f64, omega: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let a = g.weights();
    let gram = r * r.transpose();
    let mut out = a * r;
    for i in 0..r.nrows() {
        let c: f64 = (0..r.nrows()).map(|j| a[(i, j)] * gram[(i, j)]).sum();
        for col in 0..r.ncols() {
            out[(i, col)] = k * (out[(i, col)] - c * r[(i, col)]);
        }
    }
    if let Some(omega) = omega {
        out += r * omega.transpose();
    }
    out
}

fn rk4_step<F: Fn(&DMatrix<f64>) -> DMatrix<f64>>(y: &DMatrix<f64>, dt: f64, f: F) -> DMatrix<f64> {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (dt / 2.0)));
    let k3 = f(&(y + &k2 * (dt / 2.0)));
    let k4 = f(&(y + &k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Integrates the coupled dynamics from `state0`, renormalizing rows after
/// every step and recording every `record_every`-th sample plus the final
/// time.
pub fn integrate(
    state0: &StateMatrix,
    g: &Digraph,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    // Validate dimensions once up front through the public RHS.
    general_rhs(state0, g, params)?;
    let f = |y: &DMatrix<f64>| rhs_raw(y, g, params.k(), params.omega());

    let (full_steps, tail) = cfg.step_plan();
    let total_steps = full_steps + usize::from(tail.is_some());
    let mut times = Vec::with_capacity(total_steps / cfg.record_every + 2);
    let mut states = Vec::with_capacity(total_steps / cfg.record_every + 2);
    times.push(0.0);
    states.push(state0.clone());

    let mut current = state0.matrix().clone();
    for step in 1..=total_steps {
        let (dt, t) = if step <= full_steps {
            (cfg.dt, step as f64 * cfg.dt)
        } else {
            (tail.expect("tail step exists"), cfg.t_end)
        };
        current = rk4_step(&current, dt, f);
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        for i in 0..current.nrows() {
            let norm = current.row(i).norm();
            if norm < MIN_INPUT_NORM {
                return Err(Error::NonFinite(t));
            }
            current.row_mut(i).scale_mut(1.0 / norm);
        }
        if step % cfg.record_every == 0 || step == total_steps {
            times.push(t);
            states.push(StateMatrix::new(current.clone())?);
        }
    }
    Ok(Trajectory { times, states })
}

/// Matrix exponential `exp(W t)` of a skew-symmetric `W` via scaling and
/// squaring on a truncated Taylor series (halve until the infinity norm is at
/// most 1/2, sum 12 terms, square back). The result is orthogonal within
/// 1e-10.
pub fn matrix_exp_skew(omega: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_skew(omega)?;
    if !t.is_finite() {
        return Err(Error::Validation(format!("time must be finite, got {t}")));
    }
    let n = omega.nrows();
    let a = omega * t;
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let b = &a / 2f64.powi(squarings as i32);

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=12 {
        term = (&term * &b) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Transforms a trajectory into the rotating frame: `s_i(t) = exp(-W t) r_i(t)`.
pub fn rotate_frame(traj: &Trajectory, omega: &DMatrix<f64>) -> Result<Trajectory> {
    check_skew(omega)?;
    let mut states = Vec::with_capacity(traj.len());
    for (t, state) in traj.iter() {
        if omega.nrows() != state.n() {
            return Err(Error::DimensionMismatch(format!(
                "drift matrix is {}x{} but states live in R^{}",
                omega.nrows(),
                omega.ncols(),
                state.n()
            )));
        }
        let q = matrix_exp_skew(omega, -t)?;
        states.push(StateMatrix::renormalized(state.matrix() * q.transpose())?);
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
    })
}

/// Searches for a unit vector `v` with `<v, r_i> > 0` for every row, i.e. a
/// certificate that the configuration lies in an open hemisphere.
///
/// Runs the Gilbert minimum-norm-point iteration on the convex hull of the
/// rows: the hull avoids the origin (margin 1e-6) iff such a `v` exists, and
/// the normalized minimum-norm point is the certificate. Returns `None` when
/// the hull meets the origin or the margin cannot be certified within 10^4
/// iterations.
pub fn hemisphere_certificate(state: &StateMatrix) -> Option<DVector<f64>> {
    let m = state.m();
    // Start from the centroid, a point of the hull.
    let mut x = DVector::zeros(state.n());
    for i in 0..m {
        x += state.row(i);
    }
    x /= m as f64;

    for _ in 0..HEMISPHERE_MAX_ITERS {
        let norm = x.norm();
        if norm <= HEMISPHERE_NORM_TOL {
            return None; // hull reaches the origin within tolerance
        }
        // Support point minimizing <x, r_i>; its value lower-bounds the
        // minimum norm once positive.
        let mut support = 0;
        let mut support_value = f64::INFINITY;
        for i in 0..m {
            let value = x.dot(&state.row(i));
            if value < support_value {
                support_value = value;
                support = i;
            }
        }
        if support_value / norm > HEMISPHERE_NORM_TOL {
            return Some(x / norm);
        }
        // Exact line search toward the support point.
        let s = state.row(support);
        let diff = &x - &s;
        let denom = diff.norm_squared();
        if denom == 0.0 {
            return None; // hull degenerates to a point at the origin side
        }
        let gamma = (x.dot(&diff) / denom).clamp(0.0, 1.0);
        x -= diff * gamma;
    }
    None
}

/// Embeds phase angles on the unit circle: `r_i = (cos t_i, sin t_i)`.
pub fn embed_phases(thetas: &[f64]) -> Result<StateMatrix> {
    if thetas.is_empty() {
        return Err(Error::Validation("at least one phase is required".into()));
    }
    let mut rows = DMatrix::zeros(thetas.len(), 2);
    for (i, theta) in thetas.iter().enumerate() {
        rows[(i, 0)] = theta.cos();
        rows[(i, 1)] = theta.sin();
    }
    StateMatrix::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit2(x: f64, y: f64) -> DVector<f64> {
        let v = DVector::from_column_slice(&[x, y]);
        let n = v.norm();
        v / n
    }

    #[test]
    fn state_matrix_rejects_off_sphere_rows() {
        let rows = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!(matches!(StateMatrix::new(rows), Err(Error::Validation(_))));
    }

    #[test]
    fn renormalized_rejects_tiny_rows() {
        let rows = DMatrix::from_row_slice(1, 2, &[1e-9, 0.0]);
        assert!(matches!(
            StateMatrix::renormalized(rows),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn parse_state_file() {
        let s = StateMatrix::parse("# demo\nstate 2 3\n1 0 0\n0 2 0\n").unwrap();
        assert_eq!(s.m(), 2);
        assert_eq!(s.n(), 3);
        assert_eq!(s.row(1)[1], 1.0, "rows are normalized on ingestion");
    }

    #[test]
    fn parse_state_rejects_row_count_mismatch() {
        assert!(StateMatrix::parse("state 2 2\n1 0\n").is_err());
        assert!(StateMatrix::parse("state 1 2\n1 0\n0 1\n").is_err());
    }

    #[test]
    fn lohe_rhs_matches_hand_computation() {
        // Two oscillators, only node 1 listens to node 2 (a_12 = 1).
        let g = Digraph::from_edges(2, &[(1, 0, 1.0)]).unwrap();
        let state = StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let rhs = lohe_rhs(&state, &g, 1.0).unwrap();
        // r_1' = r_2 - <r_1, r_2> r_1 = (0, 1); r_2' = 0.
        assert_eq!(rhs[(0, 0)], 0.0);
        assert_eq!(rhs[(0, 1)], 1.0);
        assert_eq!(rhs[(1, 0)], 0.0);
        assert_eq!(rhs[(1, 1)], 0.0);
    }

    #[test]
    fn rhs_vanishes_at_consensus() {
        let g = crate::scenarios::paper_fig1_digraph();
        let row = [0.6, 0.8, 0.0];
        let rows = DMatrix::from_fn(12, 3, |_, j| row[j]);
        let state = StateMatrix::new(rows).unwrap();
        let rhs = lohe_rhs(&state, &g, 2.5).unwrap();
        assert!(rhs.amax() < 1e-14, "consensus must be an equilibrium");
    }

    #[test]
    fn general_rhs_reduces_to_drift_for_single_oscillator() {
        let g = Digraph::new(DMatrix::zeros(1, 1)).unwrap();
        let state = StateMatrix::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])).unwrap();
        let params = ModelParams::new(1.0, Some(crate::scenarios::paper_fig1_omega())).unwrap();
        let rhs = general_rhs(&state, &g, &params).unwrap();
        // W r for r = e_1 is the first column of W.
        assert_eq!(rhs[(0, 0)], 0.0);
        assert_eq!(rhs[(0, 1)], -1.0);
        assert_eq!(rhs[(0, 2)], 2.0);
    }

    #[test]
    fn general_rhs_rejects_non_skew_drift() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            ModelParams::new(1.0, Some(bad)),
            Err(Error::NotSkewSymmetric(_))
        ));
    }

    #[test]
    fn rhs_dimension_mismatch_is_reported() {
        let g = Digraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let state = StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(matches!(
            lohe_rhs(&state, &g, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn single_oscillator_follows_the_drift_rotation() {
        // With no coupling partners, r(t) = exp(W t) r(0).
        let g = Digraph::new(DMatrix::zeros(1, 1)).unwrap();
        let omega = crate::scenarios::paper_fig1_omega();
        let r0 = DMatrix::from_row_slice(1, 3, &[0.0, 0.6, 0.8]);
        let state0 = StateMatrix::new(r0).unwrap();
        let params = ModelParams::new(1.0, Some(omega.clone())).unwrap();
        let cfg = SimConfig::new(1e-3, 2.0, 100).unwrap();
        let traj = integrate(&state0, &g, &params, &cfg).unwrap();
        for (t, state) in traj.iter() {
            let q = matrix_exp_skew(&omega, t).unwrap();
            let expected = &q * state0.row(0);
            let got = state.row(0);
            assert!(
                (got - expected).norm() < 1e-9,
                "drift rotation mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn trajectory_records_endpoints_and_monotone_times() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 0.5)]).unwrap();
        let state0 =
            StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let params = ModelParams::new(1.0, None).unwrap();
        // t_end not divisible by dt: a shorter final step must land on it.
        let cfg = SimConfig::new(1e-3, 0.0105, 3).unwrap();
        let traj = integrate(&state0, &g, &params, &cfg).unwrap();
        assert_eq!(traj.times()[0], 0.0);
        assert_eq!(*traj.times().last().unwrap(), 0.0105);
        for w in traj.times().windows(2) {
            assert!(w[1] > w[0], "times must increase strictly");
        }
    }

    #[test]
    fn trajectory_rebuilds_from_recorded_samples() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 0.5)]).unwrap();
        let state0 =
            StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let params = ModelParams::new(1.0, None).unwrap();
        let cfg = SimConfig::new(1e-3, 0.5, 50).unwrap();
        let traj = integrate(&state0, &g, &params, &cfg).unwrap();

        let rebuilt =
            Trajectory::from_samples(traj.times().to_vec(), traj.states().to_vec()).unwrap();
        assert_eq!(rebuilt.times(), traj.times());
        for (a, b) in rebuilt.states().iter().zip(traj.states()) {
            assert_eq!(a.matrix(), b.matrix());
        }

        assert!(Trajectory::from_samples(vec![], vec![]).is_err());
        assert!(Trajectory::from_samples(vec![0.0], vec![]).is_err());
        assert!(matches!(
            Trajectory::from_samples(vec![0.0, 0.0], vec![state0.clone(), state0.clone()]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Trajectory::from_samples(vec![0.0, f64::NAN], vec![state0.clone(), state0.clone()]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn matrix_exp_quarter_turn() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let q = matrix_exp_skew(&w, std::f64::consts::FRAC_PI_2).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((q - expected).amax() < 1e-12);
    }

    #[test]
    fn matrix_exp_matches_taylor_series_for_small_arguments() {
        let omega = crate::scenarios::paper_fig1_omega();
        for &t in &[0.05, 0.2, -0.4] {
            let got = matrix_exp_skew(&omega, t).unwrap();
            // Independent reference: plain Taylor series with 30 terms,
            // convergent because |W t| is small.
            let a = &omega * t;
            let mut reference = DMatrix::identity(3, 3);
            let mut term = DMatrix::identity(3, 3);
            for k in 1..=30 {
                term = (&term * &a) / k as f64;
                reference += &term;
            }
            assert!((got - reference).amax() < 1e-13, "mismatch at t = {t}");
        }
    }

    #[test]
    fn matrix_exp_matches_rodrigues_formula() {
        // For a 3x3 skew matrix with axis w, the exponential has the closed
        // form I + sin(|w| t)/|w| W + (1 - cos(|w| t))/|w|^2 W^2.
        let omega = crate::scenarios::paper_fig1_omega();
        let speed = 6f64.sqrt(); // |(1, -2, -1)|
        for &t in &[0.1, 1.0, -2.5, 7.0, 40.0] {
            let got = matrix_exp_skew(&omega, t).unwrap();
            let theta = speed * t;
            let reference = DMatrix::identity(3, 3)
                + &omega * (theta.sin() / speed)
                + (&omega * &omega) * ((1.0 - theta.cos()) / (speed * speed));
            assert!((got - reference).amax() < 1e-12, "mismatch at t = {t}");
        }
    }

    #[test]
    fn matrix_exp_is_orthogonal() {
        let omega = crate::scenarios::paper_fig1_omega();
        let q = matrix_exp_skew(&omega, 3.7).unwrap();
        let gram = &q * q.transpose();
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn rotate_frame_at_zero_drift_is_identity() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let state0 =
            StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let params = ModelParams::new(1.0, None).unwrap();
        let cfg = SimConfig::new(1e-2, 1.0, 10).unwrap();
        let traj = integrate(&state0, &g, &params, &cfg).unwrap();
        let rotated = rotate_frame(&traj, &DMatrix::zeros(2, 2)).unwrap();
        for (a, b) in traj.states().iter().zip(rotated.states()) {
            assert!((a.matrix() - b.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn hemisphere_certificate_on_quarter_circle() {
        let rows = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let state = StateMatrix::new(rows).unwrap();
        let v = hemisphere_certificate(&state).expect("quarter circle fits a hemisphere");
        let expected = unit2(1.0, 1.0);
        assert!((v - expected).norm() < 1e-9);
    }

    #[test]
    fn hemisphere_certificate_rejects_antipodal_pair() {
        let rows = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let state = StateMatrix::new(rows).unwrap();
        assert!(hemisphere_certificate(&state).is_none());
    }

    #[test]
    fn hemisphere_certificate_is_a_strict_separator() {
        let state = StateMatrix::random_hemisphere(6, 3, 7, 0.2).unwrap();
        let v = hemisphere_certificate(&state).expect("sampled states share a hemisphere");
        assert!((v.norm() - 1.0).abs() < 1e-12);
        for i in 0..state.m() {
            assert!(v.dot(&state.row(i)) > 0.0, "row {i} is not separated");
        }
    }

    #[test]
    fn random_hemisphere_rows_respect_the_margin() {
        let margin = 0.2;
        let state = StateMatrix::random_hemisphere(32, 4, 99, margin).unwrap();
        // Recover the pivot by re-running the documented draw order.
        let mut rng = SplitMix64::new(99);
        let pivot = {
            let v = DVector::from_fn(4, |_, _| rng.next_normal());
            let n = v.norm();
            v / n
        };
        for i in 0..state.m() {
            let d = state.row(i).dot(&pivot);
            assert!(d >= margin - 1e-12, "row {i} has pivot inner product {d}");
        }
    }

    #[test]
    fn random_hemisphere_is_deterministic() {
        let a = StateMatrix::random_hemisphere(5, 3, 1234, 0.2).unwrap();
        let b = StateMatrix::random_hemisphere(5, 3, 1234, 0.2).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn embed_phases_lands_on_circle() {
        let state = embed_phases(&[0.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((state.row(0)[0] - 1.0).abs() < 1e-15);
        assert!((state.row(1)[1] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rhs_rows_are_tangent(
            seed in proptest::num::u64::ANY,
            k in 0.1f64..4.0,
        ) {
            let state = StateMatrix::random_hemisphere(5, 3, seed, 0.2).unwrap();
            let g = Digraph::from_edges(
                5,
                &[(0, 1, 1.5), (1, 2, 0.7), (2, 3, 2.2), (3, 4, 1.0), (4, 0, 0.3), (1, 0, 2.0)],
            ).unwrap();
            let rhs = lohe_rhs(&state, &g, k).unwrap();
            for i in 0..5 {
                let dot = rhs.row(i).transpose().dot(&state.row(i));
                prop_assert!(dot.abs() <= 1e-12, "row {} tangency violated: {}", i, dot);
            }
        }

        #[test]
        fn single_rk4_step_norm_drift_is_fifth_order(
            seed in proptest::num::u64::ANY,
            dt_exp in 0.0f64..1.0,
        ) {
            // dt between 1e-3 and 1e-2; below that the 10 dt^5 bound would
            // drop under floating-point noise.
            let dt = 1e-2 / 10f64.powf(dt_exp);
            let g = Digraph::from_edges(
                4,
                &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.5), (3, 0, 0.5)],
            ).unwrap();
            let state = StateMatrix::random_hemisphere(4, 3, seed, 0.2).unwrap();
            let stepped = rk4_step(state.matrix(), dt, |y| rhs_raw(y, &g, 1.0, None));
            for i in 0..4 {
                let drift = (stepped.row(i).norm() - 1.0).abs();
                prop_assert!(
                    drift <= 10.0 * dt.powi(5),
                    "row {} drifted {} for dt {}",
                    i, drift, dt
                );
            }
        }

        #[test]
        fn hemisphere_certificate_matches_grid_oracle(
            seed in proptest::num::u64::ANY,
            m in 2usize..=4,
        ) {
            // Configurations drawn well inside a hemisphere or with an
            // antipodal pair, so the verdict is never marginal.
            let inside = seed % 2 == 0;
            let state = if inside {
                StateMatrix::random_hemisphere(m, 3, seed, 0.3).unwrap()
            } else {
                let base = StateMatrix::random_hemisphere(m, 3, seed, 0.3).unwrap();
                let mut rows = base.matrix().clone();
                let flipped = -rows.row(0).clone_owned();
                rows.row_mut(1).copy_from(&flipped);
                StateMatrix::new(rows).unwrap()
            };
            let got = hemisphere_certificate(&state).is_some();
            // Dense grid over the sphere: feasible iff some direction keeps
            // every row strictly on one side.
            let steps = 60;
            let mut oracle = false;
            'outer: for p in 0..steps {
                let phi = std::f64::consts::PI * (p as f64 + 0.5) / steps as f64;
                for q in 0..(2 * steps) {
                    let lam = std::f64::consts::PI * q as f64 / steps as f64;
                    let v = DVector::from_column_slice(&[
                        phi.sin() * lam.cos(),
                        phi.sin() * lam.sin(),
                        phi.cos(),
                    ]);
                    if (0..state.m()).all(|i| v.dot(&state.row(i)) > 1e-3) {
                        oracle = true;
                        break 'outer;
                    }
                }
            }
            prop_assert_eq!(got, oracle);
        }
    }
}
