//! The error-matrix calculus.
//!
//! For unit states the pairwise errors `e_ij = 1 - <r_i, r_j>` form a
//! symmetric matrix `E` with zero diagonal and entries in `[0, 2]`. Along
//! solutions of the coupled dynamics `E` closes into the matrix Riccati
//! equation
//!
//! ```text
//! E' = -k (L E + E L' + alpha(E) 1' + 1 alpha(E)') + k (Lambda(E) E + E Lambda(E))
//! ```
//!
//! where `alpha_i(E) = sum_l a_il e_il`, `Lambda(E) = diag(alpha(E))`, and `L`
//! is the digraph Laplacian. The common drift term drops out because
//! rotations preserve inner products, so the same equation covers runs with
//! and without a drift matrix.
//!
//! This module also carries the comparison constants tying single errors to
//! the weighted error sum, used by the decay certificates.

use nalgebra::{DMatrix, DVector};

use crate::digraph::{has_spanning_tree, Condensation, Digraph};
use crate::dynamics::{SimConfig, StateMatrix};
use crate::{Error, Result};

/// Entries this far outside `[0, 2]` are clamped back by the integrator.
const CLAMP_TOL: f64 = 1e-9;
/// Entries beyond `[0 - RANGE_TOL, 2 + RANGE_TOL]` abort the integration.
const RANGE_TOL: f64 = 1e-6;
/// Additive slack for the path inequality check.
const PATH_SLACK: f64 = 1e-12;
/// Additive slack for the upper comparison in `sandwich_check`.
const SANDWICH_SLACK: f64 = 1e-12;

/// Symmetric pairwise-error matrix with zero diagonal and entries in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    entries: DMatrix<f64>,
}

impl ErrorMatrix {
    /// Validates symmetry (1e-12), zero diagonal (1e-12), and range; entries
    /// within 1e-9 outside `[0, 2]` are clamped.
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::Validation(format!(
                "error matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let m = entries.nrows();
        for i in 0..m {
            if entries[(i, i)].abs() > 1e-12 {
                return Err(Error::InvariantViolation(format!(
                    "diagonal entry ({i}, {i}) = {} must vanish",
                    entries[(i, i)]
                )));
            }
            entries[(i, i)] = 0.0;
            for j in (i + 1)..m {
                let asym = (entries[(i, j)] - entries[(j, i)]).abs();
                if asym > 1e-12 {
                    return Err(Error::InvariantViolation(format!(
                        "asymmetry at ({i}, {j}): {asym:e}"
                    )));
                }
                let clamped = clamp_entry(entries[(i, j)], CLAMP_TOL, &format!("({i}, {j})"))?;
                entries[(i, j)] = clamped;
                entries[(j, i)] = clamped;
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest pairwise error.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |acc, &e| acc.max(e))
    }
}

/// Clamps round-off excursions within `CLAMP_TOL` of the interval back onto
/// it; excursions beyond `abort_tol` abort.
fn clamp_entry(e: f64, abort_tol: f64, what: &str) -> Result<f64> {
    if !e.is_finite() || e < -abort_tol || e > 2.0 + abort_tol {
        return Err(Error::InvariantViolation(format!(
            "entry {what} = {e} left the interval [0, 2]"
        )));
    }
    Ok(if (-CLAMP_TOL..0.0).contains(&e) {
        0.0
    } else if e > 2.0 && e <= 2.0 + CLAMP_TOL {
        2.0
    } else {
        e
    })
}

/// Pairwise errors of a state: `e_ij = 1 - <r_i, r_j>`, exactly symmetric
/// with an exactly zero diagonal by construction.
pub fn error_from_states(state: &StateMatrix) -> ErrorMatrix {
    let m = state.m();
    let r = state.matrix();
    let gram = r * r.transpose();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            // Round-off can push 1 - <r_i, r_j> marginally outside [0, 2].
            let e = (1.0 - gram[(i, j)]).clamp(0.0, 2.0);
            entries[(i, j)] = e;
            entries[(j, i)] = e;
        }
    }
    ErrorMatrix { entries }
}

/// Weighted in-error sums `alpha_i(E) = sum_l a_il e_il`.
pub fn alpha(e: &ErrorMatrix, g: &Digraph) -> Result<DVector<f64>> {
    if e.dim() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "error matrix is {0}x{0} but the digraph has {1} nodes",
            e.dim(),
            g.node_count()
        )));
    }
    Ok(alpha_raw(e.entries(), g))
}

fn alpha_raw(e: &DMatrix<f64>, g: &Digraph) -> DVector<f64> {
    let m = e.nrows();
    let a = g.weights();
    DVector::from_fn(m, |i, _| (0..m).map(|l| a[(i, l)] * e[(i, l)]).sum())
}

/// Ascending-index dense product, so that paired entries of the Riccati
/// right-hand side cancel exactly in floating point.
fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), b.ncols());
    let inner = a.ncols();
    DMatrix::from_fn(m, n, |i, j| (0..inner).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

/// Riccati right-hand side; the output is exactly symmetric with an exactly
/// zero diagonal, mirroring the algebraic structure of the equation.
pub fn riccati_rhs(e: &ErrorMatrix, g: &Digraph, k: f64) -> Result<DMatrix<f64>> {
    if e.dim() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "error matrix is {0}x{0} but the digraph has {1} nodes",
            e.dim(),
            g.node_count()
        )));
    }
    Ok(riccati_rhs_raw(e.entries(), g, k))
}

fn riccati_rhs_raw(e: &DMatrix<f64>, g: &Digraph, k: f64) -> DMatrix<f64> {
    let m = e.nrows();
    let l = crate::digraph::laplacian(g);
    let alpha = alpha_raw(e, g);
    let le = matmul(l.entries(), e);
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            // -(L E)_ij - (E L')_ij - alpha_i - alpha_j + e_ij (alpha_i + alpha_j),
            // with (E L')_ij = (L E)_ji because E is symmetric.
            let v = -k * (le[(i, j)] + le[(j, i)] + (alpha[i] + alpha[j]) * (1.0 - e[(i, j)]));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Integrates the Riccati equation with RK4 from a realizable `e0`.
///
/// After every step the iterate is re-symmetrized, its diagonal zeroed, and
/// entries within 1e-9 outside `[0, 2]` clamped; larger excursions abort with
/// `InvariantViolation`. Recording matches `integrate`: every
/// `record_every`-th step plus `t = 0` and `t = t_end`.
pub fn integrate_riccati(
    e0: &ErrorMatrix,
    g: &Digraph,
    k: f64,
    cfg: &SimConfig,
) -> Result<Vec<(f64, ErrorMatrix)>> {
    if e0.dim() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "error matrix is {0}x{0} but the digraph has {1} nodes",
            e0.dim(),
            g.node_count()
        )));
    }
    let f = |y: &DMatrix<f64>| riccati_rhs_raw(y, g, k);
    let rk4 = |y: &DMatrix<f64>, dt: f64| {
        let k1 = f(y);
        let k2 = f(&(y + &k1 * (dt / 2.0)));
        let k3 = f(&(y + &k2 * (dt / 2.0)));
        let k4 = f(&(y + &k3 * dt));
        y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    };

    let (full_steps, tail) = step_plan(cfg);
    let total_steps = full_steps + usize::from(tail.is_some());
    let mut samples = Vec::with_capacity(total_steps / cfg.record_every + 2);
    samples.push((0.0, e0.clone()));

    let mut current = e0.entries().clone();
    let m = current.nrows();
    for step in 1..=total_steps {
        let (dt, t) = if step <= full_steps {
            (cfg.dt, step as f64 * cfg.dt)
        } else {
            (tail.expect("tail step exists"), cfg.t_end)
        };
        current = rk4(&current, dt);
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        for i in 0..m {
            current[(i, i)] = 0.0;
            for j in (i + 1)..m {
                let sym = 0.5 * (current[(i, j)] + current[(j, i)]);
                let clamped = clamp_entry(sym, RANGE_TOL, &format!("({i}, {j}) at t = {t}"))?;
                current[(i, j)] = clamped;
                current[(j, i)] = clamped;
            }
        }
        if step % cfg.record_every == 0 || step == total_steps {
            samples.push((
                t,
                ErrorMatrix {
                    entries: current.clone(),
                },
            ));
        }
    }
    Ok(samples)
}

fn step_plan(cfg: &SimConfig) -> (usize, Option<f64>) {
    let ratio = cfg.t_end / cfg.dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        (rounded as usize, None)
    } else {
        let full = ratio.floor() as usize;
        (full, Some(cfg.t_end - full as f64 * cfg.dt))
    }
}

/// Weighted total error `V(E) = beta' E beta / 2` with `beta` in original
/// node order.
pub fn total_error(e: &ErrorMatrix, beta: &crate::digraph::BetaWeights) -> Result<f64> {
    if e.dim() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "error matrix is {0}x{0} but beta has {1} components",
            e.dim(),
            beta.len()
        )));
    }
    let b = beta.node_order();
    let m = e.dim();
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            sum += b[i] * e.entries()[(i, j)] * b[j];
        }
    }
    Ok(0.5 * sum)
}

/// Higher-order term `gamma(E) = k beta' Lambda(E) E beta`, the part of the
/// weighted error balance that the epsilon scaling must dominate.
pub fn gamma_term(
    e: &ErrorMatrix,
    g: &Digraph,
    beta: &crate::digraph::BetaWeights,
    k: f64,
) -> Result<f64> {
    if e.dim() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "error matrix is {0}x{0} but beta has {1} components",
            e.dim(),
            beta.len()
        )));
    }
    let alpha = alpha(e, g)?;
    let b = beta.node_order();
    let m = e.dim();
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            sum += b[i] * alpha[i] * e.entries()[(i, j)] * b[j];
        }
    }
    Ok(k * sum)
}

/// Path comparison: along a node sequence `i, k_1, ..., k_{s-1}, j` with `s`
/// segments, checks `e_ij <= s * (e_{i,k_1} + ... + e_{k_{s-1},j})` within
/// 1e-12. Holds for every realizable error matrix by the Cauchy inequality.
pub fn path_bound(e: &ErrorMatrix, path: &[usize]) -> bool {
    if path.len() < 2 {
        return true;
    }
    let segments = (path.len() - 1) as f64;
    let (i, j) = (path[0], path[path.len() - 1]);
    let along: f64 = path.windows(2).map(|w| e.entries()[(w[0], w[1])]).sum();
    e.entries()[(i, j)] <= segments * along + PATH_SLACK
}

/// Comparison constants between single errors and the weighted error sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaConstants {
    /// Constructive constant with `e_ij <= c1 * sum_pq a_pq e_pq` for every
    /// realizable error matrix.
    pub c1: f64,
    /// Lower comparison weight `1 / (c1 m^2)`.
    pub c_hat: f64,
    /// Upper comparison weight: the largest edge weight.
    pub c_check: f64,
}

/// Builds the comparison constants for a digraph with a spanning tree.
///
/// Construction: take the root `v0` (smallest node of the unique source
/// component), BFS shortest paths from `v0` to every node (neighbors scanned
/// in ascending order), and for each ordered pair `(i, j)` combine the two
/// paths `v0 -> i` and `v0 -> j`. With `s` the total edge count of both paths
/// and `a_min` their smallest weight, `s / a_min` witnesses the pair, and
/// `c1` is the largest witness over all pairs. Concatenating the reversed
/// first path with the second gives a walk from `i` to `j` with at most `s`
/// segments, so the path comparison above justifies the constant.
pub fn lemma_constants(g: &Digraph, c: &Condensation) -> Result<LemmaConstants> {
    if !has_spanning_tree(c) {
        return Err(Error::NoSpanningTree {
            sources: c.source_count(),
        });
    }
    let m = g.node_count();
    let root = *c.blocks()[0].first().expect("blocks are nonempty");

    // BFS tree from the root; parent[v] pairs each reached node with the
    // edge weight used to reach it.
    let mut parent: Vec<Option<(usize, f64)>> = vec![None; m];
    let mut dist = vec![usize::MAX; m];
    dist[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for v in g.successors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = Some((u, g.weight(v, u)));
                queue.push_back(v);
            }
        }
    }
    debug_assert!(
        dist.iter().all(|&d| d != usize::MAX),
        "root must reach every node"
    );

    // Edge count and minimum weight along the tree path root -> x.
    let path_stats = |mut x: usize| -> (usize, f64) {
        let mut edges = 0;
        let mut min_weight = f64::INFINITY;
        while let Some((up, w)) = parent[x] {
            edges += 1;
            min_weight = min_weight.min(w);
            x = up;
        }
        (edges, min_weight)
    };
    let stats: Vec<(usize, f64)> = (0..m).map(path_stats).collect();

    let mut c1: f64 = if m == 1 { 1.0 } else { 0.0 };
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (si, wi) = stats[i];
            let (sj, wj) = stats[j];
            let s = (si + sj) as f64;
            let a_min = wi.min(wj);
            c1 = c1.max(s / a_min);
        }
    }
    Ok(LemmaConstants {
        c1,
        c_hat: 1.0 / (c1 * (m * m) as f64),
        c_check: g.max_weight(),
    })
}

/// Two-sided comparison between the plain error sum and the weighted one:
/// `c_hat * 1'E1 <= 1'alpha(E) <= c_check * 1'E1` (upper side within 1e-12).
pub fn sandwich_check(e: &ErrorMatrix, g: &Digraph, constants: &LemmaConstants) -> bool {
    debug_assert_eq!(e.dim(), g.node_count());
    let total: f64 = e.entries().iter().sum();
    let weighted: f64 = alpha_raw(e.entries(), g).iter().sum();
    constants.c_hat * total <= weighted && weighted <= constants.c_check * total + SANDWICH_SLACK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{beta_weights, condensation};
    use crate::dynamics::embed_phases;
    use proptest::prelude::*;

    fn states_from_angles(angles: &[f64]) -> StateMatrix {
        embed_phases(angles).unwrap()
    }

    #[test]
    fn orthogonal_and_antipodal_errors() {
        let s = states_from_angles(&[0.0, std::f64::consts::FRAC_PI_2]);
        let e = error_from_states(&s);
        assert!((e.entries()[(0, 1)] - 1.0).abs() < 1e-15);

        let s = states_from_angles(&[0.0, std::f64::consts::PI]);
        let e = error_from_states(&s);
        assert!((e.entries()[(0, 1)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_matrix_is_exactly_symmetric_with_zero_diagonal() {
        let s = StateMatrix::random_hemisphere(6, 3, 11, 0.2).unwrap();
        let e = error_from_states(&s);
        for i in 0..6 {
            assert_eq!(e.entries()[(i, i)], 0.0);
            for j in 0..6 {
                assert_eq!(e.entries()[(i, j)], e.entries()[(j, i)]);
            }
        }
    }

    #[test]
    fn constructor_rejects_asymmetry_and_clamps_round_off() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.6, 0.0]);
        assert!(matches!(
            ErrorMatrix::new(bad),
            Err(Error::InvariantViolation(_))
        ));

        let slightly_out = DMatrix::from_row_slice(2, 2, &[0.0, -1e-12, -1e-12, 0.0]);
        let e = ErrorMatrix::new(slightly_out).unwrap();
        assert_eq!(e.entries()[(0, 1)], 0.0);

        let far_out = DMatrix::from_row_slice(2, 2, &[0.0, 2.1, 2.1, 0.0]);
        assert!(matches!(
            ErrorMatrix::new(far_out),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn alpha_weighs_incoming_errors() {
        let g = Digraph::from_edges(2, &[(1, 0, 1.0), (0, 1, 2.0)]).unwrap();
        let e = ErrorMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])).unwrap();
        let a = alpha(&e, &g).unwrap();
        assert_eq!(a[0], 0.5);
        assert_eq!(a[1], 1.0);
    }

    /// Entrywise expansion of the error derivative used as an independent
    /// reference for the matrix-form right-hand side.
    fn scalar_error_derivative(e: &DMatrix<f64>, g: &Digraph, k: f64, i: usize, j: usize) -> f64 {
        let m = e.nrows();
        let a = g.weights();
        let mut v = 0.0;
        for l in 0..m {
            v += k * a[(i, l)] * e[(l, j)];
            v -= k * a[(i, l)] * e[(i, j)];
            v -= k * a[(i, l)] * e[(l, i)];
            v += k * a[(i, l)] * e[(i, l)] * e[(i, j)];
            v += k * a[(j, l)] * e[(l, i)];
            v -= k * a[(j, l)] * e[(i, j)];
            v -= k * a[(j, l)] * e[(l, j)];
            v += k * a[(j, l)] * e[(j, l)] * e[(i, j)];
        }
        v
    }

    #[test]
    fn riccati_rhs_matches_scalar_expansion() {
        let g = crate::scenarios::paper_fig1_digraph();
        let s = StateMatrix::random_hemisphere(12, 3, 5, 0.2).unwrap();
        let e = error_from_states(&s);
        let k = 1.3;
        let rhs = riccati_rhs(&e, &g, k).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = scalar_error_derivative(e.entries(), &g, k, i, j);
                assert!(
                    (rhs[(i, j)] - want).abs() <= 1e-12,
                    "entry ({i}, {j}): got {}, want {want}",
                    rhs[(i, j)]
                );
            }
        }
    }

    #[test]
    fn riccati_rhs_is_exactly_symmetric_zero_diagonal() {
        let g = crate::scenarios::paper_fig1_digraph();
        let s = StateMatrix::random_hemisphere(12, 4, 17, 0.2).unwrap();
        let rhs = riccati_rhs(&error_from_states(&s), &g, 2.0).unwrap();
        for i in 0..12 {
            assert_eq!(rhs[(i, i)], 0.0);
            for j in 0..12 {
                assert_eq!(rhs[(i, j)], rhs[(j, i)]);
            }
        }
    }

    #[test]
    fn riccati_fixed_points_at_zero() {
        let g = crate::scenarios::paper_fig1_digraph();
        let e = ErrorMatrix::new(DMatrix::zeros(12, 12)).unwrap();
        let rhs = riccati_rhs(&e, &g, 1.0).unwrap();
        assert_eq!(rhs.amax(), 0.0);
    }

    #[test]
    fn riccati_matches_finite_differences_of_state_errors() {
        // d/dt E along the coupled flow, approximated by central differences,
        // must agree with the Riccati right-hand side.
        let g =
            Digraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5), (1, 0, 0.3)]).unwrap();
        let state = StateMatrix::random_hemisphere(3, 3, 23, 0.2).unwrap();
        let params = crate::dynamics::ModelParams::new(1.0, None).unwrap();
        let h = 1e-5;
        let cfg = SimConfig::new(h, 2.0 * h, 1).unwrap();
        let traj = crate::dynamics::integrate(&state, &g, &params, &cfg).unwrap();
        let e_prev = error_from_states(&traj.states()[0]);
        let e_mid = error_from_states(&traj.states()[1]);
        let e_next = error_from_states(&traj.states()[2]);
        let fd = (e_next.entries() - e_prev.entries()) / (2.0 * h);
        let rhs = riccati_rhs(&e_mid, &g, 1.0).unwrap();
        assert!((fd - rhs).amax() < 1e-7);
    }

    #[test]
    fn integrate_riccati_stays_at_zero() {
        let g = crate::scenarios::paper_fig1_digraph();
        let e0 = ErrorMatrix::new(DMatrix::zeros(12, 12)).unwrap();
        let cfg = SimConfig::new(1e-2, 1.0, 10).unwrap();
        let samples = integrate_riccati(&e0, &g, 1.0, &cfg).unwrap();
        assert_eq!(samples.len(), 11);
        assert_eq!(samples.last().unwrap().0, 1.0);
        for (_, e) in samples {
            assert_eq!(e.entries().amax(), 0.0);
        }
    }

    #[test]
    fn total_error_of_antipodal_pair() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let c = condensation(&g);
        let beta = beta_weights(&c, &g, 0.5).unwrap();
        let e = ErrorMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
        // V = (1/2) * 2 * (1/2)(1/2) * 2 = 1/2.
        assert!((total_error(&e, &beta).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gamma_term_hand_example() {
        // a_12 = 1, a_21 = 0, e_12 = 1, beta = (1/2, 1/2), k = 1:
        // alpha = (1, 0), so gamma = beta' diag(alpha) E beta = 1/4.
        let g = Digraph::from_edges(2, &[(1, 0, 1.0)]).unwrap();
        let e = ErrorMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        // A balanced mutual pair has left Perron weights (1/2, 1/2).
        let pair = Digraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let beta = beta_weights(&condensation(&pair), &pair, 0.5).unwrap();
        assert_eq!(beta.node_order().as_slice(), &[0.5, 0.5]);
        let gamma = gamma_term(&e, &g, &beta, 1.0).unwrap();
        assert!((gamma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gamma_smallness_bound_holds() {
        let g = crate::scenarios::paper_fig1_digraph();
        let c = condensation(&g);
        let beta = beta_weights(&c, &g, 0.3).unwrap();
        let s = StateMatrix::random_hemisphere(12, 3, 31, 0.2).unwrap();
        let e = error_from_states(&s);
        let k = 2.0;
        let gamma = gamma_term(&e, &g, &beta, k).unwrap();
        let beta_l1: f64 = beta.node_order().iter().sum();
        let bound = k * g.max_weight() * 12.0 * e.max_entry().powi(2) * beta_l1 * beta_l1;
        assert!(gamma.abs() <= bound, "gamma {gamma} exceeds bound {bound}");
    }

    #[test]
    fn path_bound_on_great_circle_triple() {
        let phi = 0.7;
        let s = states_from_angles(&[0.0, phi, 2.0 * phi]);
        let e = error_from_states(&s);
        assert!(path_bound(&e, &[0, 1, 2]));
        // The two-segment comparison is strict for a geodesic fan.
        let lhs = e.entries()[(0, 2)];
        let rhs = 2.0 * (e.entries()[(0, 1)] + e.entries()[(1, 2)]);
        assert!(lhs < rhs);
    }

    #[test]
    fn lemma_constants_on_chain() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let c = condensation(&g);
        let lc = lemma_constants(&g, &c).unwrap();
        assert_eq!(lc.c1, 1.0);
        assert_eq!(lc.c_hat, 0.25);
        assert_eq!(lc.c_check, 1.0);
    }

    #[test]
    fn lemma_constants_on_complete_graph() {
        // Complete graph on 4 nodes, all weights 2: every pair is bridged by
        // two one-edge paths, so c1 = 2 / 2 = 1 and c_hat = 2 / (2 * 16).
        let m = 4;
        let mut w = DMatrix::from_element(m, m, 2.0);
        for i in 0..m {
            w[(i, i)] = 0.0;
        }
        let g = Digraph::new(w).unwrap();
        let c = condensation(&g);
        let lc = lemma_constants(&g, &c).unwrap();
        assert_eq!(lc.c1, 1.0);
        assert_eq!(lc.c_hat, 1.0 / 16.0);
        assert_eq!(lc.c_check, 2.0);
    }

    #[test]
    fn lemma_constants_on_benchmark_graph() {
        let g = crate::scenarios::paper_fig1_digraph();
        let c = condensation(&g);
        let lc = lemma_constants(&g, &c).unwrap();
        assert_eq!(lc.c_check, 5.0);
        assert!(lc.c1 > 0.0);
        assert!((lc.c_hat - 1.0 / (lc.c1 * 144.0)).abs() < 1e-15);
    }

    #[test]
    fn lemma_constants_need_a_spanning_tree() {
        let g = Digraph::new(DMatrix::zeros(2, 2)).unwrap();
        let c = condensation(&g);
        assert!(matches!(
            lemma_constants(&g, &c),
            Err(Error::NoSpanningTree { .. })
        ));
    }

    #[test]
    fn sandwich_upper_bound_is_tight_for_uniform_mutual_pair() {
        let w = 3.0;
        let g = Digraph::from_edges(2, &[(0, 1, w), (1, 0, w)]).unwrap();
        let c = condensation(&g);
        let lc = lemma_constants(&g, &c).unwrap();
        let e = ErrorMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
        let total: f64 = e.entries().iter().sum();
        let weighted: f64 = alpha(&e, &g).unwrap().iter().sum();
        assert_eq!(weighted, lc.c_check * total);
        assert!(sandwich_check(&e, &g, &lc));
    }

    proptest! {
        #[test]
        fn phase_embedding_errors_match_cosine_formula(
            angles in proptest::collection::vec(-3.0f64..3.0, 2..6),
        ) {
            let s = states_from_angles(&angles);
            let e = error_from_states(&s);
            for i in 0..angles.len() {
                for j in 0..angles.len() {
                    if i != j {
                        let want = 1.0 - (angles[i] - angles[j]).cos();
                        prop_assert!((e.entries()[(i, j)] - want).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn rhs_oracle_agreement_on_random_instances(
            seed in proptest::num::u64::ANY,
            k in 0.2f64..3.0,
        ) {
            let m = 2 + (seed % 5) as usize;
            let mut rng = crate::rng::SplitMix64::new(seed ^ 0xD1CE);
            let mut w = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    if i != j && rng.next_f64() < 0.6 {
                        w[(i, j)] = 0.1 + 2.9 * rng.next_f64();
                    }
                }
            }
            let g = Digraph::new(w).unwrap();
            let s = StateMatrix::random_hemisphere(m, 3, seed, 0.2).unwrap();
            let e = error_from_states(&s);
            let rhs = riccati_rhs(&e, &g, k).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let want = scalar_error_derivative(e.entries(), &g, k, i, j);
                    prop_assert!((rhs[(i, j)] - want).abs() <= 1e-12);
                }
            }
        }
    }
}
