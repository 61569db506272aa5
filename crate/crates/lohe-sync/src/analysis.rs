//! Synchronization metrics and exponential-decay certificates.
//!
//! The central object is the weighted total error `V(E) = beta' E beta / 2`
//! built from the epsilon-scaled Perron weights. Around a level `eta` two
//! nested regions matter:
//!
//! * `Phi_eta`: every pairwise error at most `eta`;
//! * `Psi_eta`: `V < beta_min^2 eta / 2`, a sublevel set of `V` that is
//!   contained in `Phi_eta` and positively invariant along the flow.
//!
//! [`decay_certificate`] checks invariance and exponential decay of `V` after
//! the trajectory first enters `Psi_eta`, producing a [`DecayReport`]. For
//! strongly connected graphs the closed-form rate of [`theoretical_rate`] is
//! verified directly; otherwise a positive empirical rate is extracted from
//! centered differences. [`epsilon_search`] retries the certificate with
//! geometrically shrinking epsilon until it passes.

use crate::digraph::{beta_weights, condensation, BetaWeights, Condensation, Digraph};
use crate::dynamics::{StateMatrix, Trajectory};
use crate::riccati::{error_from_states, lemma_constants, total_error, ErrorMatrix};
use crate::{Error, Result};

/// Values at or below this floor are numerically indistinguishable from
/// exact synchronization and are excluded from rate fits.
const FIT_FLOOR: f64 = 1e-14;
/// Minimum number of usable samples for a rate fit.
const MIN_FIT_SAMPLES: usize = 10;
/// Multiplicative slack on the closed-form exponential envelope.
const ENVELOPE_SLACK: f64 = 1e-6;
/// Absolute slack on the closed-form exponential envelope, for the case of a
/// vanishing value at entry time.
const ENVELOPE_ABS_SLACK: f64 = 1e-24;
/// Additive slack when validating `dV/dt <= -c V` at recorded samples.
const DERIVATIVE_SLACK: f64 = 1e-8;
/// Largest admissible sampling stride for certificates (centered differences
/// degrade beyond this).
const MAX_CERT_STRIDE: f64 = 1e-2;
/// Starting value of the epsilon search.
const EPSILON_START: f64 = 0.1;
/// Number of halvings attempted by the epsilon search.
const EPSILON_HALVINGS: usize = 20;

/// Level parameter and weighting that define the regions `Phi_eta`/`Psi_eta`.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    eta: f64,
    beta: BetaWeights,
}

impl RegionSpec {
    /// Requires `0 < eta < 1`.
    pub fn new(eta: f64, beta: BetaWeights) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Validation(format!(
                "eta must lie strictly between 0 and 1, got {eta}"
            )));
        }
        Ok(Self { eta, beta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> &BetaWeights {
        &self.beta
    }

    /// Sublevel threshold of `Psi_eta`: `beta_min^2 eta / 2`.
    pub fn psi_threshold(&self) -> f64 {
        let b = self.beta.beta_min();
        0.5 * b * b * self.eta
    }
}

/// Outcome classification of a [`DecayReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Entered `Psi_eta` and every certificate check held.
    Pass,
    /// Entered `Psi_eta` but at least one check failed.
    Fail,
    /// Never entered `Psi_eta` within the horizon.
    NeverEntered,
}

/// Result of a decay-certificate run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Slope of the least-squares line through `ln V` after entry; negative
    /// for decaying trajectories, `-inf` when `V` is identically at the
    /// round-off floor.
    pub fitted_rate: f64,
    /// Coefficient of determination of that fit, in `[0, 1]`.
    pub fit_r2: f64,
    /// Closed-form rate for strongly connected graphs; `None` when the graph
    /// has more than one strongly connected block.
    pub theoretical_rate: Option<f64>,
    /// Whether invariance and the decay bounds all held after entry.
    pub certificate_passed: bool,
    /// First recorded time inside `Psi_eta`, if any.
    pub first_entry_time: Option<f64>,
}

impl DecayReport {
    pub fn verdict(&self) -> Verdict {
        if self.first_entry_time.is_none() {
            Verdict::NeverEntered
        } else if self.certificate_passed {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Flat `key=value` block appended to run summaries.
    pub fn summary_block(&self, epsilon: f64) -> String {
        let certificate = match self.verdict() {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NeverEntered => "never_entered",
        };
        let theoretical = match self.theoretical_rate {
            Some(c) => format!("{c:.16e}"),
            None => "none".to_owned(),
        };
        let entry = match self.first_entry_time {
            Some(t) => format!("{t:.16e}"),
            None => "none".to_owned(),
        };
        format!(
            "fitted_rate={:.16e}\nfit_r2={:.16e}\ntheoretical_rate={}\ncertificate={}\nentry_time={}\nepsilon={:.16e}\n",
            self.fitted_rate, self.fit_r2, theoretical, certificate, entry, epsilon
        )
    }
}

/// Largest pairwise chord distance `max_ij |r_i - r_j|`.
pub fn sync_diameter(state: &StateMatrix) -> f64 {
    let m = state.m();
    let mut max = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            max = max.max((state.row(i) - state.row(j)).norm());
        }
    }
    max
}

/// Least-squares slope of `ln value` against time.
///
/// Samples with values at or below the `1e-14` floor are dropped before
/// fitting; at least 10 must remain. Returns `(rate, r2)`; a zero-variance
/// response reports `(0.0, 0.0)`.
pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > FIT_FLOOR)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_FIT_SAMPLES} samples above the {FIT_FLOOR:e} floor, got {}",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let t_mean = window.iter().map(|(t, _)| t).sum::<f64>() / n;
    let y_mean = window.iter().map(|(_, y)| y).sum::<f64>() / n;
    let stt: f64 = window.iter().map(|(t, _)| (t - t_mean).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InsufficientData(
            "all usable samples share one time instant".into(),
        ));
    }
    let sty: f64 = window
        .iter()
        .map(|(t, y)| (t - t_mean) * (y - y_mean))
        .sum();
    let ss_tot: f64 = window.iter().map(|(_, y)| (y - y_mean).powi(2)).sum();
    if ss_tot <= 1e-28 {
        return Ok((0.0, 0.0));
    }
    let slope = sty / stt;
    let ss_res: f64 = window
        .iter()
        .map(|(t, y)| (y - y_mean - slope * (t - t_mean)).powi(2))
        .sum();
    Ok((slope, (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)))
}

/// Closed-form decay rate `c = k (1 - eta) beta_min c_hat / (2 beta_max^2)`
/// for a strongly connected digraph.
pub fn theoretical_rate(
    g: &Digraph,
    beta: &BetaWeights,
    lc: &crate::riccati::LemmaConstants,
    k: f64,
    eta: f64,
) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Validation(format!(
            "eta must lie strictly between 0 and 1, got {eta}"
        )));
    }
    let c = condensation(g);
    if c.blocks().len() != 1 {
        return Err(Error::NotStronglyConnected(format!(
            "closed-form rate needs one strongly connected block, found {}",
            c.blocks().len()
        )));
    }
    Ok(k * (1.0 - eta) * beta.beta_min() * lc.c_hat / (2.0 * beta.beta_max() * beta.beta_max()))
}

/// Region membership of an error matrix: `(in_phi, in_psi)` where `in_phi`
/// means every entry is at most `eta` and `in_psi` means
/// `V(E) < beta_min^2 eta / 2`.
///
/// Panics if the matrix dimension and the weighting disagree.
pub fn region_membership(e: &ErrorMatrix, spec: &RegionSpec) -> (bool, bool) {
    let v = total_error(e, spec.beta()).expect("dimensions agree");
    (e.max_entry() <= spec.eta(), v < spec.psi_threshold())
}

/// Runs the decay certificate along a recorded trajectory.
///
/// After the first sample inside `Psi_eta` the following must hold:
///
/// 1. invariance: every later sample stays inside `Psi_eta`;
/// 2. for a single strongly connected block, the closed-form envelope
///    `V(t) <= V(T) e^{-c (t-T)} (1 + 1e-6)` at every sample above the
///    round-off floor;
/// 3. a positive empirical rate: `c_fit` is the first percentile of
///    `-V'/V` over interior post-entry samples (so `V' <= -c_fit V` holds on
///    at least 99% of them) and must be positive; additionally no such sample
///    may show resolvable growth (`V' < 1e-8`), which makes
///    `V' <= -c V + 1e-8` valid at every sample for some positive
///    `c <= c_fit`.
///
/// The fitted rate and its goodness of fit are reported alongside. A
/// trajectory that never enters `Psi_eta` yields a report whose verdict is
/// [`Verdict::NeverEntered`]; that is a finding, not an error.
///
/// The sampling stride must be at most `1e-2` time units throughout.
pub fn decay_certificate(
    traj: &Trajectory,
    g: &Digraph,
    k: f64,
    spec: &RegionSpec,
) -> Result<DecayReport> {
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "certificate needs at least 2 samples, got {}",
            times.len()
        )));
    }
    for w in times.windows(2) {
        let stride = w[1] - w[0];
        if stride > MAX_CERT_STRIDE * (1.0 + 1e-9) {
            return Err(Error::Validation(format!(
                "sampling stride {stride} exceeds the certificate maximum {MAX_CERT_STRIDE}"
            )));
        }
    }

    let cond = condensation(g);
    let mu = cond.blocks().len();
    let theoretical = if mu == 1 {
        let lc = lemma_constants(g, &cond)?;
        Some(theoretical_rate(g, spec.beta(), &lc, k, spec.eta())?)
    } else {
        None
    };

    let v: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| total_error(&error_from_states(s), spec.beta()))
        .collect::<Result<_>>()?;

    let threshold = spec.psi_threshold();
    let entry = match v.iter().position(|&val| val < threshold) {
        Some(s) => s,
        None => {
            return Ok(DecayReport {
                fitted_rate: 0.0,
                fit_r2: 0.0,
                theoretical_rate: theoretical,
                certificate_passed: false,
                first_entry_time: None,
            });
        }
    };
    let t_entry = times[entry];

    // (1) positive invariance of Psi_eta.
    let invariant = v[entry..].iter().all(|&val| val < threshold);

    // (2) closed-form envelope, at samples distinguishable from round-off.
    let envelope_ok = match theoretical {
        Some(c) => {
            let v_entry = v[entry];
            (entry..times.len()).all(|s| {
                v[s] <= FIT_FLOOR
                    || v[s]
                        <= v_entry * (-c * (times[s] - t_entry)).exp() * (1.0 + ENVELOPE_SLACK)
                            + ENVELOPE_ABS_SLACK
            })
        }
        None => true,
    };

    // (3) empirical rate from centered differences on interior samples with
    // the value and both neighbors above the floor.
    let mut rhos: Vec<(f64, f64)> = Vec::new();
    for s in (entry + 1)..times.len().saturating_sub(1) {
        if v[s] > FIT_FLOOR && v[s - 1] > FIT_FLOOR && v[s + 1] > FIT_FLOOR {
            let dvdt = (v[s + 1] - v[s - 1]) / (times[s + 1] - times[s - 1]);
            rhos.push((dvdt, -dvdt / v[s]));
        }
    }
    let empirical_ok;
    let fitted_rate;
    let fit_r2;
    if rhos.is_empty() {
        // Synchronized to round-off over the whole post-entry window: the
        // decay checks hold vacuously and the rate is effectively infinite.
        let all_floored = v[entry..].iter().all(|&val| val <= FIT_FLOOR);
        empirical_ok = all_floored;
        if all_floored {
            fitted_rate = f64::NEG_INFINITY;
            fit_r2 = 1.0;
        } else {
            let (r, r2) = fit_exponential_rate(&times[entry..], &v[entry..])?;
            fitted_rate = r;
            fit_r2 = r2;
        }
    } else {
        let mut sorted: Vec<f64> = rhos.iter().map(|&(_, rho)| rho).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
        let c_fit = sorted[(sorted.len() as f64 * 0.01).floor() as usize];
        empirical_ok = c_fit > 0.0 && rhos.iter().all(|&(dvdt, _)| dvdt < DERIVATIVE_SLACK);
        if v[entry..].iter().all(|&val| val <= FIT_FLOOR) {
            fitted_rate = f64::NEG_INFINITY;
            fit_r2 = 1.0;
        } else {
            let (r, r2) = fit_exponential_rate(&times[entry..], &v[entry..])?;
            fitted_rate = r;
            fit_r2 = r2;
        }
    }

    Ok(DecayReport {
        fitted_rate,
        fit_r2,
        theoretical_rate: theoretical,
        certificate_passed: invariant && envelope_ok && empirical_ok && fitted_rate < 0.0,
        first_entry_time: Some(t_entry),
    })
}

/// Retries [`decay_certificate`] with `epsilon = 0.1, 0.05, ...`, halving up
/// to 20 times, and returns the first passing `(epsilon, report)`.
pub fn epsilon_search(
    traj: &Trajectory,
    g: &Digraph,
    cond: &Condensation,
    k: f64,
    eta: f64,
) -> Result<(f64, DecayReport)> {
    let mut epsilon = EPSILON_START;
    for attempt in 0..=EPSILON_HALVINGS {
        let beta = beta_weights(cond, g, epsilon)?;
        let spec = RegionSpec::new(eta, beta)?;
        let report = decay_certificate(traj, g, k, &spec)?;
        if report.verdict() == Verdict::Pass {
            return Ok((epsilon, report));
        }
        if attempt < EPSILON_HALVINGS {
            epsilon *= 0.5;
        }
    }
    Err(Error::NoFeasibleEpsilon {
        attempts: EPSILON_HALVINGS + 1,
        last: epsilon,
    })
}
