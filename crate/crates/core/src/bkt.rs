//! Inference and estimation for the knowledge-tracing model: forward
//! filtering, panel log-likelihood, and Baum-Welch EM with optional
//! no-forgetting and identifiability constraints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{build_matrices, sample_trajectory, Emission2, Transition2};
use crate::panel::{ResponsePanel, ResponseRecord};
use crate::params::{validate_bkt, BktParams, Constraints};
use crate::rng::Stream;

/// Per-attempt output of [`forward_filter`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// `P(Z_t = 1 | X_1..X_t)`.
    pub posterior: Vec<f64>,
    /// `P(X_t = 1 | X_1..X_{t-1})`.
    pub predictive: Vec<f64>,
    pub log_likelihood: f64,
}

/// Runs the scaled forward recursion over one response sequence.
pub fn forward_filter(params: &BktParams, responses: &[u8]) -> Result<FilterResult> {
    if responses.is_empty() {
        return Err(Error::Precondition("response sequence is empty".into()));
    }
    let (a, b) = build_matrices(params);
    let mut posterior = Vec::with_capacity(responses.len());
    let mut predictive = Vec::with_capacity(responses.len());
    let mut log_likelihood = 0.0;
    let mut prior = [1.0 - params.p_init, params.p_init];
    for (t, &x) in responses.iter().enumerate() {
        if t > 0 {
            prior = a.propagate(prior);
        }
        let p_correct = prior[0] * b.get(0, 1) + prior[1] * b.get(1, 1);
        predictive.push(p_correct);
        let x = usize::from(x);
        let joint = [prior[0] * b.get(0, x), prior[1] * b.get(1, x)];
        let evidence = joint[0] + joint[1];
        if evidence <= 0.0 {
            return Err(Error::ZeroLikelihood { attempt: t + 1 });
        }
        log_likelihood += evidence.ln();
        prior = [joint[0] / evidence, joint[1] / evidence];
        posterior.push(prior[1]);
    }
    Ok(FilterResult {
        posterior,
        predictive,
        log_likelihood,
    })
}

/// Total log-likelihood of every sequence for `skill_id`; sequences are
/// independent given the shared parameters.
pub fn sequence_loglik(params: &BktParams, panel: &ResponsePanel, skill_id: u32) -> Result<f64> {
    let seqs = panel.sequences(skill_id);
    if seqs.is_empty() {
        return Err(Error::UnknownSkill(skill_id));
    }
    seqs.iter()
        .map(|(_, x)| forward_filter(params, x).map(|f| f.log_likelihood))
        .sum()
}

/// EM stopping rule and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when `|dL| / (1 + |L|)` falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iters: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: BktParams,
    /// Log-likelihood before the first M-step, then after each one.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_set: Constraints,
    /// Every response identical and no constraints requested; the estimate
    /// sits on the boundary and is not meaningful.
    pub degenerate_data: bool,
}

/// Estimates are kept this far away from 0 and 1.
pub const BOUNDARY_NUDGE: f64 = 1e-9;
/// Upper bound for guess and slip under the identifiability constraint.
pub const IDENTIFIED_MAX: f64 = 0.5 - 1e-6;

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    init1: f64,
    n_seq: f64,
    // expected transitions out of each state, and the switching part
    from0: f64,
    learn: f64,
    from1: f64,
    forget: f64,
    // expected occupancy, and the "surprising" response part
    occ0: f64,
    guess: f64,
    occ1: f64,
    slip: f64,
    loglik: f64,
}

impl Counts {
    fn add(mut self, o: Counts) -> Counts {
        self.init1 += o.init1;
        self.n_seq += o.n_seq;
        self.from0 += o.from0;
        self.learn += o.learn;
        self.from1 += o.from1;
        self.forget += o.forget;
        self.occ0 += o.occ0;
        self.guess += o.guess;
        self.occ1 += o.occ1;
        self.slip += o.slip;
        self.loglik += o.loglik;
        self
    }
}

/// Forward-backward over one sequence, returning its expected sufficient
/// statistics and log-likelihood.
fn expected_counts(params: &BktParams, a: &Transition2, b: &Emission2, x: &[u8]) -> Result<Counts> {
    let n = x.len();
    let mut alpha = vec![[0.0f64; 2]; n];
    let mut scale = vec![0.0f64; n];
    let mut prior = [1.0 - params.p_init, params.p_init];
    for t in 0..n {
        if t > 0 {
            prior = a.propagate(alpha[t - 1]);
        }
        let xt = usize::from(x[t]);
        let joint = [prior[0] * b.get(0, xt), prior[1] * b.get(1, xt)];
        let c = joint[0] + joint[1];
        if c <= 0.0 {
            return Err(Error::ZeroLikelihood { attempt: t + 1 });
        }
        scale[t] = c;
        alpha[t] = [joint[0] / c, joint[1] / c];
    }

    let mut counts = Counts {
        n_seq: 1.0,
        loglik: scale.iter().map(|c| c.ln()).sum(),
        ..Counts::default()
    };
    // beta holds beta_{t+1} on entry to each iteration
    let mut beta = [1.0f64, 1.0];
    for t in (0..n).rev() {
        if t + 1 < n {
            let xn = usize::from(x[t + 1]);
            let w = [b.get(0, xn) * beta[0], b.get(1, xn) * beta[1]];
            let c = scale[t + 1];
            let mut xi = [[0.0; 2]; 2];
            for (r, row) in xi.iter_mut().enumerate() {
                for (s, cell) in row.iter_mut().enumerate() {
                    *cell = alpha[t][r] * a.get(r, s) * w[s] / c;
                }
            }
            let xi_sum: f64 = xi.iter().flatten().sum();
            counts.from0 += (xi[0][0] + xi[0][1]) / xi_sum;
            counts.learn += xi[0][1] / xi_sum;
            counts.from1 += (xi[1][0] + xi[1][1]) / xi_sum;
            counts.forget += xi[1][0] / xi_sum;
            beta = [
                (a.get(0, 0) * w[0] + a.get(0, 1) * w[1]) / c,
                (a.get(1, 0) * w[0] + a.get(1, 1) * w[1]) / c,
            ];
        }
        let gamma = [alpha[t][0] * beta[0], alpha[t][1] * beta[1]];
        let g_sum = gamma[0] + gamma[1];
        let gamma = [gamma[0] / g_sum, gamma[1] / g_sum];
        counts.occ0 += gamma[0];
        counts.occ1 += gamma[1];
        if x[t] == 1 {
            counts.guess += gamma[0];
        } else {
            counts.slip += gamma[1];
        }
        if t == 0 {
            counts.init1 += gamma[1];
        }
    }
    Ok(counts)
}

fn e_step(params: &BktParams, seqs: &[(u32, Vec<u8>)]) -> Result<Counts> {
    let (a, b) = build_matrices(params);
    // collect in sequence order, then reduce serially, so the sum does not
    // depend on the thread pool
    let per_seq: Vec<Counts> = seqs
        .par_iter()
        .map(|(_, x)| expected_counts(params, &a, &b, x))
        .collect::<Result<_>>()?;
    Ok(per_seq.into_iter().fold(Counts::default(), Counts::add))
}

/// Keeps every estimated probability inside `[BOUNDARY_NUDGE, 1 - BOUNDARY_NUDGE]`
/// and inside the constraint set. Under `classic` the forgetting rate is a
/// structural zero and is left alone.
fn project(mut p: BktParams, constraints: Constraints) -> BktParams {
    let clamp = |v: f64, hi: f64| v.clamp(BOUNDARY_NUDGE, hi);
    let hi = 1.0 - BOUNDARY_NUDGE;
    let emit_hi = if constraints.identified { IDENTIFIED_MAX } else { hi };
    p.p_init = clamp(p.p_init, hi);
    p.p_learn = clamp(p.p_learn, hi);
    p.p_forget = if constraints.classic {
        0.0
    } else {
        clamp(p.p_forget, hi)
    };
    p.p_guess = clamp(p.p_guess, emit_hi);
    p.p_slip = clamp(p.p_slip, emit_hi);
    p
}

fn ratio_or(num: f64, den: f64, fallback: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        fallback
    }
}

fn m_step(current: &BktParams, c: &Counts, constraints: Constraints) -> BktParams {
    let next = BktParams {
        p_init: ratio_or(c.init1, c.n_seq, current.p_init),
        p_learn: ratio_or(c.learn, c.from0, current.p_learn),
        p_forget: ratio_or(c.forget, c.from1, current.p_forget),
        p_slip: ratio_or(c.slip, c.occ1, current.p_slip),
        p_guess: ratio_or(c.guess, c.occ0, current.p_guess),
    };
    project(next, constraints)
}

/// Fits one skill's parameters by Baum-Welch.
///
/// The starting point is first moved into the interior box used by the
/// iterations (see [`BOUNDARY_NUDGE`], [`IDENTIFIED_MAX`]); the first trace
/// entry is the log-likelihood there. Each M-step maximises the expected
/// complete-data log-likelihood over that box, and since it factorises into
/// one concave term per parameter, clamping each ratio to the box is the
/// exact constrained maximiser. The trace is therefore non-decreasing.
pub fn fit_baum_welch(
    panel: &ResponsePanel,
    skill_id: u32,
    init: &BktParams,
    constraints: Constraints,
    options: FitOptions,
) -> Result<FitReport> {
    validate_bkt(*init, constraints).map_err(|e| Error::InvalidInit(e.to_string()))?;
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tol must be positive, got {}",
            options.tol
        )));
    }
    let seqs = panel.sequences(skill_id);
    if seqs.is_empty() {
        return Err(Error::UnknownSkill(skill_id));
    }
    let first = seqs[0].1[0];
    let all_same = seqs.iter().all(|(_, x)| x.iter().all(|&v| v == first));
    let degenerate_data = all_same && constraints == Constraints::NONE;

    let mut params = project(*init, constraints);
    let mut counts = e_step(&params, &seqs)?;
    let mut trace = vec![counts.loglik];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iters {
        let next = m_step(&params, &counts, constraints);
        let next_counts = e_step(&next, &seqs)?;
        iterations += 1;
        let prev_ll = counts.loglik;
        params = next;
        counts = next_counts;
        trace.push(counts.loglik);
        if (counts.loglik - prev_ll).abs() / (1.0 + counts.loglik.abs()) < options.tol {
            converged = true;
            break;
        }
    }
    Ok(FitReport {
        params,
        loglik_trace: trace,
        iterations,
        converged: converged && !degenerate_data,
        constraint_set: constraints,
        degenerate_data,
    })
}

/// Simulates `n_people` independent learners answering `n_attempts`
/// questions on one skill. Person `p` draws from the stream keyed by
/// `(seed, p, skill_id)`; the item id of each record is its zero-based
/// attempt index.
pub fn simulate_panel(
    params: &BktParams,
    n_people: u32,
    n_attempts: u32,
    skill_id: u32,
    seed: u64,
) -> Result<ResponsePanel> {
    validate_bkt(*params, Constraints::NONE)?;
    if n_attempts == 0 {
        return Err(Error::InvalidConfig(
            "at least one attempt per person is required".into(),
        ));
    }
    let mut records = Vec::with_capacity(n_people as usize * n_attempts as usize);
    for person in 0..n_people {
        let mut rng = Stream::new(seed, "bkt.panel", [u64::from(person), u64::from(skill_id), 0, 0]);
        let traj = sample_trajectory(params, n_attempts as usize, &mut rng)?;
        records.extend(traj.emitted.iter().enumerate().map(|(t, &x)| ResponseRecord {
            person_id: person,
            item_id: t as u32,
            skill_id,
            attempt: t as u32 + 1,
            correct: x,
        }));
    }
    ResponsePanel::new(records)
}
