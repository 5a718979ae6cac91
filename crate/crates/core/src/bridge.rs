//! Long-run response law of the knowledge-tracing chain, written as an item
//! response function.
//!
//! With forgetting allowed, the latent chain has stationary mastery
//! probability `p_learn / (p_learn + p_forget)`. Substituting
//! `theta = ln p_learn` and `b = ln p_forget` turns this into
//! `logistic(theta - b)`, a Rasch curve. Mixing it through the guess/slip
//! emission gives
//!
//! ```text
//! P(X = 1) = p_guess + ((1 - p_slip) - p_guess) * logistic(theta - b)
//! ```
//!
//! which is a 4PL curve with discrimination fixed at 1, `c = p_guess` and
//! `d = 1 - p_slip`.
//!
//! Two versions are provided. [`bkt_to_irt`] applies the map to one skill,
//! where `theta` and `b` carry the same index and cannot be told apart from
//! equilibrium data alone: only their difference is identified. These maps
//! are exact reparameterisations, not estimators. [`learner_item_equilibrium`]
//! gives every learner-item pair its own chain with a learner-specific
//! learning rate and item-specific forgetting, guess and slip rates, which
//! separates person and item parameters the way an IRT model does.
//!
//! Without forgetting the chain is absorbed in the mastered state and the
//! long-run correct rate is simply `1 - p_slip` ([`classic_limit`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::logistic;
use crate::markov::{build_matrices, marginal_at, stationary_closed_form};
use crate::params::BktParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillEquilibrium {
    /// `ln p_learn`
    pub theta_k: f64,
    /// `ln p_forget`
    pub b_k: f64,
    /// `p_guess`
    pub c: f64,
    /// `1 - p_slip`
    pub d: f64,
    pub p_correct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerItemEquilibrium {
    /// `ln p_learn` of the learner.
    pub theta_p: f64,
    /// `ln p_forget` of the item.
    pub b_i: f64,
    pub c_i: f64,
    pub d_i: f64,
    pub p_correct: f64,
}

fn require_ergodic(p_learn: f64, p_forget: f64) -> Result<()> {
    if p_learn > 0.0 && p_forget > 0.0 {
        Ok(())
    } else {
        Err(Error::NonErgodic { p_learn, p_forget })
    }
}

/// Equilibrium correct-response probability, computed on the IRT side.
pub fn equilibrium_p_correct(p_learn: f64, p_forget: f64, p_slip: f64, p_guess: f64) -> f64 {
    p_guess + ((1.0 - p_slip) - p_guess) * logistic(p_learn.ln() - p_forget.ln())
}

pub fn bkt_to_irt(params: &BktParams) -> Result<SkillEquilibrium> {
    require_ergodic(params.p_learn, params.p_forget)?;
    let theta_k = params.p_learn.ln();
    let b_k = params.p_forget.ln();
    Ok(SkillEquilibrium {
        theta_k,
        b_k,
        c: params.p_guess,
        d: 1.0 - params.p_slip,
        p_correct: params.p_guess + ((1.0 - params.p_slip) - params.p_guess) * logistic(theta_k - b_k),
    })
}

pub fn learner_item_equilibrium(
    p_learn_p: f64,
    p_forget_i: f64,
    p_slip_i: f64,
    p_guess_i: f64,
) -> Result<LearnerItemEquilibrium> {
    require_ergodic(p_learn_p, p_forget_i)?;
    let theta_p = p_learn_p.ln();
    let b_i = p_forget_i.ln();
    Ok(LearnerItemEquilibrium {
        theta_p,
        b_i,
        c_i: p_guess_i,
        d_i: 1.0 - p_slip_i,
        p_correct: p_guess_i + ((1.0 - p_slip_i) - p_guess_i) * logistic(theta_p - b_i),
    })
}

/// Parameters recovered from an equilibrium curve. `p_init` does not affect
/// the long-run law, so it is set to 0.5 and carries no information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOnlyParams {
    pub params: BktParams,
    pub equilibrium_only: bool,
}

/// Inverse of [`bkt_to_irt`]: `p_learn = e^theta`, `p_forget = e^b`,
/// `p_guess = c`, `p_slip = 1 - d`.
pub fn irt_to_bkt(theta: f64, b: f64, c: f64, d: f64) -> Result<EquilibriumOnlyParams> {
    if theta.is_nan() || theta > 0.0 {
        return Err(Error::OutOfDomain {
            name: "theta",
            value: theta,
        });
    }
    if b.is_nan() || b > 0.0 {
        return Err(Error::OutOfDomain { name: "b", value: b });
    }
    if !(0.0 <= c && c < d && d <= 1.0) {
        return Err(Error::InvalidItem(format!(
            "asymptotes must satisfy 0 <= c < d <= 1, got c = {c}, d = {d}"
        )));
    }
    Ok(EquilibriumOnlyParams {
        params: BktParams {
            p_init: 0.5,
            p_learn: theta.exp(),
            p_forget: b.exp(),
            p_slip: 1.0 - d,
            p_guess: c,
        },
        equilibrium_only: true,
    })
}

/// Long-run correct-response probability without forgetting: `1 - p_slip`.
pub fn classic_limit(params: &BktParams) -> Result<f64> {
    if params.p_forget != 0.0 || params.p_learn.is_nan() || params.p_learn <= 0.0 {
        return Err(Error::Precondition(format!(
            "the no-forgetting limit needs p_forget = 0 and p_learn > 0, got p_forget = {}, p_learn = {}",
            params.p_forget, params.p_learn
        )));
    }
    Ok(1.0 - params.p_slip)
}

/// `P(X_t = 1)` from the exact latent marginal at step `t`.
pub fn response_marginal_at(params: &BktParams, t: u64) -> f64 {
    let m = marginal_at(params, t);
    let (_, b) = build_matrices(params);
    (1.0 - m) * b.get(0, 1) + m * b.get(1, 1)
}

/// Distance at step `t` between the response probability and its long-run
/// value, `|P(X_t = 1) - P(X = 1)|`.
pub fn equilibrium_gap(params: &BktParams, t: u64) -> Result<f64> {
    require_ergodic(params.p_learn, params.p_forget)?;
    let lambda = stationary_closed_form(params)?;
    let (_, b) = build_matrices(params);
    let long_run = lambda.lambda0 * b.get(0, 1) + lambda.lambda1 * b.get(1, 1);
    Ok((response_marginal_at(params, t) - long_run).abs())
}

/// Closed form of [`equilibrium_gap`]:
/// `|1 - p_slip - p_guess| * |1 - p_learn - p_forget|^t * |p_init - lambda_1|`.
pub fn equilibrium_gap_closed_form(params: &BktParams, t: u64) -> Result<f64> {
    require_ergodic(params.p_learn, params.p_forget)?;
    let lambda1 = params.p_learn / (params.p_learn + params.p_forget);
    let rate = (1.0 - params.p_learn - params.p_forget).abs();
    Ok((1.0 - params.p_slip - params.p_guess).abs() * rate.powf(t as f64) * (params.p_init - lambda1).abs())
}
