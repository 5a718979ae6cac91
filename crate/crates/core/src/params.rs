//! Parameter bundles shared across the crate.
//!
//! Notation used throughout: `p_init` is the prior probability of mastery
//! before the first opportunity, `p_learn` the unmastered-to-mastered
//! transition probability, `p_forget` the reverse transition, `p_slip` the
//! probability of an incorrect response while mastered, and `p_guess` the
//! probability of a correct response while unmastered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five per-skill probabilities of a knowledge-tracing model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BktParams {
    pub p_init: f64,
    pub p_learn: f64,
    pub p_forget: f64,
    pub p_slip: f64,
    pub p_guess: f64,
}

/// Optional restrictions applied by [`validate_bkt`] and the EM fitter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    /// No forgetting: `p_forget` must be exactly zero.
    pub classic: bool,
    /// `p_guess < 0.5` and `p_slip < 0.5`, which picks one member of each
    /// label-swapped pair of equal-likelihood parameter vectors.
    pub identified: bool,
}

impl Constraints {
    pub const NONE: Constraints = Constraints {
        classic: false,
        identified: false,
    };

    pub fn classic() -> Self {
        Constraints {
            classic: true,
            identified: false,
        }
    }

    pub fn identified() -> Self {
        Constraints {
            classic: false,
            identified: true,
        }
    }

    pub fn both() -> Self {
        Constraints {
            classic: true,
            identified: true,
        }
    }
}

impl BktParams {
    pub fn new(p_init: f64, p_learn: f64, p_forget: f64, p_slip: f64, p_guess: f64) -> Self {
        BktParams {
            p_init,
            p_learn,
            p_forget,
            p_slip,
            p_guess,
        }
    }

    pub(crate) fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("p_init", self.p_init),
            ("p_learn", self.p_learn),
            ("p_forget", self.p_forget),
            ("p_slip", self.p_slip),
            ("p_guess", self.p_guess),
        ]
    }

    /// Shorthand for [`validate_bkt`].
    pub fn validated(self, constraints: Constraints) -> Result<Self> {
        validate_bkt(self, constraints)
    }

    /// The same model with the latent labels exchanged.
    ///
    /// Mastered and unmastered swap roles, so learning and forgetting swap,
    /// the new guess rate is the old `1 - p_slip` and the new slip rate is the
    /// old `1 - p_guess`. Both vectors assign every response sequence the
    /// same probability.
    pub fn label_swapped(&self) -> Self {
        BktParams {
            p_init: 1.0 - self.p_init,
            p_learn: self.p_forget,
            p_forget: self.p_learn,
            p_slip: 1.0 - self.p_guess,
            p_guess: 1.0 - self.p_slip,
        }
    }
}

/// Checks every probability lies in the closed unit interval, then applies
/// the requested constraints. Returns the parameters unchanged on success.
pub fn validate_bkt(params: BktParams, constraints: Constraints) -> Result<BktParams> {
    for (field, value) in params.fields() {
        // NaN fails the range check too.
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { field, value });
        }
    }
    if constraints.classic && params.p_forget != 0.0 {
        return Err(Error::ForgettingNonzero(params.p_forget));
    }
    if constraints.identified && (params.p_guess >= 0.5 || params.p_slip >= 0.5) {
        return Err(Error::Unidentified {
            p_guess: params.p_guess,
            p_slip: params.p_slip,
        });
    }
    Ok(params)
}

/// Four-parameter logistic item: discrimination `a`, difficulty `b`, lower
/// asymptote `c` (guessing) and upper asymptote `d` (inattention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Irf4pl {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Irf4pl {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Irf4pl { a, b, c, d }.validate()
    }

    /// Rasch item: `a = 1`, `c = 0`, `d = 1`.
    pub fn one_pl(b: f64) -> Result<Self> {
        Self::new(1.0, b, 0.0, 1.0)
    }

    pub fn two_pl(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 0.0, 1.0)
    }

    pub fn three_pl(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(a, b, c, 1.0)
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidItem(format!(
                "discrimination must be positive, got {}",
                self.a
            )));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidItem(format!("difficulty must be finite, got {}", self.b)));
        }
        check_asymptotes(self.c, self.d)?;
        Ok(self)
    }
}

/// Compensatory multidimensional item: `logistic(loadings . theta + intercept)`
/// rescaled into `[c, d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirtIrf {
    pub loadings: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub d: f64,
}

impl MirtIrf {
    pub fn new(loadings: Vec<f64>, intercept: f64, c: f64, d: f64) -> Result<Self> {
        check_asymptotes(c, d)?;
        if loadings.is_empty() {
            return Err(Error::InvalidItem("loadings must be non-empty".into()));
        }
        Ok(MirtIrf {
            loadings,
            intercept,
            c,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.loadings.len()
    }
}

fn check_asymptotes(c: f64, d: f64) -> Result<()> {
    if !(0.0 <= c && c < d && d <= 1.0) {
        return Err(Error::InvalidItem(format!(
            "asymptotes must satisfy 0 <= c < d <= 1, got c = {c}, d = {d}"
        )));
    }
    Ok(())
}

/// Random-walk ability with Rasch observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicIrtConfig {
    pub theta0: f64,
    pub noise_sd: f64,
    pub difficulties: Vec<f64>,
}

impl DynamicIrtConfig {
    pub fn new(theta0: f64, noise_sd: f64, difficulties: Vec<f64>) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sd must be a nonnegative finite number, got {noise_sd}"
            )));
        }
        Ok(DynamicIrtConfig {
            theta0,
            noise_sd,
            difficulties,
        })
    }
}
