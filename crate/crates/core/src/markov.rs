//! Two-state latent chain: transition and emission matrices, stationary
//! distribution, exact finite-time marginals and trajectory sampling.
//!
//! State index convention, used everywhere in this crate:
//! `0 = unmastered`, `1 = mastered`. Responses: `0 = incorrect`,
//! `1 = correct`. Some presentations of the model list the mastered row of
//! the transition matrix first; transcribed into this convention the
//! matrices are
//!
//! ```text
//! A = | 1 - p_learn    p_learn      |      B = | 1 - p_guess   p_guess     |
//!     | p_forget       1 - p_forget |          | p_slip        1 - p_slip  |
//! ```
//!
//! where `A[i][j] = P(Z_{t+1} = j | Z_t = i)` and `B[i][k] = P(X_t = k | Z_t = i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::BktParams;
use crate::rng::{bernoulli, Stream, StreamKey};

pub const UNMASTERED: usize = 0;
pub const MASTERED: usize = 1;

/// Row-stochastic 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stochastic2 {
    pub rows: [[f64; 2]; 2],
}

pub type Transition2 = Stochastic2;
pub type Emission2 = Stochastic2;

impl Stochastic2 {
    pub const IDENTITY: Stochastic2 = Stochastic2 {
        rows: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    /// Distribution one step later: `A^T v`.
    pub fn propagate(&self, v: [f64; 2]) -> [f64; 2] {
        let a = &self.rows;
        [v[0] * a[0][0] + v[1] * a[1][0], v[0] * a[0][1] + v[1] * a[1][1]]
    }

    pub fn mul(&self, other: &Stochastic2) -> Stochastic2 {
        let (a, b) = (&self.rows, &other.rows);
        let mut rows = [[0.0; 2]; 2];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Stochastic2 { rows }
    }

    /// `self^t` by repeated squaring.
    pub fn pow(&self, mut t: u64) -> Stochastic2 {
        let mut acc = Stochastic2::IDENTITY;
        let mut base = *self;
        while t > 0 {
            if t & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            t >>= 1;
        }
        acc
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().all(|&x| (0.0..=1.0).contains(&x)) && (r[0] + r[1] - 1.0).abs() <= tol)
    }
}

/// Transition and emission matrices under the `0 = unmastered` convention.
pub fn build_matrices(params: &BktParams) -> (Transition2, Emission2) {
    let a = Stochastic2 {
        rows: [
            [1.0 - params.p_learn, params.p_learn],
            [params.p_forget, 1.0 - params.p_forget],
        ],
    };
    let b = Stochastic2 {
        rows: [
            [1.0 - params.p_guess, params.p_guess],
            [params.p_slip, 1.0 - params.p_slip],
        ],
    };
    (a, b)
}

/// Long-run latent distribution `(P(Z = 0), P(Z = 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Set when `p_learn + p_forget = 2`: the chain alternates deterministically,
    /// so the distribution is stationary but marginals never converge to it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub periodic: bool,
}

impl StationaryDist {
    pub fn as_array(&self) -> [f64; 2] {
        [self.lambda0, self.lambda1]
    }
}

/// `(p_forget, p_learn) / (p_learn + p_forget)`.
///
/// The smaller entry is computed by division and the larger as its
/// complement, so the pair sums to exactly one.
pub fn stationary_closed_form(params: &BktParams) -> Result<StationaryDist> {
    let (l, f) = (params.p_learn, params.p_forget);
    let total = l + f;
    if total == 0.0 {
        return Err(Error::Reducible);
    }
    let (lambda0, lambda1) = if f <= l {
        let l0 = f / total;
        (l0, 1.0 - l0)
    } else {
        let l1 = l / total;
        (1.0 - l1, l1)
    };
    Ok(StationaryDist {
        lambda0,
        lambda1,
        periodic: total == 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerStatus {
    Converged,
    /// Iterates alternate without decay.
    Periodic,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub dist: [f64; 2],
    pub iterations: usize,
    pub status: PowerStatus,
}

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 1_000_000;

/// Stationary distribution by iterating `v <- A^T v`.
///
/// Two iterates run side by side, started from `(1, 0)` and `(0, 1)`. For a
/// two-state chain the stationary mass lies between them at every step, so
/// their gap bounds the error; iteration stops once it is at most `tol` and
/// returns the midpoint. Alternation that does not decay, detected by
/// comparing iterates `t` and `t + 1` of the first run against `t + 2`, is
/// reported as [`PowerStatus::Periodic`].
pub fn stationary_power_iteration(transition: &Transition2, tol: f64, max_iters: usize) -> PowerIteration {
    let mut lo_prev = [1.0, 0.0];
    let mut lo = transition.propagate(lo_prev);
    let mut hi = transition.propagate([0.0, 1.0]);
    for it in 1..=max_iters {
        if (lo[1] - hi[1]).abs() <= tol {
            return PowerIteration {
                dist: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
                iterations: it,
                status: PowerStatus::Converged,
            };
        }
        let lo_next = transition.propagate(lo);
        let step = (lo[1] - lo_prev[1]).abs();
        let next_step = (lo_next[1] - lo[1]).abs();
        if (lo_next[1] - lo_prev[1]).abs() <= tol && next_step > tol.sqrt() && next_step >= step * (1.0 - 1e-9) {
            return PowerIteration {
                dist: lo_next,
                iterations: it + 1,
                status: PowerStatus::Periodic,
            };
        }
        lo_prev = lo;
        lo = lo_next;
        hi = transition.propagate(hi);
    }
    PowerIteration {
        dist: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
        iterations: max_iters,
        status: PowerStatus::MaxIterations,
    }
}

/// `P(Z_t = 1)` with `P(Z_0 = 1) = p_init`, by exact matrix power.
pub fn marginal_at(params: &BktParams, t: u64) -> f64 {
    if t == 0 {
        return params.p_init;
    }
    let (a, _) = build_matrices(params);
    let at = a.pow(t);
    (1.0 - params.p_init) * at.get(UNMASTERED, MASTERED) + params.p_init * at.get(MASTERED, MASTERED)
}

/// Where a trajectory's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub key: StreamKey,
    /// ChaCha word position of the stream when sampling began.
    pub word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub latent: Vec<u8>,
    pub emitted: Vec<u8>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.latent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latent.is_empty()
    }
}

/// Draws `len` latent states and responses. The first latent state is
/// `Bernoulli(p_init)`; each response is drawn right after its state.
pub fn sample_trajectory(params: &BktParams, len: usize, rng: &mut Stream) -> Result<Trajectory> {
    if len == 0 {
        return Err(Error::Precondition("trajectory length must be at least 1".into()));
    }
    let provenance = Provenance {
        key: rng.key(),
        word_pos: rng.word_pos(),
    };
    let mut latent = Vec::with_capacity(len);
    let mut emitted = Vec::with_capacity(len);
    let mut z = bernoulli(rng, params.p_init);
    for t in 0..len {
        if t > 0 {
            z = if z {
                !bernoulli(rng, params.p_forget)
            } else {
                bernoulli(rng, params.p_learn)
            };
        }
        let p_correct = if z { 1.0 - params.p_slip } else { params.p_guess };
        latent.push(z as u8);
        emitted.push(bernoulli(rng, p_correct) as u8);
    }
    Ok(Trajectory {
        latent,
        emitted,
        provenance,
    })
}
