//! Logistic item response functions: the 4PL family and its 1PL/2PL/3PL
//! special cases, the compensatory multidimensional 4PL, a random-walk
//! dynamic Rasch simulator, and a closed-form asymptote fit.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DynamicIrtConfig, Irf4pl, MirtIrf};
use crate::rng::{bernoulli, Stream};

/// `1 / (1 + exp(-z))` without overflow for large `|z|`.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `c + (d - c) * logistic(a * (theta - b))`.
pub fn irf_4pl(theta: f64, item: &Irf4pl) -> f64 {
    scale_into(logistic(item.a * (theta - item.b)), item.c, item.d)
}

// `c + (d - c) * l` can round one ulp past `d` when `l == 1`
#[inline]
fn scale_into(l: f64, c: f64, d: f64) -> f64 {
    (c + (d - c) * l).min(d)
}

/// Analytic derivative of [`irf_4pl`] with respect to `theta`.
pub fn irf_4pl_slope(theta: f64, item: &Irf4pl) -> f64 {
    let l = logistic(item.a * (theta - item.b));
    item.a * (item.d - item.c) * l * (1.0 - l)
}

/// Steepest slope of the curve, reached at `theta = b`: `a (d - c) / 4`.
pub fn irf_slope_max(item: &Irf4pl) -> f64 {
    item.a * (item.d - item.c) / 4.0
}

/// `c + (d - c) * logistic(loadings . theta + intercept)`.
pub fn irf_mirt(theta: &[f64], item: &MirtIrf) -> Result<f64> {
    if theta.len() != item.loadings.len() {
        return Err(Error::DimensionMismatch {
            expected: item.loadings.len(),
            got: theta.len(),
        });
    }
    let z: f64 = item.loadings.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + item.intercept;
    Ok(scale_into(logistic(z), item.c, item.d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicIrtPath {
    /// Ability after each step, `theta_1 .. theta_T`.
    pub theta: Vec<f64>,
    /// `responses[t][i]`: response to item `i` at step `t + 1`.
    pub responses: Vec<Vec<u8>>,
}

/// Random-walk ability `theta_t = theta_{t-1} + eps_t`, `eps_t ~ N(0, noise_sd^2)`,
/// with every item answered once per step under a Rasch link.
pub fn simulate_dynamic_irt(config: &DynamicIrtConfig, steps: usize, rng: &mut Stream) -> Result<DynamicIrtPath> {
    if steps == 0 {
        return Err(Error::Precondition("number of steps must be at least 1".into()));
    }
    let mut theta = config.theta0;
    let mut path = DynamicIrtPath {
        theta: Vec::with_capacity(steps),
        responses: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let eps: f64 = StandardNormal.sample(rng);
        theta += config.noise_sd * eps;
        let row = config
            .difficulties
            .iter()
            .map(|&b| bernoulli(rng, logistic(theta - b)) as u8)
            .collect();
        path.theta.push(theta);
        path.responses.push(row);
    }
    Ok(path)
}

/// One point of an empirical response curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Ability minus difficulty.
    pub advantage: f64,
    pub proportion: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdFit {
    pub c: f64,
    pub d: f64,
    /// Count-weighted root mean squared residual.
    pub weighted_rmse: f64,
}

/// Fits the asymptotes of `p = c + (d - c) logistic(a_fixed * x)` by
/// count-weighted least squares.
///
/// The model is linear in `(c, d)`, so the unconstrained optimum comes from
/// the 2x2 normal equations. If it falls outside `0 <= c <= d <= 1` the
/// optimum lies on an edge of that triangle (`c = 0`, `d = 1` or `c = d`), and
/// each edge is a one-dimensional least-squares problem. A best fit with
/// `c = d` means no increasing curve beats a flat line and is reported as
/// [`Error::DegenerateFit`].
pub fn fit_irf_cd(points: &[CurvePoint], a_fixed: f64) -> Result<CdFit> {
    if !(a_fixed > 0.0 && a_fixed.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "discrimination must be positive, got {a_fixed}"
        )));
    }
    let used: Vec<&CurvePoint> = points.iter().filter(|p| p.count > 0).collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 bins with observations, got {}",
            used.len()
        )));
    }
    if used.iter().all(|p| p.advantage == used[0].advantage) {
        return Err(Error::DegenerateFit("all advantages are equal".into()));
    }

    // rows (weight, 1 - L, L, p)
    let rows: Vec<[f64; 4]> = used
        .iter()
        .map(|p| {
            let l = logistic(a_fixed * p.advantage);
            [p.count as f64, 1.0 - l, l, p.proportion]
        })
        .collect();
    let sum = |f: &dyn Fn(&[f64; 4]) -> f64| rows.iter().map(|r| r[0] * f(r)).sum::<f64>();
    let suu = sum(&|r| r[1] * r[1]);
    let suv = sum(&|r| r[1] * r[2]);
    let svv = sum(&|r| r[2] * r[2]);
    let spu = sum(&|r| r[3] * r[1]);
    let spv = sum(&|r| r[3] * r[2]);
    let sw = sum(&|_| 1.0);
    let sp = sum(&|r| r[3]);
    let sse = |c: f64, d: f64| sum(&|r| (r[3] - c * r[1] - d * r[2]).powi(2));

    let mut candidates = Vec::with_capacity(4);
    let det = suu * svv - suv * suv;
    if det > 0.0 {
        let c = (spu * svv - spv * suv) / det;
        let d = (suu * spv - suv * spu) / det;
        if 0.0 <= c && c <= d && d <= 1.0 {
            candidates.push((c, d));
        }
    }
    if svv > 0.0 {
        candidates.push((0.0, (spv / svv).clamp(0.0, 1.0)));
    }
    if suu > 0.0 {
        let c = (spu - suv) / suu;
        candidates.push((c.clamp(0.0, 1.0), 1.0));
    }
    let k = (sp / sw).clamp(0.0, 1.0);
    candidates.push((k, k));

    let (c, d, err) = candidates
        .into_iter()
        .map(|(c, d)| (c, d, sse(c, d)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .expect("the flat candidate is always present");
    if c >= d {
        return Err(Error::DegenerateFit(format!(
            "best fit is flat at {c}; the curve does not increase"
        )));
    }
    Ok(CdFit {
        c,
        d,
        weighted_rmse: (err / sw).sqrt(),
    })
}
