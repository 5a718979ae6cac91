//! Population simulation of learner-item chains.
//!
//! Each person gets a learning rate and each item a forgetting rate, both
//! uniform on (0, 1). Every (person, item) pair runs its own latent chain
//! from the unmastered state for a fixed number of steps, then answers once
//! with guess/slip noise. Responses pooled over all pairs and replications
//! are binned by the advantage `ln p_learn - ln p_forget`; as the number of
//! steps grows the binned proportions approach the 4PL curve with `a = 1`,
//! `c = p_guess` and `d = 1 - p_slip`.
//!
//! Every (person, item, replication, steps) cell draws from its own keyed
//! stream and bins hold integer counts, so results are bit-identical for
//! any thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::{irf_4pl, CurvePoint};
use crate::markov::marginal_at;
use crate::params::{BktParams, Irf4pl};
use crate::rng::{bernoulli, open01, Stream, StreamKey};

/// Uniform rates are drawn from `(UNIFORM_EPS, 1 - UNIFORM_EPS)` so their
/// logarithms stay finite.
pub const UNIFORM_EPS: f64 = 1e-12;
/// Advantages beyond `+-BIN_RANGE` are pooled into the outermost bins.
pub const BIN_RANGE: f64 = 8.0;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_people: usize,
    pub n_items: usize,
    pub replications: usize,
    pub iteration_counts: Vec<u32>,
    pub p_slip: f64,
    pub p_guess: f64,
    pub seed: u64,
    pub bin_width: f64,
}

impl SimConfig {
    /// 1,000 people, 100 items, 1,000 replications.
    pub fn full_scale(seed: u64) -> Self {
        SimConfig {
            n_people: 1000,
            n_items: 100,
            replications: 1000,
            iteration_counts: vec![2, 5, 50],
            p_slip: 0.1,
            p_guess: 0.1,
            seed,
            bin_width: 0.25,
        }
    }

    /// 200 people, 50 items, 200 replications; runs in seconds.
    pub fn desk(seed: u64) -> Self {
        SimConfig {
            n_people: 200,
            n_items: 50,
            replications: 200,
            ..Self::full_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_people == 0 || self.n_items == 0 || self.replications == 0 {
            return bad("people, items and replications must all be at least 1".into());
        }
        if self.iteration_counts.is_empty() || self.iteration_counts.contains(&0) {
            return bad("iteration counts must be non-empty and each at least 1".into());
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad(format!("bin width must be positive, got {}", self.bin_width));
        }
        for (name, v) in [("p_slip", self.p_slip), ("p_guess", self.p_guess)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { field: name, value: v });
            }
        }
        if self.replications >= 1 << 32 {
            return bad("at most 2^32 - 1 replications".into());
        }
        Ok(())
    }

    /// The curve the binned proportions should approach.
    pub fn equilibrium_item(&self) -> Irf4pl {
        Irf4pl {
            a: 1.0,
            b: 0.0,
            c: self.p_guess,
            d: 1.0 - self.p_slip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub p_learn: Vec<f64>,
    pub p_forget: Vec<f64>,
    /// `ln p_learn`
    pub theta: Vec<f64>,
    /// `ln p_forget`
    pub b: Vec<f64>,
}

fn uniform_rate(seed: u64, domain: &str, index: usize) -> f64 {
    let u = open01(&mut Stream::new(seed, domain, [index as u64, 0, 0, 0]));
    UNIFORM_EPS + (1.0 - 2.0 * UNIFORM_EPS) * u
}

/// Draws each person's learning rate and each item's forgetting rate from
/// streams keyed by `config.seed` and the person or item index.
pub fn draw_population(config: &SimConfig) -> Population {
    let p_learn: Vec<f64> = (0..config.n_people)
        .map(|p| uniform_rate(config.seed, "population.learn", p))
        .collect();
    let p_forget: Vec<f64> = (0..config.n_items)
        .map(|i| uniform_rate(config.seed, "population.forget", i))
        .collect();
    Population {
        theta: p_learn.iter().map(|p| p.ln()).collect(),
        b: p_forget.iter().map(|p| p.ln()).collect(),
        p_learn,
        p_forget,
    }
}

/// Bins centred on multiples of `width` covering `[-BIN_RANGE, BIN_RANGE]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub width: f64,
    half: i64,
}

impl Binning {
    pub fn new(width: f64) -> Self {
        Binning {
            width,
            half: (BIN_RANGE / width).round() as i64,
        }
    }

    pub fn len(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, advantage: f64) -> usize {
        (((advantage / self.width).round() as i64).clamp(-self.half, self.half) + self.half) as usize
    }

    pub fn center(&self, index: usize) -> f64 {
        (index as i64 - self.half) as f64 * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin_center: f64,
    pub iterations: u32,
    pub prop_correct: f64,
    pub n_obs: u64,
}

/// Non-empty bins for one step count, in ascending order of advantage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub iterations: u32,
    pub rows: Vec<BinRow>,
}

impl BinnedCurve {
    pub fn points(&self) -> Vec<CurvePoint> {
        self.rows
            .iter()
            .map(|r| CurvePoint {
                advantage: r.bin_center,
                proportion: r.prop_correct,
                count: r.n_obs,
            })
            .collect()
    }
}

/// One learner-item chain: `steps` transitions from unmastered, then one
/// response. Returns whether the response was correct.
fn run_pair(p_learn: f64, p_forget: f64, steps: u32, p_slip: f64, p_guess: f64, rng: &mut Stream) -> bool {
    let mut mastered = false;
    for _ in 0..steps {
        mastered = if mastered {
            !bernoulli(rng, p_forget)
        } else {
            bernoulli(rng, p_learn)
        };
    }
    bernoulli(rng, if mastered { 1.0 - p_slip } else { p_guess })
}

/// Stream used by pair `(person, item)` in replication `rep` of the
/// `steps`-step run.
pub fn pair_stream_key(seed: u64, person: usize, item: usize, rep: usize, steps: u32) -> StreamKey {
    StreamKey::new(
        seed,
        "experiment.pair",
        [person as u64, item as u64, rep as u64, u64::from(steps)],
    )
}

/// Runs the simulation for every configured step count. Runs on the current
/// rayon pool.
pub fn run_equilibrium_experiment(config: &SimConfig) -> Result<Vec<BinnedCurve>> {
    config.validate()?;
    let pop = draw_population(config);
    let binning = Binning::new(config.bin_width);
    let n_bins = binning.len();
    let n_t = config.iteration_counts.len();
    let bin_of: Vec<Vec<usize>> = pop
        .theta
        .iter()
        .map(|th| pop.b.iter().map(|b| binning.index(th - b)).collect())
        .collect();

    // [steps][bin] -> (observations, correct)
    let counts = (0..config.n_people)
        .into_par_iter()
        .map(|p| {
            let mut local = vec![vec![(0u64, 0u64); n_bins]; n_t];
            for (k, &steps) in config.iteration_counts.iter().enumerate() {
                for i in 0..config.n_items {
                    let cell = &mut local[k][bin_of[p][i]];
                    for rep in 0..config.replications {
                        let mut rng = pair_stream_key(config.seed, p, i, rep, steps).stream();
                        let correct = run_pair(
                            pop.p_learn[p],
                            pop.p_forget[i],
                            steps,
                            config.p_slip,
                            config.p_guess,
                            &mut rng,
                        );
                        cell.0 += 1;
                        cell.1 += u64::from(correct);
                    }
                }
            }
            local
        })
        .reduce(
            || vec![vec![(0u64, 0u64); n_bins]; n_t],
            |mut acc, part| {
                for (row_acc, row) in acc.iter_mut().zip(part) {
                    for (a, b) in row_acc.iter_mut().zip(row) {
                        a.0 += b.0;
                        a.1 += b.1;
                    }
                }
                acc
            },
        );

    Ok(config
        .iteration_counts
        .iter()
        .zip(counts)
        .map(|(&iterations, bins)| BinnedCurve {
            iterations,
            rows: bins
                .into_iter()
                .enumerate()
                .filter(|(_, (n, _))| *n > 0)
                .map(|(j, (n, c))| BinRow {
                    bin_center: binning.center(j),
                    iterations,
                    prop_correct: c as f64 / n as f64,
                    n_obs: n,
                })
                .collect(),
        })
        .collect())
}

/// Exact probability that pair `(p_learn, p_forget)` answers correctly after
/// `steps` steps from unmastered.
pub fn pair_response_probability(p_learn: f64, p_forget: f64, steps: u32, p_slip: f64, p_guess: f64) -> f64 {
    let params = BktParams::new(0.0, p_learn, p_forget, p_slip, p_guess);
    p_guess + (1.0 - p_slip - p_guess) * marginal_at(&params, u64::from(steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfComparison {
    pub max_abs_dev: f64,
    /// Observation-weighted root mean squared deviation.
    pub weighted_rmse: f64,
    pub bins_used: usize,
}

/// Deviation of a binned curve from `item`, over bins with at least
/// `min_count` observations.
pub fn compare_to_irf(curve: &BinnedCurve, item: &Irf4pl, min_count: u64) -> Result<IrfComparison> {
    let mut max_abs_dev = 0.0f64;
    let mut sq = 0.0;
    let mut weight = 0.0;
    let mut bins_used = 0;
    for r in curve.rows.iter().filter(|r| r.n_obs >= min_count && r.n_obs > 0) {
        let dev = (r.prop_correct - irf_4pl(r.bin_center, item)).abs();
        max_abs_dev = max_abs_dev.max(dev);
        sq += r.n_obs as f64 * dev * dev;
        weight += r.n_obs as f64;
        bins_used += 1;
    }
    if bins_used == 0 {
        return Err(Error::InsufficientData(format!(
            "no bin has at least {min_count} observations"
        )));
    }
    Ok(IrfComparison {
        max_abs_dev,
        weighted_rmse: (sq / weight).sqrt(),
        bins_used,
    })
}

/// Writes `bin_center,iterations,prop_correct,n_obs,irf_value` rows for
/// every curve, where `irf_value` is the equilibrium 4PL at the bin centre.
pub fn write_curves_csv<W: Write>(curves: &[BinnedCurve], config: &SimConfig, writer: W) -> Result<()> {
    let item = config.equilibrium_item();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["bin_center", "iterations", "prop_correct", "n_obs", "irf_value"])?;
    for curve in curves {
        for r in &curve.rows {
            wtr.write_record([
                r.bin_center.to_string(),
                r.iterations.to_string(),
                r.prop_correct.to_string(),
                r.n_obs.to_string(),
                irf_4pl(r.bin_center, &item).to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iterations: u32,
    pub max_abs_dev: f64,
    pub weighted_rmse: f64,
    pub bins_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub format_version: u32,
    pub config: SimConfig,
    pub min_count: u64,
    pub per_iteration: Vec<IterationSummary>,
}

pub fn summarize(curves: &[BinnedCurve], config: &SimConfig, min_count: u64) -> Result<ExperimentSummary> {
    let item = config.equilibrium_item();
    let per_iteration = curves
        .iter()
        .map(|c| {
            compare_to_irf(c, &item, min_count).map(|cmp| IterationSummary {
                iterations: c.iterations,
                max_abs_dev: cmp.max_abs_dev,
                weighted_rmse: cmp.weighted_rmse,
                bins_used: cmp.bins_used,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentSummary {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        min_count,
        per_iteration,
    })
}
