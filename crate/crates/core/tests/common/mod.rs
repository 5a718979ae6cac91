#![allow(dead_code)]

use bktirt::ising::{state_index, Dynamics, FieldChain, IsingNetwork, ScanOrder};
use bktirt::rng::{unit, Stream};
use bktirt::BktParams;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Deterministic parameter generator for fuzz loops.
pub struct Fuzz(Stream);

impl Fuzz {
    pub fn new(label: &str) -> Self {
        Fuzz(Stream::new(20_260_101, label, [0; 4]))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * unit(&mut self.0)
    }

    pub fn prob(&mut self) -> f64 {
        unit(&mut self.0)
    }

    /// Positive rate, log-uniform over `[1e-6, 1]` half the time.
    pub fn rate(&mut self) -> f64 {
        let r = if self.prob() < 0.5 {
            10f64.powf(self.uniform(-6.0, 0.0))
        } else {
            self.prob()
        };
        r.max(f64::MIN_POSITIVE)
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.prob() * n as f64) as usize).min(n - 1)
    }

    pub fn ergodic_params(&mut self) -> BktParams {
        BktParams::new(self.prob(), self.rate(), self.rate(), self.prob(), self.prob())
    }

    pub fn stream(&mut self) -> Stream {
        Stream::new((self.prob() * 1e15) as u64, "fuzz.child", [0; 4])
    }
}

/// Log-likelihood by summing over all `2^T` latent paths.
pub fn brute_force_loglik(p: &BktParams, x: &[u8]) -> f64 {
    let t_len = x.len();
    let trans = |from: usize, to: usize| match (from, to) {
        (0, 0) => 1.0 - p.p_learn,
        (0, _) => p.p_learn,
        (_, 0) => p.p_forget,
        _ => 1.0 - p.p_forget,
    };
    let emit = |z: usize, x: u8| match (z, x) {
        (0, 1) => p.p_guess,
        (0, _) => 1.0 - p.p_guess,
        (_, 1) => 1.0 - p.p_slip,
        _ => p.p_slip,
    };
    let mut total = 0.0;
    for path in 0..1usize << t_len {
        let z = |t: usize| (path >> t) & 1;
        let mut w = if z(0) == 1 { p.p_init } else { 1.0 - p.p_init };
        w *= emit(z(0), x[0]);
        for (t, &xt) in x.iter().enumerate().skip(1) {
            w *= trans(z(t - 1), z(t)) * emit(z(t), xt);
        }
        total += w;
    }
    total.ln()
}

pub struct GofResult {
    /// Pearson statistic divided by the mean design effect.
    pub statistic: f64,
    pub raw_statistic: f64,
    pub design_effect: f64,
    pub df: usize,
    pub critical: f64,
    /// Empirical state frequencies.
    pub freq: Vec<f64>,
    /// Batch-means standard error of each frequency.
    pub std_err: Vec<f64>,
}

impl GofResult {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Goodness of fit of the sampler's state frequencies to `exact`.
///
/// Successive sweeps are correlated, so the Pearson statistic is divided by
/// the mean design effect (first-order Rao-Scott), with the variance of each
/// frequency estimated from `batches` batch means.
#[allow(clippy::too_many_arguments)]
pub fn sampler_gof(
    net: &IsingNetwork,
    exact: &[f64],
    dynamics: Dynamics,
    order: ScanOrder,
    rng: Stream,
    batches: usize,
    batch_len: usize,
    alpha: f64,
) -> GofResult {
    let k = exact.len();
    let mut chain = FieldChain::new(net, dynamics, order, rng);
    for _ in 0..1000 {
        chain.sweep();
    }
    let mut batch_freq = vec![vec![0.0; k]; batches];
    for freq in batch_freq.iter_mut() {
        for _ in 0..batch_len {
            chain.sweep();
            freq[state_index(chain.latent())] += 1.0;
        }
        freq.iter_mut().for_each(|f| *f /= batch_len as f64);
    }
    let n_total = (batches * batch_len) as f64;
    let freq: Vec<f64> = (0..k)
        .map(|s| batch_freq.iter().map(|b| b[s]).sum::<f64>() / batches as f64)
        .collect();
    let var_of_mean: Vec<f64> = (0..k)
        .map(|s| {
            let ss: f64 = batch_freq.iter().map(|b| (b[s] - freq[s]).powi(2)).sum();
            ss / (batches as f64 - 1.0) / batches as f64
        })
        .collect();
    let raw: f64 = (0..k).map(|s| n_total * (freq[s] - exact[s]).powi(2) / exact[s]).sum();
    let trace: f64 = (0..k)
        .map(|s| var_of_mean[s] / (exact[s] * (1.0 - exact[s]) / n_total) * (1.0 - exact[s]))
        .sum();
    let df = k - 1;
    let design_effect = trace / df as f64;
    GofResult {
        statistic: raw / design_effect,
        raw_statistic: raw,
        design_effect,
        df,
        critical: ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha),
        freq,
        std_err: var_of_mean.iter().map(|v| v.sqrt()).collect(),
    }
}

/// Network on `n` nodes with every pair coupled.
#[allow(clippy::needless_range_loop)]
pub fn all_pairs_network(fuzz: &mut Fuzz, n: usize, max_abs: f64) -> IsingNetwork {
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let mut s = fuzz.uniform(-max_abs, max_abs);
            if s.abs() < 0.05 {
                s = 0.05f64.copysign(s);
            }
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
    }
    let fields = (0..n).map(|_| fuzz.uniform(-1.0, 1.0)).collect();
    IsingNetwork::without_noise(sigma, fields).unwrap()
}
