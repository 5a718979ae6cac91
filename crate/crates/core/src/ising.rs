//! Interacting skills: an Ising field over binary mastery states with
//! guess/slip emissions at every node.
//!
//! States use the `{0, 1}` domain. The energy is
//! `E(z) = -(sum_{i<j} sigma_ij z_i z_j + sum_i h_i z_i)` and the Boltzmann
//! law is proportional to `exp(-E(z))`, so an isolated node is mastered with
//! probability `logistic(h_i)`. To convert to `{-1, +1}` spins `s = 2z - 1`,
//! use couplings `sigma_ij / 4` and fields `h_i / 2 + sum_j sigma_ij / 4`.
//!
//! Small networks (up to 20 nodes) can be enumerated exactly with
//! [`boltzmann_exact`]; larger ones are sampled with single-site Glauber or
//! Metropolis updates via [`FieldChain`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::logistic;
use crate::rng::{bernoulli, unit, Stream};

pub const MAX_EXACT_NODES: usize = 20;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEmission {
    pub p_guess: f64,
    pub p_slip: f64,
}

impl NodeEmission {
    pub fn p_correct(&self, mastered: bool) -> f64 {
        if mastered {
            1.0 - self.p_slip
        } else {
            self.p_guess
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingNetwork {
    couplings: Vec<Vec<f64>>,
    fields: Vec<f64>,
    emissions: Vec<NodeEmission>,
}

impl IsingNetwork {
    /// Checks that `couplings` is square, symmetric to within
    /// [`SYMMETRY_TOL`], has an exactly zero diagonal and finite entries, and
    /// that fields and emissions have one entry per node.
    pub fn new(couplings: Vec<Vec<f64>>, fields: Vec<f64>, emissions: Vec<NodeEmission>) -> Result<Self> {
        let n = fields.len();
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if n == 0 {
            return bad("network has no nodes".into());
        }
        if couplings.len() != n || couplings.iter().any(|row| row.len() != n) {
            return bad(format!("coupling matrix must be {n} x {n}"));
        }
        if emissions.len() != n {
            return bad(format!("expected {n} emissions, got {}", emissions.len()));
        }
        if let Some(h) = fields.iter().find(|h| !h.is_finite()) {
            return bad(format!("field {h} is not finite"));
        }
        for (i, row) in couplings.iter().enumerate() {
            if row[i] != 0.0 {
                return bad(format!("diagonal coupling at node {i} is {}", row[i]));
            }
            for (j, &a) in row.iter().enumerate().take(i) {
                let b = couplings[j][i];
                if !a.is_finite() || !b.is_finite() || (a - b).abs() > SYMMETRY_TOL {
                    return bad(format!(
                        "couplings ({i}, {j}) = {a} and ({j}, {i}) = {b} are not symmetric"
                    ));
                }
            }
        }
        for (i, e) in emissions.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.p_guess) || !(0.0..=1.0).contains(&e.p_slip) {
                return bad(format!("emission probabilities at node {i} must lie in [0, 1]"));
            }
        }
        Ok(IsingNetwork {
            couplings,
            fields,
            emissions,
        })
    }

    /// Noiseless emissions at every node.
    pub fn without_noise(couplings: Vec<Vec<f64>>, fields: Vec<f64>) -> Result<Self> {
        let n = fields.len();
        Self::new(
            couplings,
            fields,
            vec![
                NodeEmission {
                    p_guess: 0.0,
                    p_slip: 0.0
                };
                n
            ],
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.fields.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i][j]
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn emissions(&self) -> &[NodeEmission] {
        &self.emissions
    }

    /// Same network with nodes relabelled: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidNetwork("not a permutation of the nodes".into()));
        }
        Self::new(
            perm.iter()
                .map(|&a| perm.iter().map(|&b| self.couplings[a][b]).collect())
                .collect(),
            perm.iter().map(|&a| self.fields[a]).collect(),
            perm.iter().map(|&a| self.emissions[a]).collect(),
        )
    }
}

/// On-disk form: couplings as an upper-triangle list of `[i, j, sigma]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub emissions: Vec<NodeEmission>,
}

impl TryFrom<NetworkFile> for IsingNetwork {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let n = file.n;
        if file.fields.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "n = {n} but {} fields given",
                file.fields.len()
            )));
        }
        let mut couplings = vec![vec![0.0; n]; n];
        let mut seen = std::collections::HashSet::new();
        for &(i, j, sigma) in &file.couplings {
            if i >= j || j >= n {
                return Err(Error::InvalidNetwork(format!(
                    "coupling [{i}, {j}] must satisfy i < j < {n}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidNetwork(format!("coupling [{i}, {j}] listed twice")));
            }
            couplings[i][j] = sigma;
            couplings[j][i] = sigma;
        }
        IsingNetwork::new(couplings, file.fields, file.emissions)
    }
}

impl From<&IsingNetwork> for NetworkFile {
    fn from(net: &IsingNetwork) -> Self {
        let n = net.n_nodes();
        let couplings = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| net.couplings[i][j] != 0.0)
            .map(|(i, j)| (i, j, net.couplings[i][j]))
            .collect();
        NetworkFile {
            n,
            couplings,
            fields: net.fields.clone(),
            emissions: net.emissions.clone(),
        }
    }
}

pub fn energy(net: &IsingNetwork, z: &[u8]) -> f64 {
    let n = net.n_nodes();
    let mut e = 0.0;
    for i in (0..n).filter(|&i| z[i] != 0) {
        e += net.fields[i];
        e += (i + 1..n)
            .filter(|&j| z[j] != 0)
            .map(|j| net.couplings[i][j])
            .sum::<f64>();
    }
    -e
}

/// Index of a state in the enumeration order of [`boltzmann_exact`]: node
/// `k` is bit `k`.
pub fn state_index(z: &[u8]) -> usize {
    z.iter()
        .enumerate()
        .fold(0, |acc, (k, &b)| acc | (usize::from(b != 0) << k))
}

pub fn state_from_index(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|k| ((index >> k) & 1) as u8).collect()
}

/// Boltzmann probabilities of all `2^n` states, indexed by [`state_index`].
pub fn boltzmann_exact(net: &IsingNetwork) -> Result<Vec<f64>> {
    let n = net.n_nodes();
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLarge(n));
    }
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|s| -energy(net, &state_from_index(s, n)))
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Local field at `node`: `h_node + sum_i sigma_{i,node} z_i`.
fn local_field(net: &IsingNetwork, z: &[u8], node: usize) -> f64 {
    net.fields[node]
        + z.iter()
            .zip(&net.couplings[node])
            .filter(|(&zi, _)| zi != 0)
            .map(|(_, s)| s)
            .sum::<f64>()
}

/// `P(z_node = 1 | all other nodes)`.
pub fn conditional_prob(net: &IsingNetwork, z: &[u8], node: usize) -> f64 {
    logistic(local_field(net, z, node))
}

/// Resamples `z[node]` from its conditional law.
pub fn glauber_step(net: &IsingNetwork, z: &mut [u8], node: usize, rng: &mut Stream) {
    z[node] = u8::from(bernoulli(rng, conditional_prob(net, z, node)));
}

/// Proposes flipping `z[node]` and accepts with probability
/// `min(1, exp(-dE))`. Moves that do not raise the energy are accepted
/// without drawing.
pub fn metropolis_step(net: &IsingNetwork, z: &mut [u8], node: usize, rng: &mut Stream) {
    let field = local_field(net, z, node);
    let delta_e = if z[node] == 0 { -field } else { field };
    if delta_e <= 0.0 || unit(rng) < (-delta_e).exp() {
        z[node] ^= 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Glauber,
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOrder {
    /// Nodes `0, 1, ..., n-1` in every sweep.
    #[default]
    Fixed,
    /// `n` uniformly chosen nodes per sweep.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldState {
    pub z: Vec<u8>,
    pub x: Vec<u8>,
}

/// Single-site sampler. Each call to `next` performs one sweep of `n`
/// updates and then emits a response at every node.
#[derive(Debug, Clone)]
pub struct FieldChain<'a> {
    net: &'a IsingNetwork,
    z: Vec<u8>,
    dynamics: Dynamics,
    order: ScanOrder,
    rng: Stream,
}

impl<'a> FieldChain<'a> {
    /// Starts from the all-unmastered state.
    pub fn new(net: &'a IsingNetwork, dynamics: Dynamics, order: ScanOrder, rng: Stream) -> Self {
        FieldChain {
            net,
            z: vec![0; net.n_nodes()],
            dynamics,
            order,
            rng,
        }
    }

    pub fn latent(&self) -> &[u8] {
        &self.z
    }

    /// One sweep of latent updates, without emissions.
    pub fn sweep(&mut self) {
        let n = self.net.n_nodes();
        for k in 0..n {
            let node = match self.order {
                ScanOrder::Fixed => k,
                ScanOrder::Random => self.rng.random_range(0..n),
            };
            match self.dynamics {
                Dynamics::Glauber => glauber_step(self.net, &mut self.z, node, &mut self.rng),
                Dynamics::Metropolis => metropolis_step(self.net, &mut self.z, node, &mut self.rng),
            }
        }
    }

    fn emit(&mut self) -> Vec<u8> {
        let rng = &mut self.rng;
        self.z
            .iter()
            .zip(&self.net.emissions)
            .map(|(&z, e)| u8::from(bernoulli(rng, e.p_correct(z != 0))))
            .collect()
    }
}

impl Iterator for FieldChain<'_> {
    type Item = FieldState;

    fn next(&mut self) -> Option<FieldState> {
        self.sweep();
        let x = self.emit();
        Some(FieldState { z: self.z.clone(), x })
    }
}

/// Runs `sweeps` sweeps in fixed scan order and returns the state after each.
pub fn simulate_field(net: &IsingNetwork, sweeps: usize, rng: Stream, dynamics: Dynamics) -> Result<Vec<FieldState>> {
    if sweeps == 0 {
        return Err(Error::InvalidConfig("at least one sweep is required".into()));
    }
    Ok(FieldChain::new(net, dynamics, ScanOrder::Fixed, rng)
        .take(sweeps)
        .collect())
}

/// Visit counts of each latent state, indexed by [`state_index`], over
/// `sweeps` sweeps after discarding `burn_in`. Only for networks small
/// enough to enumerate.
pub fn state_counts(
    net: &IsingNetwork,
    sweeps: u64,
    burn_in: u64,
    dynamics: Dynamics,
    order: ScanOrder,
    rng: Stream,
) -> Result<Vec<u64>> {
    let n = net.n_nodes();
    if n > MAX_EXACT_NODES {
        return Err(Error::TooLarge(n));
    }
    let mut chain = FieldChain::new(net, dynamics, order, rng);
    for _ in 0..burn_in {
        chain.sweep();
    }
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..sweeps {
        chain.sweep();
        counts[state_index(chain.latent())] += 1;
    }
    Ok(counts)
}

/// `P(z_node = 1)` under the exact Boltzmann law.
pub fn exact_marginals(net: &IsingNetwork) -> Result<Vec<f64>> {
    let probs = boltzmann_exact(net)?;
    let n = net.n_nodes();
    Ok((0..n)
        .map(|k| {
            probs
                .iter()
                .enumerate()
                .filter(|(s, _)| (s >> k) & 1 == 1)
                .map(|(_, p)| p)
                .sum()
        })
        .collect())
}
