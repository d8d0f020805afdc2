//! Dynamic Poisson Tucker decomposition of dyadic event-count tensors.
//!
//! Counts y^(t)_{i→a j} are Poisson with a rate that factors through a
//! country–community matrix ψ, a per-time core tensor Λ^(t) over community
//! pairs and latent states, a state-to-action emission matrix Φ, and
//! action/time scale vectors. The core evolves by a gamma chain driven by
//! the state-to-state transition matrix Π. Self-interaction cells (i = j)
//! are excluded from the model.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;
use crate::numerics::{gamma_lpdf, ln_gamma, RATE_FLOOR, STICK_FLOOR};
use crate::priors::{self, MatrixPrior, PriorConfig};
use crate::transforms;

/// Latent dimensions of a model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DptDims {
    pub num_countries: usize,
    pub num_actions: usize,
    pub num_steps: usize,
    pub num_communities: usize,
    pub num_states: usize,
}

/// Sparse 4-mode count tensor over (sender, receiver, action, time step),
/// with an optional set of held-out cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTensor {
    dims: [usize; 4],
    counts: BTreeMap<[usize; 4], u64>,
    mask: BTreeSet<[usize; 4]>,
}

impl CountTensor {
    pub fn new(num_countries: usize, num_actions: usize, num_steps: usize) -> Self {
        Self {
            dims: [num_countries, num_countries, num_actions, num_steps],
            counts: BTreeMap::new(),
            mask: BTreeSet::new(),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn num_countries(&self) -> usize {
        self.dims[0]
    }

    pub fn num_actions(&self) -> usize {
        self.dims[2]
    }

    pub fn num_steps(&self) -> usize {
        self.dims[3]
    }

    fn check_index(&self, idx: [usize; 4]) -> Result<()> {
        for (d, (i, bound)) in idx.iter().zip(self.dims).enumerate() {
            if *i >= bound {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of bounds {bound} in mode {d}"
                )));
            }
        }
        Ok(())
    }

    /// Adds to the count at a cell; zero increments are dropped.
    pub fn add(&mut self, idx: [usize; 4], count: u64) -> Result<()> {
        self.check_index(idx)?;
        if idx[0] == idx[1] {
            return Err(Error::InvalidArgument(
                "self-interaction cells (i = j) are excluded".into(),
            ));
        }
        if count > 0 {
            *self.counts.entry(idx).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn get(&self, idx: [usize; 4]) -> u64 {
        self.counts.get(&idx).copied().unwrap_or(0)
    }

    /// Nonzero cells in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize; 4], &u64)> {
        self.counts.iter()
    }

    pub fn nonzero_len(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn mask(&self) -> &BTreeSet<[usize; 4]> {
        &self.mask
    }

    pub fn set_mask(&mut self, mask: BTreeSet<[usize; 4]>) -> Result<()> {
        for idx in &mask {
            self.check_index(*idx)?;
            if idx[0] == idx[1] {
                return Err(Error::InvalidArgument(
                    "mask may not contain diagonal cells".into(),
                ));
            }
        }
        self.mask = mask;
        Ok(())
    }

    pub fn is_masked(&self, idx: [usize; 4]) -> bool {
        self.mask.contains(&idx)
    }

    /// Number of off-diagonal cells in the index space.
    pub fn num_cells(&self) -> usize {
        let v = self.dims[0];
        v * (v - 1) * self.dims[2] * self.dims[3]
    }

    /// Copy truncated to the first `num_steps` time steps; the mask is
    /// restricted accordingly.
    pub fn truncate_steps(&self, num_steps: usize) -> Self {
        let mut out = Self::new(self.dims[0], self.dims[2], num_steps);
        for (idx, count) in &self.counts {
            if idx[3] < num_steps {
                out.counts.insert(*idx, *count);
            }
        }
        out.mask = self
            .mask
            .iter()
            .filter(|idx| idx[3] < num_steps)
            .copied()
            .collect();
        out
    }
}

/// Full parameter set of the model.
///
/// `psi` is the shared country–community rate matrix of the main-text
/// model; `psi_recv` switches on the variant with separate sender and
/// receiver matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DptParams {
    pub psi: Vec<f64>, // C×V, row-major by community
    pub psi_recv: Option<Vec<f64>>,
    pub core: Vec<f64>, // T×C×C×K
    pub emission: StochasticMatrix,
    pub transition: StochasticMatrix,
    pub delta_a: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub tau0: f64,
    pub alpha0: f64,
    pub num_countries: usize,
    pub num_communities: usize,
}

impl DptParams {
    pub fn dims(&self) -> DptDims {
        DptDims {
            num_countries: self.num_countries,
            num_actions: self.emission.width(),
            num_steps: self.delta_t.len(),
            num_communities: self.num_communities,
            num_states: self.emission.height(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if self.psi.len() != d.num_communities * d.num_countries {
            return Err(Error::DimensionMismatch("psi shape".into()));
        }
        if let Some(recv) = &self.psi_recv {
            if recv.len() != self.psi.len() {
                return Err(Error::DimensionMismatch("psi_recv shape".into()));
            }
        }
        let core_len =
            d.num_steps * d.num_communities * d.num_communities * d.num_states;
        if self.core.len() != core_len {
            return Err(Error::DimensionMismatch("core shape".into()));
        }
        if self.transition.height() != d.num_states
            || self.transition.width() != d.num_states
        {
            return Err(Error::DimensionMismatch("transition shape".into()));
        }
        if self.delta_a.len() != d.num_actions {
            return Err(Error::DimensionMismatch("delta_a shape".into()));
        }
        let positive = |xs: &[f64]| xs.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.psi)
            || !positive(&self.core)
            || !positive(&self.delta_a)
            || !positive(&self.delta_t)
            || !(self.tau0 > 0.0)
            || !(self.alpha0 > 0.0)
            || self.psi_recv.as_deref().is_some_and(|r| !positive(r))
        {
            return Err(Error::InvalidParameter(
                "gamma-support parameters must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn psi_send(&self, c: usize, i: usize) -> f64 {
        self.psi[c * self.num_countries + i]
    }

    pub fn psi_receive(&self, c: usize, j: usize) -> f64 {
        match &self.psi_recv {
            Some(r) => r[c * self.num_countries + j],
            None => self.psi[c * self.num_countries + j],
        }
    }

    pub fn core_at(&self, t: usize, c1: usize, c2: usize, k: usize) -> f64 {
        let c = self.num_communities;
        let kk = self.emission.height();
        self.core[((t * c + c1) * c + c2) * kk + k]
    }

    /// One C×C×K core slice.
    pub fn core_slice(&self, t: usize) -> &[f64] {
        let c = self.num_communities;
        let kk = self.emission.height();
        let len = c * c * kk;
        &self.core[t * len..(t + 1) * len]
    }
}

/// Poisson rate of one cell (Tucker-factored latent intensity scaled by the
/// action and time coefficients).
pub fn dpt_rate(params: &DptParams, i: usize, j: usize, a: usize, t: usize) -> f64 {
    let d = params.dims();
    let mut acc = 0.0;
    for c1 in 0..d.num_communities {
        let psi_i = params.psi_send(c1, i);
        if psi_i == 0.0 {
            continue;
        }
        for c2 in 0..d.num_communities {
            let psi_j = params.psi_receive(c2, j);
            if psi_j == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for k in 0..d.num_states {
                inner += params.core_at(t, c1, c2, k) * params.emission.get(k, a);
            }
            acc += psi_i * psi_j * inner;
        }
    }
    params.delta_a[a] * params.delta_t[t] * acc
}

/// Precomputed contraction Σ_k Λ^(t)·Φ used when many cells are evaluated
/// against the same parameters.
pub struct RateEvaluator<'a> {
    params: &'a DptParams,
    /// g[t][c1][c2][a]
    g: Vec<f64>,
}

impl<'a> RateEvaluator<'a> {
    pub fn new(params: &'a DptParams) -> Self {
        let d = params.dims();
        let (c, a_n, t_n, k_n) = (
            d.num_communities,
            d.num_actions,
            d.num_steps,
            d.num_states,
        );
        let mut g = vec![0.0; t_n * c * c * a_n];
        for t in 0..t_n {
            for c1 in 0..c {
                for c2 in 0..c {
                    for a in 0..a_n {
                        let mut acc = 0.0;
                        for k in 0..k_n {
                            acc += params.core_at(t, c1, c2, k) * params.emission.get(k, a);
                        }
                        g[((t * c + c1) * c + c2) * a_n + a] = acc;
                    }
                }
            }
        }
        Self { params, g }
    }

    fn g_at(&self, t: usize, c1: usize, c2: usize, a: usize) -> f64 {
        let d = self.params.dims();
        self.g[((t * d.num_communities + c1) * d.num_communities + c2) * d.num_actions + a]
    }

    pub fn rate(&self, i: usize, j: usize, a: usize, t: usize) -> f64 {
        let d = self.params.dims();
        let mut acc = 0.0;
        for c1 in 0..d.num_communities {
            let psi_i = self.params.psi_send(c1, i);
            for c2 in 0..d.num_communities {
                acc += psi_i * self.params.psi_receive(c2, j) * self.g_at(t, c1, c2, a);
            }
        }
        self.params.delta_a[a] * self.params.delta_t[t] * acc
    }

    /// Σ of rates over every (i, j) pair including the diagonal, factored
    /// through community sums.
    pub fn total_rate_all_pairs(&self) -> f64 {
        let d = self.params.dims();
        let send_sums: Vec<f64> = (0..d.num_communities)
            .map(|c| (0..d.num_countries).map(|i| self.params.psi_send(c, i)).sum())
            .collect();
        let recv_sums: Vec<f64> = (0..d.num_communities)
            .map(|c| {
                (0..d.num_countries)
                    .map(|j| self.params.psi_receive(c, j))
                    .sum()
            })
            .collect();
        self.mass_with_community_weights(&send_sums, &recv_sums, None)
    }

    /// Σ of rates over the diagonal cells (i = i).
    pub fn total_rate_diagonal(&self) -> f64 {
        let d = self.params.dims();
        let mut diag = vec![0.0; d.num_communities * d.num_communities];
        for c1 in 0..d.num_communities {
            for c2 in 0..d.num_communities {
                diag[c1 * d.num_communities + c2] = (0..d.num_countries)
                    .map(|i| self.params.psi_send(c1, i) * self.params.psi_receive(c2, i))
                    .sum();
            }
        }
        self.mass_with_community_weights(&[], &[], Some(&diag))
    }

    fn mass_with_community_weights(
        &self,
        send_sums: &[f64],
        recv_sums: &[f64],
        pair_weights: Option<&[f64]>,
    ) -> f64 {
        let d = self.params.dims();
        let mut total = 0.0;
        for t in 0..d.num_steps {
            let mut per_t = 0.0;
            for a in 0..d.num_actions {
                let mut per_a = 0.0;
                for c1 in 0..d.num_communities {
                    for c2 in 0..d.num_communities {
                        let w = match pair_weights {
                            Some(pw) => pw[c1 * d.num_communities + c2],
                            None => send_sums[c1] * recv_sums[c2],
                        };
                        per_a += w * self.g_at(t, c1, c2, a);
                    }
                }
                per_t += self.params.delta_a[a] * per_a;
            }
            total += self.params.delta_t[t] * per_t;
        }
        total
    }

    /// Σ of rates over the unmasked off-diagonal cells.
    pub fn total_rate_observed(&self, data: &CountTensor) -> f64 {
        let mut total = self.total_rate_all_pairs() - self.total_rate_diagonal();
        for idx in data.mask() {
            total -= self.rate(idx[0], idx[1], idx[2], idx[3]);
        }
        total
    }
}

/// Samples a count tensor from the model; only nonzero cells are stored.
/// Diagonal cells are never drawn. Cells are visited in lexicographic
/// (i, j, a, t) order so the draw sequence is reproducible.
pub fn dpt_generate<R: Rng>(params: &DptParams, rng: &mut R) -> CountTensor {
    let d = params.dims();
    let eval = RateEvaluator::new(params);
    let mut out = CountTensor::new(d.num_countries, d.num_actions, d.num_steps);
    for i in 0..d.num_countries {
        for j in 0..d.num_countries {
            if i == j {
                continue;
            }
            for a in 0..d.num_actions {
                for t in 0..d.num_steps {
                    let rate = eval.rate(i, j, a, t);
                    if rate <= 0.0 {
                        continue;
                    }
                    let draw: f64 = Poisson::new(rate)
                        .expect("positive finite rate")
                        .sample(rng);
                    if draw > 0.0 {
                        out.add([i, j, a, t], draw as u64).expect("in-range cell");
                    }
                }
            }
        }
    }
    out
}

/// Conditional expectation of the core slice at step `t` (0-based, t ≥ 1)
/// given the previous slice: E[λ^(t)_{c1→k c2}] = Σ_{k'} λ^(t−1)_{c1→k' c2} π_{k'k}.
pub fn dpt_core_step(params: &DptParams, t: usize) -> Result<Vec<f64>> {
    if t == 0 || t >= params.dims().num_steps {
        return Err(Error::InvalidArgument(format!(
            "core step needs 1 <= t < T, got {t}"
        )));
    }
    Ok(core_step_expectation(
        params.core_slice(t - 1),
        &params.transition,
        params.num_communities,
    ))
}

/// One expectation step of the gamma chain applied to an arbitrary
/// C×C×K slice.
pub fn core_step_expectation(
    prev: &[f64],
    transition: &StochasticMatrix,
    num_communities: usize,
) -> Vec<f64> {
    let k_n = transition.height();
    let c = num_communities;
    let mut out = vec![0.0; prev.len()];
    for c1 in 0..c {
        for c2 in 0..c {
            let base = (c1 * c + c2) * k_n;
            for k in 0..k_n {
                let mut acc = 0.0;
                for kp in 0..k_n {
                    acc += prev[base + kp] * transition.get(kp, k);
                }
                out[base + k] = acc;
            }
        }
    }
    out
}

/// Unmasked nonzero cells of a tensor, flattened for repeated likelihood
/// evaluations: (index, count, ln y!).
pub fn observed_cells(data: &CountTensor) -> Vec<([usize; 4], f64, f64)> {
    data.iter()
        .filter(|(idx, _)| !data.is_masked(**idx))
        .map(|(idx, y)| {
            let yf = *y as f64;
            (*idx, yf, ln_gamma(yf + 1.0))
        })
        .collect()
}

/// Poisson block evaluated against precomputed cell lists (the hot path of
/// posterior evaluation).
pub fn poisson_term_cells(
    eval: &RateEvaluator<'_>,
    cells: &[([usize; 4], f64, f64)],
    mask: &[[usize; 4]],
) -> f64 {
    let mut lp = 0.0;
    for (idx, yf, ln_fact) in cells {
        let rate = eval.rate(idx[0], idx[1], idx[2], idx[3]).max(RATE_FLOOR);
        lp += yf * rate.ln() - ln_fact;
    }
    let mut mass = eval.total_rate_all_pairs() - eval.total_rate_diagonal();
    for idx in mask {
        mass -= eval.rate(idx[0], idx[1], idx[2], idx[3]);
    }
    lp - mass
}

/// Poisson block of the log joint: count terms over unmasked nonzero cells
/// minus the total rate mass of all unmasked off-diagonal cells.
pub fn poisson_data_term(params: &DptParams, data: &CountTensor) -> Result<f64> {
    let d = params.dims();
    if data.num_countries() != d.num_countries
        || data.num_actions() != d.num_actions
        || data.num_steps() != d.num_steps
    {
        return Err(Error::InvalidArgument(format!(
            "tensor dims {:?} do not match model dims",
            data.dims()
        )));
    }
    let eval = RateEvaluator::new(params);
    let cells = observed_cells(data);
    let mask: Vec<[usize; 4]> = data.mask().iter().copied().collect();
    Ok(poisson_term_cells(&eval, &cells, &mask))
}

pub(crate) fn gamma_prior_term(params: &DptParams) -> f64 {
    let (a0, t0) = (params.alpha0, params.tau0);
    let mut lp = 0.0;
    for x in &params.psi {
        lp += gamma_lpdf(*x, a0, a0);
    }
    if let Some(recv) = &params.psi_recv {
        for x in recv {
            lp += gamma_lpdf(*x, a0, a0);
        }
    }
    for x in &params.delta_a {
        lp += gamma_lpdf(*x, a0, a0);
    }
    lp += gamma_lpdf(params.delta_t[0], a0, a0);
    for t in 1..params.delta_t.len() {
        lp += gamma_lpdf(params.delta_t[t], t0 * params.delta_t[t - 1], t0);
    }
    let d = params.dims();
    for x in params.core_slice(0) {
        lp += gamma_lpdf(*x, a0, a0);
    }
    for t in 1..d.num_steps {
        let expect = core_step_expectation(
            params.core_slice(t - 1),
            &params.transition,
            d.num_communities,
        );
        for (x, m) in params.core_slice(t).iter().zip(&expect) {
            lp += gamma_lpdf(*x, t0 * m.max(STICK_FLOOR), t0);
        }
    }
    lp
}

/// Unnormalized log joint density: Poisson data block, gamma priors on all
/// positive parameters and both chains, and the stick-variate Beta priors
/// for Φ and Π under the configured families. Masked cells are excluded.
pub fn dpt_log_joint(
    params: &DptParams,
    data: &CountTensor,
    config: &PriorConfig,
) -> Result<f64> {
    let mut lp = poisson_data_term(params, data)?;
    lp += gamma_prior_term(params);
    lp += transforms::matrix_log_prior(&config.emission, &params.emission)?;
    lp += transforms::matrix_log_prior(&config.transition, &params.transition)?;
    Ok(lp)
}

/// Gradients of the unnormalized log joint in constrained space: positive
/// blocks are expressed in log coordinates (x·∂/∂x, without the transform
/// Jacobian), the matrices as raw entry gradients. Stick-prior terms are
/// not included; they live on the transform side.
pub struct DptLogJointGrad {
    pub log_psi: Vec<f64>,
    pub log_psi_recv: Option<Vec<f64>>,
    pub log_core: Vec<f64>,
    pub log_delta_a: Vec<f64>,
    pub log_delta_t: Vec<f64>,
    pub emission: Vec<f64>,
    pub transition: Vec<f64>,
}

/// Analytic gradient of Poisson data block + gamma priors + both chains.
/// `cells` and `mask` are the flattened views from [`observed_cells`].
pub fn dpt_log_joint_grad(
    params: &DptParams,
    cells: &[([usize; 4], f64, f64)],
    mask: &[[usize; 4]],
) -> DptLogJointGrad {
    use crate::numerics::digamma;
    let d = params.dims();
    let (v_n, a_n, t_n, c_n, k_n) = (
        d.num_countries,
        d.num_actions,
        d.num_steps,
        d.num_communities,
        d.num_states,
    );
    let eval = RateEvaluator::new(params);
    let separate = params.psi_recv.is_some();

    let mut g_psi_send = vec![0.0; c_n * v_n];
    let mut g_psi_recv = vec![0.0; c_n * v_n];
    let mut g_core = vec![0.0; params.core.len()];
    let mut g_delta_a = vec![0.0; a_n];
    let mut g_delta_t = vec![0.0; t_n];
    let mut g_phi = vec![0.0; k_n * a_n];
    let mut g_pi = vec![0.0; k_n * k_n];

    // --- Poisson block: observed cells (weight y/mu) and masked cells
    // (weight +1, adding back the mass they are excluded from).
    let mut cell_pass = |idx: &[usize; 4], count: Option<f64>| {
        let [i, j, a, t] = *idx;
        let mu = eval.rate(i, j, a, t).max(RATE_FLOOR);
        let w = match count {
            Some(y) => y / mu,
            None => 1.0,
        };
        g_delta_a[a] += w * mu / params.delta_a[a];
        g_delta_t[t] += w * mu / params.delta_t[t];
        let wc = w * params.delta_a[a] * params.delta_t[t];
        for c1 in 0..c_n {
            let psc1 = params.psi_send(c1, i);
            // Sender-role psi gradient via the emission contraction.
            let mut sender = 0.0;
            for c2 in 0..c_n {
                sender += params.psi_receive(c2, j) * eval.g_at(t, c1, c2, a);
            }
            g_psi_send[c1 * v_n + i] += wc * sender;
            for c2 in 0..c_n {
                let p12 = psc1 * params.psi_receive(c2, j);
                let base = wc * p12;
                let core_off = ((t * c_n + c1) * c_n + c2) * k_n;
                for k in 0..k_n {
                    g_core[core_off + k] += base * params.emission.get(k, a);
                    g_phi[k * a_n + a] += base * params.core[core_off + k];
                }
            }
        }
        for c2 in 0..c_n {
            let mut receiver = 0.0;
            for c1 in 0..c_n {
                receiver += params.psi_send(c1, i) * eval.g_at(t, c1, c2, a);
            }
            g_psi_recv[c2 * v_n + j] += wc * receiver;
        }
    };
    for (idx, y, _) in cells {
        cell_pass(idx, Some(*y));
    }
    for idx in mask {
        cell_pass(idx, None);
    }

    // Factored all-pairs-minus-diagonal mass gradients (subtracted).
    let send_sums: Vec<f64> = (0..c_n)
        .map(|c| (0..v_n).map(|i| params.psi_send(c, i)).sum())
        .collect();
    let recv_sums: Vec<f64> = (0..c_n)
        .map(|c| (0..v_n).map(|j| params.psi_receive(c, j)).sum())
        .collect();
    let mut pair_w = vec![0.0; c_n * c_n]; // S1*S2 - D
    for c1 in 0..c_n {
        for c2 in 0..c_n {
            let diag: f64 = (0..v_n)
                .map(|i| params.psi_send(c1, i) * params.psi_receive(c2, i))
                .sum();
            pair_w[c1 * c_n + c2] = send_sums[c1] * recv_sums[c2] - diag;
        }
    }
    // H[c1,c2] = sum_{t,a} delta_a delta_t G[t,c1,c2,a]
    let mut h = vec![0.0; c_n * c_n];
    for t in 0..t_n {
        for a in 0..a_n {
            let scale = params.delta_a[a] * params.delta_t[t];
            for c1 in 0..c_n {
                for c2 in 0..c_n {
                    h[c1 * c_n + c2] += scale * eval.g_at(t, c1, c2, a);
                }
            }
        }
    }
    for a in 0..a_n {
        let mut acc = 0.0;
        for t in 0..t_n {
            let mut base = 0.0;
            for c1 in 0..c_n {
                for c2 in 0..c_n {
                    base += pair_w[c1 * c_n + c2] * eval.g_at(t, c1, c2, a);
                }
            }
            acc += params.delta_t[t] * base;
        }
        g_delta_a[a] -= acc;
    }
    for t in 0..t_n {
        let mut acc = 0.0;
        for a in 0..a_n {
            let mut base = 0.0;
            for c1 in 0..c_n {
                for c2 in 0..c_n {
                    base += pair_w[c1 * c_n + c2] * eval.g_at(t, c1, c2, a);
                }
            }
            acc += params.delta_a[a] * base;
        }
        g_delta_t[t] -= acc;
    }
    // E[k] = sum_a delta_a phi[k,a]; L[c1,c2,k] = sum_t delta_t core.
    let e_k: Vec<f64> = (0..k_n)
        .map(|k| {
            (0..a_n)
                .map(|a| params.delta_a[a] * params.emission.get(k, a))
                .sum()
        })
        .collect();
    for t in 0..t_n {
        for c1 in 0..c_n {
            for c2 in 0..c_n {
                let w = pair_w[c1 * c_n + c2] * params.delta_t[t];
                let off = ((t * c_n + c1) * c_n + c2) * k_n;
                for k in 0..k_n {
                    g_core[off + k] -= w * e_k[k];
                }
            }
        }
    }
    for k in 0..k_n {
        let mut wl = 0.0;
        for c1 in 0..c_n {
            for c2 in 0..c_n {
                let mut l = 0.0;
                for t in 0..t_n {
                    l += params.delta_t[t] * params.core_at(t, c1, c2, k);
                }
                wl += pair_w[c1 * c_n + c2] * l;
            }
        }
        for a in 0..a_n {
            g_phi[k * a_n + a] -= params.delta_a[a] * wl;
        }
    }
    for c in 0..c_n {
        for q in 0..v_n {
            let mut sender = 0.0;
            for c2 in 0..c_n {
                sender += (recv_sums[c2] - params.psi_receive(c2, q)) * h[c * c_n + c2];
            }
            g_psi_send[c * v_n + q] -= sender;
            let mut receiver = 0.0;
            for c1 in 0..c_n {
                receiver += (send_sums[c1] - params.psi_send(c1, q)) * h[c1 * c_n + c];
            }
            g_psi_recv[c * v_n + q] -= receiver;
        }
    }

    // --- Gamma priors and chains (log-coordinate gradients).
    let (a0, t0) = (params.alpha0, params.tau0);
    let mut log_psi: Vec<f64> = Vec::with_capacity(c_n * v_n);
    let mut log_psi_recv: Vec<f64> = Vec::with_capacity(if separate { c_n * v_n } else { 0 });
    if separate {
        for (ci, x) in params.psi.iter().enumerate() {
            log_psi.push(g_psi_send[ci] * x + (a0 - 1.0) - a0 * x);
        }
        for (ci, x) in params.psi_recv.as_ref().expect("separate").iter().enumerate() {
            log_psi_recv.push(g_psi_recv[ci] * x + (a0 - 1.0) - a0 * x);
        }
    } else {
        for (ci, x) in params.psi.iter().enumerate() {
            log_psi.push((g_psi_send[ci] + g_psi_recv[ci]) * x + (a0 - 1.0) - a0 * x);
        }
    }
    let log_delta_a: Vec<f64> = g_delta_a
        .iter()
        .zip(&params.delta_a)
        .map(|(g, x)| g * x + (a0 - 1.0) - a0 * x)
        .collect();
    let mut log_delta_t: Vec<f64> = g_delta_t
        .iter()
        .zip(&params.delta_t)
        .map(|(g, x)| g * x)
        .collect();
    log_delta_t[0] += (a0 - 1.0) - a0 * params.delta_t[0];
    for t in 1..t_n {
        let shape = t0 * params.delta_t[t - 1];
        log_delta_t[t] += (shape - 1.0) - t0 * params.delta_t[t];
        log_delta_t[t - 1] += shape * (t0.ln() + params.delta_t[t].ln() - digamma(shape));
    }

    let slice_len = c_n * c_n * k_n;
    let mut log_core: Vec<f64> = g_core
        .iter()
        .zip(&params.core)
        .map(|(g, x)| g * x)
        .collect();
    for (i, x) in params.core[..slice_len].iter().enumerate() {
        log_core[i] += (a0 - 1.0) - a0 * x;
    }
    for t in 1..t_n {
        let prev = params.core_slice(t - 1);
        let expect = core_step_expectation(prev, &params.transition, c_n);
        for c1 in 0..c_n {
            for c2 in 0..c_n {
                let base = (c1 * c_n + c2) * k_n;
                for k in 0..k_n {
                    let x = params.core_at(t, c1, c2, k);
                    let shape = t0 * expect[base + k].max(STICK_FLOOR);
                    log_core[t * slice_len + base + k] += (shape - 1.0) - t0 * x;
                    let common = t0.ln() + x.ln() - digamma(shape);
                    for kp in 0..k_n {
                        // Through the shape of the chain step.
                        let coeff = t0 * params.transition.get(kp, k) * common;
                        log_core[(t - 1) * slice_len + base + kp] +=
                            coeff * prev[base + kp];
                        g_pi[kp * k_n + k] += t0 * prev[base + kp] * common;
                    }
                }
            }
        }
    }

    DptLogJointGrad {
        log_psi,
        log_psi_recv: separate.then_some(log_psi_recv),
        log_core,
        log_delta_a,
        log_delta_t,
        emission: g_phi,
        transition: g_pi,
    }
}

/// Forecast rates for `horizon` steps past the end of one parameter set:
/// the core is propagated through its chain expectation and the time scale
/// is held at its last fitted value (the chain mean).
pub fn dpt_forecast_rates(params: &DptParams, horizon: usize) -> Vec<f64> {
    let d = params.dims();
    let delta_t = *params.delta_t.last().expect("nonempty chain");
    let mut slice = params.core_slice(d.num_steps - 1).to_vec();
    let mut out =
        Vec::with_capacity(horizon * d.num_countries * d.num_countries * d.num_actions);
    for _ in 0..horizon {
        slice = core_step_expectation(&slice, &params.transition, d.num_communities);
        // Contract the propagated slice with the emission matrix once.
        let mut g = vec![0.0; d.num_communities * d.num_communities * d.num_actions];
        for c1 in 0..d.num_communities {
            for c2 in 0..d.num_communities {
                for a in 0..d.num_actions {
                    let mut acc = 0.0;
                    for k in 0..d.num_states {
                        acc += slice[(c1 * d.num_communities + c2) * d.num_states + k]
                            * params.emission.get(k, a);
                    }
                    g[(c1 * d.num_communities + c2) * d.num_actions + a] = acc;
                }
            }
        }
        for i in 0..d.num_countries {
            for j in 0..d.num_countries {
                for a in 0..d.num_actions {
                    let mut acc = 0.0;
                    for c1 in 0..d.num_communities {
                        for c2 in 0..d.num_communities {
                            acc += params.psi_send(c1, i)
                                * params.psi_receive(c2, j)
                                * g[(c1 * d.num_communities + c2) * d.num_actions + a];
                        }
                    }
                    out.push((params.delta_a[a] * delta_t * acc).max(RATE_FLOOR));
                }
            }
        }
    }
    out
}

/// Flat index into the (horizon, V, V, A) layout of [`dpt_forecast_rates`].
pub fn forecast_rate_index(
    dims: &DptDims,
    h: usize,
    i: usize,
    j: usize,
    a: usize,
) -> usize {
    ((h * dims.num_countries + i) * dims.num_countries + j) * dims.num_actions + a
}

/// Draws a full parameter set from the generative prior.
pub fn sample_dpt_params<R: Rng>(
    dims: &DptDims,
    config: &PriorConfig,
    separate_psi: bool,
    rng: &mut R,
) -> Result<DptParams> {
    let (tau0, alpha0): (f64, f64) = (1.0, 1.0);
    let gam = Gamma::new(alpha0, 1.0 / alpha0).expect("positive shape");
    let draw_pos = |rng: &mut R| gam.sample(rng).max(STICK_FLOOR);

    let delta_a: Vec<f64> = (0..dims.num_actions).map(|_| draw_pos(rng)).collect();
    let mut delta_t = Vec::with_capacity(dims.num_steps);
    delta_t.push(draw_pos(rng));
    for t in 1..dims.num_steps {
        let shape = tau0 * delta_t[t - 1];
        let g = Gamma::new(shape.max(STICK_FLOOR), 1.0 / tau0).expect("positive shape");
        delta_t.push(g.sample(rng).max(STICK_FLOOR));
    }
    let psi: Vec<f64> = (0..dims.num_communities * dims.num_countries)
        .map(|_| draw_pos(rng))
        .collect();
    let psi_recv = if separate_psi {
        Some(
            (0..dims.num_communities * dims.num_countries)
                .map(|_| draw_pos(rng))
                .collect(),
        )
    } else {
        None
    };
    let emission = sample_matrix(&config.emission, dims.num_states, rng)?;
    let transition = sample_matrix(&config.transition, dims.num_states, rng)?;

    let slice_len = dims.num_communities * dims.num_communities * dims.num_states;
    let mut core = Vec::with_capacity(dims.num_steps * slice_len);
    for _ in 0..slice_len {
        core.push(draw_pos(rng));
    }
    for t in 1..dims.num_steps {
        let prev = core[(t - 1) * slice_len..t * slice_len].to_vec();
        let expect = core_step_expectation(&prev, &transition, dims.num_communities);
        for m in expect {
            let g = Gamma::new((tau0 * m).max(STICK_FLOOR), 1.0 / tau0)
                .expect("positive shape");
            core.push(g.sample(rng).max(STICK_FLOOR));
        }
    }

    let params = DptParams {
        psi,
        psi_recv,
        core,
        emission,
        transition,
        delta_a,
        delta_t,
        tau0,
        alpha0,
        num_countries: dims.num_countries,
        num_communities: dims.num_communities,
    };
    params.validate()?;
    Ok(params)
}

fn sample_matrix<R: Rng>(
    prior: &MatrixPrior,
    height: usize,
    rng: &mut R,
) -> Result<StochasticMatrix> {
    match prior {
        MatrixPrior::Omd { alpha } => Ok(priors::sample_omd(height, alpha, rng)?.0),
        MatrixPrior::Smd { alpha } => priors::sample_smd(height, alpha, rng),
        MatrixPrior::Bmd { band, alpha3 } => priors::sample_bmd(band, *alpha3, rng),
    }
}
