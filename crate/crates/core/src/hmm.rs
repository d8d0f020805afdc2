//! Hidden Markov model over A ordinal actions: generative sampling, exact
//! marginal likelihood, smoothed state decoding, forecasting, imputation.
//!
//! Missing observations are marginalized out (their emission factor is 1),
//! which is how imputation splits enter the likelihood during inference.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{StochasticMatrix, ROW_SUM_TOL};
use crate::numerics::logsumexp;

/// Initial distribution, transition matrix Π (K×K) and emission matrix
/// Φ (K×A).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    initial: Vec<f64>,
    transition: StochasticMatrix,
    emission: StochasticMatrix,
}

impl HmmParams {
    pub fn new(
        initial: Vec<f64>,
        transition: StochasticMatrix,
        emission: StochasticMatrix,
    ) -> Result<Self> {
        let k = transition.height();
        if transition.width() != k {
            return Err(Error::DimensionMismatch(
                "transition matrix must be square".into(),
            ));
        }
        if emission.height() != k {
            return Err(Error::DimensionMismatch(format!(
                "emission has {} rows but transition has {k} states",
                emission.height()
            )));
        }
        if initial.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "initial distribution has {} entries for {k} states",
                initial.len()
            )));
        }
        let sum: f64 = initial.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL || initial.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial distribution sums to {sum}"
            )));
        }
        Ok(Self {
            initial,
            transition,
            emission,
        })
    }

    /// Uniform initial distribution over the K states.
    pub fn with_uniform_initial(
        transition: StochasticMatrix,
        emission: StochasticMatrix,
    ) -> Result<Self> {
        let k = transition.height();
        Self::new(vec![1.0 / k as f64; k], transition, emission)
    }

    pub fn num_states(&self) -> usize {
        self.transition.height()
    }

    pub fn num_actions(&self) -> usize {
        self.emission.width()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.transition
    }

    pub fn emission(&self) -> &StochasticMatrix {
        &self.emission
    }
}

/// Rectangular collection of action sequences; `None` marks a missing
/// observation. Actions are 0-based indices into the ordinal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    sequences: Vec<Vec<Option<usize>>>,
    num_actions: usize,
}

impl SequenceDataset {
    pub fn new(sequences: Vec<Vec<Option<usize>>>, num_actions: usize) -> Result<Self> {
        let t = sequences.first().map_or(0, Vec::len);
        for (n, seq) in sequences.iter().enumerate() {
            if seq.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "sequence {n} has length {}, expected {t}",
                    seq.len()
                )));
            }
            if let Some(bad) = seq.iter().flatten().find(|a| **a >= num_actions) {
                return Err(Error::InvalidArgument(format!(
                    "action index {bad} out of range for {num_actions} actions"
                )));
            }
        }
        Ok(Self {
            sequences,
            num_actions,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn t_len(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn sequences(&self) -> &[Vec<Option<usize>>] {
        &self.sequences
    }
}

fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draws N sequences of length T along with their latent state paths.
pub fn hmm_generate<R: Rng>(
    params: &HmmParams,
    n: usize,
    t: usize,
    rng: &mut R,
) -> (SequenceDataset, Vec<Vec<usize>>) {
    let mut sequences = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let mut zs = Vec::with_capacity(t);
        let mut ys = Vec::with_capacity(t);
        let mut z = sample_categorical(rng, params.initial());
        for step in 0..t {
            if step > 0 {
                z = sample_categorical(rng, params.transition.row(z));
            }
            zs.push(z);
            ys.push(Some(sample_categorical(rng, params.emission.row(z))));
        }
        sequences.push(ys);
        states.push(zs);
    }
    let dataset = SequenceDataset::new(sequences, params.num_actions())
        .expect("generated dataset is rectangular and in range");
    (dataset, states)
}

fn log_emission(params: &HmmParams, k: usize, obs: Option<usize>) -> f64 {
    match obs {
        Some(a) => params.emission.get(k, a).ln(),
        None => 0.0,
    }
}

/// Log-space forward recursion with per-step max shift. Returns the T×K
/// log forward messages and the sequence log likelihood.
fn forward_log(params: &HmmParams, seq: &[Option<usize>]) -> (Vec<f64>, f64) {
    let k = params.num_states();
    let t_len = seq.len();
    let mut la = vec![f64::NEG_INFINITY; t_len * k];
    for s in 0..k {
        la[s] = params.initial[s].ln() + log_emission(params, s, seq[0]);
    }
    for t in 1..t_len {
        let prev = &la[(t - 1) * k..t * k];
        let m = prev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            // Unreachable data under these parameters; propagate -inf.
            continue;
        }
        let w: Vec<f64> = prev.iter().map(|v| (v - m).exp()).collect();
        for j in 0..k {
            let mut v = 0.0;
            for (s, ws) in w.iter().enumerate() {
                v += ws * params.transition.get(s, j);
            }
            la[t * k + j] = m + v.ln() + log_emission(params, j, seq[t]);
        }
    }
    let ll = logsumexp(&la[(t_len - 1) * k..t_len * k]);
    (la, ll)
}

/// Log-space backward recursion with per-step max shift.
fn backward_log(params: &HmmParams, seq: &[Option<usize>]) -> Vec<f64> {
    let k = params.num_states();
    let t_len = seq.len();
    let mut lb = vec![0.0; t_len * k];
    for t in (0..t_len - 1).rev() {
        let mut g = vec![0.0; k];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = log_emission(params, j, seq[t + 1]) + lb[(t + 1) * k + j];
        }
        let m = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            for s in 0..k {
                lb[t * k + s] = f64::NEG_INFINITY;
            }
            continue;
        }
        let w: Vec<f64> = g.iter().map(|v| (v - m).exp()).collect();
        for s in 0..k {
            let mut v = 0.0;
            for (j, wj) in w.iter().enumerate() {
                v += params.transition.get(s, j) * wj;
            }
            lb[t * k + s] = m + v.ln();
        }
    }
    lb
}

/// Log likelihood of one sequence.
pub fn sequence_log_likelihood(params: &HmmParams, seq: &[Option<usize>]) -> f64 {
    if seq.is_empty() {
        return 0.0;
    }
    forward_log(params, seq).1
}

/// Exact log p(data | params), summed over sequences in dataset order.
pub fn hmm_log_likelihood(params: &HmmParams, data: &SequenceDataset) -> f64 {
    data.sequences()
        .iter()
        .map(|seq| sequence_log_likelihood(params, seq))
        .sum()
}

/// Forward–backward smoothed state marginals; each of the T rows sums to 1.
pub fn hmm_posterior_states(params: &HmmParams, seq: &[Option<usize>]) -> Vec<f64> {
    let k = params.num_states();
    let (la, ll) = forward_log(params, seq);
    let lb = backward_log(params, seq);
    let mut gamma = vec![0.0; seq.len() * k];
    for t in 0..seq.len() {
        let mut row: Vec<f64> = (0..k).map(|s| la[t * k + s] + lb[t * k + s] - ll).collect();
        let norm = logsumexp(&row);
        for (dst, v) in gamma[t * k..(t + 1) * k].iter_mut().zip(row.iter_mut()) {
            *dst = (*v - norm).exp();
        }
    }
    gamma
}

/// One step of a forecast: predictive action distribution together with the
/// expected (0-based) action and state indices.
#[derive(Debug, Clone)]
pub struct ForecastStep {
    pub action_dist: Vec<f64>,
    pub expected_action: f64,
    pub expected_state: f64,
}

/// Filters the prefix, then propagates the state distribution `horizon`
/// steps through Π; the predictive over actions is the state distribution
/// pushed through Φ.
pub fn hmm_forecast(params: &HmmParams, prefix: &[Option<usize>], horizon: usize) -> Vec<ForecastStep> {
    let k = params.num_states();
    let mut state = if prefix.is_empty() {
        params.initial.clone()
    } else {
        let (la, ll) = forward_log(params, prefix);
        let t = prefix.len() - 1;
        (0..k).map(|s| (la[t * k + s] - ll).exp()).collect()
    };
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = vec![0.0; k];
        for (j, nj) in next.iter_mut().enumerate() {
            for (s, ps) in state.iter().enumerate() {
                *nj += ps * params.transition.get(s, j);
            }
        }
        state = next;
        let mut action_dist = vec![0.0; params.num_actions()];
        for (s, ps) in state.iter().enumerate() {
            for (a, pa) in action_dist.iter_mut().enumerate() {
                *pa += ps * params.emission.get(s, a);
            }
        }
        let expected_action = action_dist
            .iter()
            .enumerate()
            .map(|(a, p)| a as f64 * p)
            .sum();
        let expected_state = state.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
        out.push(ForecastStep {
            action_dist,
            expected_action,
            expected_state,
        });
    }
    out
}

/// Predictive distribution at one masked slot.
#[derive(Debug, Clone)]
pub struct ImputedSlot {
    pub t: usize,
    pub action_dist: Vec<f64>,
    pub expected_action: f64,
}

/// p(y_t | observed entries) at every masked slot: the smoothed state
/// marginal pushed through Φ.
pub fn hmm_impute(params: &HmmParams, seq: &[Option<usize>]) -> Result<Vec<ImputedSlot>> {
    if seq.iter().all(Option::is_some) {
        return Err(Error::InvalidArgument(
            "sequence has no missing entries to impute".into(),
        ));
    }
    let k = params.num_states();
    let gamma = hmm_posterior_states(params, seq);
    let mut out = Vec::new();
    for (t, obs) in seq.iter().enumerate() {
        if obs.is_some() {
            continue;
        }
        let mut action_dist = vec![0.0; params.num_actions()];
        for s in 0..k {
            let g = gamma[t * k + s];
            for (a, pa) in action_dist.iter_mut().enumerate() {
                *pa += g * params.emission.get(s, a);
            }
        }
        let expected_action = action_dist
            .iter()
            .enumerate()
            .map(|(a, p)| a as f64 * p)
            .sum();
        out.push(ImputedSlot {
            t,
            action_dist,
            expected_action,
        });
    }
    Ok(out)
}

/// Expected sufficient statistics of one sequence under the posterior over
/// state paths: per-state-action emission counts and per-pair transition
/// counts. Used by the gradient of the marginal likelihood.
pub fn expected_counts(params: &HmmParams, seq: &[Option<usize>]) -> (Vec<f64>, Vec<f64>) {
    let k = params.num_states();
    let a_num = params.num_actions();
    let (la, ll) = forward_log(params, seq);
    let lb = backward_log(params, seq);
    let mut emit = vec![0.0; k * a_num];
    let mut trans = vec![0.0; k * k];
    for t in 0..seq.len() {
        if let Some(a) = seq[t] {
            for s in 0..k {
                let g = (la[t * k + s] + lb[t * k + s] - ll).exp();
                emit[s * a_num + a] += g;
            }
        }
        if t + 1 < seq.len() {
            for s in 0..k {
                for j in 0..k {
                    let lp = la[t * k + s]
                        + params.transition.get(s, j).ln()
                        + log_emission(params, j, seq[t + 1])
                        + lb[(t + 1) * k + j]
                        - ll;
                    trans[s * k + j] += lp.exp();
                }
            }
        }
    }
    (emit, trans)
}
