//! Synthetic ground truths, train/test splitting, MAE and SPPD metrics,
//! recovery scoring, and experiment orchestration over seeds and prior
//! configurations.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::assignment::align_states;
use crate::dpt::{self, CountTensor, DptDims, RateEvaluator};
use crate::error::{Error, Result};
use crate::hmm::{self, HmmParams, SequenceDataset};
use crate::matrix::StochasticMatrix;
use crate::numerics::{logsumexp, poisson_lpmf};
use crate::priors::PriorConfig;
use crate::sampler::{run_best_chain, ChainTrace, SamplerConfig};
use crate::seeds::{derive_seed, rng_for};
use crate::stats;
use crate::targets::{dpt_params_from_record, hmm_params_from_record, DptPosterior, HmmPosterior};

/// Stylized ground-truth transition shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthShape {
    /// Tridiagonal with a dominant diagonal.
    Banded,
    /// Near-absorbing first and last rows around a near-uniform middle.
    Bonbon,
    /// Mass on k' ≥ k decaying geometrically with distance.
    Triangle,
}

impl FromStr for TruthShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "banded" => Ok(Self::Banded),
            "bonbon" => Ok(Self::Bonbon),
            "triangle" => Ok(Self::Triangle),
            other => Err(Error::InvalidArgument(format!(
                "unknown truth shape '{other}'"
            ))),
        }
    }
}

impl TruthShape {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Banded => "banded",
            Self::Bonbon => "bonbon",
            Self::Triangle => "triangle",
        }
    }
}

/// Ground-truth generator settings. Truths are deterministic functions of
/// the spec; randomness enters only through data generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub shape: TruthShape,
    pub num_states: usize,
    pub num_actions: usize,
    /// Standard deviation of the diagonal emission bump, in action units.
    pub emission_width: f64,
    /// Diagonal weight of the banded transition before edge renormalization.
    pub band_self_weight: f64,
    /// Self-transition weight of the bonbon end states.
    pub bonbon_stickiness: f64,
    /// Geometric decay of the triangle's upper rows.
    pub triangle_decay: f64,
}

impl TruthSpec {
    pub fn new(shape: TruthShape, num_states: usize, num_actions: usize) -> Self {
        Self {
            shape,
            num_states,
            num_actions,
            emission_width: 0.8,
            band_self_weight: 0.8,
            bonbon_stickiness: 0.9,
            triangle_decay: 0.5,
        }
    }
}

/// Roughly diagonal emission matrix: row k is a discretized Gaussian bump
/// centered at (k + ½)·A/K, renormalized.
pub fn diagonal_bump_emission(
    num_states: usize,
    num_actions: usize,
    width: f64,
) -> StochasticMatrix {
    let mut rows = Vec::with_capacity(num_states);
    for k in 0..num_states {
        let center = (k as f64 + 0.5) * num_actions as f64 / num_states as f64;
        let mut row: Vec<f64> = (0..num_actions)
            .map(|a| {
                let x = a as f64 + 0.5;
                (-(x - center) * (x - center) / (2.0 * width * width)).exp()
            })
            .collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
        rows.push(row);
    }
    StochasticMatrix::from_rows(&rows).expect("bump rows normalize")
}

/// Builds the ground-truth HMM for a spec (uniform initial distribution).
pub fn make_truth(spec: &TruthSpec) -> Result<HmmParams> {
    let k_n = spec.num_states;
    if k_n < 2 {
        return Err(Error::InvalidArgument(
            "ground truths need at least 2 states".into(),
        ));
    }
    let mut rows = Vec::with_capacity(k_n);
    match spec.shape {
        TruthShape::Banded => {
            let w = spec.band_self_weight;
            let side = (1.0 - w) / 2.0;
            for k in 0..k_n {
                let mut row = vec![0.0; k_n];
                row[k] = w;
                if k > 0 {
                    row[k - 1] = side;
                }
                if k + 1 < k_n {
                    row[k + 1] = side;
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                rows.push(row);
            }
        }
        TruthShape::Bonbon => {
            let s = spec.bonbon_stickiness;
            let spread = (1.0 - s) / (k_n - 1) as f64;
            for k in 0..k_n {
                let row = if k == 0 || k == k_n - 1 {
                    (0..k_n)
                        .map(|j| if j == k { s } else { spread })
                        .collect::<Vec<f64>>()
                } else {
                    vec![1.0 / k_n as f64; k_n]
                };
                rows.push(row);
            }
        }
        TruthShape::Triangle => {
            let d = spec.triangle_decay;
            for k in 0..k_n {
                let mut row = vec![0.0; k_n];
                for (offset, slot) in row.iter_mut().skip(k).enumerate() {
                    *slot = d.powi(offset as i32);
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                rows.push(row);
            }
        }
    }
    let transition = StochasticMatrix::from_rows(&rows)?;
    let emission = diagonal_bump_emission(k_n, spec.num_actions, spec.emission_width);
    HmmParams::with_uniform_initial(transition, emission)
}

/// Train/test split specification. The seed fully determines the mask, so
/// identical specs reproduce identical splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    Imputation { mask_fraction: f64, seed: u64 },
    Forecasting { train_fraction: f64, seed: u64 },
}

impl SplitSpec {
    pub fn mode_name(&self) -> &'static str {
        match self {
            Self::Imputation { .. } => "imputation",
            Self::Forecasting { .. } => "forecasting",
        }
    }

    fn check_fraction(f: f64) -> Result<()> {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split fraction must lie in (0,1), got {f}"
            )));
        }
        Ok(())
    }
}

/// Sequence-data split: a train view plus the held-out entries.
#[derive(Debug, Clone)]
pub struct SequenceSplit {
    pub train: SequenceDataset,
    /// (sequence, time, true action) of every held-out entry.
    pub heldout: Vec<(usize, usize, usize)>,
    /// Time cut for forecasting; equals the full length for imputation.
    pub train_steps: usize,
}

pub fn split_sequences(data: &SequenceDataset, spec: &SplitSpec) -> Result<SequenceSplit> {
    match *spec {
        SplitSpec::Imputation {
            mask_fraction,
            seed,
        } => {
            SplitSpec::check_fraction(mask_fraction)?;
            let mut observed: Vec<(usize, usize)> = Vec::new();
            for (n, seq) in data.sequences().iter().enumerate() {
                for (t, obs) in seq.iter().enumerate() {
                    if obs.is_some() {
                        observed.push((n, t));
                    }
                }
            }
            let m = (mask_fraction * observed.len() as f64).floor() as usize;
            if m == 0 || m == observed.len() {
                return Err(Error::InvalidArgument(format!(
                    "degenerate imputation split: {m} of {} entries masked",
                    observed.len()
                )));
            }
            let mut rng = rng_for(seed, "sequence-mask", 0);
            observed.shuffle(&mut rng);
            let mut mask: Vec<(usize, usize)> = observed[..m].to_vec();
            mask.sort_unstable();
            let mut sequences: Vec<Vec<Option<usize>>> = data.sequences().to_vec();
            let mut heldout = Vec::with_capacity(m);
            for (n, t) in mask {
                let actual = sequences[n][t].take().expect("masked entry was observed");
                heldout.push((n, t, actual));
            }
            Ok(SequenceSplit {
                train: SequenceDataset::new(sequences, data.num_actions())?,
                heldout,
                train_steps: data.t_len(),
            })
        }
        SplitSpec::Forecasting { train_fraction, .. } => {
            SplitSpec::check_fraction(train_fraction)?;
            let t_len = data.t_len();
            let cut = (train_fraction * t_len as f64).ceil() as usize;
            if cut == 0 || cut >= t_len {
                return Err(Error::InvalidArgument(format!(
                    "degenerate forecasting split: cut {cut} of {t_len} steps"
                )));
            }
            let mut sequences = Vec::with_capacity(data.len());
            let mut heldout = Vec::new();
            for (n, seq) in data.sequences().iter().enumerate() {
                sequences.push(seq[..cut].to_vec());
                for (t, obs) in seq.iter().enumerate().skip(cut) {
                    if let Some(a) = obs {
                        heldout.push((n, t, *a));
                    }
                }
            }
            if heldout.is_empty() {
                return Err(Error::InvalidArgument("empty forecasting test side".into()));
            }
            Ok(SequenceSplit {
                train: SequenceDataset::new(sequences, data.num_actions())?,
                heldout,
                train_steps: cut,
            })
        }
    }
}

/// Count-tensor split: the train view masks or truncates, and every test
/// cell (zero or not) is listed for scoring.
#[derive(Debug, Clone)]
pub struct TensorSplit {
    pub train: CountTensor,
    pub heldout: Vec<([usize; 4], u64)>,
    pub train_steps: usize,
}

pub fn split_tensor(data: &CountTensor, spec: &SplitSpec) -> Result<TensorSplit> {
    let [v, _, a_n, t_n] = data.dims();
    match *spec {
        SplitSpec::Imputation {
            mask_fraction,
            seed,
        } => {
            SplitSpec::check_fraction(mask_fraction)?;
            let mut cells = Vec::with_capacity(data.num_cells());
            for i in 0..v {
                for j in 0..v {
                    if i == j {
                        continue;
                    }
                    for a in 0..a_n {
                        for t in 0..t_n {
                            cells.push([i, j, a, t]);
                        }
                    }
                }
            }
            let m = (mask_fraction * cells.len() as f64).floor() as usize;
            if m == 0 || m == cells.len() {
                return Err(Error::InvalidArgument(
                    "degenerate tensor imputation split".into(),
                ));
            }
            let mut rng = rng_for(seed, "tensor-mask", 0);
            cells.shuffle(&mut rng);
            let mask: BTreeSet<[usize; 4]> = cells[..m].iter().copied().collect();
            let heldout: Vec<([usize; 4], u64)> =
                mask.iter().map(|idx| (*idx, data.get(*idx))).collect();
            let mut train = data.clone();
            train.set_mask(mask)?;
            Ok(TensorSplit {
                train,
                heldout,
                train_steps: t_n,
            })
        }
        SplitSpec::Forecasting { train_fraction, .. } => {
            SplitSpec::check_fraction(train_fraction)?;
            let cut = (train_fraction * t_n as f64).ceil() as usize;
            if cut == 0 || cut >= t_n {
                return Err(Error::InvalidArgument(
                    "degenerate tensor forecasting split".into(),
                ));
            }
            let train = data.truncate_steps(cut);
            let mut heldout = Vec::new();
            for i in 0..v {
                for j in 0..v {
                    if i == j {
                        continue;
                    }
                    for a in 0..a_n {
                        for t in cut..t_n {
                            heldout.push(([i, j, a, t], data.get([i, j, a, t])));
                        }
                    }
                }
            }
            Ok(TensorSplit {
                train,
                heldout,
                train_steps: cut,
            })
        }
    }
}

/// Mean absolute error between aligned prediction/actual pairs.
pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(Error::InvalidArgument(format!(
            "mae needs equal nonempty lengths, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / predicted.len() as f64)
}

/// Scaled pointwise predictive density over held-out Poisson cells:
/// exp((1/|I|) Σ_i log((1/S) Σ_s Pois(y_i; μ_i^(s)))), evaluated in
/// log space. Always in (0, 1].
pub fn sppd(counts: &[u64], rates_per_sample: &[Vec<f64>]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if rates_per_sample.is_empty() {
        return Err(Error::InvalidArgument("sppd needs at least one sample".into()));
    }
    for rates in rates_per_sample {
        if rates.len() != counts.len() {
            return Err(Error::DimensionMismatch(
                "per-sample rates must match the test cells".into(),
            ));
        }
    }
    let s = rates_per_sample.len();
    let mut total = 0.0;
    let mut lps = vec![0.0; s];
    for (i, y) in counts.iter().enumerate() {
        for (si, rates) in rates_per_sample.iter().enumerate() {
            lps[si] = poisson_lpmf(*y, rates[i]);
        }
        total += logsumexp(&lps) - (s as f64).ln();
    }
    Ok((total / counts.len() as f64).exp().min(1.0))
}

/// Mean absolute entrywise errors of posterior-mean matrices against the
/// truth.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryScore {
    pub emission_l1: f64,
    pub transition_l1: f64,
}

fn matrix_l1(a: &StochasticMatrix, b: &StochasticMatrix) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.data().len() as f64
}

/// Scores a trace against the truth. With `aligned` set, every posterior
/// sample is relabeled by the emission-based optimal assignment before
/// averaging (the evaluation path for label-switching-prone baselines).
pub fn recovery_score(
    truth: &HmmParams,
    trace: &ChainTrace,
    aligned: bool,
) -> Result<RecoveryScore> {
    if trace.samples.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let k = truth.num_states();
    let mut emission_mean = vec![0.0; k * truth.num_actions()];
    let mut transition_mean = vec![0.0; k * k];
    for sample in &trace.samples {
        let emission = sample.matrix("emission")?;
        let transition = sample.matrix("transition")?;
        let (emission, transition) = if aligned {
            let perm = align_states(truth.emission(), &emission)?;
            let e = emission.select_rows(&perm);
            let mut t_data = vec![0.0; k * k];
            for r in 0..k {
                for c in 0..k {
                    t_data[r * k + c] = transition.get(perm[r], perm[c]);
                }
            }
            (e, StochasticMatrix::new(k, k, t_data)?)
        } else {
            (emission, transition)
        };
        for (dst, v) in emission_mean.iter_mut().zip(emission.data()) {
            *dst += v;
        }
        for (dst, v) in transition_mean.iter_mut().zip(transition.data()) {
            *dst += v;
        }
    }
    let n = trace.samples.len() as f64;
    emission_mean.iter_mut().for_each(|v| *v /= n);
    transition_mean.iter_mut().for_each(|v| *v /= n);
    let emission_mean = StochasticMatrix::new(k, truth.num_actions(), emission_mean)?;
    let transition_mean = StochasticMatrix::new(k, k, transition_mean)?;
    Ok(RecoveryScore {
        emission_l1: matrix_l1(truth.emission(), &emission_mean),
        transition_l1: matrix_l1(truth.transition(), &transition_mean),
    })
}

/// Which split to evaluate in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Imputation,
    Forecasting,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imputation" => Ok(Self::Imputation),
            "forecasting" => Ok(Self::Forecasting),
            other => Err(Error::InvalidArgument(format!(
                "unknown split mode '{other}'"
            ))),
        }
    }
}

impl SplitMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Imputation => "imputation",
            Self::Forecasting => "forecasting",
        }
    }
}

/// Model family of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Hmm {
        truth: TruthSpec,
        num_sequences: usize,
        t_len: usize,
    },
    Dpt {
        num_countries: usize,
        num_actions: usize,
        num_steps: usize,
        num_communities: usize,
        num_states: usize,
    },
}

/// Default sequence count: the few-shot setting fits 100 sequences, the
/// full setting 10,000.
pub fn default_num_sequences(few_shot: bool) -> usize {
    if few_shot {
        100
    } else {
        10_000
    }
}

/// A full experiment: per seed, generate data, split, fit every prior
/// configuration, and score.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub model: ModelSpec,
    pub seeds: Vec<u64>,
    pub split: SplitMode,
    pub mask_fraction: f64,
    pub train_fraction: f64,
    pub priors: Vec<String>,
    pub sampler: SamplerConfig,
    pub separate_psi: bool,
    /// Independent chains per fit; the best by mean log target is kept.
    pub chains: usize,
}

/// One metric observation, directly serializable as a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub seed: String,
    pub prior: String,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

/// Sweep output: per-seed rows, aggregate rows, and per-job failures.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<MetricRow>,
    pub failures: Vec<String>,
}

impl ExperimentReport {
    /// Values of one metric across seeds for one prior configuration.
    pub fn metric_values(&self, prior: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.prior == prior && r.metric == metric && r.seed != "mean" && r.seed != "std")
            .map(|r| r.value)
            .collect()
    }

    /// Per-seed values keyed by seed string, for paired comparisons.
    pub fn seed_metric(&self, prior: &str, metric: &str, seed: u64) -> Option<f64> {
        let seed = seed.to_string();
        self.rows
            .iter()
            .find(|r| r.prior == prior && r.metric == metric && r.seed == seed)
            .map(|r| r.value)
    }
}

fn split_spec_for(spec: &ExperimentSpec, seed: u64) -> SplitSpec {
    let split_seed = derive_seed(seed, "split", 0);
    match spec.split {
        SplitMode::Imputation => SplitSpec::Imputation {
            mask_fraction: spec.mask_fraction,
            seed: split_seed,
        },
        SplitMode::Forecasting => SplitSpec::Forecasting {
            train_fraction: spec.train_fraction,
            seed: split_seed,
        },
    }
}

struct SeedOutcome {
    rows: Vec<MetricRow>,
    failures: Vec<String>,
}

/// Scores one HMM trace against held-out data: predictive MAEs (plus
/// latent-state MAE when the true paths are known) and recovery errors
/// when the truth is known. The split is recomputed from its spec, so the
/// fit and the evaluation always agree on the mask.
pub fn hmm_trace_metrics(
    data: &SequenceDataset,
    true_states: Option<&[Vec<usize>]>,
    truth: Option<&HmmParams>,
    split_spec: &SplitSpec,
    trace: &ChainTrace,
    num_states: usize,
) -> Result<Vec<(String, f64)>> {
    let split = split_sequences(data, split_spec)?;
    let k = num_states;
    let initial = vec![1.0 / k as f64; k];
    let params: Vec<HmmParams> = trace
        .samples
        .iter()
        .map(|r| hmm_params_from_record(r, initial.clone()))
        .collect::<Result<_>>()?;
    if params.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let s_n = params.len() as f64;
    let mut out = Vec::new();

    match split_spec {
        SplitSpec::Forecasting { .. } => {
            let cut = split.train_steps;
            let horizon = data.t_len() - cut;
            let mut pred_action = vec![vec![0.0; horizon]; data.len()];
            let mut pred_state = vec![vec![0.0; horizon]; data.len()];
            for p in &params {
                for (n, seq) in split.train.sequences().iter().enumerate() {
                    let steps = hmm::hmm_forecast(p, seq, horizon);
                    for (h, st) in steps.iter().enumerate() {
                        pred_action[n][h] += st.expected_action / s_n;
                        pred_state[n][h] += st.expected_state / s_n;
                    }
                }
            }
            let mut po = Vec::with_capacity(split.heldout.len());
            let mut ao = Vec::with_capacity(split.heldout.len());
            for (n, t, actual) in &split.heldout {
                po.push(pred_action[*n][*t - cut]);
                ao.push(*actual as f64);
            }
            out.push(("mae_observations".to_string(), mae(&po, &ao)?));
            if let Some(states) = true_states {
                let mut ps = Vec::new();
                let mut zs = Vec::new();
                for (n, path) in states.iter().enumerate() {
                    for (t, z) in path.iter().enumerate().skip(cut) {
                        ps.push(pred_state[n][t - cut]);
                        zs.push(*z as f64);
                    }
                }
                out.push(("mae_latent_states".to_string(), mae(&ps, &zs)?));
            }
        }
        SplitSpec::Imputation { .. } => {
            let mut pred: std::collections::BTreeMap<(usize, usize), f64> = split
                .heldout
                .iter()
                .map(|(n, t, _)| ((*n, *t), 0.0))
                .collect();
            let t_full = data.t_len();
            let mut state_pred = vec![vec![0.0; t_full]; data.len()];
            for p in &params {
                for (n, seq) in split.train.sequences().iter().enumerate() {
                    if seq.iter().any(Option::is_none) {
                        for slot in hmm::hmm_impute(p, seq)? {
                            if let Some(v) = pred.get_mut(&(n, slot.t)) {
                                *v += slot.expected_action / s_n;
                            }
                        }
                    }
                    if true_states.is_some() {
                        let gamma = hmm::hmm_posterior_states(p, seq);
                        for t in 0..t_full {
                            let mut e = 0.0;
                            for st in 0..k {
                                e += gamma[t * k + st] * st as f64;
                            }
                            state_pred[n][t] += e / s_n;
                        }
                    }
                }
            }
            let mut po = Vec::with_capacity(split.heldout.len());
            let mut ao = Vec::with_capacity(split.heldout.len());
            for (n, t, actual) in &split.heldout {
                po.push(pred[&(*n, *t)]);
                ao.push(*actual as f64);
            }
            out.push(("mae_observations".to_string(), mae(&po, &ao)?));
            if let Some(states) = true_states {
                let mut ps = Vec::new();
                let mut zs = Vec::new();
                for (n, path) in states.iter().enumerate() {
                    for (t, z) in path.iter().enumerate() {
                        ps.push(state_pred[n][t]);
                        zs.push(*z as f64);
                    }
                }
                out.push(("mae_latent_states".to_string(), mae(&ps, &zs)?));
            }
        }
    }

    if let Some(truth) = truth {
        let unaligned = recovery_score(truth, trace, false)?;
        let aligned = recovery_score(truth, trace, true)?;
        out.push(("recovery_emission_unaligned".to_string(), unaligned.emission_l1));
        out.push(("recovery_transition_unaligned".to_string(), unaligned.transition_l1));
        out.push(("recovery_emission_aligned".to_string(), aligned.emission_l1));
        out.push(("recovery_transition_aligned".to_string(), aligned.transition_l1));
    }
    Ok(out)
}

/// Scores one DPT trace against held-out cells: predictive-mean MAE and
/// SPPD over the test set.
pub fn dpt_trace_metrics(
    data: &CountTensor,
    split_spec: &SplitSpec,
    trace: &ChainTrace,
) -> Result<Vec<(String, f64)>> {
    let split = split_tensor(data, split_spec)?;
    let samples: Vec<dpt::DptParams> = trace
        .samples
        .iter()
        .map(|r| dpt_params_from_record(r, 1.0, 1.0))
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let counts: Vec<u64> = split.heldout.iter().map(|(_, y)| *y).collect();
    let mut rates_per_sample = Vec::with_capacity(samples.len());
    match split_spec {
        SplitSpec::Forecasting { .. } => {
            let horizon = data.num_steps() - split.train_steps;
            for p in &samples {
                let all = dpt::dpt_forecast_rates(p, horizon);
                let d = p.dims();
                let rates: Vec<f64> = split
                    .heldout
                    .iter()
                    .map(|(idx, _)| {
                        let h = idx[3] - split.train_steps;
                        all[dpt::forecast_rate_index(&d, h, idx[0], idx[1], idx[2])]
                    })
                    .collect();
                rates_per_sample.push(rates);
            }
        }
        SplitSpec::Imputation { .. } => {
            for p in &samples {
                let eval = RateEvaluator::new(p);
                let rates: Vec<f64> = split
                    .heldout
                    .iter()
                    .map(|(idx, _)| eval.rate(idx[0], idx[1], idx[2], idx[3]))
                    .collect();
                rates_per_sample.push(rates);
            }
        }
    }
    let mean_rates: Vec<f64> = (0..counts.len())
        .map(|i| rates_per_sample.iter().map(|r| r[i]).sum::<f64>() / samples.len() as f64)
        .collect();
    let actual: Vec<f64> = counts.iter().map(|y| *y as f64).collect();
    Ok(vec![
        ("mae_observations".to_string(), mae(&mean_rates, &actual)?),
        ("sppd".to_string(), sppd(&counts, &rates_per_sample)?),
    ])
}

fn run_hmm_seed(
    spec: &ExperimentSpec,
    truth_spec: &TruthSpec,
    num_sequences: usize,
    t_len: usize,
    seed: u64,
) -> Result<SeedOutcome> {
    let truth = make_truth(truth_spec)?;
    let mut data_rng = rng_for(seed, "data", 0);
    let (data, states) = hmm::hmm_generate(&truth, num_sequences, t_len, &mut data_rng);
    let split_spec = split_spec_for(spec, seed);
    let split = split_sequences(&data, &split_spec)?;
    let k = truth_spec.num_states;
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    for (p_idx, prior_name) in spec.priors.iter().enumerate() {
        let config = PriorConfig::standard(prior_name, k, truth_spec.num_actions)?;
        let target = HmmPosterior::new(&split.train, k, config)?;
        let chain_seed = derive_seed(seed, "chain", p_idx as u64);
        let trace = match run_best_chain(&spec.sampler, &target, chain_seed, spec.chains) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!(
                    "seed {seed} prior {prior_name}: sampler aborted: {e}"
                ));
                continue;
            }
        };
        for (metric, value) in
            hmm_trace_metrics(&data, Some(&states), Some(&truth), &split_spec, &trace, k)?
        {
            rows.push(MetricRow {
                experiment: spec.id.clone(),
                seed: seed.to_string(),
                prior: prior_name.clone(),
                split: spec.split.name().to_string(),
                metric,
                value,
            });
        }
    }
    Ok(SeedOutcome { rows, failures })
}

/// Draws ground-truth parameters and a count tensor from the ordered
/// configuration, redrawing (deterministically) until the dataset lands in
/// a non-degenerate count regime. The gamma chains can collapse toward
/// zero or blow up over the horizon; both extremes make every predictive
/// comparison vacuous.
pub fn generate_dpt_dataset(
    dims: &DptDims,
    separate_psi: bool,
    seed: u64,
) -> Result<(dpt::DptParams, CountTensor)> {
    let gen_config = PriorConfig::standard("omd+omd", dims.num_states, dims.num_actions)?;
    let cells_per_step =
        (dims.num_countries * (dims.num_countries - 1) * dims.num_actions) as u64;
    let lo = (cells_per_step / 20).max(5);
    let hi = cells_per_step * 5;
    let mut last = None;
    for attempt in 0..256 {
        let mut truth_rng = rng_for(seed, "dpt-truth", attempt);
        let params = dpt::sample_dpt_params(dims, &gen_config, separate_psi, &mut truth_rng)?;
        let mut data_rng = rng_for(seed, "dpt-data", attempt);
        let data = dpt::dpt_generate(&params, &mut data_rng);
        let mut per_step = vec![0u64; dims.num_steps];
        for (idx, count) in data.iter() {
            per_step[idx[3]] += count;
        }
        if per_step.iter().all(|c| (lo..=hi).contains(c)) {
            return Ok((params, data));
        }
        last = Some((params, data));
    }
    // Extremely unlikely; fall back to the final draw.
    Ok(last.expect("at least one draw"))
}

fn run_dpt_seed(spec: &ExperimentSpec, dims: &DptDims, seed: u64) -> Result<SeedOutcome> {
    let (_truth_params, data) = generate_dpt_dataset(dims, spec.separate_psi, seed)?;
    let split_spec = split_spec_for(spec, seed);
    let split = split_tensor(&data, &split_spec)?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (p_idx, prior_name) in spec.priors.iter().enumerate() {
        let config = PriorConfig::standard(prior_name, dims.num_states, dims.num_actions)?;
        let target = DptPosterior::new(
            &split.train,
            dims.num_communities,
            dims.num_states,
            config,
            spec.separate_psi,
        )?;
        let chain_seed = derive_seed(seed, "dpt-chain", p_idx as u64);
        let trace = match run_best_chain(&spec.sampler, &target, chain_seed, spec.chains) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!(
                    "seed {seed} prior {prior_name}: sampler aborted: {e}"
                ));
                continue;
            }
        };
        let mut metrics = dpt_trace_metrics(&data, &split_spec, &trace)?;
        metrics.push(("acceptance_rate".to_string(), trace.acceptance_rate));
        for (metric, value) in metrics {
            rows.push(MetricRow {
                experiment: spec.id.clone(),
                seed: seed.to_string(),
                prior: prior_name.clone(),
                split: spec.split.name().to_string(),
                metric,
                value,
            });
        }
    }
    Ok(SeedOutcome { rows, failures })
}

fn run_seed(spec: &ExperimentSpec, seed: u64) -> SeedOutcome {
    let outcome = match &spec.model {
        ModelSpec::Hmm {
            truth,
            num_sequences,
            t_len,
        } => run_hmm_seed(spec, truth, *num_sequences, *t_len, seed),
        ModelSpec::Dpt {
            num_countries,
            num_actions,
            num_steps,
            num_communities,
            num_states,
        } => {
            let dims = DptDims {
                num_countries: *num_countries,
                num_actions: *num_actions,
                num_steps: *num_steps,
                num_communities: *num_communities,
                num_states: *num_states,
            };
            run_dpt_seed(spec, &dims, seed)
        }
    };
    match outcome {
        Ok(o) => o,
        Err(e) => SeedOutcome {
            rows: Vec::new(),
            failures: vec![format!("seed {seed}: {e}")],
        },
    }
}

/// Runs the sweep. Seeds are independent jobs with a fixed job-to-seed
/// mapping, so the report is identical for any thread count.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentReport> {
    if spec.seeds.is_empty() || spec.priors.is_empty() {
        return Err(Error::InvalidArgument(
            "experiment needs at least one seed and one prior configuration".into(),
        ));
    }
    let threads = threads.max(1).min(spec.seeds.len());
    let mut outcomes: Vec<Option<SeedOutcome>> = Vec::new();
    outcomes.resize_with(spec.seeds.len(), || None);

    if threads == 1 {
        for (i, seed) in spec.seeds.iter().enumerate() {
            outcomes[i] = Some(run_seed(spec, *seed));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: std::sync::Mutex<Vec<(usize, SeedOutcome)>> =
            std::sync::Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= spec.seeds.len() {
                        break;
                    }
                    let outcome = run_seed(spec, spec.seeds[i]);
                    results.lock().expect("poisoned").push((i, outcome));
                });
            }
        });
        for (i, outcome) in results.into_inner().expect("poisoned") {
            outcomes[i] = Some(outcome);
        }
    }

    let mut report = ExperimentReport::default();
    for outcome in outcomes.into_iter().flatten() {
        report.rows.extend(outcome.rows);
        report.failures.extend(outcome.failures);
    }
    append_aggregates(spec, &mut report);
    Ok(report)
}

/// Mean and sample standard deviation across seeds, appended as extra rows
/// with pseudo-seeds "mean" and "std".
fn append_aggregates(spec: &ExperimentSpec, report: &mut ExperimentReport) {
    let mut keys: Vec<(String, String)> = Vec::new();
    for row in &report.rows {
        let key = (row.prior.clone(), row.metric.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut extra = Vec::new();
    for (prior, metric) in keys {
        let values = report.metric_values(&prior, &metric);
        if values.is_empty() {
            continue;
        }
        for (tag, value) in [
            ("mean", stats::mean(&values)),
            ("std", stats::sample_std(&values)),
        ] {
            extra.push(MetricRow {
                experiment: spec.id.clone(),
                seed: tag.to_string(),
                prior: prior.clone(),
                split: spec.split.name().to_string(),
                metric: metric.clone(),
                value,
            });
        }
    }
    report.rows.extend(extra);
}
