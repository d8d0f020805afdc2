//! MCMC drivers over unconstrained targets.
//!
//! The mandatory sampler is adaptive random-walk Metropolis: full-vector
//! Gaussian proposals whose covariance and global scale are adapted during
//! burn-in (frozen afterward so the kept chain satisfies detailed balance).
//! Leapfrog HMC is available as an option; gradients come from the target
//! when it supplies them and from central finite differences otherwise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeds::rng_from;
use crate::targets::{Block, LogTarget, SampleRecord};
use crate::transforms::UnconstrainedState;

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    AdaptiveRwm,
    Hmc { leapfrog_steps: usize },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AdaptiveRwm => "adaptive-rwm",
            Algorithm::Hmc { .. } => "hmc",
        }
    }
}

/// Sampler settings. `thin` is the number of proposals per kept sample;
/// the burn-in phase runs `burn_in * thin` proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub target_acceptance: f64,
    pub initial_step: f64,
    pub adapt_window: usize,
    /// Prior draws evaluated at initialization; the chain starts from the
    /// one with the highest log target.
    pub init_draws: usize,
    /// Initial acceptance temperature of the burn-in anneal; 1.0 disables
    /// tempering. The temperature decays to 1 over the first half of
    /// burn-in, and kept samples are never tempered.
    pub anneal_from: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AdaptiveRwm,
            samples: 1000,
            burn_in: 200,
            thin: 10,
            target_acceptance: 0.234,
            initial_step: 1.0,
            adapt_window: 50,
            init_draws: 16,
            anneal_from: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument(
                "samples and thin must be at least 1".into(),
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidArgument(
                "target acceptance must lie in (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// Posterior samples in constrained space plus chain diagnostics.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub algorithm: String,
    pub acceptance_rate: f64,
    pub samples: Vec<SampleRecord>,
    pub log_joint_trace: Vec<f64>,
}

/// Running mean and covariance (full below `FULL_COV_MAX_DIM`, diagonal
/// above) of the proposal history.
struct RunningMoments {
    n: f64,
    mean: Vec<f64>,
    full: Option<Vec<f64>>, // d×d accumulated outer products
    diag: Vec<f64>,
}

const FULL_COV_MAX_DIM: usize = 600;

impl RunningMoments {
    fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            full: (dim <= FULL_COV_MAX_DIM).then(|| vec![0.0; dim * dim]),
            diag: vec![0.0; dim],
        }
    }

    fn new_diag_only(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            full: None,
            diag: vec![0.0; dim],
        }
    }

    fn update_diag(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..self.mean.len() {
            let d1 = x[i] - self.mean[i];
            self.mean[i] += d1 / self.n;
            let d2 = x[i] - self.mean[i];
            self.diag[i] += d1 * d2;
        }
    }

    fn update(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.n += 1.0;
        let deltas: Vec<f64> = x.iter().zip(&self.mean).map(|(xi, mi)| xi - mi).collect();
        for (m, delta) in self.mean.iter_mut().zip(&deltas) {
            *m += delta / self.n;
        }
        let deltas2: Vec<f64> = x.iter().zip(&self.mean).map(|(xi, mi)| xi - mi).collect();
        if let Some(full) = &mut self.full {
            for i in 0..d {
                let di = deltas[i];
                let row = &mut full[i * d..(i + 1) * d];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += di * deltas2[j];
                }
            }
        }
        for ((v, d1), d2) in self.diag.iter_mut().zip(&deltas).zip(&deltas2) {
            *v += d1 * d2;
        }
    }

    fn diag_std(&self) -> Vec<f64> {
        self.diag
            .iter()
            .map(|v| (v / self.n.max(1.0) + 1e-12).sqrt())
            .collect()
    }

    fn covariance(&self) -> Option<Vec<f64>> {
        let full = self.full.as_ref()?;
        let d = self.mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d * d {
            cov[i] = full[i] / self.n.max(1.0);
        }
        for i in 0..d {
            cov[i * d + i] += 1e-9;
        }
        Some(cov)
    }
}

/// In-place Cholesky of a positive-definite matrix; None when the matrix is
/// not numerically positive definite even after jitter.
fn cholesky(mut a: Vec<f64>, d: usize) -> Option<Vec<f64>> {
    for jitter_pow in 0..4 {
        let mut ok = true;
        let mut l = vec![0.0; d * d];
        'outer: for i in 0..d {
            for j in 0..=i {
                let mut sum = a[i * d + j];
                for k in 0..j {
                    sum -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i * d + i] = sum.sqrt();
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        if ok {
            return Some(l);
        }
        let jitter = 1e-8 * 10f64.powi(jitter_pow);
        for i in 0..d {
            a[i * d + i] += jitter;
        }
    }
    None
}

enum Proposal {
    Diagonal(Vec<f64>),
    Full(Vec<f64>),
}

impl Proposal {
    fn step<R: Rng>(&self, scale: f64, rng: &mut R, out: &mut [f64]) {
        let d = out.len();
        let z: Vec<f64> = (0..d)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                v
            })
            .collect();
        match self {
            Proposal::Diagonal(std) => {
                for ((o, zi), s) in out.iter_mut().zip(&z).zip(std) {
                    *o = scale * zi * s;
                }
            }
            Proposal::Full(l) => {
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[i * d + j] * z[j];
                    }
                    out[i] = scale * acc;
                }
            }
        }
    }
}

/// Runs one chain and returns `config.samples` kept samples.
///
/// Initialization draws from the prior; during burn-in the proposal
/// covariance is refreshed every `adapt_window` proposals and a global
/// scale is steered toward the target acceptance. A burn-in window with
/// zero acceptances halves the scale; a second consecutive zero window
/// aborts with a diagnostic.
pub fn run_chain<T: LogTarget>(
    config: &SamplerConfig,
    target: &T,
    seed: u64,
) -> Result<ChainTrace> {
    config.validate()?;
    match config.algorithm {
        Algorithm::AdaptiveRwm => run_rwm(config, target, seed),
        Algorithm::Hmc { leapfrog_steps } => run_hmc(config, target, seed, leapfrog_steps),
    }
}

fn init_state<T: LogTarget>(
    target: &T,
    rng: &mut rand_chacha::ChaCha8Rng,
    draws: usize,
) -> Result<(UnconstrainedState, f64)> {
    let mut best: Option<(UnconstrainedState, f64)> = None;
    let mut attempts = 0usize;
    while attempts < draws.max(1) + 100 {
        attempts += 1;
        let x = target.init_from_prior(rng)?;
        let lp = target.log_target(&x);
        if !lp.is_finite() {
            continue;
        }
        let better = best.as_ref().is_none_or(|(_, b)| lp > *b);
        if better {
            best = Some((x, lp));
        }
        if attempts >= draws.max(1) && best.is_some() {
            break;
        }
    }
    best.ok_or_else(|| {
        Error::SamplerAbort("no finite log target after repeated prior draws".into())
    })
}

fn run_rwm<T: LogTarget>(config: &SamplerConfig, target: &T, seed: u64) -> Result<ChainTrace> {
    let d = target.dim();
    let mut rng = rng_from(seed);
    let (mut x, mut lp) = init_state(target, &mut rng, config.init_draws)?;

    let base_scale = 2.38 / (d as f64).sqrt();
    let mut log_scale = config.initial_step.ln();
    let mut proposal = Proposal::Diagonal(vec![1.0; d]);
    let mut moments = RunningMoments::new(d);

    let burn_proposals = config.burn_in * config.thin;
    let keep_proposals = config.samples * config.thin;
    let total = burn_proposals + keep_proposals;

    let mut samples = Vec::with_capacity(config.samples);
    let mut log_joint_trace = Vec::with_capacity(config.samples);
    let mut step = vec![0.0; d];
    let mut window_accepts = 0usize;
    let mut window_count = 0usize;
    let mut window_index = 0usize;
    let mut consecutive_zero = 0usize;
    let mut kept_accepts = 0usize;

    let anneal_span = (burn_proposals / 2).max(1) as f64;
    for iter in 0..total {
        let in_burn = iter < burn_proposals;
        let temperature = if in_burn && config.anneal_from > 1.0 {
            let progress = (iter as f64 / anneal_span).min(1.0);
            config.anneal_from.powf(1.0 - progress)
        } else {
            1.0
        };
        proposal.step(base_scale * log_scale.exp(), &mut rng, &mut step);
        let prop = UnconstrainedState::new(
            x.values.iter().zip(&step).map(|(xi, s)| xi + s).collect(),
        );
        let prop_lp = target.log_target(&prop);
        let log_u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
        let accepted = prop_lp.is_finite() && log_u < (prop_lp - lp) / temperature;
        if accepted {
            x = prop;
            lp = prop_lp;
        }

        if in_burn {
            moments.update(&x.values);
            window_accepts += usize::from(accepted);
            window_count += 1;
            if window_count == config.adapt_window {
                let rate = window_accepts as f64 / window_count as f64;
                let gain = 2.0 / (1.0 + window_index as f64).sqrt();
                log_scale += gain * (rate - config.target_acceptance);
                log_scale = log_scale.clamp(-18.0, 6.0);
                if window_accepts == 0 {
                    log_scale += 0.5f64.ln();
                    consecutive_zero += 1;
                    if consecutive_zero >= 2 {
                        return Err(Error::SamplerAbort(format!(
                            "zero acceptance over {} consecutive adaptation windows \
                             (dim {d}, scale {:.3e})",
                            consecutive_zero,
                            base_scale * log_scale.exp()
                        )));
                    }
                } else {
                    consecutive_zero = 0;
                }
                if moments.n >= (2 * d.min(FULL_COV_MAX_DIM)).max(10) as f64 {
                    proposal = match moments.covariance().and_then(|c| cholesky(c, d)) {
                        Some(l) => Proposal::Full(l),
                        None => Proposal::Diagonal(moments.diag_std()),
                    };
                } else if moments.n >= 10.0 {
                    proposal = Proposal::Diagonal(moments.diag_std());
                }
                window_accepts = 0;
                window_count = 0;
                window_index += 1;
            }
        } else {
            kept_accepts += usize::from(accepted);
            let done = iter - burn_proposals + 1;
            if done % config.thin == 0 {
                samples.push(target.constrain(&x)?);
                log_joint_trace.push(lp);
            }
        }
    }

    Ok(ChainTrace {
        seed,
        burn_in: config.burn_in,
        thin: config.thin,
        algorithm: config.algorithm.name().to_string(),
        acceptance_rate: kept_accepts as f64 / keep_proposals as f64,
        samples,
        log_joint_trace,
    })
}

/// Central finite-difference gradient of the log target.
pub fn finite_difference_grad<T: LogTarget>(target: &T, state: &UnconstrainedState) -> Vec<f64> {
    let h = 1e-5;
    let mut grad = vec![0.0; state.dim()];
    let mut work = state.clone();
    for i in 0..state.dim() {
        let orig = work.values[i];
        work.values[i] = orig + h;
        let plus = target.log_target(&work);
        work.values[i] = orig - h;
        let minus = target.log_target(&work);
        work.values[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

fn run_hmc<T: LogTarget>(
    config: &SamplerConfig,
    target: &T,
    seed: u64,
    leapfrog_steps: usize,
) -> Result<ChainTrace> {
    if leapfrog_steps == 0 {
        return Err(Error::InvalidArgument(
            "leapfrog steps must be at least 1".into(),
        ));
    }
    let d = target.dim();
    let mut rng = rng_from(seed);
    let (mut x, mut lp) = init_state(target, &mut rng, config.init_draws)?;
    let grad_at = |s: &UnconstrainedState| -> Vec<f64> {
        target
            .grad_log_target(s)
            .unwrap_or_else(|| finite_difference_grad(target, s))
    };
    let mut grad = grad_at(&x);

    // HMC prefers a higher acceptance target than random walk.
    let accept_target = if (config.target_acceptance - 0.234).abs() < 1e-12 {
        0.65
    } else {
        config.target_acceptance
    };
    let mut log_eps = (config.initial_step * 0.05).ln();
    // Diagonal mass matrix: momenta ~ N(0, m), position step eps*p/m, with
    // m adapted to the inverse coordinate variances during burn-in.
    let mut inv_mass = vec![1.0; d];
    let mut mass_sqrt = vec![1.0; d];
    let mut moments = RunningMoments::new_diag_only(d);

    let burn_iters = config.burn_in * config.thin;
    let keep_iters = config.samples * config.thin;
    // Step-size windows want to be short relative to burn-in so the
    // adaptation has enough rounds to settle.
    let window = config.adapt_window.min((burn_iters / 12).max(5));
    let mut samples = Vec::with_capacity(config.samples);
    let mut log_joint_trace = Vec::with_capacity(config.samples);
    let mut kept_accepts = 0usize;
    let mut window_accepts = 0usize;
    let mut window_count = 0usize;
    let mut window_index = 0usize;

    for iter in 0..(burn_iters + keep_iters) {
        let in_burn = iter < burn_iters;
        // Jitter the step size to break periodic orbits.
        let jitter: f64 = 0.9 + 0.2 * rng.random::<f64>();
        let eps = log_eps.exp() * jitter;
        let mut p: Vec<f64> = (0..d)
            .map(|i| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * mass_sqrt[i]
            })
            .collect();
        let kinetic =
            |p: &[f64]| 0.5 * p.iter().zip(&inv_mass).map(|(v, im)| v * v * im).sum::<f64>();
        let h0 = -lp + kinetic(&p);

        let mut q = x.clone();
        let mut g = grad.clone();
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * eps * gi;
        }
        let mut diverged = false;
        for step in 0..leapfrog_steps {
            for ((qi, pi), im) in q.values.iter_mut().zip(&p).zip(&inv_mass) {
                *qi += eps * pi * im;
            }
            g = grad_at(&q);
            if g.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break;
            }
            let half = if step + 1 == leapfrog_steps { 0.5 } else { 1.0 };
            for (pi, gi) in p.iter_mut().zip(&g) {
                *pi += half * eps * gi;
            }
        }
        let prop_lp = if diverged {
            f64::NEG_INFINITY
        } else {
            target.log_target(&q)
        };
        let h1 = -prop_lp + kinetic(&p);
        let log_u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
        let accepted = prop_lp.is_finite() && log_u < h0 - h1;
        if accepted {
            x = q;
            lp = prop_lp;
            grad = g;
        }

        if in_burn {
            moments.update_diag(&x.values);
            window_accepts += usize::from(accepted);
            window_count += 1;
            if window_count == window {
                let rate = window_accepts as f64 / window_count as f64;
                let gain = 1.0 / (1.0 + window_index as f64).sqrt();
                log_eps += gain * (rate - accept_target);
                log_eps = log_eps.clamp(-18.0, 2.0);
                // Refresh the diagonal metric once enough history exists;
                // mild preconditioning only, frozen at the end of burn-in.
                if moments.n >= 100.0 {
                    for (i, std) in moments.diag_std().iter().enumerate() {
                        let var = (std * std).clamp(0.05, 20.0);
                        inv_mass[i] = var;
                        mass_sqrt[i] = (1.0 / var).sqrt();
                    }
                }
                window_accepts = 0;
                window_count = 0;
                window_index += 1;
            }
        } else {
            kept_accepts += usize::from(accepted);
            let done = iter - burn_iters + 1;
            if done % config.thin == 0 {
                samples.push(target.constrain(&x)?);
                log_joint_trace.push(lp);
            }
        }
    }

    Ok(ChainTrace {
        seed,
        burn_in: config.burn_in,
        thin: config.thin,
        algorithm: config.algorithm.name().to_string(),
        acceptance_rate: kept_accepts as f64 / keep_iters as f64,
        samples,
        log_joint_trace,
    })
}

/// Runs `n_chains` independent chains from derived seeds and keeps the
/// one with the highest mean log target over its kept samples. With one
/// chain this is exactly [`run_chain`]. Selection across chains happens
/// after every chain has finished.
pub fn run_best_chain<T: LogTarget>(
    config: &SamplerConfig,
    target: &T,
    seed: u64,
    n_chains: usize,
) -> Result<ChainTrace> {
    if n_chains <= 1 {
        return run_chain(config, target, seed);
    }
    let mut best: Option<(f64, ChainTrace)> = None;
    let mut last_err = None;
    for c in 0..n_chains {
        let chain_seed = crate::seeds::derive_seed(seed, "restart", c as u64);
        match run_chain(config, target, chain_seed) {
            Ok(trace) => {
                let score = crate::stats::mean(&trace.log_joint_trace);
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    best = Some((score, trace));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, trace)) => Ok(trace),
        None => Err(last_err.expect("at least one chain ran")),
    }
}

/// Arithmetic mean of one named block over the kept samples.
pub fn posterior_mean(trace: &ChainTrace, block: &str) -> Result<Block> {
    let first = trace
        .samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let proto = first.block(block)?;
    let mut values = vec![0.0; proto.values.len()];
    for sample in &trace.samples {
        let b = sample.block(block)?;
        if b.shape != proto.shape {
            return Err(Error::DimensionMismatch(format!(
                "block '{block}' changes shape across samples"
            )));
        }
        for (dst, v) in values.iter_mut().zip(&b.values) {
            *dst += v;
        }
    }
    let n = trace.samples.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(Block {
        shape: proto.shape.clone(),
        values,
    })
}
