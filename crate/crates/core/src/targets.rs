//! Posterior densities exposed to the samplers as unconstrained targets.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dpt::{self, CountTensor, DptDims, DptParams};
use crate::error::{Error, Result};
use crate::hmm::{self, HmmParams, SequenceDataset};
use crate::matrix::StochasticMatrix;
use crate::numerics::STICK_FLOOR;
use crate::priors::{MatrixPrior, PriorConfig};
use crate::transforms::{
    self, BlockKind, ParameterLayout, UnconstrainedState,
};

/// One named, shaped block of constrained parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Block {
    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn matrix(m: &StochasticMatrix) -> Self {
        Self {
            shape: vec![m.height(), m.width()],
            values: m.data().to_vec(),
        }
    }

    pub fn as_matrix(&self) -> Result<StochasticMatrix> {
        if self.shape.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "block shape {:?} is not a matrix",
                self.shape
            )));
        }
        StochasticMatrix::new(self.shape[0], self.shape[1], self.values.clone())
    }
}

/// Constrained posterior sample with named blocks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleRecord {
    pub blocks: BTreeMap<String, Block>,
}

impl SampleRecord {
    pub fn block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown block '{name}'")))
    }

    pub fn matrix(&self, name: &str) -> Result<StochasticMatrix> {
        self.block(name)?.as_matrix()
    }
}

/// Unnormalized log posterior over an unconstrained state vector.
pub trait LogTarget {
    fn layout(&self) -> &ParameterLayout;

    fn dim(&self) -> usize {
        self.layout().dim()
    }

    /// Log joint density at the constrained point plus the log Jacobian of
    /// the transform; −∞ for non-finite evaluations.
    fn log_target(&self, state: &UnconstrainedState) -> f64;

    /// Draw from the prior via one forward pass of the generative
    /// construction, mapped to the unconstrained space.
    fn init_from_prior(&self, rng: &mut ChaCha8Rng) -> Result<UnconstrainedState>;

    /// Constrained parameter record for trace storage.
    fn constrain(&self, state: &UnconstrainedState) -> Result<SampleRecord>;

    /// Analytic gradient when available; samplers fall back to finite
    /// differences otherwise.
    fn grad_log_target(&self, _state: &UnconstrainedState) -> Option<Vec<f64>> {
        None
    }
}

/// Hidden Markov model posterior: discrete states are marginalized
/// analytically by the forward recursion inside the likelihood, so the
/// state vector holds only the emission and transition stick variates.
pub struct HmmPosterior<'a> {
    data: &'a SequenceDataset,
    num_states: usize,
    config: PriorConfig,
    initial: Vec<f64>,
    layout: ParameterLayout,
}

impl<'a> HmmPosterior<'a> {
    pub fn new(data: &'a SequenceDataset, num_states: usize, config: PriorConfig) -> Result<Self> {
        let a = data.num_actions();
        match &config.emission {
            MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
                if alpha.len() != a {
                    return Err(Error::DimensionMismatch(format!(
                        "emission concentration length {} does not match {a} actions",
                        alpha.len()
                    )));
                }
            }
            MatrixPrior::Bmd { .. } => unreachable!("rejected by PriorConfig::new"),
        }
        let t_width = transforms::matrix_width(&config.transition, num_states);
        if t_width != num_states {
            return Err(Error::DimensionMismatch(format!(
                "transition prior width {t_width} does not match {num_states} states"
            )));
        }
        if let MatrixPrior::Bmd { band, .. } = &config.transition {
            if band.height() != num_states {
                return Err(Error::DimensionMismatch(
                    "band height does not match the state count".into(),
                ));
            }
        }
        let layout = ParameterLayout::new(vec![
            (
                "emission_sticks".into(),
                BlockKind::StickLogit,
                vec![num_states, a - 1],
            ),
            (
                "transition_sticks".into(),
                BlockKind::StickLogit,
                vec![transforms::stick_len(&config.transition, num_states)],
            ),
        ]);
        Ok(Self {
            data,
            num_states,
            config,
            initial: vec![1.0 / num_states as f64; num_states],
            layout,
        })
    }

    /// Override the default uniform initial state distribution.
    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.num_states {
            return Err(Error::DimensionMismatch(
                "initial distribution length".into(),
            ));
        }
        self.initial = initial;
        Ok(self)
    }

    fn stick_blocks(&self, state: &UnconstrainedState) -> Result<(Vec<f64>, Vec<f64>)> {
        let e = transforms::logits_to_sticks(self.layout.slice(&state.values, "emission_sticks")?);
        let t =
            transforms::logits_to_sticks(self.layout.slice(&state.values, "transition_sticks")?);
        Ok((e, t))
    }

    fn params_from_sticks(&self, e_sticks: &[f64], t_sticks: &[f64]) -> Result<HmmParams> {
        let emission =
            transforms::matrix_from_sticks(&self.config.emission, self.num_states, e_sticks)?;
        let transition =
            transforms::matrix_from_sticks(&self.config.transition, self.num_states, t_sticks)?;
        HmmParams::new(self.initial.clone(), transition, emission)
    }

    /// Constrained parameters at a state.
    pub fn params(&self, state: &UnconstrainedState) -> Result<HmmParams> {
        let (e, t) = self.stick_blocks(state)?;
        self.params_from_sticks(&e, &t)
    }

    /// Maps constrained parameters into the unconstrained space; errors if
    /// a matrix lies outside its family's support.
    pub fn unconstrain(&self, params: &HmmParams) -> Result<UnconstrainedState> {
        let e = transforms::sticks_from_matrix(&self.config.emission, params.emission())?;
        let t = transforms::sticks_from_matrix(&self.config.transition, params.transition())?;
        let mut values = transforms::sticks_to_logits(&e);
        values.extend(transforms::sticks_to_logits(&t));
        Ok(UnconstrainedState::new(values))
    }
}

impl LogTarget for HmmPosterior<'_> {
    fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn log_target(&self, state: &UnconstrainedState) -> f64 {
        let Ok((e_sticks, t_sticks)) = self.stick_blocks(state) else {
            return f64::NEG_INFINITY;
        };
        let Ok(params) = self.params_from_sticks(&e_sticks, &t_sticks) else {
            return f64::NEG_INFINITY;
        };
        let ll = hmm::hmm_log_likelihood(&params, self.data);
        let lp = ll
            + transforms::stick_log_prior(&self.config.emission, self.num_states, &e_sticks)
            + transforms::stick_log_prior(&self.config.transition, self.num_states, &t_sticks)
            + transforms::logit_jacobian(&e_sticks)
            + transforms::logit_jacobian(&t_sticks);
        if lp.is_finite() {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }

    fn init_from_prior(&self, rng: &mut ChaCha8Rng) -> Result<UnconstrainedState> {
        let e = transforms::stick_prior_draw(&self.config.emission, self.num_states, rng)?;
        let t = transforms::stick_prior_draw(&self.config.transition, self.num_states, rng)?;
        let mut values = transforms::sticks_to_logits(&e);
        values.extend(transforms::sticks_to_logits(&t));
        Ok(UnconstrainedState::new(values))
    }

    fn constrain(&self, state: &UnconstrainedState) -> Result<SampleRecord> {
        let params = self.params(state)?;
        let mut blocks = BTreeMap::new();
        blocks.insert("emission".into(), Block::matrix(params.emission()));
        blocks.insert("transition".into(), Block::matrix(params.transition()));
        Ok(SampleRecord { blocks })
    }

    fn grad_log_target(&self, state: &UnconstrainedState) -> Option<Vec<f64>> {
        let (e_sticks, t_sticks) = self.stick_blocks(state).ok()?;
        let params = self.params_from_sticks(&e_sticks, &t_sticks).ok()?;
        let k = self.num_states;
        let a = self.data.num_actions();
        // Expected sufficient statistics across sequences.
        let mut emit = vec![0.0; k * a];
        let mut trans = vec![0.0; k * k];
        for seq in self.data.sequences() {
            let (e, t) = hmm::expected_counts(&params, seq);
            for (dst, v) in emit.iter_mut().zip(e) {
                *dst += v;
            }
            for (dst, v) in trans.iter_mut().zip(t) {
                *dst += v;
            }
        }
        // d log-likelihood / d entry = expected count / entry.
        let ratio = |count: f64, val: f64| if count == 0.0 { 0.0 } else { count / val };
        let grad_emission: Vec<f64> = emit
            .iter()
            .zip(params.emission().data())
            .map(|(c, v)| ratio(*c, *v))
            .collect();
        let grad_transition: Vec<f64> = trans
            .iter()
            .zip(params.transition().data())
            .map(|(c, v)| ratio(*c, *v))
            .collect();
        let mut grad_e = transforms::matrix_sticks_vjp(
            &self.config.emission,
            k,
            &e_sticks,
            &grad_emission,
        );
        let mut grad_t = transforms::matrix_sticks_vjp(
            &self.config.transition,
            k,
            &t_sticks,
            &grad_transition,
        );
        // Prior and transform terms.
        for (g, p) in grad_e
            .iter_mut()
            .zip(transforms::stick_log_prior_grad(&self.config.emission, k, &e_sticks))
        {
            *g += p;
        }
        for (g, p) in grad_t
            .iter_mut()
            .zip(transforms::stick_log_prior_grad(&self.config.transition, k, &t_sticks))
        {
            *g += p;
        }
        let mut out = Vec::with_capacity(state.dim());
        for (g, b) in grad_e.iter().zip(&e_sticks) {
            out.push(g * b * (1.0 - b) + (1.0 - 2.0 * b));
        }
        for (g, b) in grad_t.iter().zip(&t_sticks) {
            out.push(g * b * (1.0 - b) + (1.0 - 2.0 * b));
        }
        Some(out)
    }
}

/// Dynamic Poisson Tucker posterior over an unconstrained state holding
/// logs of all gamma-support parameters and logits of the stick variates.
pub struct DptPosterior<'a> {
    _data: std::marker::PhantomData<&'a CountTensor>,
    dims: DptDims,
    config: PriorConfig,
    separate_psi: bool,
    tau0: f64,
    alpha0: f64,
    layout: ParameterLayout,
    // Flattened views of the data for fast repeated evaluation.
    cells: Vec<([usize; 4], f64, f64)>,
    mask_cells: Vec<[usize; 4]>,
}

impl<'a> DptPosterior<'a> {
    pub fn new(
        data: &'a CountTensor,
        num_communities: usize,
        num_states: usize,
        config: PriorConfig,
        separate_psi: bool,
    ) -> Result<Self> {
        let dims = DptDims {
            num_countries: data.num_countries(),
            num_actions: data.num_actions(),
            num_steps: data.num_steps(),
            num_communities,
            num_states,
        };
        match &config.emission {
            MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
                if alpha.len() != dims.num_actions {
                    return Err(Error::DimensionMismatch(
                        "emission concentration length".into(),
                    ));
                }
            }
            MatrixPrior::Bmd { .. } => unreachable!("rejected by PriorConfig::new"),
        }
        if transforms::matrix_width(&config.transition, num_states) != num_states {
            return Err(Error::DimensionMismatch("transition prior width".into()));
        }
        let mut blocks = vec![(
            "psi".to_string(),
            BlockKind::LogPositive,
            vec![num_communities, dims.num_countries],
        )];
        if separate_psi {
            blocks.push((
                "psi_recv".into(),
                BlockKind::LogPositive,
                vec![num_communities, dims.num_countries],
            ));
        }
        blocks.extend([
            (
                "core".to_string(),
                BlockKind::LogPositive,
                vec![dims.num_steps, num_communities, num_communities, num_states],
            ),
            (
                "delta_a".to_string(),
                BlockKind::LogPositive,
                vec![dims.num_actions],
            ),
            (
                "delta_t".to_string(),
                BlockKind::LogPositive,
                vec![dims.num_steps],
            ),
            (
                "emission_sticks".to_string(),
                BlockKind::StickLogit,
                vec![num_states, dims.num_actions - 1],
            ),
            (
                "transition_sticks".to_string(),
                BlockKind::StickLogit,
                vec![transforms::stick_len(&config.transition, num_states)],
            ),
        ]);
        Ok(Self {
            cells: dpt::observed_cells(data),
            mask_cells: data.mask().iter().copied().collect(),
            _data: std::marker::PhantomData,
            dims,
            config,
            separate_psi,
            tau0: 1.0,
            alpha0: 1.0,
            layout: ParameterLayout::new(blocks),
        })
    }

    fn positives(&self, state: &UnconstrainedState, name: &str) -> Result<Vec<f64>> {
        Ok(self
            .layout
            .slice(&state.values, name)?
            .iter()
            .map(|x| x.exp().max(STICK_FLOOR))
            .collect())
    }

    /// Constrained parameters at a state.
    pub fn params(&self, state: &UnconstrainedState) -> Result<DptParams> {
        let e_sticks =
            transforms::logits_to_sticks(self.layout.slice(&state.values, "emission_sticks")?);
        let t_sticks =
            transforms::logits_to_sticks(self.layout.slice(&state.values, "transition_sticks")?);
        let emission = transforms::matrix_from_sticks(
            &self.config.emission,
            self.dims.num_states,
            &e_sticks,
        )?;
        let transition = transforms::matrix_from_sticks(
            &self.config.transition,
            self.dims.num_states,
            &t_sticks,
        )?;
        Ok(DptParams {
            psi: self.positives(state, "psi")?,
            psi_recv: if self.separate_psi {
                Some(self.positives(state, "psi_recv")?)
            } else {
                None
            },
            core: self.positives(state, "core")?,
            emission,
            transition,
            delta_a: self.positives(state, "delta_a")?,
            delta_t: self.positives(state, "delta_t")?,
            tau0: self.tau0,
            alpha0: self.alpha0,
            num_countries: self.dims.num_countries,
            num_communities: self.dims.num_communities,
        })
    }

    /// Maps constrained parameters back into the unconstrained space.
    pub fn unconstrain(&self, params: &DptParams) -> Result<UnconstrainedState> {
        let e = transforms::sticks_from_matrix(&self.config.emission, &params.emission)?;
        let t = transforms::sticks_from_matrix(&self.config.transition, &params.transition)?;
        let mut values: Vec<f64> = params.psi.iter().map(|v| v.ln()).collect();
        if self.separate_psi {
            let recv = params.psi_recv.as_ref().ok_or_else(|| {
                Error::InvalidArgument("separate-psi model without psi_recv".into())
            })?;
            values.extend(recv.iter().map(|v| v.ln()));
        }
        values.extend(params.core.iter().map(|v| v.ln()));
        values.extend(params.delta_a.iter().map(|v| v.ln()));
        values.extend(params.delta_t.iter().map(|v| v.ln()));
        values.extend(transforms::sticks_to_logits(&e));
        values.extend(transforms::sticks_to_logits(&t));
        Ok(UnconstrainedState::new(values))
    }

    pub fn prior_config(&self) -> &PriorConfig {
        &self.config
    }
}

impl LogTarget for DptPosterior<'_> {
    fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn log_target(&self, state: &UnconstrainedState) -> f64 {
        let Ok(params) = self.params(state) else {
            return f64::NEG_INFINITY;
        };
        let eval = dpt::RateEvaluator::new(&params);
        let lp_data = dpt::poisson_term_cells(&eval, &self.cells, &self.mask_cells);
        let mut lp = lp_data + dpt::gamma_prior_term(&params);
        for name in ["emission_sticks", "transition_sticks"] {
            let sticks = transforms::logits_to_sticks(
                self.layout.slice(&state.values, name).expect("layout"),
            );
            let prior = if name == "emission_sticks" {
                &self.config.emission
            } else {
                &self.config.transition
            };
            lp += transforms::stick_log_prior(prior, self.dims.num_states, &sticks)
                + transforms::logit_jacobian(&sticks);
        }
        // Log Jacobian of the exponential transform for positive blocks.
        for block in self.layout.blocks() {
            if block.kind == BlockKind::LogPositive {
                lp += state.values[block.offset..block.offset + block.len]
                    .iter()
                    .sum::<f64>();
            }
        }
        if lp.is_finite() {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }

    fn init_from_prior(&self, rng: &mut ChaCha8Rng) -> Result<UnconstrainedState> {
        let d = &self.dims;
        let (a0, t0) = (self.alpha0, self.tau0);
        let base = Gamma::new(a0, 1.0 / a0).expect("positive shape");
        let draw = |rng: &mut ChaCha8Rng| base.sample(rng).max(1e-12);

        let psi: Vec<f64> = (0..d.num_communities * d.num_countries)
            .map(|_| draw(rng))
            .collect();
        let psi_recv: Vec<f64> = if self.separate_psi {
            (0..d.num_communities * d.num_countries)
                .map(|_| draw(rng))
                .collect()
        } else {
            Vec::new()
        };
        let delta_a: Vec<f64> = (0..d.num_actions).map(|_| draw(rng)).collect();
        let mut delta_t = Vec::with_capacity(d.num_steps);
        delta_t.push(draw(rng));
        for t in 1..d.num_steps {
            let g = Gamma::new((t0 * delta_t[t - 1]).max(STICK_FLOOR), 1.0 / t0)
                .expect("positive shape");
            delta_t.push(g.sample(rng).max(1e-12));
        }
        let e_sticks = transforms::stick_prior_draw(&self.config.emission, d.num_states, rng)?;
        let t_sticks = transforms::stick_prior_draw(&self.config.transition, d.num_states, rng)?;
        let transition = transforms::matrix_from_sticks(
            &self.config.transition,
            d.num_states,
            &t_sticks,
        )?;
        let slice_len = d.num_communities * d.num_communities * d.num_states;
        let mut core = Vec::with_capacity(d.num_steps * slice_len);
        for _ in 0..slice_len {
            core.push(draw(rng));
        }
        for t in 1..d.num_steps {
            let prev = core[(t - 1) * slice_len..t * slice_len].to_vec();
            let expect = dpt::core_step_expectation(&prev, &transition, d.num_communities);
            for m in expect {
                let g = Gamma::new((t0 * m).max(STICK_FLOOR), 1.0 / t0)
                    .expect("positive shape");
                core.push(g.sample(rng).max(1e-12));
            }
        }
        let mut values: Vec<f64> = psi.iter().map(|v| v.ln()).collect();
        values.extend(psi_recv.iter().map(|v| v.ln()));
        values.extend(core.iter().map(|v| v.ln()));
        values.extend(delta_a.iter().map(|v| v.ln()));
        values.extend(delta_t.iter().map(|v| v.ln()));
        values.extend(transforms::sticks_to_logits(&e_sticks));
        values.extend(transforms::sticks_to_logits(&t_sticks));
        Ok(UnconstrainedState::new(values))
    }

    fn grad_log_target(&self, state: &UnconstrainedState) -> Option<Vec<f64>> {
        let params = self.params(state).ok()?;
        let grads = dpt::dpt_log_joint_grad(&params, &self.cells, &self.mask_cells);
        let mut out = Vec::with_capacity(state.dim());
        // +1 per positive coordinate from the exponential-transform Jacobian.
        out.extend(grads.log_psi.iter().map(|g| g + 1.0));
        if let Some(recv) = &grads.log_psi_recv {
            out.extend(recv.iter().map(|g| g + 1.0));
        }
        out.extend(grads.log_core.iter().map(|g| g + 1.0));
        out.extend(grads.log_delta_a.iter().map(|g| g + 1.0));
        out.extend(grads.log_delta_t.iter().map(|g| g + 1.0));
        for (name, matrix_grad) in [
            ("emission_sticks", &grads.emission),
            ("transition_sticks", &grads.transition),
        ] {
            let sticks = transforms::logits_to_sticks(
                self.layout.slice(&state.values, name).ok()?,
            );
            let prior = if name == "emission_sticks" {
                &self.config.emission
            } else {
                &self.config.transition
            };
            let mut g = transforms::matrix_sticks_vjp(
                prior,
                self.dims.num_states,
                &sticks,
                matrix_grad,
            );
            for (gi, pi) in g.iter_mut().zip(transforms::stick_log_prior_grad(
                prior,
                self.dims.num_states,
                &sticks,
            )) {
                *gi += pi;
            }
            for (gi, b) in g.iter().zip(&sticks) {
                out.push(gi * b * (1.0 - b) + (1.0 - 2.0 * b));
            }
        }
        Some(out)
    }

    fn constrain(&self, state: &UnconstrainedState) -> Result<SampleRecord> {
        let params = self.params(state)?;
        let d = &self.dims;
        let mut blocks = BTreeMap::new();
        blocks.insert(
            "psi".into(),
            Block {
                shape: vec![d.num_communities, d.num_countries],
                values: params.psi.clone(),
            },
        );
        if let Some(recv) = &params.psi_recv {
            blocks.insert(
                "psi_recv".into(),
                Block {
                    shape: vec![d.num_communities, d.num_countries],
                    values: recv.clone(),
                },
            );
        }
        blocks.insert(
            "core".into(),
            Block {
                shape: vec![
                    d.num_steps,
                    d.num_communities,
                    d.num_communities,
                    d.num_states,
                ],
                values: params.core.clone(),
            },
        );
        blocks.insert("delta_a".into(), Block::vector(params.delta_a.clone()));
        blocks.insert("delta_t".into(), Block::vector(params.delta_t.clone()));
        blocks.insert("emission".into(), Block::matrix(&params.emission));
        blocks.insert("transition".into(), Block::matrix(&params.transition));
        Ok(SampleRecord { blocks })
    }
}

/// Reconstructs HMM parameters from a trace record, with the given initial
/// state distribution.
pub fn hmm_params_from_record(record: &SampleRecord, initial: Vec<f64>) -> Result<HmmParams> {
    HmmParams::new(
        initial,
        record.matrix("transition")?,
        record.matrix("emission")?,
    )
}

/// Reconstructs full parameters from a trace record of a DPT fit.
pub fn dpt_params_from_record(record: &SampleRecord, tau0: f64, alpha0: f64) -> Result<DptParams> {
    let psi_block = record.block("psi")?;
    let core_block = record.block("core")?;
    if psi_block.shape.len() != 2 || core_block.shape.len() != 4 {
        return Err(Error::InvalidArgument("malformed DPT record".into()));
    }
    let emission = record.matrix("emission")?;
    let transition = record.matrix("transition")?;
    Ok(DptParams {
        psi: psi_block.values.clone(),
        psi_recv: record
            .blocks
            .get("psi_recv")
            .map(|b| b.values.clone()),
        core: core_block.values.clone(),
        emission,
        transition,
        delta_a: record.block("delta_a")?.values.clone(),
        delta_t: record.block("delta_t")?.values.clone(),
        tau0,
        alpha0,
        num_countries: psi_block.shape[1],
        num_communities: psi_block.shape[0],
    })
}

/// Independent standard normal target used to exercise the samplers.
pub struct DiagonalGaussian {
    layout: ParameterLayout,
}

impl DiagonalGaussian {
    pub fn new(dim: usize) -> Self {
        Self {
            layout: ParameterLayout::new(vec![("x".into(), BlockKind::Free, vec![dim])]),
        }
    }
}

impl LogTarget for DiagonalGaussian {
    fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn log_target(&self, state: &UnconstrainedState) -> f64 {
        -0.5 * state.values.iter().map(|x| x * x).sum::<f64>()
    }

    fn init_from_prior(&self, rng: &mut ChaCha8Rng) -> Result<UnconstrainedState> {
        let values = (0..self.dim())
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                v
            })
            .collect();
        Ok(UnconstrainedState::new(values))
    }

    fn constrain(&self, state: &UnconstrainedState) -> Result<SampleRecord> {
        let mut blocks = BTreeMap::new();
        blocks.insert("x".into(), Block::vector(state.values.clone()));
        Ok(SampleRecord { blocks })
    }

    fn grad_log_target(&self, state: &UnconstrainedState) -> Option<Vec<f64>> {
        Some(state.values.iter().map(|x| -x).collect())
    }
}
