//! Unconstrained reparameterization of model parameters.
//!
//! Stick variates in (0,1) map to logits and positive scalars map to logs,
//! giving the samplers an unconstrained vector to walk in. Rebuilding a
//! stochastic matrix from stick variates applies the deterministic tail of
//! the sampling construction — for the ordered family that includes the
//! per-column sort, which is volume-preserving and therefore contributes
//! no Jacobian term.

use crate::error::{Error, Result};
use crate::matrix::{StickVariates, StochasticMatrix};
use crate::numerics::{beta_lpdf, logit, sigmoid, STICK_FLOOR};
use crate::priors::{self, MatrixPrior};

/// How a block of the unconstrained vector maps back to its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Logit-transformed stick variates in (0, 1).
    StickLogit,
    /// Log-transformed positive scalars.
    LogPositive,
    /// Identity transform (unconstrained support).
    Free,
}

/// One named block of the unconstrained vector.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
    pub shape: Vec<usize>,
}

/// Non-overlapping, exhaustive mapping of named blocks onto the vector.
#[derive(Debug, Clone)]
pub struct ParameterLayout {
    blocks: Vec<BlockSpec>,
    dim: usize,
}

impl ParameterLayout {
    pub fn new(blocks: Vec<(String, BlockKind, Vec<usize>)>) -> Self {
        let mut specs = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for (name, kind, shape) in blocks {
            let len = shape.iter().product();
            specs.push(BlockSpec {
                name,
                kind,
                offset,
                len,
                shape,
            });
            offset += len;
        }
        Self {
            blocks: specs,
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Result<&BlockSpec> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter block '{name}'")))
    }

    pub fn slice<'a>(&self, values: &'a [f64], name: &str) -> Result<&'a [f64]> {
        let b = self.block(name)?;
        Ok(&values[b.offset..b.offset + b.len])
    }
}

/// Flat unconstrained parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedState {
    pub values: Vec<f64>,
}

impl UnconstrainedState {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn sticks_to_logits(sticks: &[f64]) -> Vec<f64> {
    sticks.iter().map(|b| logit(*b)).collect()
}

pub fn logits_to_sticks(logits: &[f64]) -> Vec<f64> {
    logits
        .iter()
        .map(|x| sigmoid(*x).clamp(STICK_FLOOR, 1.0 - 1e-16))
        .collect()
}

/// Σ log |dβ/dx| of the logistic transform.
pub fn logit_jacobian(sticks: &[f64]) -> f64 {
    sticks.iter().map(|b| (b * (1.0 - b)).ln()).sum()
}

/// Σ log |dv/dy| of the exponential transform, i.e. Σ log v.
pub fn log_jacobian_positive(values: &[f64]) -> f64 {
    values.iter().map(|v| v.max(STICK_FLOOR).ln()).sum()
}

/// Number of stick variates parameterizing a K-row matrix under a family.
pub fn stick_len(prior: &MatrixPrior, height: usize) -> usize {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => height * (alpha.len() - 1),
        MatrixPrior::Bmd { band, .. } => (0..height)
            .map(|k| {
                let (lo, hi) = band.row_slots(k);
                hi - lo
            })
            .sum(),
    }
}

/// Width of the matrix produced by a family for a K-row parameterization.
pub fn matrix_width(prior: &MatrixPrior, height: usize) -> usize {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => alpha.len(),
        MatrixPrior::Bmd { .. } => height,
    }
}

/// Rebuilds the stochastic matrix from a flat stick block (row-major for
/// the dense families, per-row slot sticks for the banded one).
pub fn matrix_from_sticks(
    prior: &MatrixPrior,
    height: usize,
    sticks: &[f64],
) -> Result<StochasticMatrix> {
    match prior {
        MatrixPrior::Omd { alpha } => {
            let sv = StickVariates::new(height, alpha.len() - 1, sticks.to_vec())?;
            Ok(priors::omd_from_sticks(&sv))
        }
        MatrixPrior::Smd { alpha } => {
            let sv = StickVariates::new(height, alpha.len() - 1, sticks.to_vec())?;
            Ok(priors::smd_from_sticks(&sv))
        }
        MatrixPrior::Bmd { band, .. } => {
            let n = band.height();
            if height != n {
                return Err(Error::DimensionMismatch(
                    "banded family requires a square matrix".into(),
                ));
            }
            let mut data = vec![0.0; n * n];
            let mut cursor = 0;
            for k in 0..n {
                let (lo, hi) = band.row_slots(k);
                let w = hi - lo + 1;
                let row_sticks = &sticks[cursor..cursor + w - 1];
                cursor += w - 1;
                let mut slots = vec![0.0; w];
                for (m, b) in row_sticks.iter().enumerate() {
                    let rem = 1.0 - slots[..m].iter().sum::<f64>();
                    slots[m] = rem.max(STICK_FLOOR) * b;
                }
                slots[w - 1] = (1.0 - slots[..w - 1].iter().sum::<f64>()).max(STICK_FLOOR);
                for (m, v) in slots.into_iter().enumerate() {
                    data[k * n + lo + m] = v;
                }
            }
            StochasticMatrix::new(n, n, data)
        }
    }
}

/// Inverse of [`matrix_from_sticks`]: recovers stick variates from a matrix
/// in the family's support. For the ordered family the recovered columns
/// must already be descending; anything else is out of support.
pub fn sticks_from_matrix(prior: &MatrixPrior, m: &StochasticMatrix) -> Result<Vec<f64>> {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
            let a = alpha.len();
            if m.width() != a {
                return Err(Error::DimensionMismatch(format!(
                    "matrix width {} does not match concentration length {a}",
                    m.width()
                )));
            }
            let mut out = vec![0.0; m.height() * (a - 1)];
            for k in 0..m.height() {
                let row = m.row(k);
                for j in 0..(a - 1) {
                    let rem = 1.0 - row[..j].iter().sum::<f64>();
                    let b = row[j] / rem.max(STICK_FLOOR);
                    out[k * (a - 1) + j] = b.clamp(STICK_FLOOR, 1.0 - 1e-16);
                }
            }
            if matches!(prior, MatrixPrior::Omd { .. }) {
                for j in 0..(a - 1) {
                    for k in 1..m.height() {
                        let prev = out[(k - 1) * (a - 1) + j];
                        let cur = out[k * (a - 1) + j];
                        if cur > prev + 1e-12 {
                            return Err(Error::InvalidArgument(format!(
                                "matrix is outside the ordered support: stick column {j} \
                                 increases between rows {} and {k}",
                                k - 1
                            )));
                        }
                    }
                }
            }
            Ok(out)
        }
        MatrixPrior::Bmd { band, .. } => {
            let n = band.height();
            if m.height() != n || m.width() != n {
                return Err(Error::DimensionMismatch(
                    "banded family requires a square matrix".into(),
                ));
            }
            let mut out = Vec::with_capacity(stick_len(prior, n));
            for k in 0..n {
                let (lo, hi) = band.row_slots(k);
                for col in 0..n {
                    if (col < lo || col > hi) && m.get(k, col) != 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "entry ({k},{col}) outside the band is nonzero"
                        )));
                    }
                }
                let slots: Vec<f64> = (lo..=hi).map(|c| m.get(k, c)).collect();
                for j in 0..slots.len() - 1 {
                    let rem = 1.0 - slots[..j].iter().sum::<f64>();
                    let b = slots[j] / rem.max(STICK_FLOOR);
                    out.push(b.clamp(STICK_FLOOR, 1.0 - 1e-16));
                }
            }
            Ok(out)
        }
    }
}

/// Beta(α_j, Σ_{j'>j} α_{j'}) shape pair of stick column j.
fn dense_stick_shapes(alpha: &crate::matrix::ConcentrationVector, j: usize) -> (f64, f64) {
    (alpha.values()[j], alpha.tail_sum(j))
}

/// Log prior density of a flat stick block under the family: independent
/// Beta densities on the variates. For the ordered family the density is
/// evaluated on the pre-sort variates; the sort itself is a deterministic
/// permutation and adds nothing.
pub fn stick_log_prior(prior: &MatrixPrior, height: usize, sticks: &[f64]) -> f64 {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
            let w = alpha.len() - 1;
            let mut lp = 0.0;
            for k in 0..height {
                for j in 0..w {
                    let (s1, s2) = dense_stick_shapes(alpha, j);
                    lp += beta_lpdf(sticks[k * w + j], s1, s2);
                }
            }
            lp
        }
        MatrixPrior::Bmd { band, alpha3 } => {
            let mut lp = 0.0;
            let mut cursor = 0;
            for k in 0..band.height() {
                let conc = priors::bmd_row_concentrations(band, *alpha3, k);
                for j in 0..conc.len() - 1 {
                    let tail: f64 = conc[j + 1..].iter().sum();
                    lp += beta_lpdf(sticks[cursor], conc[j], tail);
                    cursor += 1;
                }
            }
            lp
        }
    }
}

/// d/dβ of the stick log prior, elementwise.
pub fn stick_log_prior_grad(prior: &MatrixPrior, height: usize, sticks: &[f64]) -> Vec<f64> {
    let beta_grad = |b: f64, s1: f64, s2: f64| (s1 - 1.0) / b - (s2 - 1.0) / (1.0 - b);
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
            let w = alpha.len() - 1;
            let mut out = vec![0.0; sticks.len()];
            for k in 0..height {
                for j in 0..w {
                    let (s1, s2) = dense_stick_shapes(alpha, j);
                    out[k * w + j] = beta_grad(sticks[k * w + j], s1, s2);
                }
            }
            out
        }
        MatrixPrior::Bmd { band, alpha3 } => {
            let mut out = Vec::with_capacity(sticks.len());
            let mut cursor = 0;
            for k in 0..band.height() {
                let conc = priors::bmd_row_concentrations(band, *alpha3, k);
                for j in 0..conc.len() - 1 {
                    let tail: f64 = conc[j + 1..].iter().sum();
                    out.push(beta_grad(sticks[cursor], conc[j], tail));
                    cursor += 1;
                }
            }
            out
        }
    }
}

/// Log prior of a constrained matrix under its family, via the recovered
/// stick variates.
pub fn matrix_log_prior(prior: &MatrixPrior, m: &StochasticMatrix) -> Result<f64> {
    let sticks = sticks_from_matrix(prior, m)?;
    Ok(stick_log_prior(prior, m.height(), &sticks))
}

/// Draws a flat stick block from the family's Beta priors (pre-sort
/// variates for the ordered family).
pub fn stick_prior_draw<R: rand::Rng>(
    prior: &MatrixPrior,
    height: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
            let sv = priors::draw_stick_variates(height, alpha, rng)?;
            Ok(sv.data().to_vec())
        }
        MatrixPrior::Bmd { band, alpha3 } => {
            use rand_distr::{Beta, Distribution};
            let mut out = Vec::with_capacity(stick_len(prior, height));
            for k in 0..band.height() {
                let conc = priors::bmd_row_concentrations(band, *alpha3, k);
                for j in 0..conc.len() - 1 {
                    let tail: f64 = conc[j + 1..].iter().sum();
                    let b = Beta::new(conc[j], tail)
                        .expect("positive shapes")
                        .sample(rng);
                    out.push(b.clamp(STICK_FLOOR, 1.0 - 1e-16));
                }
            }
            Ok(out)
        }
    }
}

fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    idx
}

/// Vector–Jacobian product of the stick-to-matrix construction: maps a
/// gradient with respect to the matrix entries back to a gradient with
/// respect to the (pre-sort) stick variates.
///
/// The sort is handled by the gather/scatter trick: the forward pass keeps
/// the permutation indices of each sorted column and the backward pass
/// scatters gradients through the reversed permutation.
pub fn matrix_sticks_vjp(
    prior: &MatrixPrior,
    height: usize,
    sticks: &[f64],
    grad_matrix: &[f64],
) -> Vec<f64> {
    match prior {
        MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => {
            let w = alpha.len() - 1;
            let a_n = alpha.len();
            let sorted = matches!(prior, MatrixPrior::Omd { .. });
            // Forward pass on sorted coordinates, keeping permutations.
            let mut perms: Vec<Vec<usize>> = Vec::with_capacity(w);
            let mut beta_sorted = vec![0.0; height * w];
            for j in 0..w {
                let col: Vec<f64> = (0..height).map(|k| sticks[k * w + j]).collect();
                let order = if sorted {
                    descending_order(&col)
                } else {
                    (0..height).collect()
                };
                for (rank, src) in order.iter().enumerate() {
                    beta_sorted[rank * w + j] = col[*src];
                }
                perms.push(order);
            }
            let mut phi = vec![0.0f64; height * a_n];
            let mut rem = vec![0.0f64; height * w]; // remaining mass before column j
            for k in 0..height {
                let mut acc = 0.0f64;
                for j in 0..w {
                    let r = (1.0 - acc).max(STICK_FLOOR);
                    rem[k * w + j] = r;
                    phi[k * a_n + j] = r * beta_sorted[k * w + j];
                    acc += phi[k * a_n + j];
                }
                phi[k * a_n + a_n - 1] = (1.0 - acc).max(STICK_FLOOR);
            }
            // Backward pass per row with a suffix accumulator.
            let mut grad_sorted = vec![0.0; height * w];
            for k in 0..height {
                let mut suffix = phi[k * a_n + a_n - 1] * grad_matrix[k * a_n + a_n - 1];
                for j in (0..w).rev() {
                    let b = beta_sorted[k * w + j];
                    grad_sorted[k * w + j] =
                        rem[k * w + j] * grad_matrix[k * a_n + j] - suffix / (1.0 - b);
                    suffix += phi[k * a_n + j] * grad_matrix[k * a_n + j];
                }
            }
            // Reverse the permutation: rank r of column j came from row
            // perms[j][r] of the pre-sort variates.
            let mut out = vec![0.0; height * w];
            for j in 0..w {
                for (rank, src) in perms[j].iter().enumerate() {
                    out[src * w + j] = grad_sorted[rank * w + j];
                }
            }
            out
        }
        MatrixPrior::Bmd { band, .. } => {
            let n = band.height();
            let mut out = Vec::with_capacity(sticks.len());
            let mut cursor = 0;
            for k in 0..n {
                let (lo, hi) = band.row_slots(k);
                let w = hi - lo + 1;
                let row_sticks = &sticks[cursor..cursor + w - 1];
                cursor += w - 1;
                // Rebuild the slot values and remainders.
                let mut slots = vec![0.0f64; w];
                let mut rem = vec![0.0f64; w - 1];
                let mut acc = 0.0f64;
                for (m, b) in row_sticks.iter().enumerate() {
                    let r = (1.0 - acc).max(STICK_FLOOR);
                    rem[m] = r;
                    slots[m] = r * b;
                    acc += slots[m];
                }
                slots[w - 1] = (1.0 - acc).max(STICK_FLOOR);
                let g = |m: usize| grad_matrix[k * n + lo + m];
                let mut suffix = slots[w - 1] * g(w - 1);
                let mut row_grad = vec![0.0; w - 1];
                for m in (0..w - 1).rev() {
                    row_grad[m] = rem[m] * g(m) - suffix / (1.0 - row_sticks[m]);
                    suffix += slots[m] * g(m);
                }
                out.extend(row_grad);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{BandSpec, ConcentrationVector};
    use crate::seeds::rng_from;

    fn omd_prior(a: usize) -> MatrixPrior {
        MatrixPrior::Omd {
            alpha: ConcentrationVector::symmetric(a, 1.0).unwrap(),
        }
    }

    fn smd_prior(a: usize) -> MatrixPrior {
        MatrixPrior::Smd {
            alpha: ConcentrationVector::symmetric(a, 1.0).unwrap(),
        }
    }

    fn bmd_prior(k: usize) -> MatrixPrior {
        MatrixPrior::Bmd {
            band: BandSpec::new(1, k).unwrap(),
            alpha3: [1.0, 1.5, 2.0],
        }
    }

    #[test]
    fn roundtrip_matrix_sticks_all_families() {
        let mut rng = rng_from(61);
        for prior in [omd_prior(5), smd_prior(5), bmd_prior(4)] {
            let height = match &prior {
                MatrixPrior::Bmd { band, .. } => band.height(),
                _ => 4,
            };
            let sticks = stick_prior_draw(&prior, height, &mut rng).unwrap();
            let m = matrix_from_sticks(&prior, height, &sticks).unwrap();
            let recovered = sticks_from_matrix(&prior, &m).unwrap();
            let m2 = matrix_from_sticks(&prior, height, &recovered).unwrap();
            for (a, b) in m.data().iter().zip(m2.data()) {
                assert!((a - b).abs() < 1e-10, "{} family", prior.family_name());
            }
        }
    }

    #[test]
    fn logit_of_half_is_zero() {
        assert_eq!(logit(0.5), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn descending_sticks_make_sort_a_no_op() {
        // Column-descending sticks: the sorted construction coincides with
        // plain per-row stick breaking.
        let sticks = vec![0.9, 0.8, 0.5, 0.4, 0.2, 0.1];
        let omd = matrix_from_sticks(&omd_prior(4), 2, &sticks).unwrap();
        let smd = matrix_from_sticks(&smd_prior(4), 2, &sticks).unwrap();
        for (a, b) in omd.data().iter().zip(smd.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_support_matrices_are_rejected() {
        // Rows in the wrong order: recovered stick columns increase.
        let m = StochasticMatrix::from_rows(&[vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap();
        assert!(sticks_from_matrix(&omd_prior(2), &m).is_err());
        assert!(sticks_from_matrix(&smd_prior(2), &m).is_ok());
        // Nonzero outside the band.
        let dense = StochasticMatrix::uniform(4, 4);
        assert!(sticks_from_matrix(&bmd_prior(4), &dense).is_err());
    }

    #[test]
    fn stick_log_prior_is_permutation_invariant_within_columns() {
        let prior = omd_prior(4);
        let mut rng = rng_from(62);
        let sticks = stick_prior_draw(&prior, 5, &mut rng).unwrap();
        let mut permuted = sticks.clone();
        // Swap rows 0 and 3 of stick column 1.
        permuted.swap(1, 3 * 3 + 1);
        let a = stick_log_prior(&prior, 5, &sticks);
        let b = stick_log_prior(&prior, 5, &permuted);
        assert!((a - b).abs() < 1e-10);
        // And the constrained matrices coincide.
        let m1 = matrix_from_sticks(&prior, 5, &sticks).unwrap();
        let m2 = matrix_from_sticks(&prior, 5, &permuted).unwrap();
        for (x, y) in m1.data().iter().zip(m2.data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = rng_from(63);
        for prior in [omd_prior(4), smd_prior(4), bmd_prior(4)] {
            let height = 4;
            let sticks = stick_prior_draw(&prior, height, &mut rng).unwrap();
            // Arbitrary smooth scalar function of the matrix entries.
            let weights: Vec<f64> = (0..height * matrix_width(&prior, height))
                .map(|i| ((i as f64) * 0.7).sin() + 1.5)
                .collect();
            let f = |s: &[f64]| -> f64 {
                let m = matrix_from_sticks(&prior, height, s).unwrap();
                m.data()
                    .iter()
                    .zip(&weights)
                    .map(|(v, w)| w * v * v)
                    .sum()
            };
            let m = matrix_from_sticks(&prior, height, &sticks).unwrap();
            let grad_matrix: Vec<f64> = m
                .data()
                .iter()
                .zip(&weights)
                .map(|(v, w)| 2.0 * w * v)
                .collect();
            let grad = matrix_sticks_vjp(&prior, height, &sticks, &grad_matrix);
            let h = 1e-6;
            for i in 0..sticks.len() {
                let mut plus = sticks.to_vec();
                let mut minus = sticks.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-4 * (1.0 + fd.abs()),
                    "{} stick {i}: fd={fd} analytic={}",
                    prior.family_name(),
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn layout_blocks_are_contiguous() {
        let layout = ParameterLayout::new(vec![
            ("a".into(), BlockKind::StickLogit, vec![2, 3]),
            ("b".into(), BlockKind::LogPositive, vec![4]),
        ]);
        assert_eq!(layout.dim(), 10);
        assert_eq!(layout.block("a").unwrap().offset, 0);
        assert_eq!(layout.block("b").unwrap().offset, 6);
        assert!(layout.block("c").is_err());
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(layout.slice(&values, "b").unwrap(), &values[6..10]);
    }
}
