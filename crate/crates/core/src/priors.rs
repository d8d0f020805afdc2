//! Samplers for the three stochastic-matrix prior families.
//!
//! * **SMD** — rows independently Dirichlet distributed.
//! * **OMD** — sorted stick-breaking: for each stick column the Beta breaks
//!   are sorted descending across rows before being applied, which makes
//!   every draw a well-ordered matrix.
//! * **BMD** — rows Dirichlet-distributed over a diagonal band, exact zeros
//!   outside the band.
//!
//! All samplers consume an explicit random stream with a fixed draw order,
//! so runs are reproducible. The OMD draw order is column-major: all K
//! variates of stick column 1, then all K of column 2, and so on.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::matrix::{BandSpec, ConcentrationVector, StickVariates, StochasticMatrix};
use crate::numerics::STICK_FLOOR;

/// Prior family over one stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixPrior {
    Omd { alpha: ConcentrationVector },
    Smd { alpha: ConcentrationVector },
    Bmd { band: BandSpec, alpha3: [f64; 3] },
}

impl MatrixPrior {
    pub fn family_name(&self) -> &'static str {
        match self {
            MatrixPrior::Omd { .. } => "omd",
            MatrixPrior::Smd { .. } => "smd",
            MatrixPrior::Bmd { .. } => "bmd",
        }
    }
}

/// Prior configuration of a model with an emission and a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub emission: MatrixPrior,
    pub transition: MatrixPrior,
}

impl PriorConfig {
    /// The emission prior must be OMD or SMD; the banded family only makes
    /// sense for square transition matrices.
    pub fn new(emission: MatrixPrior, transition: MatrixPrior) -> Result<Self> {
        if matches!(emission, MatrixPrior::Bmd { .. }) {
            return Err(Error::InvalidParameter(
                "banded prior is not supported for emission matrices".into(),
            ));
        }
        Ok(Self {
            emission,
            transition,
        })
    }

    /// One of the named configurations (`omd+omd`, `smd+smd`, `smd+bmd`)
    /// with unit concentrations, for a K-state model over A actions.
    pub fn standard(name: &str, num_states: usize, num_actions: usize) -> Result<Self> {
        let alpha_a = ConcentrationVector::symmetric(num_actions, 1.0)?;
        let alpha_k = ConcentrationVector::symmetric(num_states, 1.0)?;
        match name {
            "omd+omd" => Self::new(
                MatrixPrior::Omd { alpha: alpha_a },
                MatrixPrior::Omd { alpha: alpha_k },
            ),
            "smd+smd" => Self::new(
                MatrixPrior::Smd { alpha: alpha_a },
                MatrixPrior::Smd { alpha: alpha_k },
            ),
            "smd+bmd" => Self::new(
                MatrixPrior::Smd { alpha: alpha_a },
                MatrixPrior::Bmd {
                    band: BandSpec::new(1, num_states)?,
                    alpha3: [1.0, 1.0, 1.0],
                },
            ),
            other => Err(Error::InvalidArgument(format!(
                "unknown prior configuration '{other}' (expected omd+omd, smd+smd or smd+bmd)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        format!(
            "{}+{}",
            self.emission.family_name(),
            self.transition.family_name()
        )
    }
}

fn draw_beta<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    let d = Beta::new(a, b).expect("validated concentration");
    // Keep variates strictly interior so logits stay finite.
    d.sample(rng).clamp(STICK_FLOOR, 1.0 - 1e-16)
}

/// One Dirichlet draw by gamma normalization.
fn draw_dirichlet<R: Rng>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    loop {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let sum: f64 = g.iter().sum();
        if sum > 1e-290 {
            return g.iter().map(|v| v / sum).collect();
        }
        // Astronomically unlikely underflow; redraw deterministically.
    }
}

/// Independent Dirichlet rows (the standard prior). Rows are drawn in order.
pub fn sample_smd<R: Rng>(
    height: usize,
    alpha: &ConcentrationVector,
    rng: &mut R,
) -> Result<StochasticMatrix> {
    if height == 0 {
        return Err(Error::InvalidParameter("height must be at least 1".into()));
    }
    let mut data = Vec::with_capacity(height * alpha.len());
    for _ in 0..height {
        data.extend(draw_dirichlet(rng, alpha.values()));
    }
    StochasticMatrix::new(height, alpha.len(), data)
}

/// Draws the pre-sort stick variates of the sorted construction,
/// column-major: column a uses Beta(α_a, Σ_{a'>a} α_{a'}).
pub fn draw_stick_variates<R: Rng>(
    height: usize,
    alpha: &ConcentrationVector,
    rng: &mut R,
) -> Result<StickVariates> {
    if height == 0 {
        return Err(Error::InvalidParameter("height must be at least 1".into()));
    }
    let a = alpha.len();
    let mut data = vec![0.0; height * (a - 1)];
    for col in 0..(a - 1) {
        let shape1 = alpha.values()[col];
        let shape2 = alpha.tail_sum(col);
        for k in 0..height {
            data[k * (a - 1) + col] = draw_beta(rng, shape1, shape2);
        }
    }
    StickVariates::new(height, a - 1, data)
}

/// Indices that sort `vals` descending; ties broken by original index.
fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    idx
}

fn remaining_mass(row: &[f64], upto: usize) -> f64 {
    let rem = 1.0 - row[..upto].iter().sum::<f64>();
    rem.max(STICK_FLOOR)
}

/// Deterministic tail of the sorted construction: sort every stick column
/// descending, apply the breaks to the remaining mass, assign the residual
/// to the last column.
pub fn omd_from_sticks(sticks: &StickVariates) -> StochasticMatrix {
    build_from_sticks(sticks, true)
}

/// Plain stick-breaking per row (no sorting); the SMD in stick coordinates.
pub fn smd_from_sticks(sticks: &StickVariates) -> StochasticMatrix {
    build_from_sticks(sticks, false)
}

fn build_from_sticks(sticks: &StickVariates, sorted: bool) -> StochasticMatrix {
    let height = sticks.height();
    let width = sticks.width() + 1;
    let mut rows = vec![vec![0.0; width]; height];
    for col in 0..sticks.width() {
        let column = sticks.column(col);
        let order = if sorted {
            descending_order(&column)
        } else {
            (0..height).collect()
        };
        for (k, row) in rows.iter_mut().enumerate() {
            let variate = column[order[k]];
            if col == 0 {
                row[0] = variate;
            } else {
                row[col] = remaining_mass(row, col) * variate;
            }
        }
    }
    for row in rows.iter_mut() {
        row[width - 1] = remaining_mass(row, width - 1);
    }
    StochasticMatrix::from_rows(&rows).expect("stick construction is row-stochastic")
}

/// Sorted stick-breaking draw. Returns the matrix together with the
/// pre-sort variates, which the inference engine parameterizes directly.
pub fn sample_omd<R: Rng>(
    height: usize,
    alpha: &ConcentrationVector,
    rng: &mut R,
) -> Result<(StochasticMatrix, StickVariates)> {
    let sticks = draw_stick_variates(height, alpha, rng)?;
    let matrix = omd_from_sticks(&sticks);
    Ok((matrix, sticks))
}

/// Per-slot concentrations of one banded row, in column order.
///
/// With bandwidth 1 the three slots carry (descalating, steady, escalating)
/// concentrations; boundary rows take the available sub-vector. For wider
/// bands every in-band slot uses the steady concentration.
pub fn bmd_row_concentrations(band: &BandSpec, alpha3: [f64; 3], k: usize) -> Vec<f64> {
    let (lo, hi) = band.row_slots(k);
    let [up, down, steady] = alpha3;
    (lo..=hi)
        .map(|col| {
            if band.bandwidth() == 1 {
                match col as i64 - k as i64 {
                    -1 => down,
                    0 => steady,
                    1 => up,
                    _ => unreachable!(),
                }
            } else {
                steady
            }
        })
        .collect()
}

/// Banded Dirichlet draw: entry (k, k') is identically zero when
/// |k − k'| exceeds the bandwidth; each row's in-band entries are a
/// Dirichlet variate over the available slots.
pub fn sample_bmd<R: Rng>(
    band: &BandSpec,
    alpha3: [f64; 3],
    rng: &mut R,
) -> Result<StochasticMatrix> {
    if alpha3.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidParameter(
            "banded concentrations must be positive".into(),
        ));
    }
    let n = band.height();
    let mut data = vec![0.0; n * n];
    for k in 0..n {
        let conc = bmd_row_concentrations(band, alpha3, k);
        let (lo, _hi) = band.row_slots(k);
        let row = draw_dirichlet(rng, &conc);
        for (offset, v) in row.into_iter().enumerate() {
            data[k * n + lo + offset] = v;
        }
    }
    StochasticMatrix::new(n, n, data)
}

/// Column means and mean row-CDFs of a collection of samples.
#[derive(Debug, Clone)]
pub struct PriorSummary {
    pub height: usize,
    pub width: usize,
    /// (1/K) Σ_k φ_{ka}, averaged over samples.
    pub column_means: Vec<f64>,
    /// K×A mean CDF matrix, row-major.
    pub mean_cdf: Vec<f64>,
}

pub fn prior_summary(samples: &[StochasticMatrix]) -> Result<PriorSummary> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("prior_summary needs at least one sample".into()))?;
    let (height, width) = (first.height(), first.width());
    if samples
        .iter()
        .any(|m| m.height() != height || m.width() != width)
    {
        return Err(Error::DimensionMismatch(
            "prior_summary samples must share a shape".into(),
        ));
    }
    let mut column_means = vec![0.0; width];
    let mut mean_cdf = vec![0.0; height * width];
    for m in samples {
        for a in 0..width {
            let mut col = 0.0;
            for k in 0..height {
                col += m.get(k, a);
            }
            column_means[a] += col / height as f64;
        }
        for (dst, src) in mean_cdf.iter_mut().zip(m.cdf()) {
            *dst += src;
        }
    }
    let s = samples.len() as f64;
    column_means.iter_mut().for_each(|v| *v /= s);
    mean_cdf.iter_mut().for_each(|v| *v /= s);
    Ok(PriorSummary {
        height,
        width,
        column_means,
        mean_cdf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ORDER_TOL;
    use crate::seeds::rng_from;

    fn symmetric(len: usize, v: f64) -> ConcentrationVector {
        ConcentrationVector::symmetric(len, v).unwrap()
    }

    #[test]
    fn smd_single_row_is_on_simplex() {
        let mut rng = rng_from(7);
        let m = sample_smd(1, &symmetric(3, 1.0), &mut rng).unwrap();
        let sum: f64 = m.row(0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smd_concentration_limit() {
        let alpha = ConcentrationVector::new(vec![1e6, 1.0, 1.0]).unwrap();
        let mut rng = rng_from(8);
        let m = sample_smd(3, &alpha, &mut rng).unwrap();
        for k in 0..3 {
            assert!((m.get(k, 0) - 1.0).abs() < 1e-2, "row {k}: {:?}", m.row(k));
        }
    }

    #[test]
    fn smd_monte_carlo_mean() {
        let alpha = ConcentrationVector::new(vec![2.0, 1.0, 1.0]).unwrap();
        let mut rng = rng_from(9);
        let mut acc = [0.0f64; 3];
        let n = 100_000;
        for _ in 0..n {
            let m = sample_smd(1, &alpha, &mut rng).unwrap();
            for (dst, v) in acc.iter_mut().zip(m.row(0)) {
                *dst += v;
            }
        }
        let mean: Vec<f64> = acc.iter().map(|v| v / n as f64).collect();
        for (got, want) in mean.iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 0.01, "mean={mean:?}");
        }
    }

    #[test]
    fn smd_rejects_nonpositive_alpha() {
        assert!(ConcentrationVector::new(vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn omd_is_well_ordered() {
        let mut rng = rng_from(10);
        let (m, _) = sample_omd(4, &symmetric(6, 1.0), &mut rng).unwrap();
        assert!(m.well_ordered(ORDER_TOL));
    }

    #[test]
    fn omd_ordering_holds_across_random_settings() {
        use rand::Rng as _;
        let mut seed_rng = rng_from(11);
        for trial in 0..100 {
            let k = seed_rng.random_range(1..=12usize);
            let a = seed_rng.random_range(2..=20usize);
            let alpha: Vec<f64> = (0..a)
                .map(|_| 0.1 + 9.9 * seed_rng.random::<f64>())
                .collect();
            let alpha = ConcentrationVector::new(alpha).unwrap();
            let mut rng = rng_from(1000 + trial);
            let (m, _) = sample_omd(k, &alpha, &mut rng).unwrap();
            assert!(m.well_ordered(ORDER_TOL), "trial {trial} K={k} A={a}");
            for k_row in 0..m.height() {
                let sum: f64 = m.row(k_row).iter().sum();
                assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn omd_cdf_columns_decrease_down_rows() {
        let mut rng = rng_from(12);
        let (m, _) = sample_omd(5, &symmetric(7, 2.0), &mut rng).unwrap();
        let cdf = m.cdf();
        for a in 0..m.width() {
            for k in 1..m.height() {
                assert!(cdf[(k - 1) * m.width() + a] >= cdf[k * m.width() + a] - ORDER_TOL);
            }
        }
    }

    #[test]
    fn omd_appendix_identity_second_column() {
        // CDF at the second column equals phi1 - phi1*beta2 + beta2 with the
        // sorted variates.
        let mut rng = rng_from(13);
        let (m, sticks) = sample_omd(6, &symmetric(5, 1.5), &mut rng).unwrap();
        let mut col0 = sticks.column(0);
        let mut col1 = sticks.column(1);
        col0.sort_by(|x, y| y.total_cmp(x));
        col1.sort_by(|x, y| y.total_cmp(x));
        let cdf = m.cdf();
        for k in 0..m.height() {
            let expect = col0[k] - col0[k] * col1[k] + col1[k];
            let got = cdf[k * m.width() + 1];
            assert!((got - expect).abs() < 1e-12, "row {k}: {got} vs {expect}");
        }
    }

    #[test]
    fn omd_symmetric_alpha_skews_right() {
        let alpha = symmetric(10, 5.0);
        let mut rng = rng_from(14);
        let samples: Vec<_> = (0..10)
            .map(|_| sample_omd(10, &alpha, &mut rng).unwrap().0)
            .collect();
        let summary = prior_summary(&samples).unwrap();
        assert!(
            summary.column_means[9] > summary.column_means[0],
            "column means: {:?}",
            summary.column_means
        );
    }

    #[test]
    fn bmd_zero_pattern_is_exact() {
        let band = BandSpec::new(1, 3).unwrap();
        let mut rng = rng_from(15);
        let m = sample_bmd(&band, [1.0, 1.0, 1.0], &mut rng).unwrap();
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 0), 0.0);
        let mut positive = 0;
        for k in 0..3 {
            for a in 0..3 {
                if m.get(k, a) > 0.0 {
                    positive += 1;
                }
            }
        }
        assert_eq!(positive, 7);
    }

    #[test]
    fn bmd_full_band_is_dense() {
        let band = BandSpec::new(1, 2).unwrap();
        let mut rng = rng_from(16);
        let m = sample_bmd(&band, [2.0, 1.0, 3.0], &mut rng).unwrap();
        for k in 0..2 {
            assert!(m.row(k).iter().all(|v| *v > 0.0));
            let sum: f64 = m.row(k).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bmd_boundary_rows_renormalize() {
        let band = BandSpec::new(1, 4).unwrap();
        let conc = bmd_row_concentrations(&band, [0.5, 1.5, 2.5], 0);
        // Row 0 has no descalating neighbor: (steady, escalating).
        assert_eq!(conc, vec![2.5, 0.5]);
        let conc_last = bmd_row_concentrations(&band, [0.5, 1.5, 2.5], 3);
        assert_eq!(conc_last, vec![1.5, 2.5]);
        let mut rng = rng_from(17);
        let m = sample_bmd(&band, [0.5, 1.5, 2.5], &mut rng).unwrap();
        let sum: f64 = m.row(0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bmd_rejects_bad_inputs() {
        assert!(BandSpec::new(3, 3).is_err());
        let band = BandSpec::new(1, 3).unwrap();
        let mut rng = rng_from(18);
        assert!(sample_bmd(&band, [1.0, -1.0, 1.0], &mut rng).is_err());
    }

    #[test]
    fn prior_summary_uniform_matrix() {
        let summary = prior_summary(&[StochasticMatrix::uniform(4, 5)]).unwrap();
        for v in &summary.column_means {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_summary_smd_symmetric_is_flat() {
        let alpha = symmetric(4, 1.0);
        let mut rng = rng_from(19);
        let samples: Vec<_> = (0..10)
            .map(|_| sample_smd(6, &alpha, &mut rng).unwrap())
            .collect();
        let summary = prior_summary(&samples).unwrap();
        for v in &summary.column_means {
            assert!((v - 0.25).abs() < 0.05, "{:?}", summary.column_means);
        }
    }

    #[test]
    fn prior_summary_rejects_empty_and_ragged() {
        assert!(prior_summary(&[]).is_err());
        let a = StochasticMatrix::uniform(2, 3);
        let b = StochasticMatrix::uniform(3, 3);
        assert!(prior_summary(&[a, b]).is_err());
    }

    #[test]
    fn sorted_construction_reduces_to_stick_breaking_for_one_row() {
        // With K=1 the sort is a no-op; compare against an independent
        // stick-breaking evaluation on the same variates.
        let alpha = ConcentrationVector::new(vec![2.0, 1.0, 0.5, 1.5]).unwrap();
        let mut rng = rng_from(20);
        let (m, sticks) = sample_omd(1, &alpha, &mut rng).unwrap();
        let mut expect = vec![0.0; 4];
        expect[0] = sticks.get(0, 0);
        for a in 1..3 {
            let rem = 1.0 - expect[..a].iter().sum::<f64>();
            expect[a] = rem * sticks.get(0, a);
        }
        expect[3] = 1.0 - expect[..3].iter().sum::<f64>();
        for (got, want) in m.row(0).iter().zip(&expect) {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
