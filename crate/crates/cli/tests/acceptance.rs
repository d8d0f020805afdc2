//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]`/`[FAIL]` line (run with `--nocapture` to see them as they go).
//!
//! Oracles used here (path enumeration, naive tensor sums, direct
//! stick-breaking) are local re-implementations, independent of the
//! library code paths they check.

use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use omd_core::dpt::{dpt_rate, CountTensor, DptDims, RateEvaluator};
use omd_core::eval::{
    self, make_truth, sppd, ExperimentSpec, ModelSpec, SplitMode, TruthShape, TruthSpec,
};
use omd_core::events::load_codebook;
use omd_core::hmm::{hmm_impute, hmm_log_likelihood, hmm_posterior_states, HmmParams, SequenceDataset};
use omd_core::matrix::{ConcentrationVector, StochasticMatrix};
use omd_core::priors::{draw_stick_variates, sample_omd, sample_smd, PriorConfig};
use omd_core::sampler::{posterior_mean, run_chain, SamplerConfig};
use omd_core::seeds::rng_from;
use omd_core::stats::ks_two_sample;
use omd_core::targets::DptPosterior;

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// ---------------------------------------------------------------------
// Criterion 1: ordering soundness across randomized settings.
// ---------------------------------------------------------------------

#[test]
fn criterion_01_ordering_soundness() {
    let started = Instant::now();
    let mut meta_rng = rng_from(4001);
    for trial in 0..1000u64 {
        let k = meta_rng.random_range(1..=12usize);
        let a = meta_rng.random_range(2..=20usize);
        let alpha: Vec<f64> = (0..a).map(|_| 0.1 + 9.9 * meta_rng.random::<f64>()).collect();
        let alpha = ConcentrationVector::new(alpha).unwrap();
        let mut rng = rng_from(50_000 + trial);
        let (m, _) = sample_omd(k, &alpha, &mut rng).unwrap();
        assert!(
            m.well_ordered(1e-12),
            "draw {trial} (K={k}, A={a}) violates the ordering"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "criterion 1 (ordering soundness)",
        format!("1000 randomized draws well-ordered at tol 1e-12 in {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 2: K=1 reduction to standard stick breaking + KS test.
// ---------------------------------------------------------------------

/// Oracle: textbook Dirichlet stick-breaking on the same Beta stream.
fn oracle_stick_breaking(alpha: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = alpha.len();
    let mut phi = vec![0.0; a];
    let tail: f64 = alpha[1..].iter().sum();
    phi[0] = Beta::new(alpha[0], tail).unwrap().sample(rng);
    for j in 1..a - 1 {
        let tail: f64 = alpha[j + 1..].iter().sum();
        let b: f64 = Beta::new(alpha[j], tail).unwrap().sample(rng);
        phi[j] = b * (1.0 - phi[..j].iter().sum::<f64>());
    }
    phi[a - 1] = 1.0 - phi[..a - 1].iter().sum::<f64>();
    phi
}

#[test]
fn criterion_02_single_row_oracle_equivalence() {
    let mut meta_rng = rng_from(4002);
    for trial in 0..100u64 {
        let a = meta_rng.random_range(2..=20usize);
        let alpha: Vec<f64> = (0..a).map(|_| 0.1 + 9.9 * meta_rng.random::<f64>()).collect();
        let seed = 60_000 + trial;
        let cv = ConcentrationVector::new(alpha.clone()).unwrap();
        let (m, _) = sample_omd(1, &cv, &mut rng_from(seed)).unwrap();
        let oracle = oracle_stick_breaking(&alpha, &mut rng_from(seed));
        for (got, want) in m.row(0).iter().zip(&oracle) {
            assert!(
                got.to_bits() == want.to_bits(),
                "trial {trial}: {got:e} != {want:e}"
            );
        }
    }

    // Distribution of the first coordinate vs direct Beta draws.
    let alpha = [2.0, 1.5, 1.0, 0.5];
    let cv = ConcentrationVector::new(alpha.to_vec()).unwrap();
    let n = 10_000;
    let mut rng = rng_from(4003);
    let omd_first: Vec<f64> = (0..n)
        .map(|_| sample_omd(1, &cv, &mut rng).unwrap().0.get(0, 0))
        .collect();
    let beta = Beta::new(2.0, 3.0).unwrap();
    let direct: Vec<f64> = (0..n).map(|_| beta.sample(&mut rng)).collect();
    let ks = ks_two_sample(&omd_first, &direct);
    assert!(
        ks.p_value > 0.001,
        "KS rejected: D={} p={}",
        ks.statistic,
        ks.p_value
    );
    pass(
        "criterion 2 (single-row oracle equivalence)",
        format!(
            "bit-identical over 100 seeds; KS p = {:.3} over {n} samples",
            ks.p_value
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 3: second-column CDF identity of the construction.
// ---------------------------------------------------------------------

#[test]
fn criterion_03_second_column_cdf_identity() {
    let mut meta_rng = rng_from(4004);
    let mut max_err = 0.0f64;
    for trial in 0..100u64 {
        let k = meta_rng.random_range(1..=10usize);
        let a = meta_rng.random_range(3..=12usize);
        let alpha: Vec<f64> = (0..a).map(|_| 0.1 + 9.9 * meta_rng.random::<f64>()).collect();
        let cv = ConcentrationVector::new(alpha).unwrap();
        let mut rng = rng_from(70_000 + trial);
        let sticks = draw_stick_variates(k, &cv, &mut rng).unwrap();
        let m = omd_core::priors::omd_from_sticks(&sticks);
        let mut col0 = sticks.column(0);
        let mut col1 = sticks.column(1);
        col0.sort_by(|x, y| y.total_cmp(x));
        col1.sort_by(|x, y| y.total_cmp(x));
        let cdf = m.cdf();
        for row in 0..k {
            let expect = col0[row] - col0[row] * col1[row] + col1[row];
            let got = cdf[row * a + 1];
            let err = (got - expect).abs();
            max_err = max_err.max(err);
            assert!(err < 1e-12, "trial {trial} row {row}: err {err:e}");
        }
    }
    pass(
        "criterion 3 (second-column CDF identity)",
        format!("100 stick draws, max deviation {max_err:.2e}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 4: forward-algorithm correctness vs path enumeration.
// ---------------------------------------------------------------------

struct BruteHmm<'a> {
    params: &'a HmmParams,
}

impl BruteHmm<'_> {
    fn paths(&self, t: usize) -> Vec<Vec<usize>> {
        let k = self.params.num_states();
        let mut out = vec![vec![]];
        for _ in 0..t {
            let mut next = Vec::with_capacity(out.len() * k);
            for p in &out {
                for s in 0..k {
                    let mut q = p.clone();
                    q.push(s);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    fn path_weight(&self, path: &[usize], seq: &[Option<usize>]) -> f64 {
        let mut w = self.params.initial()[path[0]];
        for t in 1..path.len() {
            w *= self.params.transition().get(path[t - 1], path[t]);
        }
        for (t, obs) in seq.iter().enumerate() {
            if let Some(a) = obs {
                w *= self.params.emission().get(path[t], *a);
            }
        }
        w
    }

    fn log_likelihood(&self, seq: &[Option<usize>]) -> f64 {
        self.paths(seq.len())
            .iter()
            .map(|p| self.path_weight(p, seq))
            .sum::<f64>()
            .ln()
    }

    fn posterior(&self, seq: &[Option<usize>]) -> Vec<f64> {
        let k = self.params.num_states();
        let mut marginal = vec![0.0; seq.len() * k];
        let mut z = 0.0;
        for path in self.paths(seq.len()) {
            let w = self.path_weight(&path, seq);
            z += w;
            for (t, s) in path.iter().enumerate() {
                marginal[t * k + s] += w;
            }
        }
        marginal.iter_mut().for_each(|v| *v /= z);
        marginal
    }

    fn impute(&self, seq: &[Option<usize>], t: usize) -> Vec<f64> {
        let a_n = self.params.num_actions();
        let base = self.log_likelihood(seq).exp();
        (0..a_n)
            .map(|v| {
                let mut filled = seq.to_vec();
                filled[t] = Some(v);
                self.log_likelihood(&filled).exp() / base
            })
            .collect()
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

#[test]
fn criterion_04_forward_matches_path_enumeration() {
    let mut meta_rng = rng_from(4005);
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let k = meta_rng.random_range(1..=3usize);
        let a = meta_rng.random_range(2..=4usize);
        let t = meta_rng.random_range(1..=6usize);
        let mut rng = rng_from(80_000 + trial);
        let alpha = ConcentrationVector::symmetric(a, 1.0).unwrap();
        let emission = sample_smd(k, &alpha, &mut rng).unwrap();
        let transition = if k >= 2 {
            sample_smd(k, &ConcentrationVector::symmetric(k, 1.0).unwrap(), &mut rng).unwrap()
        } else {
            StochasticMatrix::identity(1)
        };
        let params = HmmParams::new(random_simplex(&mut rng, k), transition, emission).unwrap();
        let seq: Vec<Option<usize>> = (0..t)
            .map(|_| {
                if rng.random::<f64>() < 0.25 {
                    None
                } else {
                    Some(rng.random_range(0..a))
                }
            })
            .collect();
        let brute = BruteHmm { params: &params };

        let data = SequenceDataset::new(vec![seq.clone()], a).unwrap();
        let ll = hmm_log_likelihood(&params, &data);
        let err = (ll - brute.log_likelihood(&seq)).abs();
        worst = worst.max(err);
        assert!(err < 1e-9, "trial {trial}: likelihood error {err:e}");

        let gamma = hmm_posterior_states(&params, &seq);
        for (got, want) in gamma.iter().zip(brute.posterior(&seq)) {
            let err = (got - want).abs();
            worst = worst.max(err);
            assert!(err < 1e-9, "trial {trial}: marginal error {err:e}");
        }

        if seq.iter().any(Option::is_none) {
            let slots = hmm_impute(&params, &seq).unwrap();
            for slot in slots {
                for (got, want) in slot.action_dist.iter().zip(brute.impute(&seq, slot.t)) {
                    let err = (got - want).abs();
                    worst = worst.max(err);
                    assert!(err < 1e-9, "trial {trial}: imputation error {err:e}");
                }
            }
        }
    }
    pass(
        "criterion 4 (forward correctness)",
        format!("200 instances vs path enumeration, max |error| {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------
// Criterion 5: synthetic recovery under label switching.
// ---------------------------------------------------------------------

#[test]
fn criterion_05_synthetic_recovery() {
    let started = Instant::now();
    let spec = ExperimentSpec {
        id: "c5".into(),
        model: ModelSpec::Hmm {
            truth: TruthSpec::new(TruthShape::Banded, 5, 10),
            num_sequences: 500,
            t_len: 10,
        },
        seeds: (0..10).collect(),
        split: SplitMode::Forecasting,
        mask_fraction: 0.3,
        train_fraction: 0.7,
        priors: vec!["omd+omd".into(), "smd+smd".into()],
        sampler: SamplerConfig {
            samples: 500,
            burn_in: 200,
            thin: 20,
            ..SamplerConfig::default()
        },
        separate_psi: false,
        chains: 3,
    };
    let report = eval::run_experiment(&spec, threads()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let mut wins = 0;
    for seed in 0..10u64 {
        let omd = report
            .seed_metric("omd+omd", "mae_latent_states", seed)
            .unwrap();
        let smd = report
            .seed_metric("smd+smd", "mae_latent_states", seed)
            .unwrap();
        if omd < smd {
            wins += 1;
        }
    }
    assert!(
        wins >= 8,
        "ordered prior strictly better in only {wins}/10 seeds"
    );
    let omd_rec: Vec<f64> = report.metric_values("omd+omd", "recovery_transition_unaligned");
    let smd_rec: Vec<f64> = report.metric_values("smd+smd", "recovery_transition_aligned");
    let omd_mean = omd_rec.iter().sum::<f64>() / omd_rec.len() as f64;
    let smd_mean = smd_rec.iter().sum::<f64>() / smd_rec.len() as f64;
    assert!(
        smd_mean <= 2.0 * omd_mean,
        "aligned SMD recovery {smd_mean:.4} exceeds 2x unaligned OMD recovery {omd_mean:.4}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1800.0, "took {elapsed:?}");
    pass(
        "criterion 5 (synthetic recovery)",
        format!(
            "latent MAE wins {wins}/10; recovery smd-aligned/omd-unaligned = {:.2}; {elapsed:.1?}",
            smd_mean / omd_mean
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 6: forecast/impute ordinal pattern across truth shapes.
// ---------------------------------------------------------------------

fn pattern_spec(id: &str, shape: TruthShape, split: SplitMode) -> ExperimentSpec {
    ExperimentSpec {
        id: id.into(),
        model: ModelSpec::Hmm {
            truth: TruthSpec::new(shape, 5, 10),
            num_sequences: 100,
            t_len: 10,
        },
        seeds: (0..10).collect(),
        split,
        mask_fraction: 0.3,
        train_fraction: 0.7,
        priors: vec!["omd+omd".into(), "smd+smd".into()],
        sampler: SamplerConfig {
            samples: 300,
            burn_in: 300,
            thin: 12,
            ..SamplerConfig::default()
        },
        separate_psi: false,
        chains: 3,
    }
}

fn mean_metric(report: &eval::ExperimentReport, prior: &str, metric: &str) -> f64 {
    let v = report.metric_values(prior, metric);
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_06_forecast_impute_pattern() {
    // Banded truth, forecasting: the ordered prior must not lose.
    let spec = pattern_spec("c6-banded", TruthShape::Banded, SplitMode::Forecasting);
    let report = eval::run_experiment(&spec, threads()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let omd_forecast = mean_metric(&report, "omd+omd", "mae_observations");
    let smd_forecast = mean_metric(&report, "smd+smd", "mae_observations");
    assert!(
        omd_forecast <= smd_forecast,
        "banded forecasting: omd {omd_forecast:.4} > smd {smd_forecast:.4}"
    );

    // Bonbon and triangle truths, imputation: the flexible baseline wins.
    let mut impute_detail = Vec::new();
    for shape in [TruthShape::Bonbon, TruthShape::Triangle] {
        let spec = pattern_spec(
            &format!("c6-{}", shape.name()),
            shape,
            SplitMode::Imputation,
        );
        let report = eval::run_experiment(&spec, threads()).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        let omd_imp = mean_metric(&report, "omd+omd", "mae_observations");
        let smd_imp = mean_metric(&report, "smd+smd", "mae_observations");
        assert!(
            smd_imp <= omd_imp,
            "{} imputation: smd {smd_imp:.4} > omd {omd_imp:.4}",
            shape.name()
        );
        impute_detail.push(format!("{}: smd {smd_imp:.3} <= omd {omd_imp:.3}", shape.name()));
    }
    pass(
        "criterion 6 (forecast/impute pattern)",
        format!(
            "banded forecast omd {omd_forecast:.3} <= smd {smd_forecast:.3}; imputation {}",
            impute_detail.join("; ")
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 7: SPPD unit correctness.
// ---------------------------------------------------------------------

#[test]
fn criterion_07_sppd_unit_correctness() {
    let v = sppd(&[0], &[vec![1.0]]).unwrap();
    assert!((v - (-1.0f64).exp()).abs() < 1e-12, "{v}");
    // Geometric-mean property for repeated cells.
    let one = sppd(&[4], &[vec![2.5]]).unwrap();
    let many = sppd(&[4, 4, 4], &[vec![2.5, 2.5, 2.5]]).unwrap();
    assert!((one - many).abs() < 1e-12);
    // Always in (0, 1] under randomized inputs.
    let mut rng = rng_from(4006);
    for _ in 0..200 {
        let n = rng.random_range(1..30usize);
        let s = rng.random_range(1..6usize);
        let counts: Vec<u64> = (0..n).map(|_| rng.random_range(0..50u64)).collect();
        let rates: Vec<Vec<f64>> = (0..s)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 20.0 + 1e-6).collect())
            .collect();
        let v = sppd(&counts, &rates).unwrap();
        assert!(v > 0.0 && v <= 1.0, "sppd {v} outside (0,1]");
    }
    pass(
        "criterion 7 (SPPD unit correctness)",
        format!("analytic cases exact; 200 randomized inputs stayed in (0,1]"),
    );
}

// ---------------------------------------------------------------------
// Criterion 8: DPT rate and log-joint correctness.
// ---------------------------------------------------------------------

#[test]
fn criterion_08_dpt_rate_correctness() {
    let mut meta_rng = rng_from(4007);
    let mut worst_rate = 0.0f64;
    let mut worst_total = 0.0f64;
    for trial in 0..100u64 {
        let dims = DptDims {
            num_countries: meta_rng.random_range(2..=4usize),
            num_actions: meta_rng.random_range(2..=5usize),
            num_steps: meta_rng.random_range(1..=4usize),
            num_communities: meta_rng.random_range(1..=3usize),
            num_states: meta_rng.random_range(2..=3usize),
        };
        let config =
            PriorConfig::standard("omd+omd", dims.num_states, dims.num_actions).unwrap();
        let mut rng = rng_from(90_000 + trial);
        let params = omd_core::dpt::sample_dpt_params(&dims, &config, false, &mut rng).unwrap();
        let eval = RateEvaluator::new(&params);
        let mut naive_total = 0.0;
        for i in 0..dims.num_countries {
            for j in 0..dims.num_countries {
                for a in 0..dims.num_actions {
                    for t in 0..dims.num_steps {
                        // Naive quadruple loop of the factored rate.
                        let mut want = 0.0;
                        for c1 in 0..dims.num_communities {
                            for c2 in 0..dims.num_communities {
                                for k in 0..dims.num_states {
                                    want += params.psi_send(c1, i)
                                        * params.psi_receive(c2, j)
                                        * params.core_at(t, c1, c2, k)
                                        * params.emission.get(k, a);
                                }
                            }
                        }
                        want *= params.delta_a[a] * params.delta_t[t];
                        naive_total += want;
                        let got = dpt_rate(&params, i, j, a, t);
                        let err = (got - want).abs();
                        worst_rate = worst_rate.max(err);
                        assert!(err < 1e-12, "trial {trial}: rate error {err:e}");
                        let got2 = eval.rate(i, j, a, t);
                        assert!((got2 - want).abs() < 1e-12);
                    }
                }
            }
        }
        let factored = eval.total_rate_all_pairs();
        let err = (factored - naive_total).abs();
        worst_total = worst_total.max(err);
        assert!(err < 1e-8, "trial {trial}: total-rate error {err:e}");

        // Tucker gauge invariance: rescale one community and compensate.
        let s = 1.0 + meta_rng.random::<f64>() * 3.0;
        let mut scaled = params.clone();
        let c = meta_rng.random_range(0..dims.num_communities);
        for i in 0..dims.num_countries {
            scaled.psi[c * dims.num_countries + i] *= s;
        }
        let (cn, kn) = (dims.num_communities, dims.num_states);
        for t in 0..dims.num_steps {
            for c2 in 0..cn {
                for k in 0..kn {
                    scaled.core[((t * cn + c) * cn + c2) * kn + k] /= s;
                }
            }
            for c1 in 0..cn {
                for k in 0..kn {
                    scaled.core[((t * cn + c1) * cn + c) * kn + k] /= s;
                }
            }
        }
        for i in 0..dims.num_countries {
            for a in 0..dims.num_actions {
                let r0 = dpt_rate(&params, i, (i + 1) % dims.num_countries, a, 0);
                let r1 = dpt_rate(&scaled, i, (i + 1) % dims.num_countries, a, 0);
                assert!(
                    (r0 - r1).abs() < 1e-10 * r0.max(1.0),
                    "trial {trial}: gauge violation {r0} vs {r1}"
                );
            }
        }
    }
    pass(
        "criterion 8 (DPT rate correctness)",
        format!(
            "100 instances: max rate error {worst_rate:.2e}, max total-rate error {worst_total:.2e}, gauge invariant"
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 9: posterior support closure of the ordered prior.
// ---------------------------------------------------------------------

#[test]
fn criterion_09_posterior_support_closure() {
    let dims = DptDims {
        num_countries: 10,
        num_actions: 10,
        num_steps: 12,
        num_communities: 3,
        num_states: 3,
    };
    let config = PriorConfig::standard("omd+omd", 3, 10).unwrap();
    let truth = omd_core::dpt::sample_dpt_params(&dims, &config, false, &mut rng_from(4010)).unwrap();
    let data = omd_core::dpt::dpt_generate(&truth, &mut rng_from(4011));
    let target = DptPosterior::new(&data, 3, 3, config, false).unwrap();
    let cfg = SamplerConfig {
        samples: 300,
        burn_in: 200,
        thin: 8,
        ..SamplerConfig::default()
    };
    let trace = run_chain(&cfg, &target, 4012).unwrap();
    assert_eq!(trace.samples.len(), 300);
    for (i, sample) in trace.samples.iter().enumerate() {
        let phi = sample.matrix("emission").unwrap();
        let pi = sample.matrix("transition").unwrap();
        assert!(phi.well_ordered(1e-12), "sample {i} emission not ordered");
        assert!(pi.well_ordered(1e-12), "sample {i} transition not ordered");
    }
    let mean_phi = posterior_mean(&trace, "emission")
        .unwrap()
        .as_matrix()
        .unwrap();
    assert!(mean_phi.well_ordered(1e-12), "posterior mean not ordered");
    pass(
        "criterion 9 (posterior support closure)",
        format!(
            "300/300 posterior samples and the posterior mean are well-ordered (acceptance {:.3})",
            trace.acceptance_rate
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 10: prior-configuration comparison on generated data.
// ---------------------------------------------------------------------

#[test]
fn criterion_10_dpt_prior_comparison() {
    let spec = ExperimentSpec {
        id: "c10".into(),
        model: ModelSpec::Dpt {
            num_countries: 10,
            num_actions: 10,
            num_steps: 12,
            num_communities: 3,
            num_states: 3,
        },
        seeds: (0..10).collect(),
        split: SplitMode::Forecasting,
        mask_fraction: 0.3,
        train_fraction: 0.7,
        priors: vec!["omd+omd".into(), "smd+smd".into(), "smd+bmd".into()],
        sampler: SamplerConfig {
            samples: 300,
            burn_in: 300,
            thin: 10,
            ..SamplerConfig::default()
        },
        separate_psi: false,
        chains: 2,
    };
    let report = eval::run_experiment(&spec, threads()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let mut wins = 0;
    let mut within = 0;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let omd = report.seed_metric("omd+omd", "sppd", seed).unwrap();
        let smd = report.seed_metric("smd+smd", "sppd", seed).unwrap();
        let bmd = report.seed_metric("smd+bmd", "sppd", seed).unwrap();
        let best = omd.max(smd).max(bmd);
        if omd >= bmd {
            wins += 1;
        }
        if omd >= 0.9 * best {
            within += 1;
        }
        ratios.push(omd / best);
    }
    assert!(wins >= 7, "ordered config beat banded in only {wins}/10 seeds");
    assert_eq!(
        within, 10,
        "ordered config fell >10% behind the best in {} seeds (ratios {ratios:?})",
        10 - within
    );
    pass(
        "criterion 10 (prior configuration comparison)",
        format!("omd+omd >= smd+bmd in {wins}/10 seeds; within 10% of best in all"),
    );
}

// ---------------------------------------------------------------------
// Criterion 11: codebook golden table.
// ---------------------------------------------------------------------

#[test]
fn criterion_11_codebook_golden() {
    // (rank, name, Goldstein value, CAMEO root id)
    const GOLDEN: [(usize, &str, f64, u32); 20] = [
        (0, "provide aid", 7.0, 7),
        (1, "engage in material cooperation", 6.0, 6),
        (2, "yield", 5.0, 8),
        (3, "express intent to cooperate", 4.0, 3),
        (4, "engage in diplomatic cooperation", 3.5, 5),
        (5, "appeal", 3.0, 2),
        (6, "consult", 1.0, 4),
        (7, "make public statement", 0.0, 1),
        (8, "investigate", -2.0, 9),
        (9, "disapprove", -2.0, 11),
        (10, "reject", -4.0, 12),
        (11, "reduce relations", -4.0, 16),
        (12, "demand", -5.0, 10),
        (13, "threaten", -6.0, 13),
        (14, "protest", -6.5, 14),
        (15, "coerce", -7.0, 17),
        (16, "exhibit force posture", -7.2, 15),
        (17, "assault", -9.0, 18),
        (18, "fight", -10.0, 19),
        (19, "unconventional mass violence", -10.0, 20),
    ];
    let cb = load_codebook();
    assert_eq!(cb.len(), 20);
    for (rank, name, goldstein, cameo) in GOLDEN {
        let e = cb.entry(rank);
        assert_eq!(e.index, rank);
        assert_eq!(e.name, name, "rank {rank}");
        assert_eq!(e.goldstein, goldstein, "rank {rank}");
        assert_eq!(e.cameo_root, cameo, "rank {rank}");
    }
    // Tie order at -2.0 and the endpoints.
    assert!(cb.resolve("investigate").unwrap() < cb.resolve("disapprove").unwrap());
    assert_eq!(cb.entry(0).name, "provide aid");
    assert_eq!(cb.entry(0).goldstein, 7.0);
    assert_eq!(cb.entry(19).name, "unconventional mass violence");
    assert_eq!(cb.entry(19).goldstein, -10.0);
    pass(
        "criterion 11 (codebook golden table)",
        "20 rows, endpoints and tie order exact".to_string(),
    );
}

// ---------------------------------------------------------------------
// Criterion 12: byte-identical reruns of stochastic subcommands.
// ---------------------------------------------------------------------

fn omd_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omd"))
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().expect("spawn omd");
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read_bytes(path: &std::path::Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn criterion_12_determinism() {
    let base = std::env::temp_dir().join(format!("omd-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    let mut compared = 0usize;
    for round in ["a", "b"] {
        let dir = base.join(round);
        std::fs::create_dir_all(&dir).unwrap();
        run_ok(omd_bin().args([
            "sample-prior",
            "--family",
            "omd",
            "--states",
            "4",
            "--alpha",
            "1,1,1,1,1",
            "--seed",
            "7",
            "--out",
        ]).arg(dir.join("m.csv")));
        run_ok(omd_bin()
            .args([
                "generate-synthetic",
                "--model",
                "hmm",
                "--shape",
                "banded",
                "--states",
                "3",
                "--actions",
                "5",
                "--sequences",
                "25",
                "--steps",
                "8",
                "--seed",
                "21",
                "--out-dir",
            ])
            .arg(dir.join("hmm")));
        run_ok(omd_bin()
            .args([
                "generate-synthetic",
                "--model",
                "dpt",
                "--countries",
                "4",
                "--communities",
                "2",
                "--states",
                "2",
                "--actions",
                "5",
                "--steps",
                "4",
                "--seed",
                "22",
                "--out-dir",
            ])
            .arg(dir.join("dpt")));
        run_ok(omd_bin()
            .args([
                "fit",
                "--model",
                "hmm",
                "--states",
                "3",
                "--prior",
                "omd+omd",
                "--split",
                "forecasting",
                "--samples",
                "15",
                "--burn-in",
                "15",
                "--thin",
                "2",
                "--seed",
                "31",
                "--data",
            ])
            .arg(dir.join("hmm/sequences.csv"))
            .arg("--out")
            .arg(dir.join("trace.jsonl")));
        run_ok(omd_bin()
            .args(["evaluate", "--experiment-id", "det", "--trace"])
            .arg(dir.join("trace.jsonl"))
            .arg("--data")
            .arg(dir.join("hmm/sequences.csv"))
            .arg("--out")
            .arg(dir.join("metrics.csv")));
    }
    for rel in [
        "m.csv",
        "m.json",
        "hmm/sequences.csv",
        "hmm/states.csv",
        "hmm/truth_emission.csv",
        "dpt/events.tsv",
        "dpt/tensor.csv",
        "trace.jsonl",
        "metrics.csv",
    ] {
        let a = read_bytes(&base.join("a").join(rel));
        let b = read_bytes(&base.join("b").join(rel));
        assert!(!a.is_empty(), "{rel} is empty");
        assert_eq!(a, b, "{rel} differs between identical reruns");
        compared += 1;
    }
    let _ = std::fs::remove_dir_all(&base);
    pass(
        "criterion 12 (determinism)",
        format!("{compared} artifacts byte-identical across reruns"),
    );
}
