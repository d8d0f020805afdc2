use omd_core::eval::*;
use omd_core::sampler::{Algorithm, SamplerConfig};
use std::time::Instant;

fn run(shape: TruthShape, split: SplitMode, n: usize, thin: usize, chains: usize, burn: usize, hmc: bool) {
    let spec = ExperimentSpec {
        id: format!("c6-{}-{}", shape.name(), split.name()),
        model: ModelSpec::Hmm {
            truth: TruthSpec::new(shape, 5, 10),
            num_sequences: n,
            t_len: 10,
        },
        seeds: (0..10).collect(),
        split,
        mask_fraction: 0.3,
        train_fraction: 0.7,
        priors: vec!["omd+omd".into(), "smd+smd".into()],
        sampler: SamplerConfig {
            algorithm: if hmc { Algorithm::Hmc { leapfrog_steps: 12 } } else { Algorithm::AdaptiveRwm },
            samples: 300,
            burn_in: burn,
            thin,
            ..SamplerConfig::default()
        },
        separate_psi: false,
        chains,
    };
    let t0 = Instant::now();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_experiment(&spec, threads).unwrap();
    for f in &report.failures { println!("FAIL {f}"); }
    let m = |p: &str| {
        let v = report.metric_values(p, "mae_observations");
        v.iter().sum::<f64>() / v.len() as f64
    };
    let omd = m("omd+omd");
    let smd = m("smd+smd");
    let mut omd_wins = 0;
    for seed in 0..10u64 {
        let o = report.seed_metric("omd+omd", "mae_observations", seed).unwrap();
        let s = report.seed_metric("smd+smd", "mae_observations", seed).unwrap();
        if o <= s { omd_wins += 1; }
    }
    println!(
        "{} {} n={n}: obs-MAE omd {omd:.4} smd {smd:.4} (omd better in {omd_wins}/10) [{:?}]",
        shape.name(), split.name(), t0.elapsed()
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100);
    let thin: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(12);
    let chains: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(3);
    let burn: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(300);
    let hmc = args.get(5).map(|s| s.as_str()) == Some("hmc");
    run(TruthShape::Banded, SplitMode::Forecasting, n, thin, chains, burn, hmc);
    run(TruthShape::Bonbon, SplitMode::Imputation, n, thin, chains, burn, hmc);
    run(TruthShape::Triangle, SplitMode::Imputation, n, thin, chains, burn, hmc);
}
