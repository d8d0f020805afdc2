use omd_core::eval::*;
use omd_core::sampler::SamplerConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let thin: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let chains: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
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
        sampler: SamplerConfig { samples: 500, burn_in: 200, thin, ..SamplerConfig::default() },
        separate_psi: false,
        chains,
    };
    let t0 = Instant::now();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_experiment(&spec, threads).unwrap();
    println!("threads={threads} thin={thin} chains={chains} elapsed={:?}", t0.elapsed());
    for f in &report.failures { println!("FAIL {f}"); }
    let mut wins = 0;
    for seed in 0..10u64 {
        let omd = report.seed_metric("omd+omd", "mae_latent_states", seed).unwrap();
        let smd = report.seed_metric("smd+smd", "mae_latent_states", seed).unwrap();
        let omd_rec = report.seed_metric("omd+omd", "recovery_transition_unaligned", seed).unwrap();
        let smd_rec_al = report.seed_metric("smd+smd", "recovery_transition_aligned", seed).unwrap();
        if omd < smd { wins += 1; }
        println!("seed {seed}: latमae omd {omd:.3} smd {smd:.3} | rec omd_unal {omd_rec:.4} smd_al {smd_rec_al:.4}");
    }
    let omd_rec_mean: f64 = report.metric_values("omd+omd", "recovery_transition_unaligned").iter().sum::<f64>() / 10.0;
    let smd_al_mean: f64 = report.metric_values("smd+smd", "recovery_transition_aligned").iter().sum::<f64>() / 10.0;
    println!("wins {wins}/10 | recovery transition: omd unaligned mean {omd_rec_mean:.4}, smd aligned mean {smd_al_mean:.4}, ratio {:.2}", smd_al_mean / omd_rec_mean);
    let omd_f: f64 = report.metric_values("omd+omd", "mae_observations").iter().sum::<f64>() / 10.0;
    let smd_f: f64 = report.metric_values("smd+smd", "mae_observations").iter().sum::<f64>() / 10.0;
    println!("forecast obs MAE mean: omd {omd_f:.4} smd {smd_f:.4}");
}
