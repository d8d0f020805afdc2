use omd_core::eval::*;
use omd_core::sampler::{Algorithm, SamplerConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let thin: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let chains: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2);
    let burn: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(300);
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
            algorithm: if args.get(5).map(|s| s.as_str()) == Some("hmc") {
                Algorithm::Hmc { leapfrog_steps: args.get(6).map(|s| s.parse().unwrap()).unwrap_or(12) }
            } else {
                Algorithm::AdaptiveRwm
            },
            samples: 300,
            burn_in: burn,
            thin,
            anneal_from: args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1.0),
            ..SamplerConfig::default()
        },
        separate_psi: false,
        chains,
    };
    let t0 = Instant::now();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_experiment(&spec, threads).unwrap();
    println!("threads={threads} thin={thin} chains={chains} burn={burn} elapsed={:?}", t0.elapsed());
    for f in &report.failures { println!("FAIL {f}"); }
    let mut wins = 0;
    let mut within = 0;
    for seed in 0..10u64 {
        let omd = report.seed_metric("omd+omd", "sppd", seed).unwrap();
        let smd = report.seed_metric("smd+smd", "sppd", seed).unwrap();
        let bmd = report.seed_metric("smd+bmd", "sppd", seed).unwrap();
        let best = omd.max(smd).max(bmd);
        if omd >= bmd { wins += 1; }
        if omd >= 0.9 * best { within += 1; }
        println!("seed {seed}: sppd omd {omd:.4} smd {smd:.4} smd+bmd {bmd:.4} (omd/best {:.3})", omd / best);
    }
    println!("omd>=smd+bmd in {wins}/10; omd within 10% of best in {within}/10");
}
