//! `omd` — sample ordered-matrix priors, generate synthetic datasets, fit
//! the HMM and dynamic Poisson Tucker models by MCMC, and evaluate
//! imputation/forecasting performance.
//!
//! Every stochastic subcommand takes `--seed` and reproduces byte-identical
//! outputs for identical invocations. Relative output paths resolve against
//! `OMD_OUTPUT_DIR` when that variable is set.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use omd_core::dpt::{sample_dpt_params, DptDims};
use omd_core::eval::{
    self, dpt_trace_metrics, hmm_trace_metrics, make_truth, MetricRow, SplitSpec, TruthShape,
    TruthSpec,
};
use omd_core::events::{
    conflict_dyad_preset, generate_event_stream, ingest_events, load_codebook, IngestOptions,
    preset_country_codes,
};
use omd_core::hmm::{hmm_generate, SequenceDataset};
use omd_core::io::{
    self, read_events_tsv, read_matrix_csv, read_sequences_csv, read_tensor_csv,
    read_trace_jsonl, write_events_tsv, write_matrix_csv, write_metrics_csv,
    write_sequences_csv, write_tensor_csv, write_trace_jsonl, MatrixHeader, PriorMeta, SplitMeta, TensorHeader, TraceMeta,
};
use omd_core::matrix::{BandSpec, ConcentrationVector, StochasticMatrix};
use omd_core::priors::{sample_bmd, sample_omd, sample_smd, PriorConfig};
use omd_core::sampler::{posterior_mean, run_best_chain, Algorithm, SamplerConfig};
use omd_core::seeds::{derive_seed, rng_from};
use omd_core::targets::{DptPosterior, HmmPosterior};

#[derive(Parser)]
#[command(name = "omd", version, about = "Ordered matrix priors and state-space models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one stochastic matrix from a prior family and write it as CSV.
    SamplePrior(SamplePriorArgs),
    /// Check whether a matrix CSV is well-ordered (stochastic dominance).
    CheckOrder(CheckOrderArgs),
    /// Generate a synthetic dataset from a ground-truth model.
    GenerateSynthetic(GenerateArgs),
    /// Fit a model by MCMC and write the posterior trace.
    Fit(FitArgs),
    /// Score a trace against held-out data and/or the ground truth.
    Evaluate(EvaluateArgs),
    /// Aggregate an event TSV into a monthly count tensor.
    IngestEvents(IngestArgs),
    /// Write posterior-mean parameter tables from a trace.
    SummarizePosterior(SummarizeArgs),
    /// Run a full sweep from a flat key=value config file.
    RunExperiment(RunExperimentArgs),
}

#[derive(Args)]
struct SamplePriorArgs {
    /// Prior family: omd, smd or bmd.
    #[arg(long)]
    family: String,
    /// Number of rows K.
    #[arg(long, value_name = "K")]
    states: usize,
    /// Concentration entries (for bmd: the three band concentrations).
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Bandwidth of the banded family.
    #[arg(long, default_value_t = 1)]
    bandwidth: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path (a JSON sidecar is written next to it).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckOrderArgs {
    /// Matrix CSV to check.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model family: hmm or dpt.
    #[arg(long, default_value = "hmm")]
    model: String,
    /// Ground-truth transition shape (hmm): banded, bonbon or triangle.
    #[arg(long, default_value = "banded")]
    shape: String,
    /// Latent states K; defaults to 5 (hmm) or 3 (dpt).
    #[arg(long)]
    states: Option<usize>,
    #[arg(long, default_value_t = 10)]
    actions: usize,
    /// Number of sequences (hmm); defaults to 100 with --few-shot, 10000
    /// otherwise.
    #[arg(long)]
    sequences: Option<usize>,
    /// Time steps; defaults to 10 (hmm) or 24 monthly bins (dpt).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = false)]
    few_shot: bool,
    /// Countries V (dpt).
    #[arg(long, default_value_t = 20)]
    countries: usize,
    /// Communities C (dpt).
    #[arg(long, default_value_t = 5)]
    communities: usize,
    /// Use the bundled escalating-dyad preset instead of a prior draw (dpt).
    #[arg(long, default_value_t = false)]
    preset: bool,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Model family: hmm or dpt.
    #[arg(long)]
    model: String,
    /// Input data: sequences CSV (hmm) or COO tensor CSV (dpt).
    #[arg(long)]
    data: PathBuf,
    /// Prior configuration: omd+omd, smd+smd or smd+bmd.
    #[arg(long, default_value = "omd+omd")]
    prior: String,
    #[arg(long, default_value_t = 5)]
    states: usize,
    /// Communities C (dpt).
    #[arg(long, default_value_t = 3)]
    communities: usize,
    /// Separate sender/receiver community matrices (dpt).
    #[arg(long, default_value_t = false)]
    separate_psi: bool,
    /// Train/test split applied before fitting: imputation, forecasting or
    /// none.
    #[arg(long, default_value = "none")]
    split: String,
    #[arg(long, default_value_t = 0.3)]
    mask_fraction: f64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Independent chains; the best by mean log target is kept.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Sampler: adaptive-rwm or hmc.
    #[arg(long, default_value = "adaptive-rwm")]
    algorithm: String,
    #[arg(long, default_value_t = 10)]
    leapfrog: usize,
    #[arg(long)]
    seed: u64,
    /// Output trace path (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// The full (unsplit) dataset the trace was fit against.
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth emission matrix CSV for recovery scores.
    #[arg(long)]
    truth_emission: Option<PathBuf>,
    /// Ground-truth transition matrix CSV for recovery scores.
    #[arg(long)]
    truth_transition: Option<PathBuf>,
    /// True latent state sequences CSV for latent-state MAE (hmm).
    #[arg(long)]
    truth_states: Option<PathBuf>,
    #[arg(long, default_value = "evaluation")]
    experiment_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Tab-separated events: date, source, target, cameo_root.
    #[arg(long)]
    input: PathBuf,
    /// Fixed country vocabulary (comma separated); inferred if absent.
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    /// First month of bin 0, as YYYY-MM.
    #[arg(long)]
    start: Option<String>,
    /// Number of monthly bins; inferred if absent.
    #[arg(long)]
    months: Option<usize>,
    /// Width of the action axis; defaults to the full codebook.
    #[arg(long)]
    actions: Option<usize>,
    /// Output COO CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunExperimentArgs {
    /// Flat key=value sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent seed jobs.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Resolves an output path against `OMD_OUTPUT_DIR` when it is relative.
fn out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("OMD_OUTPUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SamplePrior(args) => sample_prior(args),
        Command::CheckOrder(args) => check_order(args),
        Command::GenerateSynthetic(args) => generate_synthetic(args),
        Command::Fit(args) => fit(args),
        Command::Evaluate(args) => evaluate(args),
        Command::IngestEvents(args) => ingest(args),
        Command::SummarizePosterior(args) => summarize(args),
        Command::RunExperiment(args) => run_experiment(args),
    }
}

fn sample_prior(args: SamplePriorArgs) -> Result<()> {
    let mut rng = rng_from(args.seed);
    let (matrix, header) = match args.family.as_str() {
        "omd" | "smd" => {
            let alpha = ConcentrationVector::new(args.alpha.clone())?;
            let matrix = if args.family == "omd" {
                sample_omd(args.states, &alpha, &mut rng)?.0
            } else {
                sample_smd(args.states, &alpha, &mut rng)?
            };
            let header = MatrixHeader {
                k: args.states,
                a: alpha.len(),
                family: args.family.clone(),
                alpha: args.alpha.clone(),
            };
            (matrix, header)
        }
        "bmd" => {
            if args.alpha.len() != 3 {
                bail!("the banded family needs exactly three concentrations");
            }
            let band = BandSpec::new(args.bandwidth, args.states)?;
            let matrix = sample_bmd(&band, [args.alpha[0], args.alpha[1], args.alpha[2]], &mut rng)?;
            let header = MatrixHeader {
                k: args.states,
                a: args.states,
                family: "bmd".into(),
                alpha: args.alpha.clone(),
            };
            (matrix, header)
        }
        other => bail!("unknown prior family '{other}'"),
    };
    let path = out_path(&args.out);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_matrix_csv(&path, &matrix, &header)?;
    println!("wrote {} ({}x{} {})", path.display(), header.k, header.a, header.family);
    Ok(())
}

fn check_order(args: CheckOrderArgs) -> Result<()> {
    let (matrix, _) = read_matrix_csv(&args.matrix)?;
    if matrix.well_ordered(args.tol) {
        println!("ordered");
    } else {
        println!("not ordered");
    }
    Ok(())
}

fn generate_synthetic(args: GenerateArgs) -> Result<()> {
    let dir = out_path(&args.out_dir);
    ensure_dir(&dir)?;
    match args.model.as_str() {
        "hmm" => {
            let num_states = args.states.unwrap_or(5);
            let num_steps = args.steps.unwrap_or(10);
            let shape: TruthShape = args.shape.parse()?;
            let spec = TruthSpec::new(shape, num_states, args.actions);
            let truth = make_truth(&spec)?;
            let n = args
                .sequences
                .unwrap_or_else(|| eval::default_num_sequences(args.few_shot));
            let mut rng = omd_core::seeds::rng_for(args.seed, "data", 0);
            let (data, states) = hmm_generate(&truth, n, num_steps, &mut rng);
            write_sequences_csv(&dir.join("sequences.csv"), &data)?;
            let state_rows: Vec<Vec<Option<usize>>> = states
                .iter()
                .map(|path| path.iter().map(|z| Some(*z)).collect())
                .collect();
            let state_data = SequenceDataset::new(state_rows, num_states)?;
            write_sequences_csv(&dir.join("states.csv"), &state_data)?;
            let alpha_a = vec![1.0; args.actions];
            let alpha_k = vec![1.0; num_states];
            write_matrix_csv(
                &dir.join("truth_emission.csv"),
                truth.emission(),
                &MatrixHeader {
                    k: num_states,
                    a: args.actions,
                    family: "truth".into(),
                    alpha: alpha_a,
                },
            )?;
            write_matrix_csv(
                &dir.join("truth_transition.csv"),
                truth.transition(),
                &MatrixHeader {
                    k: num_states,
                    a: num_states,
                    family: "truth".into(),
                    alpha: alpha_k,
                },
            )?;
            println!(
                "wrote {} sequences of length {} over {} actions to {}",
                n,
                num_steps,
                args.actions,
                dir.display()
            );
        }
        "dpt" => {
            let codebook = load_codebook();
            let (params, countries) = if args.preset {
                (conflict_dyad_preset(), preset_country_codes())
            } else {
                let num_states = args.states.unwrap_or(3);
                let dims = DptDims {
                    num_countries: args.countries,
                    num_actions: args.actions,
                    num_steps: args.steps.unwrap_or(24),
                    num_communities: args.communities,
                    num_states,
                };
                let config = PriorConfig::standard("omd+omd", num_states, args.actions)?;
                let mut rng = omd_core::seeds::rng_for(args.seed, "dpt-truth", 0);
                let params = sample_dpt_params(&dims, &config, false, &mut rng)?;
                let countries: Vec<String> =
                    (0..args.countries).map(|i| format!("C{i:03}")).collect();
                (params, countries)
            };
            let dims = params.dims();
            let mut rng = omd_core::seeds::rng_for(args.seed, "dpt-data", 0);
            let (records, tensor) =
                generate_event_stream(&params, &countries, (2019, 1), &mut rng)?;
            write_events_tsv(&dir.join("events.tsv"), &records)?;
            let actions: Vec<String> = codebook.entries()[..dims.num_actions]
                .iter()
                .map(|e| e.name.to_string())
                .collect();
            write_tensor_csv(
                &dir.join("tensor.csv"),
                &tensor,
                &TensorHeader {
                    dims: tensor.dims(),
                    countries,
                    actions,
                },
            )?;
            println!(
                "wrote {} events into a {:?} tensor under {}",
                tensor.total_count(),
                tensor.dims(),
                dir.display()
            );
        }
        other => bail!("unknown model '{other}'"),
    }
    Ok(())
}

fn parse_algorithm(name: &str, leapfrog: usize) -> Result<Algorithm> {
    match name {
        "adaptive-rwm" => Ok(Algorithm::AdaptiveRwm),
        "hmc" => Ok(Algorithm::Hmc {
            leapfrog_steps: leapfrog,
        }),
        other => bail!("unknown algorithm '{other}'"),
    }
}

fn split_spec_from_flags(
    mode: &str,
    mask_fraction: f64,
    train_fraction: f64,
    seed: u64,
) -> Result<Option<SplitSpec>> {
    let split_seed = derive_seed(seed, "split", 0);
    match mode {
        "none" => Ok(None),
        "imputation" => Ok(Some(SplitSpec::Imputation {
            mask_fraction,
            seed: split_seed,
        })),
        "forecasting" => Ok(Some(SplitSpec::Forecasting {
            train_fraction,
            seed: split_seed,
        })),
        other => bail!("unknown split '{other}'"),
    }
}

fn split_meta(split: &Option<SplitSpec>) -> Option<SplitMeta> {
    split.as_ref().map(|s| match s {
        SplitSpec::Imputation {
            mask_fraction,
            seed,
        } => SplitMeta {
            mode: "imputation".into(),
            fraction: *mask_fraction,
            seed: *seed,
        },
        SplitSpec::Forecasting {
            train_fraction,
            seed,
        } => SplitMeta {
            mode: "forecasting".into(),
            fraction: *train_fraction,
            seed: *seed,
        },
    })
}

fn split_spec_from_meta(meta: &SplitMeta) -> Result<SplitSpec> {
    match meta.mode.as_str() {
        "imputation" => Ok(SplitSpec::Imputation {
            mask_fraction: meta.fraction,
            seed: meta.seed,
        }),
        "forecasting" => Ok(SplitSpec::Forecasting {
            train_fraction: meta.fraction,
            seed: meta.seed,
        }),
        other => bail!("unknown split mode '{other}' in trace metadata"),
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let sampler = SamplerConfig {
        algorithm: parse_algorithm(&args.algorithm, args.leapfrog)?,
        samples: args.samples,
        burn_in: args.burn_in,
        thin: args.thin,
        ..SamplerConfig::default()
    };
    let split = split_spec_from_flags(
        &args.split,
        args.mask_fraction,
        args.train_fraction,
        args.seed,
    )?;
    let out = out_path(&args.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    match args.model.as_str() {
        "hmm" => {
            let data = read_sequences_csv(&args.data)?;
            let config = PriorConfig::standard(&args.prior, args.states, data.num_actions())?;
            let train = match &split {
                Some(spec) => eval::split_sequences(&data, spec)?.train,
                None => data.clone(),
            };
            let target = HmmPosterior::new(&train, args.states, config.clone())?;
            let trace = run_best_chain(&sampler, &target, args.seed, args.chains)?;
            let meta = TraceMeta {
                model: "hmm".into(),
                seed: args.seed,
                samples: trace.samples.len(),
                burn_in: trace.burn_in,
                thin: trace.thin,
                algorithm: trace.algorithm.clone(),
                acceptance_rate: trace.acceptance_rate,
                num_states: args.states,
                num_actions: data.num_actions(),
                num_communities: None,
                separate_psi: None,
                emission_prior: PriorMeta::from_prior(&config.emission),
                transition_prior: PriorMeta::from_prior(&config.transition),
                split: split_meta(&split),
            };
            write_trace_jsonl(&out, &meta, &trace)?;
            println!(
                "fit hmm ({} states, prior {}) -> {} samples, acceptance {:.3}",
                args.states,
                args.prior,
                trace.samples.len(),
                trace.acceptance_rate
            );
        }
        "dpt" => {
            let (data, _) = read_tensor_csv(&args.data)?;
            let config = PriorConfig::standard(&args.prior, args.states, data.num_actions())?;
            let train = match &split {
                Some(spec) => eval::split_tensor(&data, spec)?.train,
                None => data.clone(),
            };
            let target = DptPosterior::new(
                &train,
                args.communities,
                args.states,
                config.clone(),
                args.separate_psi,
            )?;
            let trace = run_best_chain(&sampler, &target, args.seed, args.chains)?;
            let meta = TraceMeta {
                model: "dpt".into(),
                seed: args.seed,
                samples: trace.samples.len(),
                burn_in: trace.burn_in,
                thin: trace.thin,
                algorithm: trace.algorithm.clone(),
                acceptance_rate: trace.acceptance_rate,
                num_states: args.states,
                num_actions: data.num_actions(),
                num_communities: Some(args.communities),
                separate_psi: Some(args.separate_psi),
                emission_prior: PriorMeta::from_prior(&config.emission),
                transition_prior: PriorMeta::from_prior(&config.transition),
                split: split_meta(&split),
            };
            write_trace_jsonl(&out, &meta, &trace)?;
            println!(
                "fit dpt ({} communities, {} states, prior {}) -> {} samples, acceptance {:.3}",
                args.communities,
                args.states,
                args.prior,
                trace.samples.len(),
                trace.acceptance_rate
            );
        }
        other => bail!("unknown model '{other}'"),
    }
    Ok(())
}

fn read_states_csv(path: &Path) -> Result<Vec<Vec<usize>>> {
    let data = read_sequences_csv(path)?;
    data.sequences()
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|o| o.ok_or_else(|| anyhow::anyhow!("missing entry in states file")))
                .collect()
        })
        .collect()
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (meta, trace) = read_trace_jsonl(&args.trace)?;
    let prior_name = format!(
        "{}+{}",
        meta.emission_prior.family, meta.transition_prior.family
    );
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut push = |metric: String, value: f64, split: &str| {
        rows.push(MetricRow {
            experiment: args.experiment_id.clone(),
            seed: meta.seed.to_string(),
            prior: prior_name.clone(),
            split: split.to_string(),
            metric,
            value,
        });
    };
    match meta.model.as_str() {
        "hmm" => {
            let data = read_sequences_csv(&args.data)?;
            let truth = match (&args.truth_emission, &args.truth_transition) {
                (Some(e), Some(t)) => {
                    let (emission, _) = read_matrix_csv(e)?;
                    let (transition, _) = read_matrix_csv(t)?;
                    Some(omd_core::hmm::HmmParams::with_uniform_initial(
                        transition, emission,
                    )?)
                }
                _ => None,
            };
            let states = args
                .truth_states
                .as_ref()
                .map(|p| read_states_csv(p))
                .transpose()?;
            match &meta.split {
                Some(sm) => {
                    let spec = split_spec_from_meta(sm)?;
                    let metrics = hmm_trace_metrics(
                        &data,
                        states.as_deref(),
                        truth.as_ref(),
                        &spec,
                        &trace,
                        meta.num_states,
                    )?;
                    for (metric, value) in metrics {
                        push(metric, value, &sm.mode);
                    }
                }
                None => {
                    let truth = truth.ok_or_else(|| {
                        anyhow::anyhow!(
                            "trace was fit on the full data; provide --truth-emission and \
                             --truth-transition for recovery scoring"
                        )
                    })?;
                    let unaligned = eval::recovery_score(&truth, &trace, false)?;
                    let aligned = eval::recovery_score(&truth, &trace, true)?;
                    push("recovery_emission_unaligned".into(), unaligned.emission_l1, "none");
                    push(
                        "recovery_transition_unaligned".into(),
                        unaligned.transition_l1,
                        "none",
                    );
                    push("recovery_emission_aligned".into(), aligned.emission_l1, "none");
                    push("recovery_transition_aligned".into(), aligned.transition_l1, "none");
                }
            }
        }
        "dpt" => {
            let (data, _) = read_tensor_csv(&args.data)?;
            let sm = meta
                .split
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("dpt trace has no recorded split"))?;
            let spec = split_spec_from_meta(sm)?;
            for (metric, value) in dpt_trace_metrics(&data, &spec, &trace)? {
                push(metric, value, &sm.mode);
            }
        }
        other => bail!("unknown model '{other}' in trace metadata"),
    }
    let out = out_path(&args.out);
    write_metrics_csv(&out, &rows)?;
    println!("wrote {} metric rows to {}", rows.len(), out.display());
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let (records, malformed) = read_events_tsv(&args.input)?;
    let start = match &args.start {
        Some(s) => {
            let (y, m) = s
                .split_once('-')
                .ok_or_else(|| anyhow::anyhow!("--start must be YYYY-MM"))?;
            Some((
                y.parse::<i32>().context("bad start year")?,
                m.parse::<u32>().context("bad start month")?,
            ))
        }
        None => None,
    };
    let options = IngestOptions {
        countries: args.countries.clone(),
        start,
        num_months: args.months,
        num_actions: args.actions,
    };
    let (tensor, report) = ingest_events(&records, &options)?;
    let codebook = load_codebook();
    let actions: Vec<String> = codebook.entries()[..tensor.num_actions()]
        .iter()
        .map(|e| e.name.to_string())
        .collect();
    let out = out_path(&args.out);
    write_tensor_csv(
        &out,
        &tensor,
        &TensorHeader {
            dims: tensor.dims(),
            countries: report.countries.clone(),
            actions,
        },
    )?;
    println!(
        "ingested {} events into {:?} ({} malformed lines, {} unresolvable records, {} self-targeted dropped)",
        tensor.total_count(),
        tensor.dims(),
        malformed,
        report.skipped,
        report.dropped_self
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn write_vector_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::new();
    for v in values {
        out.push_str(&io::format_float(*v));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let (meta, trace) = read_trace_jsonl(&args.trace)?;
    let dir = out_path(&args.out_dir);
    ensure_dir(&dir)?;
    let matrix_header = |name: &str, m: &StochasticMatrix| MatrixHeader {
        k: m.height(),
        a: m.width(),
        family: name.into(),
        alpha: Vec::new(),
    };
    for name in ["emission", "transition"] {
        let mean = posterior_mean(&trace, name)?.as_matrix()?;
        write_matrix_csv(
            &dir.join(format!("{name}_mean.csv")),
            &mean,
            &matrix_header("posterior-mean", &mean),
        )?;
    }
    if meta.model == "dpt" {
        for name in ["delta_a", "delta_t"] {
            let mean = posterior_mean(&trace, name)?;
            write_vector_csv(&dir.join(format!("{name}_mean.csv")), &mean.values)?;
        }
        let psi = posterior_mean(&trace, "psi")?;
        let (c, v) = (psi.shape[0], psi.shape[1]);
        let mut out = String::new();
        for ci in 0..c {
            let row: Vec<String> = (0..v)
                .map(|i| io::format_float(psi.values[ci * v + i]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(dir.join("psi_mean.csv"), out)?;
        let core = posterior_mean(&trace, "core")?;
        let (t_n, c1_n, c2_n, k_n) = (
            core.shape[0],
            core.shape[1],
            core.shape[2],
            core.shape[3],
        );
        let mut out = String::from("t,c1,c2,k,value\n");
        for t in 0..t_n {
            for c1 in 0..c1_n {
                for c2 in 0..c2_n {
                    for k in 0..k_n {
                        let idx = ((t * c1_n + c1) * c2_n + c2) * k_n + k;
                        out.push_str(&format!(
                            "{t},{c1},{c2},{k},{}\n",
                            io::format_float(core.values[idx])
                        ));
                    }
                }
            }
        }
        std::fs::write(dir.join("core_mean.csv"), out)?;
    }
    println!("wrote posterior means to {}", dir.display());
    Ok(())
}

fn run_experiment(args: RunExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let spec = io::parse_experiment_config(&text)?;
    let report = eval::run_experiment(&spec, args.threads)?;
    let out = out_path(&args.out);
    write_metrics_csv(&out, &report.rows)?;
    println!(
        "experiment '{}': {} metric rows -> {}",
        spec.id,
        report.rows.len(),
        out.display()
    );
    for failure in &report.failures {
        eprintln!("warning: {failure}");
    }
    Ok(())
}
