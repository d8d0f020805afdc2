//! File formats: matrix CSV with JSON sidecars, sequence CSV, COO tensor
//! CSV, JSON-lines traces, metric CSV, event TSV, and the flat key-value
//! experiment config.
//!
//! All float output uses 17 significant digits so values round-trip
//! exactly and reruns are byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dpt::CountTensor;
use crate::error::{Error, Result};
use crate::eval::{ExperimentSpec, MetricRow, ModelSpec, TruthShape, TruthSpec};
use crate::events::{EventDate, EventRecord};
use crate::hmm::SequenceDataset;
use crate::matrix::{BandSpec, ConcentrationVector, StochasticMatrix};
use crate::priors::{MatrixPrior, PriorConfig};
use crate::sampler::{Algorithm, ChainTrace, SamplerConfig};
use crate::targets::SampleRecord;

/// 17-significant-digit decimal, enough to reproduce any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sidecar path of a data file: same stem with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixHeader {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "A")]
    pub a: usize,
    pub family: String,
    pub alpha: Vec<f64>,
}

/// One matrix row per CSV line; the sidecar carries shape and family.
pub fn write_matrix_csv(path: &Path, m: &StochasticMatrix, header: &MatrixHeader) -> Result<()> {
    let mut out = String::new();
    for k in 0..m.height() {
        let row: Vec<String> = m.row(k).iter().map(|v| format_float(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

/// Reads a matrix CSV; the sidecar is optional.
pub fn read_matrix_csv(path: &Path) -> Result<(StochasticMatrix, Option<MatrixHeader>)> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad float '{v}'", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let matrix = StochasticMatrix::from_rows(&rows)?;
    let sidecar = sidecar_path(path);
    let header = if sidecar.exists() {
        Some(serde_json::from_str(&fs::read_to_string(sidecar)?)?)
    } else {
        None
    };
    Ok((matrix, header))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequencesHeader {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "A")]
    pub a: usize,
}

/// One sequence per line, 1-based action indices, missing entries empty.
pub fn write_sequences_csv(path: &Path, data: &SequenceDataset) -> Result<()> {
    let mut out = String::new();
    for seq in data.sequences() {
        let fields: Vec<String> = seq
            .iter()
            .map(|obs| obs.map_or(String::new(), |a| (a + 1).to_string()))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    let header = SequencesHeader {
        n: data.len(),
        t: data.t_len(),
        a: data.num_actions(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_sequences_csv(path: &Path) -> Result<SequenceDataset> {
    let text = fs::read_to_string(path)?;
    let mut sequences = Vec::new();
    let mut max_action = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut seq = Vec::new();
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                seq.push(None);
            } else {
                let v: usize = field.parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad action '{field}'", lineno + 1))
                })?;
                if v == 0 {
                    return Err(Error::Parse(format!(
                        "line {}: action indices are 1-based",
                        lineno + 1
                    )));
                }
                max_action = max_action.max(v);
                seq.push(Some(v - 1));
            }
        }
        sequences.push(seq);
    }
    let sidecar = sidecar_path(path);
    let num_actions = if sidecar.exists() {
        let header: SequencesHeader = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
        header.a
    } else {
        max_action
    };
    SequenceDataset::new(sequences, num_actions)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorHeader {
    pub dims: [usize; 4],
    pub countries: Vec<String>,
    pub actions: Vec<String>,
}

/// COO CSV with header `i,j,a,t,count` (0-based indices), plus a sidecar
/// carrying dims and label vocabularies.
pub fn write_tensor_csv(path: &Path, tensor: &CountTensor, header: &TensorHeader) -> Result<()> {
    let mut out = String::from("i,j,a,t,count\n");
    for (idx, count) in tensor.iter() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            idx[0], idx[1], idx[2], idx[3], count
        ));
    }
    fs::write(path, out)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

pub fn read_tensor_csv(path: &Path) -> Result<(CountTensor, Option<TensorHeader>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse("empty tensor file".into()))?;
    if header_line.trim() != "i,j,a,t,count" {
        return Err(Error::Parse(format!(
            "expected COO header 'i,j,a,t,count', got '{header_line}'"
        )));
    }
    let mut cells = Vec::new();
    let mut max = [0usize; 4];
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("line {}: need 5 fields", lineno + 2)));
        }
        let parse = |s: &str| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad integer '{s}'", lineno + 2)))
        };
        let idx = [
            parse(fields[0])?,
            parse(fields[1])?,
            parse(fields[2])?,
            parse(fields[3])?,
        ];
        let count = parse(fields[4])? as u64;
        for (m, v) in max.iter_mut().zip(idx) {
            *m = (*m).max(v + 1);
        }
        cells.push((idx, count));
    }
    let sidecar = sidecar_path(path);
    let header: Option<TensorHeader> = if sidecar.exists() {
        Some(serde_json::from_str(&fs::read_to_string(sidecar)?)?)
    } else {
        None
    };
    let dims = header
        .as_ref()
        .map(|h| h.dims)
        .unwrap_or([max[0].max(max[1]), max[0].max(max[1]), max[2], max[3]]);
    let mut tensor = CountTensor::new(dims[0], dims[2], dims[3]);
    for (idx, count) in cells {
        tensor.add(idx, count)?;
    }
    Ok((tensor, header))
}

/// Prior family description in trace metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorMeta {
    pub family: String,
    pub alpha: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
}

impl PriorMeta {
    pub fn from_prior(prior: &MatrixPrior) -> Self {
        match prior {
            MatrixPrior::Omd { alpha } | MatrixPrior::Smd { alpha } => Self {
                family: prior.family_name().into(),
                alpha: alpha.values().to_vec(),
                bandwidth: None,
            },
            MatrixPrior::Bmd { band, alpha3 } => Self {
                family: "bmd".into(),
                alpha: alpha3.to_vec(),
                bandwidth: Some(band.bandwidth()),
            },
        }
    }

    pub fn to_prior(&self, num_states: usize) -> Result<MatrixPrior> {
        match self.family.as_str() {
            "omd" => Ok(MatrixPrior::Omd {
                alpha: ConcentrationVector::new(self.alpha.clone())?,
            }),
            "smd" => Ok(MatrixPrior::Smd {
                alpha: ConcentrationVector::new(self.alpha.clone())?,
            }),
            "bmd" => {
                if self.alpha.len() != 3 {
                    return Err(Error::Parse("bmd prior needs three concentrations".into()));
                }
                Ok(MatrixPrior::Bmd {
                    band: BandSpec::new(self.bandwidth.unwrap_or(1), num_states)?,
                    alpha3: [self.alpha[0], self.alpha[1], self.alpha[2]],
                })
            }
            other => Err(Error::Parse(format!("unknown prior family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMeta {
    pub mode: String,
    pub fraction: f64,
    pub seed: u64,
}

/// First line of a trace file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub model: String,
    pub seed: u64,
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub algorithm: String,
    pub acceptance_rate: f64,
    pub num_states: usize,
    pub num_actions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_communities: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separate_psi: Option<bool>,
    pub emission_prior: PriorMeta,
    pub transition_prior: PriorMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitMeta>,
}

impl TraceMeta {
    pub fn prior_config(&self, num_states: usize) -> Result<PriorConfig> {
        PriorConfig::new(
            self.emission_prior.to_prior(num_states)?,
            self.transition_prior.to_prior(num_states)?,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleLine {
    log_joint: f64,
    blocks: std::collections::BTreeMap<String, crate::targets::Block>,
}

/// JSON-lines trace: metadata first, then one posterior sample per line.
pub fn write_trace_jsonl(path: &Path, meta: &TraceMeta, trace: &ChainTrace) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, meta)?;
    w.write_all(b"\n")?;
    for (record, lp) in trace.samples.iter().zip(&trace.log_joint_trace) {
        let line = SampleLine {
            log_joint: *lp,
            blocks: record.blocks.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_jsonl(path: &Path) -> Result<(TraceMeta, ChainTrace)> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trace file".into()))??;
    let meta: TraceMeta = serde_json::from_str(&meta_line)?;
    let mut samples = Vec::new();
    let mut log_joint_trace = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: SampleLine = serde_json::from_str(&line)?;
        log_joint_trace.push(sample.log_joint);
        samples.push(SampleRecord {
            blocks: sample.blocks,
        });
    }
    let trace = ChainTrace {
        seed: meta.seed,
        burn_in: meta.burn_in,
        thin: meta.thin,
        algorithm: meta.algorithm.clone(),
        acceptance_rate: meta.acceptance_rate,
        samples,
        log_joint_trace,
    };
    Ok((meta, trace))
}

/// Plot-ready long-format CSV of metric rows.
pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut out = String::from("experiment,seed,prior,split,metric,value\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment,
            r.seed,
            r.prior,
            r.split,
            r.metric,
            format_float(r.value)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Tab-separated event export with header
/// `date<TAB>source<TAB>target<TAB>cameo_root`.
pub fn write_events_tsv(path: &Path, records: &[EventRecord]) -> Result<()> {
    let mut out = String::from("date\tsource\ttarget\tcameo_root\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.date.format(),
            r.source,
            r.target,
            r.action
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses an event TSV; malformed lines are skipped and counted.
pub fn read_events_tsv(path: &Path) -> Result<(Vec<EventRecord>, usize)> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if lineno == 0 && fields.first() == Some(&"date") {
            continue;
        }
        if fields.len() != 4 {
            skipped += 1;
            continue;
        }
        match EventDate::parse(fields[0]) {
            Ok(date) => records.push(EventRecord {
                date,
                source: fields[1].trim().to_string(),
                target: fields[2].trim().to_string(),
                action: fields[3].trim().to_string(),
            }),
            Err(_) => skipped += 1,
        }
    }
    Ok((records, skipped))
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Parse(format!("bad boolean '{other}'"))),
    }
}

fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = v.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed range '{v}'")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed range '{v}'")))?;
        if hi <= lo {
            return Err(Error::Parse(format!("empty seed range '{v}'")));
        }
        return Ok((lo..hi).collect());
    }
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed '{s}'")))
        })
        .collect()
}

/// Parses the flat `key = value` sweep config. Lines starting with `#` are
/// comments. Unknown keys are rejected.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentSpec> {
    let mut kv = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |key: &str| kv.get(key).map(String::as_str);
    let parse_usize = |key: &str, default: usize| -> Result<usize> {
        match get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer for '{key}': '{v}'"))),
            None => Ok(default),
        }
    };
    let parse_f64 = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("bad float for '{key}': '{v}'"))),
            None => Ok(default),
        }
    };

    const KNOWN: [&str; 22] = [
        "id",
        "chains",
        "anneal",
        "model",
        "truth",
        "states",
        "actions",
        "sequences",
        "steps",
        "few_shot",
        "seeds",
        "split",
        "mask_fraction",
        "train_fraction",
        "priors",
        "samples",
        "burn_in",
        "thin",
        "algorithm",
        "leapfrog",
        "countries",
        "communities",
    ];
    for key in kv.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::Parse(format!("unknown config key '{key}'")));
        }
    }

    let model_name = get("model").unwrap_or("hmm");
    let num_states = parse_usize("states", 5)?;
    let num_actions = parse_usize("actions", 10)?;
    let few_shot = match get("few_shot") {
        Some(v) => parse_bool(v)?,
        None => false,
    };
    let model = match model_name {
        "hmm" => {
            let shape: TruthShape = get("truth").unwrap_or("banded").parse()?;
            let default_n = crate::eval::default_num_sequences(few_shot);
            ModelSpec::Hmm {
                truth: TruthSpec::new(shape, num_states, num_actions),
                num_sequences: parse_usize("sequences", default_n)?,
                t_len: parse_usize("steps", 10)?,
            }
        }
        "dpt" => ModelSpec::Dpt {
            num_countries: parse_usize("countries", 10)?,
            num_actions,
            num_steps: parse_usize("steps", 12)?,
            num_communities: parse_usize("communities", 3)?,
            num_states,
        },
        other => return Err(Error::Parse(format!("unknown model '{other}'"))),
    };

    let algorithm = match get("algorithm").unwrap_or("adaptive-rwm") {
        "adaptive-rwm" => Algorithm::AdaptiveRwm,
        "hmc" => Algorithm::Hmc {
            leapfrog_steps: parse_usize("leapfrog", 10)?,
        },
        other => return Err(Error::Parse(format!("unknown algorithm '{other}'"))),
    };
    let sampler = SamplerConfig {
        algorithm,
        samples: parse_usize("samples", 1000)?,
        burn_in: parse_usize("burn_in", 200)?,
        thin: parse_usize("thin", 10)?,
        anneal_from: parse_f64("anneal", 1.0)?,
        ..SamplerConfig::default()
    };

    let priors: Vec<String> = get("priors")
        .unwrap_or("omd+omd,smd+smd")
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();

    Ok(ExperimentSpec {
        id: get("id").unwrap_or("experiment").to_string(),
        model,
        seeds: parse_seeds(get("seeds").unwrap_or("0..10"))?,
        split: get("split").unwrap_or("forecasting").parse()?,
        mask_fraction: parse_f64("mask_fraction", 0.3)?,
        train_fraction: parse_f64("train_fraction", 0.7)?,
        priors,
        sampler,
        separate_psi: false,
        chains: parse_usize("chains", 1)?,
    })
}
