//! Goldstein-ordered action codebook, dyadic event-record ingestion into
//! count tensors, and a synthetic event-stream generator.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dpt::{dpt_generate, CountTensor, DptParams};
use crate::error::{Error, Result};
use crate::eval::diagonal_bump_emission;
use crate::matrix::StochasticMatrix;

/// Raw root-level action table in CAMEO id order: (root id, name,
/// Goldstein value).
const RAW_ACTIONS: [(u32, &str, f64); 20] = [
    (1, "make public statement", 0.0),
    (2, "appeal", 3.0),
    (3, "express intent to cooperate", 4.0),
    (4, "consult", 1.0),
    (5, "engage in diplomatic cooperation", 3.5),
    (6, "engage in material cooperation", 6.0),
    (7, "provide aid", 7.0),
    (8, "yield", 5.0),
    (9, "investigate", -2.0),
    (10, "demand", -5.0),
    (11, "disapprove", -2.0),
    (12, "reject", -4.0),
    (13, "threaten", -6.0),
    (14, "protest", -6.5),
    (15, "exhibit force posture", -7.2),
    (16, "reduce relations", -4.0),
    (17, "coerce", -7.0),
    (18, "assault", -9.0),
    (19, "fight", -10.0),
    (20, "unconventional mass violence", -10.0),
];

/// One ordered action type: `index` is the rank on the ordinal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionType {
    pub index: usize,
    pub name: &'static str,
    pub goldstein: f64,
    pub cameo_root: u32,
}

/// The 20 root action types ranked by Goldstein value descending, ties
/// broken by CAMEO id ascending, re-indexed 0..19.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCodebook {
    entries: Vec<ActionType>,
}

pub fn load_codebook() -> ActionCodebook {
    let mut raw: Vec<&(u32, &str, f64)> = RAW_ACTIONS.iter().collect();
    raw.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)));
    let entries = raw
        .into_iter()
        .enumerate()
        .map(|(index, (cameo_root, name, goldstein))| ActionType {
            index,
            name,
            goldstein: *goldstein,
            cameo_root: *cameo_root,
        })
        .collect();
    ActionCodebook { entries }
}

impl ActionCodebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ActionType] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &ActionType {
        &self.entries[index]
    }

    /// Resolves an action token: a known name (case-insensitive, with the
    /// "use " prefix of the most conflictual type accepted) or a numeric
    /// CAMEO root id.
    pub fn resolve(&self, token: &str) -> Option<usize> {
        let lowered = token.trim().to_lowercase();
        if let Some(e) = self.entries.iter().find(|e| e.name == lowered) {
            return Some(e.index);
        }
        if let Some(stripped) = lowered.strip_prefix("use ") {
            if let Some(e) = self.entries.iter().find(|e| e.name == stripped) {
                return Some(e.index);
            }
        }
        if let Ok(id) = lowered.parse::<u32>() {
            return self.entries.iter().find(|e| e.cameo_root == id).map(|e| e.index);
        }
        None
    }
}

/// Calendar date at day resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl EventDate {
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.trim().splitn(3, '-');
        let year: i32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad date '{s}'")))?;
        let month: u32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad date '{s}'")))?;
        let day: u32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad date '{s}'")))?;
        if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
            return Err(Error::Parse(format!("bad date '{s}'")));
        }
        Ok(Self { year, month, day })
    }

    /// Calendar months since year 0 (UTC months are the binning unit).
    fn month_ordinal(&self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn format(&self) -> String {
        format!("{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// One micro-record: "source took action toward target on date".
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub date: EventDate,
    pub source: String,
    pub target: String,
    pub action: String,
}

/// Ingestion settings; unset fields are inferred from the records.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Fixed country vocabulary; otherwise inferred (sorted codes).
    pub countries: Option<Vec<String>>,
    /// Fixed first month (year, month) of bin 0.
    pub start: Option<(i32, u32)>,
    /// Fixed number of monthly bins.
    pub num_months: Option<usize>,
    /// Width of the action axis; defaults to the full codebook.
    pub num_actions: Option<usize>,
}

/// Ingestion summary and resolved vocabularies.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub skipped: usize,
    pub dropped_self: usize,
    pub warnings: Vec<String>,
    pub countries: Vec<String>,
    pub start: (i32, u32),
    pub num_months: usize,
}

const MAX_WARNINGS: usize = 20;

/// Aggregates event records into a monthly-binned count tensor.
/// Unresolvable actions or countries and out-of-range dates skip the
/// record with a counted warning; self-targeted records are dropped.
pub fn ingest_events(
    records: &[EventRecord],
    options: &IngestOptions,
) -> Result<(CountTensor, IngestReport)> {
    let codebook = load_codebook();
    let num_actions = options.num_actions.unwrap_or(codebook.len());
    if num_actions == 0 || num_actions > codebook.len() {
        return Err(Error::InvalidArgument(format!(
            "action axis must have between 1 and {} entries",
            codebook.len()
        )));
    }

    let mut warnings = Vec::new();
    let mut skipped = 0usize;
    let warn = |warnings: &mut Vec<String>, msg: String| {
        if warnings.len() < MAX_WARNINGS {
            warnings.push(msg);
        }
    };

    // Resolve every record first so vocabularies can be inferred.
    struct Resolved {
        source: String,
        target: String,
        action: usize,
        month: i64,
    }
    let mut resolved = Vec::with_capacity(records.len());
    let mut dropped_self = 0usize;
    for (line, r) in records.iter().enumerate() {
        let Some(action) = codebook.resolve(&r.action) else {
            skipped += 1;
            warn(&mut warnings, format!("record {line}: unknown action '{}'", r.action));
            continue;
        };
        if action >= num_actions {
            skipped += 1;
            warn(
                &mut warnings,
                format!("record {line}: action '{}' beyond axis width {num_actions}", r.action),
            );
            continue;
        }
        if r.source == r.target {
            dropped_self += 1;
            continue;
        }
        resolved.push(Resolved {
            source: r.source.clone(),
            target: r.target.clone(),
            action,
            month: r.date.month_ordinal(),
        });
    }

    let countries: Vec<String> = match &options.countries {
        Some(v) => v.clone(),
        None => {
            let mut set: Vec<String> = resolved
                .iter()
                .flat_map(|r| [r.source.clone(), r.target.clone()])
                .collect();
            set.sort();
            set.dedup();
            set
        }
    };
    let index_of: BTreeMap<&str, usize> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let start_ordinal = match options.start {
        Some((y, m)) => {
            if !(1..=12).contains(&m) {
                return Err(Error::InvalidArgument(format!("bad start month {m}")));
            }
            i64::from(y) * 12 + i64::from(m) - 1
        }
        None => resolved.iter().map(|r| r.month).min().unwrap_or(0),
    };
    let num_months = match options.num_months {
        Some(t) => t,
        None => resolved
            .iter()
            .map(|r| (r.month - start_ordinal + 1).max(0) as usize)
            .max()
            .unwrap_or(1),
    };
    if num_months == 0 {
        return Err(Error::InvalidArgument("tensor needs at least one month".into()));
    }

    let mut tensor = CountTensor::new(countries.len().max(1), num_actions, num_months);
    for r in resolved {
        let (Some(&i), Some(&j)) = (index_of.get(r.source.as_str()), index_of.get(r.target.as_str()))
        else {
            skipped += 1;
            warn(
                &mut warnings,
                format!("unknown country in '{}' -> '{}'", r.source, r.target),
            );
            continue;
        };
        let bin = r.month - start_ordinal;
        if bin < 0 || bin as usize >= num_months {
            skipped += 1;
            warn(&mut warnings, format!("date outside the configured range"));
            continue;
        }
        tensor.add([i, j, r.action, bin as usize], 1)?;
    }

    let start = (
        (start_ordinal.div_euclid(12)) as i32,
        (start_ordinal.rem_euclid(12) + 1) as u32,
    );
    Ok((
        tensor,
        IngestReport {
            skipped,
            dropped_self,
            warnings,
            countries,
            start,
            num_months,
        },
    ))
}

fn month_to_date(start: (i32, u32), offset: usize) -> EventDate {
    let ordinal = i64::from(start.0) * 12 + i64::from(start.1) - 1 + offset as i64;
    EventDate {
        year: ordinal.div_euclid(12) as i32,
        month: (ordinal.rem_euclid(12) + 1) as u32,
        day: 1,
    }
}

/// Samples a count tensor from the model and expands it to event records
/// (one per unit count, dated on the first day of the bin's month). The
/// stream round-trips through [`ingest_events`] back to the same tensor.
pub fn generate_event_stream<R: Rng>(
    params: &DptParams,
    countries: &[String],
    start: (i32, u32),
    rng: &mut R,
) -> Result<(Vec<EventRecord>, CountTensor)> {
    let dims = params.dims();
    if countries.len() != dims.num_countries {
        return Err(Error::DimensionMismatch(format!(
            "{} country codes for {} countries",
            countries.len(),
            dims.num_countries
        )));
    }
    let codebook = load_codebook();
    if dims.num_actions > codebook.len() {
        return Err(Error::InvalidArgument(format!(
            "action axis {} exceeds the codebook ({})",
            dims.num_actions,
            codebook.len()
        )));
    }
    let tensor = dpt_generate(params, rng);
    let mut records = Vec::with_capacity(tensor.total_count() as usize);
    for (idx, count) in tensor.iter() {
        let [i, j, a, t] = *idx;
        let date = month_to_date(start, t);
        for _ in 0..*count {
            records.push(EventRecord {
                date,
                source: countries[i].clone(),
                target: countries[j].clone(),
                action: codebook.entry(a).name.to_string(),
            });
        }
    }
    Ok((records, tensor))
}

/// Country codes of the bundled two-country-conflict preset.
pub fn preset_country_codes() -> Vec<String> {
    [
        "ARM", "AZE", "USA", "RUS", "TUR", "IRN", "GEO", "FRA", "DEU", "GBR", "CHN", "IND",
        "BRA", "CAN", "JPN", "KOR", "MEX", "NGA", "EGY", "SWE",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// A hand-built parameter set mimicking a single escalating dyad: one
/// community dominated by the first two countries, whose interactions move
/// toward the conflictual end of the action axis late in the time range.
pub fn conflict_dyad_preset() -> DptParams {
    let countries = preset_country_codes();
    let v = countries.len();
    let (c_n, k_n, a_n, t_n) = (5usize, 3usize, 20usize, 24usize);

    let mut psi = vec![0.0; c_n * v];
    for (i, value) in psi.iter_mut().enumerate().take(v) {
        // Community 0: the conflict dyad.
        *value = if i < 2 { 3.0 } else { 0.02 };
    }
    for c in 1..c_n {
        for i in 0..v {
            // Low-level background activity spread over the rest.
            psi[c * v + i] = if i < 2 { 0.05 } else { 0.25 };
        }
    }

    let emission = diagonal_bump_emission(k_n, a_n, 2.5);
    let transition = StochasticMatrix::from_rows(&[
        vec![0.8, 0.2, 0.0],
        vec![0.1, 0.8, 0.1],
        vec![0.0, 0.2, 0.8],
    ])
    .expect("valid transition");

    let mut core = vec![0.0; t_n * c_n * c_n * k_n];
    let core_idx = |t: usize, c1: usize, c2: usize, k: usize| {
        ((t * c_n + c1) * c_n + c2) * k_n + k
    };
    for t in 0..t_n {
        let progress = t as f64 / (t_n - 1) as f64;
        for c1 in 0..c_n {
            for c2 in 0..c_n {
                for k in 0..k_n {
                    core[core_idx(t, c1, c2, k)] = 0.02;
                }
            }
        }
        // Escalation of the dyad community's self-interaction.
        core[core_idx(t, 0, 0, 0)] = 1.5 * (1.0 - progress) + 0.1;
        core[core_idx(t, 0, 0, 1)] = 0.4 + 1.2 * (0.5 - (progress - 0.5).abs());
        core[core_idx(t, 0, 0, 2)] = 0.1 + 2.0 * progress;
    }

    DptParams {
        psi,
        psi_recv: None,
        core,
        emission,
        transition,
        delta_a: vec![1.0; a_n],
        delta_t: vec![1.0; t_n],
        tau0: 1.0,
        alpha0: 1.0,
        num_countries: v,
        num_communities: c_n,
    }
}
