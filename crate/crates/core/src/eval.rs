//! Statistics over human accuracy and coverage labels.
//!
//! People supply the tallies (inaccurate statements per description, detail
//! points covered out of a reference total); this module only aggregates
//! them. Standard deviations use the population formula unless
//! [`SigmaConvention::Sample`] is requested. Inter-rater agreement is a
//! linear-weighted Cohen's kappa over count bins 0, 1, 2 and 3+.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summarize::{word_count, DescriptionSet};

/// Number of agreement bins: 0, 1, 2, and 3 or more.
pub const KAPPA_BINS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid tally: covered={covered} total={total}")]
    InvalidTally { covered: u32, total: u32 },
    #[error("no labels for {0}")]
    NoLabels(DescriptionType),
    #[error("rater vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label file line {line}: {reason}")]
    LabelSchema { line: usize, reason: String },
    #[error("cannot read labels: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptionType {
    Short,
    FiftyWord,
    Long,
    ShotByShot,
}

impl DescriptionType {
    pub const ALL: [DescriptionType; 4] = [
        DescriptionType::Short,
        DescriptionType::FiftyWord,
        DescriptionType::Long,
        DescriptionType::ShotByShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DescriptionType::Short => "short",
            DescriptionType::FiftyWord => "fifty_word",
            DescriptionType::Long => "long",
            DescriptionType::ShotByShot => "shot_by_shot",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            DescriptionType::Short => "Short Description",
            DescriptionType::FiftyWord => "50-Word Description",
            DescriptionType::Long => "Long Description",
            DescriptionType::ShotByShot => "Shot-by-Shot Description",
        }
    }
}

impl fmt::Display for DescriptionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DescriptionType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "short" => Ok(Self::Short),
            "fifty_word" | "50_word" | "fifty" => Ok(Self::FiftyWord),
            "long" => Ok(Self::Long),
            "shot_by_shot" | "shot" | "per_shot" => Ok(Self::ShotByShot),
            other => Err(format!("unknown description type {other:?}")),
        }
    }
}

/// Labels for one description type of one video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeLabels {
    pub error_count: Option<u32>,
    pub covered_points: Option<u32>,
    pub total_points: Option<u32>,
    pub words: Option<u32>,
    pub second_rater_errors: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoLabels {
    pub video_id: String,
    pub by_type: BTreeMap<DescriptionType, TypeLabels>,
}

impl VideoLabels {
    pub fn get(&self, dtype: DescriptionType) -> Option<&TypeLabels> {
        self.by_type.get(&dtype)
    }
}

/// One row of a labels file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub video_id: String,
    pub dtype: String,
    #[serde(default = "first_rater")]
    pub rater: u8,
    #[serde(default)]
    pub errors: Option<u32>,
    #[serde(default)]
    pub covered: Option<u32>,
    #[serde(default)]
    pub total: Option<u32>,
    #[serde(default)]
    pub words: Option<u32>,
}

fn first_rater() -> u8 {
    1
}

pub fn parse_labels_csv(text: &str) -> Result<Vec<LabelRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<LabelRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = rec.map_err(|e| EvalError::LabelSchema {
            line,
            reason: e.to_string(),
        })?;
        rows.push((line, row));
    }
    check_rows(rows)
}

pub fn parse_labels_json(text: &str) -> Result<Vec<LabelRow>> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| EvalError::LabelSchema {
            line: e.line(),
            reason: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for (i, v) in values.into_iter().enumerate() {
        let row: LabelRow = serde_json::from_value(v).map_err(|e| EvalError::LabelSchema {
            line: i + 1,
            reason: format!("entry {}: {e}", i + 1),
        })?;
        rows.push((i + 1, row));
    }
    check_rows(rows)
}

fn check_rows(rows: Vec<(usize, LabelRow)>) -> Result<Vec<LabelRow>> {
    rows.into_iter()
        .map(|(line, row)| {
            let fail = |reason: String| EvalError::LabelSchema { line, reason };
            if row.video_id.trim().is_empty() {
                return Err(fail("empty video_id".into()));
            }
            DescriptionType::from_str(&row.dtype).map_err(fail)?;
            if !(1..=2).contains(&row.rater) {
                return Err(fail(format!("rater must be 1 or 2, got {}", row.rater)));
            }
            match (row.covered, row.total) {
                (Some(c), Some(t)) if t == 0 || c > t => {
                    return Err(fail(format!(
                        "covered {c} / total {t} is not a valid tally"
                    )))
                }
                (Some(_), None) | (None, Some(_)) => {
                    return Err(fail("covered and total must be given together".into()))
                }
                _ => {}
            }
            Ok(row)
        })
        .collect()
}

/// Reads a CSV or JSON labels file (by extension; CSV otherwise).
pub fn load_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        parse_labels_json(&text)
    } else {
        parse_labels_csv(&text)
    }
}

/// Folds rows into per-video labels, first-seen video order.
pub fn group_labels(rows: &[LabelRow]) -> Result<Vec<VideoLabels>> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, VideoLabels> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let dtype =
            DescriptionType::from_str(&row.dtype).map_err(|reason| EvalError::LabelSchema {
                line: i + 1,
                reason,
            })?;
        let video = map.entry(row.video_id.clone()).or_insert_with(|| {
            order.push(row.video_id.clone());
            VideoLabels {
                video_id: row.video_id.clone(),
                by_type: BTreeMap::new(),
            }
        });
        let slot = video.by_type.entry(dtype).or_default();
        let dup = |what: &str| EvalError::LabelSchema {
            line: i + 1,
            reason: format!("duplicate {what} for {} / {dtype}", row.video_id),
        };
        if row.rater == 2 {
            if let Some(e) = row.errors {
                if slot.second_rater_errors.replace(e).is_some() {
                    return Err(dup("second-rater errors"));
                }
            }
            continue;
        }
        if let Some(e) = row.errors {
            if slot.error_count.replace(e).is_some() {
                return Err(dup("errors"));
            }
        }
        if let (Some(c), Some(t)) = (row.covered, row.total) {
            if slot.total_points.replace(t).is_some() {
                return Err(dup("coverage"));
            }
            slot.covered_points = Some(c);
        }
        if let Some(w) = row.words {
            if slot.words.replace(w).is_some() {
                return Err(dup("words"));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| map.remove(&id).expect("grouped"))
        .collect())
}

pub fn coverage_percent(covered: u32, total: u32) -> Result<f64> {
    if total == 0 || covered > total {
        return Err(EvalError::InvalidTally { covered, total });
    }
    Ok(100.0 * f64::from(covered) / f64::from(total))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    #[default]
    Population,
    Sample,
}

impl FromStr for SigmaConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "population" => Ok(Self::Population),
            "sample" => Ok(Self::Sample),
            _ => Err(format!("expected population or sample, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSigma {
    pub n: usize,
    pub mean: f64,
    pub sigma: f64,
}

pub fn mean_sigma(values: &[f64], convention: SigmaConvention) -> MeanSigma {
    let n = values.len();
    if n == 0 {
        return MeanSigma::default();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = match convention {
        SigmaConvention::Population => n as f64,
        SigmaConvention::Sample if n > 1 => (n - 1) as f64,
        SigmaConvention::Sample => {
            return MeanSigma {
                n,
                mean,
                sigma: 0.0,
            }
        }
    };
    MeanSigma {
        n,
        mean,
        sigma: (ss / denom).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: f64,
    pub sigma: f64,
    pub total: u64,
    /// Share of videos with no inaccurate statements.
    pub zero_fraction: f64,
}

fn error_counts(labels: &[VideoLabels], dtype: DescriptionType) -> Vec<u32> {
    labels
        .iter()
        .filter_map(|v| v.get(dtype)?.error_count)
        .collect()
}

/// Mean, population sigma, total and zero-error share of error counts.
pub fn error_stats(labels: &[VideoLabels], dtype: DescriptionType) -> Result<ErrorStats> {
    error_stats_with(labels, dtype, SigmaConvention::Population)
}

pub fn error_stats_with(
    labels: &[VideoLabels],
    dtype: DescriptionType,
    convention: SigmaConvention,
) -> Result<ErrorStats> {
    let counts = error_counts(labels, dtype);
    if counts.is_empty() {
        return Err(EvalError::NoLabels(dtype));
    }
    let values: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
    let ms = mean_sigma(&values, convention);
    Ok(ErrorStats {
        n: ms.n,
        mean: ms.mean,
        sigma: ms.sigma,
        total: counts.iter().map(|&c| u64::from(c)).sum(),
        zero_fraction: counts.iter().filter(|&&c| c == 0).count() as f64 / counts.len() as f64,
    })
}

pub fn coverage_stats(
    labels: &[VideoLabels],
    dtype: DescriptionType,
    convention: SigmaConvention,
) -> Result<MeanSigma> {
    let mut values = Vec::new();
    for v in labels {
        if let Some(TypeLabels {
            covered_points: Some(c),
            total_points: Some(t),
            ..
        }) = v.get(dtype)
        {
            values.push(coverage_percent(*c, *t)?);
        }
    }
    if values.is_empty() {
        return Err(EvalError::NoLabels(dtype));
    }
    Ok(mean_sigma(&values, convention))
}

/// Words of one description level. The long level counts the text before
/// 50-word condensation; the 50-word level falls back to the long text
/// when no condensation was needed.
pub fn description_words(set: &DescriptionSet, dtype: DescriptionType) -> usize {
    match dtype {
        DescriptionType::Short => word_count(&set.short),
        DescriptionType::FiftyWord => word_count(set.fifty_word.as_deref().unwrap_or(&set.long)),
        DescriptionType::Long => set.generation_meta.raw_long_word_count,
        DescriptionType::ShotByShot => set.shot_by_shot.iter().map(|s| word_count(&s.text)).sum(),
    }
}

pub fn word_stats(sets: &[DescriptionSet], dtype: DescriptionType) -> Result<MeanSigma> {
    if sets.is_empty() {
        return Err(EvalError::NoLabels(dtype));
    }
    let values: Vec<f64> = sets
        .iter()
        .map(|s| description_words(s, dtype) as f64)
        .collect();
    Ok(mean_sigma(&values, SigmaConvention::Population))
}

fn bin(count: u32) -> usize {
    (count as usize).min(KAPPA_BINS - 1)
}

/// Linear-weighted Cohen's kappa between two raters' error counts.
pub fn weighted_agreement(r1: &[u32], r2: &[u32]) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(EvalError::LengthMismatch(r1.len(), r2.len()));
    }
    if r1.is_empty() {
        return Err(EvalError::LengthMismatch(0, 0));
    }
    let n = r1.len() as f64;
    let mut observed = [[0.0f64; KAPPA_BINS]; KAPPA_BINS];
    for (&a, &b) in r1.iter().zip(r2) {
        observed[bin(a)][bin(b)] += 1.0 / n;
    }
    let rows: Vec<f64> = (0..KAPPA_BINS).map(|i| observed[i].iter().sum()).collect();
    let cols: Vec<f64> = (0..KAPPA_BINS)
        .map(|j| (0..KAPPA_BINS).map(|i| observed[i][j]).sum())
        .collect();
    let weight = |i: usize, j: usize| i.abs_diff(j) as f64 / (KAPPA_BINS - 1) as f64;
    let mut disagree_obs = 0.0;
    let mut disagree_exp = 0.0;
    for i in 0..KAPPA_BINS {
        for j in 0..KAPPA_BINS {
            disagree_obs += weight(i, j) * observed[i][j];
            disagree_exp += weight(i, j) * rows[i] * cols[j];
        }
    }
    if disagree_exp == 0.0 {
        // both raters used a single bin; agreement is perfect iff no disagreement
        return Ok(if disagree_obs == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - disagree_obs / disagree_exp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    pub dtype: DescriptionType,
    pub errors: ErrorStats,
    pub coverage: MeanSigma,
    pub words: MeanSigma,
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sigma_convention: SigmaConvention,
    pub kappa_method: String,
    pub videos: usize,
    pub rows: Vec<TypeReport>,
}

/// Aggregates every description type; types without labels report zeros.
pub fn build_report(labels: &[VideoLabels], convention: SigmaConvention) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for dtype in DescriptionType::ALL {
        let errors = match error_stats_with(labels, dtype, convention) {
            Ok(s) => s,
            Err(EvalError::NoLabels(_)) => ErrorStats::default(),
            Err(e) => return Err(e),
        };
        let coverage = match coverage_stats(labels, dtype, convention) {
            Ok(s) => s,
            Err(EvalError::NoLabels(_)) => MeanSigma::default(),
            Err(e) => return Err(e),
        };
        let words: Vec<f64> = labels
            .iter()
            .filter_map(|v| v.get(dtype)?.words)
            .map(f64::from)
            .collect();
        let (first, second): (Vec<u32>, Vec<u32>) = labels
            .iter()
            .filter_map(|v| {
                let t = v.get(dtype)?;
                Some((t.error_count?, t.second_rater_errors?))
            })
            .unzip();
        let agreement = if first.is_empty() {
            None
        } else {
            Some(weighted_agreement(&first, &second)?)
        };
        rows.push(TypeReport {
            dtype,
            errors,
            coverage,
            words: mean_sigma(&words, convention),
            agreement,
        });
    }
    Ok(EvalReport {
        sigma_convention: convention,
        kappa_method: "linear weights; bins 0, 1, 2, 3+".into(),
        videos: labels.len(),
        rows,
    })
}

impl EvalReport {
    pub fn row(&self, dtype: DescriptionType) -> &TypeReport {
        self.rows
            .iter()
            .find(|r| r.dtype == dtype)
            .expect("every type reported")
    }

    /// Plain-text table: hallucinations (mu, sigma, #), coverage (mu, sigma),
    /// words (mu, sigma), and kappa where a second rater exists.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let sigma = match self.sigma_convention {
            SigmaConvention::Population => "population",
            SigmaConvention::Sample => "sample (n-1)",
        };
        let _ = writeln!(
            out,
            "# videos: {}; sigma: {sigma}; kappa: {}",
            self.videos, self.kappa_method
        );
        let _ = writeln!(
            out,
            "{:<26} {:>6} {:>6} {:>5} | {:>6} {:>6} | {:>6} {:>6} | {:>6}",
            "", "Hal.μ", "Hal.σ", "#", "Cov.μ", "Cov.σ", "Wrd.μ", "Wrd.σ", "κ"
        );
        for r in &self.rows {
            let kappa = r
                .agreement
                .map(|k| format!("{k:.2}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<26} {:>6.2} {:>6.2} {:>5} | {:>5.0}% {:>5.0}% | {:>6.0} {:>6.0} | {:>6}",
                r.dtype.title(),
                r.errors.mean,
                r.errors.sigma,
                r.errors.total,
                r.coverage.mean,
                r.coverage.sigma,
                r.words.mean,
                r.words.sigma,
                kappa
            );
        }
        out
    }
}
