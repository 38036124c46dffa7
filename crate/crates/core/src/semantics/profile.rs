//! Corpus-level aggregation of dictionary scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DocumentRecord, FilterVerdict, PositionalDictionary, ScoreVector};

/// Upper edges of the four fixed bands; each band is closed on the right.
pub const BAND_UPPER_EDGES: [f64; 4] = [0.25, 0.50, 0.75, 1.0];

/// Band of a score in `[0, 1]`: `[0,.25]`, `(.25,.5]`, `(.5,.75]`, `(.75,1]`.
pub fn band_of(score: f64) -> usize {
    BAND_UPPER_EDGES
        .iter()
        .position(|&edge| score <= edge)
        .unwrap_or(3)
}

pub const DEFAULT_Z_CUT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub continuous_median: f64,
    pub sample_std: f64,
    /// Fraction of values with `|z| > z_cut`.
    pub outlier_fraction: f64,
}

/// Mean, interpolated median, sample std and z-score outlier share.
pub fn describe(values: &[f64], z_cut: f64) -> Result<DescriptiveStats> {
    if values.is_empty() {
        return Err(Error::Data("cannot describe an empty sample".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let continuous_median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let sample_std = if n > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let outliers = if sample_std > 0.0 {
        values
            .iter()
            .filter(|&&x| ((x - mean) / sample_std).abs() > z_cut)
            .count()
    } else {
        0
    };
    Ok(DescriptiveStats {
        n,
        mean,
        continuous_median,
        sample_std,
        outlier_fraction: outliers as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfilePopulation {
    All,
    RetainedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfile {
    pub dict_id: String,
    pub population: ProfilePopulation,
    pub n_docs: usize,
    pub band_counts: BTreeMap<String, [usize; 4]>,
    pub band_fractions: BTreeMap<String, [f64; 4]>,
    pub stats: BTreeMap<String, DescriptiveStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centrality: Option<DescriptiveStats>,
}

/// Selects the documents for a population. `verdicts` is required for
/// [`ProfilePopulation::RetainedOnly`].
pub fn select_population<'a>(
    scores: &'a [ScoreVector],
    population: ProfilePopulation,
    verdicts: Option<&[FilterVerdict]>,
) -> Result<Vec<&'a ScoreVector>> {
    match population {
        ProfilePopulation::All => Ok(scores.iter().collect()),
        ProfilePopulation::RetainedOnly => {
            let v = verdicts.ok_or_else(|| Error::Parameter("retained-only profile needs verdicts".into()))?;
            let kept: HashMap<&str, bool> = v.iter().map(|v| (v.doc_id(), v.retained())).collect();
            scores
                .iter()
                .filter_map(|s| match kept.get(s.doc_id()) {
                    Some(true) => Some(Ok(s)),
                    Some(false) => None,
                    None => Some(Err(Error::Data(format!("no verdict for {}", s.doc_id())))),
                })
                .collect()
        }
    }
}

pub fn band_profile(
    scores: &[&ScoreVector],
    dict: &PositionalDictionary,
    population: ProfilePopulation,
    z_cut: f64,
) -> Result<CorpusProfile> {
    if scores.is_empty() {
        return Err(Error::Data("cannot profile an empty score set".into()));
    }
    let n = scores.len();
    let mut band_counts = BTreeMap::new();
    let mut band_fractions = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for dim in &dict.dimensions {
        let values = scores
            .iter()
            .map(|s| {
                s.score(&dim.dim_id)
                    .ok_or_else(|| Error::Data(format!("{} has no {} score", s.doc_id(), dim.dim_id)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut counts = [0usize; 4];
        for &v in &values {
            counts[band_of(v)] += 1;
        }
        band_fractions.insert(dim.dim_id.clone(), counts.map(|c| c as f64 / n as f64));
        band_counts.insert(dim.dim_id.clone(), counts);
        stats.insert(dim.dim_id.clone(), describe(&values, z_cut)?);
    }
    let centralities: Vec<f64> = scores.iter().filter_map(|s| s.centrality()).collect();
    let centrality = if centralities.is_empty() {
        None
    } else {
        Some(describe(&centralities, z_cut)?)
    };
    Ok(CorpusProfile {
        dict_id: dict.dict_id.clone(),
        population,
        n_docs: n,
        band_counts,
        band_fractions,
        stats,
        centrality,
    })
}

/// Markdown table: one row of band names and one of percentages per
/// dimension, the dominant band in bold.
pub fn render_profile_markdown(profile: &CorpusProfile, dict: &PositionalDictionary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| Dimension | 0.00 – 0.25 (Q1) | 0.26 – 0.50 (Q2) | 0.51 – 0.75 (Q3) | 0.76 – 1.00 (Q4) |"
    );
    let _ = writeln!(out, "|---|:-:|:-:|:-:|:-:|");
    for dim in &dict.dimensions {
        let Some(fr) = profile.band_fractions.get(&dim.dim_id) else {
            continue;
        };
        let _ = writeln!(out, "| **{}** | {} |", dim.name, dim.band_names.join(" | "));
        let top = (0..4).fold(0, |best, i| if fr[i] > fr[best] { i } else { best });
        let cells: Vec<String> = fr
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let pct = format!("{:.0}%", f * 100.0);
                if i == top {
                    format!("**{pct}**")
                } else {
                    pct
                }
            })
            .collect();
        let _ = writeln!(out, "| | {} |", cells.join(" | "));
    }
    let _ = writeln!(out, "\n_{} documents ({:?})._", profile.n_docs, profile.population);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramPopulation {
    All,
    /// Passed the global and local filters.
    OutliersRemoved,
    /// Retained in the final map.
    NoiseRemoved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityHistogram {
    pub bin_width: f64,
    /// Lower edge of each bin; bin `k` covers `[k*w, (k+1)*w)`, the last bin also holds 1.0.
    pub lower_edges: Vec<f64>,
    pub frequencies: BTreeMap<HistogramPopulation, Vec<f64>>,
    pub counts: BTreeMap<HistogramPopulation, usize>,
}

// Absorbs representation error so a score of 0.7 lands in [0.70, 0.75) with w = 0.05.
const BIN_SNAP: f64 = 1e-9;

fn bin_index(score: f64, width: f64, bins: usize) -> usize {
    (((score / width) + BIN_SNAP).floor() as usize).min(bins - 1)
}

/// Relative-frequency histograms of centrality per requested population.
pub fn centrality_histogram(
    scores: &[ScoreVector],
    verdicts: Option<&[FilterVerdict]>,
    bin_width: f64,
    populations: &[HistogramPopulation],
) -> Result<CentralityHistogram> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::Parameter(format!("bin width {bin_width} must lie in (0, 1]")));
    }
    let bins = ((1.0 / bin_width) - BIN_SNAP).ceil().max(1.0) as usize;
    let by_id: HashMap<&str, &FilterVerdict> = verdicts
        .unwrap_or_default()
        .iter()
        .map(|v| (v.doc_id(), v))
        .collect();
    let mut frequencies = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for &pop in populations {
        let mut hist = vec![0usize; bins];
        let mut total = 0;
        for s in scores {
            let c = s
                .centrality()
                .ok_or_else(|| Error::Data(format!("{} has no centrality score", s.doc_id())))?;
            let keep = match pop {
                HistogramPopulation::All => true,
                other => {
                    let v = by_id.get(s.doc_id()).ok_or_else(|| {
                        Error::Parameter(format!("population {other:?} needs a verdict for {}", s.doc_id()))
                    })?;
                    match other {
                        HistogramPopulation::OutliersRemoved => v.g_pass() && v.l_pass(),
                        _ => v.retained(),
                    }
                }
            };
            if keep {
                hist[bin_index(c, bin_width, bins)] += 1;
                total += 1;
            }
        }
        let freq = hist
            .iter()
            .map(|&h| if total > 0 { h as f64 / total as f64 } else { 0.0 })
            .collect();
        frequencies.insert(pop, freq);
        counts.insert(pop, total);
    }
    Ok(CentralityHistogram {
        bin_width,
        lower_edges: (0..bins).map(|k| k as f64 * bin_width).collect(),
        frequencies,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub char_count: DescriptiveStats,
    pub mention_count: DescriptiveStats,
    pub per_doc: Vec<(String, usize, usize)>,
}

/// Character counts (title plus description) and case-insensitive,
/// non-overlapping mention counts of `patterns`.
pub fn describe_text_stats(docs: &[DocumentRecord], patterns: &[&str]) -> Result<TextStats> {
    if patterns.is_empty() || patterns.iter().any(|p| p.is_empty()) {
        return Err(Error::Parameter("mention patterns must be nonempty".into()));
    }
    let lowered: Vec<String> = patterns.iter().map(|p| p.to_lowercase()).collect();
    let per_doc: Vec<(String, usize, usize)> = docs
        .iter()
        .map(|d| {
            let chars = d.title.chars().count() + d.description.chars().count();
            let text = format!("{}\n{}", d.title, d.description).to_lowercase();
            let mentions = lowered.iter().map(|p| text.matches(p.as_str()).count()).sum();
            (d.doc_id.clone(), chars, mentions)
        })
        .collect();
    let chars: Vec<f64> = per_doc.iter().map(|r| r.1 as f64).collect();
    let mentions: Vec<f64> = per_doc.iter().map(|r| r.2 as f64).collect();
    Ok(TextStats {
        char_count: describe(&chars, DEFAULT_Z_CUT)?,
        mention_count: describe(&mentions, DEFAULT_Z_CUT)?,
        per_doc,
    })
}
