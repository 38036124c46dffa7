use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gateway::{pole_logscores, BackendConfig, InferenceBackend, PoleLogScores, ScoreCache, CENTRALITY_DIM_ID};
use crate::io::{csv_bytes, write_atomic};
use crate::model::{DocumentRecord, PositionalDictionary, ScoreVector};

/// Two-way softmax of the pole log-scores: the weight of the high pole.
///
/// Computed after subtracting the larger log-score, so extreme gaps saturate
/// to exactly 0 or 1 instead of overflowing.
pub fn score_dimension(lambda_low: f64, lambda_high: f64) -> Result<f64> {
    if !(lambda_low.is_finite() && lambda_high.is_finite()) {
        return Err(Error::Data(format!(
            "log-scores ({lambda_low}, {lambda_high}) must be finite"
        )));
    }
    let m = lambda_low.max(lambda_high);
    let lo = (lambda_low - m).exp();
    let hi = (lambda_high - m).exp();
    Ok(hi / (lo + hi))
}

pub fn score_pair(logs: &PoleLogScores) -> Result<f64> {
    score_dimension(logs.lambda_low, logs.lambda_high)
}

/// Scores every document on every dictionary dimension (plus centrality when
/// the dictionary names a target), consulting and filling `cache`.
///
/// Work is committed to the cache chunk by chunk; on a backend error the
/// chunks already scored stay cached and the rest are discarded.
pub fn score_corpus(
    docs: &[DocumentRecord],
    dict: &PositionalDictionary,
    backend: &dyn InferenceBackend,
    cfg: &BackendConfig,
    cache: &mut ScoreCache,
) -> Result<Vec<ScoreVector>> {
    dict.validate()?;
    if dict.centrality_target.is_some() && dict.dimension(CENTRALITY_DIM_ID).is_some() {
        return Err(Error::Data(format!(
            "dimension id {CENTRALITY_DIM_ID:?} is reserved for the centrality probe"
        )));
    }
    let mut axes: Vec<(&str, &str, &str)> = dict
        .dimensions
        .iter()
        .map(|d| (d.dim_id.as_str(), d.low_pole.as_str(), d.high_pole.as_str()))
        .collect();
    if let Some(target) = &dict.centrality_target {
        axes.push((CENTRALITY_DIM_ID, dict.centrality_anchor.as_str(), target.as_str()));
    }
    let chunk = cfg.batch_size.max(1) * cfg.max_in_flight.max(1);
    for (dim_id, low, high) in axes {
        let pending: Vec<DocumentRecord> = docs
            .iter()
            .filter(|d| cache.get(&d.doc_id, &dict.dict_id, dim_id).is_none())
            .cloned()
            .collect();
        for part in pending.chunks(chunk) {
            let logs = pole_logscores(part, dim_id, low, high, backend, cfg)?;
            let scored = logs.iter().map(score_pair).collect::<Result<Vec<_>>>()?;
            for (doc, s) in part.iter().zip(scored) {
                cache.insert(&doc.doc_id, &dict.dict_id, dim_id, s);
            }
        }
    }
    docs.iter()
        .map(|d| {
            let mut scores = BTreeMap::new();
            for dim in &dict.dimensions {
                let s = cache
                    .get(&d.doc_id, &dict.dict_id, &dim.dim_id)
                    .ok_or_else(|| Error::Data(format!("score missing for {}", d.doc_id)))?;
                scores.insert(dim.dim_id.clone(), s);
            }
            let centrality = dict
                .centrality_target
                .as_ref()
                .and_then(|_| cache.get(&d.doc_id, &dict.dict_id, CENTRALITY_DIM_ID));
            ScoreVector::new(d.doc_id.clone(), scores, centrality)
        })
        .collect()
}

/// CSV `doc_id,<dim_id...>,centrality`; centrality cell empty when absent.
pub fn write_scores_csv(path: &Path, dict: &PositionalDictionary, scores: &[ScoreVector]) -> Result<()> {
    let mut header = vec!["doc_id".to_owned()];
    header.extend(dict.dim_ids().map(str::to_owned));
    header.push("centrality".to_owned());
    let bytes = csv_bytes(&header, |w| {
        for sv in scores {
            let mut rec = vec![sv.doc_id().to_owned()];
            for id in dict.dim_ids() {
                let s = sv
                    .score(id)
                    .ok_or_else(|| Error::Data(format!("{} lacks a {id} score", sv.doc_id())))?;
                rec.push(s.to_string());
            }
            rec.push(sv.centrality().map(|c| c.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreVector>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let n = header.len();
    if n < 2 || &header[0] != "doc_id" || &header[n - 1] != "centrality" {
        return Err(Error::Ingestion(format!(
            "{}: header must be doc_id,<dims...>,centrality",
            path.display()
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Ingestion(format!("{}: bad score {s:?}", path.display())))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut scores = BTreeMap::new();
        for i in 1..n - 1 {
            scores.insert(header[i].to_owned(), parse(&rec[i])?);
        }
        let centrality = match &rec[n - 1] {
            "" => None,
            c => Some(parse(c)?),
        };
        out.push(ScoreVector::new(&rec[0], scores, centrality)?);
    }
    Ok(out)
}
