use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DocumentRecord;

use super::InferenceBackend;

/// Client for the two-route JSON protocol (`/embed`, `/logscores`).
pub struct RemoteBackend {
    base_url: String,
    model_name: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireDoc<'a> {
    doc_id: &'a str,
    text: String,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: Vec<WireDoc<'a>>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

#[derive(Serialize)]
struct LogscoreRequest<'a> {
    model: &'a str,
    dim_id: &'a str,
    low_label: &'a str,
    high_label: &'a str,
    inputs: Vec<WireDoc<'a>>,
}

#[derive(Deserialize)]
struct LogscoreResponse {
    scores: Vec<[f64; 2]>,
}

fn wire_docs(docs: &[DocumentRecord]) -> Vec<WireDoc<'_>> {
    docs.iter()
        .map(|d| WireDoc {
            doc_id: &d.doc_id,
            text: d.embedding_text(),
        })
        .collect()
}

impl RemoteBackend {
    pub fn new(base_url: String, model_name: String, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            model_name,
            agent,
        }
    }

    fn post<Req: Serialize, Resp: serde::de::DeserializeOwned>(&self, route: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}/{route}", self.base_url);
        let resp = self.agent.post(&url).send_json(body).map_err(|e| match e {
            // 5xx and 429 are worth retrying, other statuses are not
            ureq::Error::Status(code, _) if code >= 500 || code == 429 => Error::Transport {
                message: format!("{url}: HTTP {code}"),
                failed_doc_ids: vec![],
            },
            ureq::Error::Status(code, r) => {
                Error::Protocol(format!("{url}: HTTP {code}: {}", r.into_string().unwrap_or_default()))
            }
            ureq::Error::Transport(t) => Error::Transport {
                message: format!("{url}: {t}"),
                failed_doc_ids: vec![],
            },
        })?;
        resp.into_json::<Resp>()
            .map_err(|e| Error::Protocol(format!("{url}: malformed response: {e}")))
    }
}

impl InferenceBackend for RemoteBackend {
    fn embed(&self, docs: &[DocumentRecord]) -> Result<Vec<Vec<f32>>> {
        let resp: EmbedResponse = self.post(
            "embed",
            &EmbedRequest {
                model: &self.model_name,
                inputs: wire_docs(docs),
            },
        )?;
        Ok(resp.embeddings)
    }

    fn logscores(
        &self,
        docs: &[DocumentRecord],
        dim_id: &str,
        low_label: &str,
        high_label: &str,
    ) -> Result<Vec<(f64, f64)>> {
        let resp: LogscoreResponse = self.post(
            "logscores",
            &LogscoreRequest {
                model: &self.model_name,
                dim_id,
                low_label,
                high_label,
                inputs: wire_docs(docs),
            },
        )?;
        Ok(resp.scores.into_iter().map(|[lo, hi]| (lo, hi)).collect())
    }
}
