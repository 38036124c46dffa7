//! Seeded synthetic news corpus for demos and end-to-end tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::DocumentRecord;

pub const DEMO_CORPUS_SIZE: usize = 11_922;

const TOPICS: [&[&str]; 12] = [
    &["chatbot", "language", "model", "assistant", "prompt", "openai", "gemini", "launch", "users", "conversation", "generative", "text"],
    &["regulation", "senate", "bill", "law", "congress", "vote", "rapporteur", "framework", "rules", "committee", "approval", "legal"],
    &["chips", "nvidia", "semiconductor", "datacenter", "gpu", "supply", "factory", "export", "shares", "demand", "hardware", "capacity"],
    &["school", "students", "teachers", "classroom", "learning", "education", "university", "exam", "homework", "curriculum", "tutor", "campus"],
    &["hospital", "diagnosis", "patients", "health", "doctors", "cancer", "imaging", "clinical", "treatment", "medicine", "drug", "trial"],
    &["deepfake", "election", "misinformation", "campaign", "fraud", "video", "candidate", "fake", "voters", "platform", "court", "removal"],
    &["jobs", "workers", "automation", "employment", "salary", "unions", "productivity", "layoffs", "skills", "labour", "market", "hiring"],
    &["startup", "investment", "funding", "venture", "capital", "valuation", "round", "investors", "billion", "fintech", "unicorn", "growth"],
    &["agriculture", "farm", "harvest", "crops", "drones", "soil", "climate", "water", "weather", "rural", "yield", "cattle"],
    &["bank", "credit", "payments", "fraud", "customers", "pix", "financial", "loans", "risk", "insurance", "scoring", "accounts"],
    &["china", "united", "states", "geopolitics", "sanctions", "race", "europe", "summit", "sovereignty", "alliance", "treaty", "tensions"],
    &["art", "music", "artists", "copyright", "images", "creative", "authors", "cinema", "design", "voice", "songs", "festival"],
];

const COMMON: [&str; 16] = [
    "artificial", "intelligence", "technology", "new", "says", "company", "brazil", "year", "government",
    "tool", "data", "systems", "week", "report", "experts", "according",
];

fn zipf_topic(rng: &mut impl Rng) -> usize {
    // Weights 1/(t+1) give a few dominant themes and a long tail.
    let total: f64 = (1..=TOPICS.len()).map(|t| 1.0 / t as f64).sum();
    let mut u = rng.random::<f64>() * total;
    for t in 0..TOPICS.len() {
        u -= 1.0 / (t + 1) as f64;
        if u <= 0.0 {
            return t;
        }
    }
    TOPICS.len() - 1
}

fn sentence(rng: &mut impl Rng, len: usize, primary: usize, secondary: Option<usize>, noise: bool) -> String {
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let u: f64 = rng.random();
        let w = if noise && u < 0.8 {
            format!("w{:05}", rng.random_range(0..50_000))
        } else if u < 0.6 {
            (*TOPICS[primary].choose(rng).unwrap()).to_owned()
        } else if let (true, Some(s)) = (u < 0.75, secondary) {
            (*TOPICS[s].choose(rng).unwrap()).to_owned()
        } else {
            (*COMMON.choose(rng).unwrap()).to_owned()
        };
        words.push(w);
    }
    words.join(" ")
}

/// `n` documents with ids `demo-00000`, ... Topic mix, lengths and a small
/// share of off-vocabulary documents are all drawn from `seed`.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<DocumentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let primary = zipf_topic(&mut rng);
            let secondary = (rng.random::<f64>() < 0.3).then(|| zipf_topic(&mut rng));
            let noise = rng.random::<f64>() < 0.03;
            let title_len = rng.random_range(6..=10);
            let desc_len = rng.random_range(20..=40);
            let mut doc = DocumentRecord::new(
                format!("demo-{i:05}"),
                sentence(&mut rng, title_len, primary, secondary, noise),
                sentence(&mut rng, desc_len, primary, secondary, noise),
            );
            let month = 1 + (i * 12 / n.max(1)) as u32;
            doc.published_at = Some(format!("2024-{month:02}-{:02}", rng.random_range(1..=28)));
            doc.lang = Some("pt".into());
            doc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_corpus;

    #[test]
    fn seeded_and_valid() {
        let a = synthetic_corpus(500, 7);
        assert_eq!(a, synthetic_corpus(500, 7));
        assert_ne!(a, synthetic_corpus(500, 8));
        assert!(validate_corpus(&a).is_ok());
        assert!(a.iter().all(|d| !d.is_empty_text()));
    }
}
