use std::collections::HashMap;

use crate::error::Result;
use crate::model::DocumentRecord;

use super::InferenceBackend;

/// Offline backend whose outputs are pure functions of the inputs and a seed.
///
/// Embeddings are feature-hashed bag-of-tokens vectors normalised to unit
/// length, so documents sharing vocabulary land close together. Log-scores
/// for a pole depend only on `(seed, doc_id, dim_id, label)` and fall in
/// `[-5, 0]`; swapping a dimension's labels swaps the two values exactly.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    dim: usize,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

impl MockBackend {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    fn key(&self, parts: &[&str]) -> u64 {
        let mut h = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        for p in parts {
            h = fnv1a(h, p.as_bytes());
            // field separator so ("ab","c") and ("a","bc") differ
            h = fnv1a(h, &[0xff]);
        }
        splitmix64(h)
    }

    fn token_vector(&self, token: &str) -> Vec<f32> {
        let base = self.key(&["tok", token]);
        (0..self.dim as u64)
            .map(|j| (2.0 * unit(splitmix64(base ^ j.wrapping_mul(0x9e37_79b9_7f4a_7c15))) - 1.0) as f32)
            .collect()
    }

    pub fn embed_text(&self, text: &str, memo: &mut HashMap<String, Vec<f32>>) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        for raw in text.split_whitespace() {
            let token = raw.to_lowercase();
            let v = memo
                .entry(token)
                .or_insert_with_key(|t| self.token_vector(t));
            for (a, &x) in acc.iter_mut().zip(v.iter()) {
                *a += f64::from(x);
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            return e;
        }
        acc.iter().map(|x| (x / norm) as f32).collect()
    }

    pub fn pole_logscore(&self, doc_id: &str, dim_id: &str, label: &str) -> f64 {
        -5.0 * unit(self.key(&["pole", doc_id, dim_id, label]))
    }
}

impl InferenceBackend for MockBackend {
    fn embed(&self, docs: &[DocumentRecord]) -> Result<Vec<Vec<f32>>> {
        let mut memo = HashMap::new();
        Ok(docs
            .iter()
            .map(|d| self.embed_text(&d.embedding_text(), &mut memo))
            .collect())
    }

    fn logscores(
        &self,
        docs: &[DocumentRecord],
        dim_id: &str,
        low_label: &str,
        high_label: &str,
    ) -> Result<Vec<(f64, f64)>> {
        Ok(docs
            .iter()
            .map(|d| {
                (
                    self.pole_logscore(&d.doc_id, dim_id, low_label),
                    self.pole_logscore(&d.doc_id, dim_id, high_label),
                )
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str) -> DocumentRecord {
        DocumentRecord::new(id, "Governo discute inteligência artificial", "texto longo")
    }

    #[test]
    fn embeddings_are_deterministic_unit_vectors() {
        let m = MockBackend::new(42, 8);
        let a = m.embed(&[doc("a1")]).unwrap();
        let b = MockBackend::new(42, 8).embed(&[doc("a1")]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 8);
        let norm: f64 = a[0].iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        // Frozen from the first run; guards cross-process and cross-platform stability.
        let bits: Vec<u32> = a[0].iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits, FROZEN_A1_SEED42);
        assert_ne!(a, MockBackend::new(43, 8).embed(&[doc("a1")]).unwrap());
    }

    const FROZEN_A1_SEED42: [u32; 8] = [
        1051593250, 3168051660, 1026300555, 1035519796, 3202244940, 1060347953, 3201929756, 3185790704,
    ];

    #[test]
    fn logscores_stable_and_in_range() {
        let m = MockBackend::new(7, 8);
        let p = m.logscores(&[doc("a1")], "risk", "Opportunity", "Danger").unwrap();
        let q = m.logscores(&[doc("a1")], "risk", "Opportunity", "Danger").unwrap();
        assert_eq!(p, q);
        let (lo, hi) = p[0];
        assert!((-5.0..=0.0).contains(&lo) && (-5.0..=0.0).contains(&hi));
    }

    #[test]
    fn swapped_labels_swap_values() {
        let m = MockBackend::new(7, 8);
        let p = m.logscores(&[doc("a1")], "risk", "Opportunity", "Danger").unwrap()[0];
        let q = m.logscores(&[doc("a1")], "risk", "Danger", "Opportunity").unwrap()[0];
        assert_eq!(p.0.to_bits(), q.1.to_bits());
        assert_eq!(p.1.to_bits(), q.0.to_bits());
    }

    #[test]
    fn shared_vocabulary_is_closer() {
        let m = MockBackend::new(1, 64);
        let mut memo = HashMap::new();
        let a = m.embed_text("modelo linguagem dados treino", &mut memo);
        let b = m.embed_text("modelo linguagem dados regulador", &mut memo);
        let c = m.embed_text("futebol estádio golo adepto", &mut memo);
        let dot = |x: &[f32], y: &[f32]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f32>();
        assert!(dot(&a, &b) > dot(&a, &c));
    }
}
