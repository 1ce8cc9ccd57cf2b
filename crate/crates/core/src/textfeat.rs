//! Text view: tokenization and hashed unigram/bigram features.

use serde::{Deserialize, Serialize};

/// Number of hash buckets (2^20).
pub const HASH_DIM: usize = 1 << 20;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Lowercases, turns every non-alphanumeric character into a space and
/// collapses runs of whitespace.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Maximal alphanumeric runs of the lowercased text.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// 64-bit FNV-1a over the UTF-8 bytes. Fixed constants, so bucket
/// assignments are identical on every run and platform.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds from unordered `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVector { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn bucket(feature: &str) -> u32 {
    (fnv1a64(feature.as_bytes()) % HASH_DIM as u64) as u32
}

/// Hashed bag of unigrams and bigrams, L2-normalized.
///
/// A unigram hashes its token; a bigram hashes `"first second"`. Tokens never
/// contain spaces, so the two feature families cannot produce the same string.
pub fn featurize<S: AsRef<str>>(tokens: &[S]) -> SparseVector {
    let mut pairs = Vec::with_capacity(tokens.len() * 2);
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        pairs.push((bucket(tok), 1.0));
        if let Some(next) = tokens.get(i + 1) {
            pairs.push((bucket(&format!("{tok} {}", next.as_ref())), 1.0));
        }
    }
    let mut v = SparseVector::from_pairs(pairs);
    let norm = v.norm();
    if norm > 0.0 {
        v.values.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// `featurize(tokenize(text))`.
pub fn featurize_text(text: &str) -> SparseVector {
    featurize(&tokenize(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("RNA-seq of liver."), ["rna", "seq", "of", "liver"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("AML  AML"), ["aml", "aml"]);
        assert_eq!(normalize("  Bone-marrow,  SAMPLE "), "bone marrow sample");
    }

    #[test]
    fn fnv_reference_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn featurize_examples() {
        assert!(featurize::<&str>(&[]).is_empty());

        let one = featurize(&["liver"]);
        assert_eq!(one.nnz(), 1);
        assert_eq!(one.values(), [1.0]);

        let two = featurize(&["a", "b"]);
        assert_eq!(two.nnz(), 3);
        let expected = 1.0 / 3f64.sqrt();
        for &v in two.values() {
            assert!((v - expected).abs() < 1e-15);
        }
        assert!(two.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(two.indices().iter().all(|&i| (i as usize) < HASH_DIM));
    }

    #[test]
    fn featurize_repeated_token_counts() {
        // "aml aml": unigram count 2 and bigram "aml aml" count 1.
        let v = featurize(&["aml", "aml"]);
        let mut vals = v.values().to_vec();
        vals.sort_by(f64::total_cmp);
        let n = 5f64.sqrt();
        assert!((vals[0] - 1.0 / n).abs() < 1e-15);
        assert!((vals[1] - 2.0 / n).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn unit_norm(tokens in prop::collection::vec("[a-z]{1,6}", 1..12)) {
            let v = featurize(&tokens);
            prop_assert!((v.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn permutation_keeps_unigram_mass(tokens in prop::collection::vec("[a-z]{1,4}", 1..10), rot in 0usize..10) {
            let mut perm = tokens.clone();
            let k = rot % perm.len();
            perm.rotate_left(k);
            // Unnormalized unigram histogram is invariant under reordering.
            let uni = |ts: &[String]| {
                let mut v: Vec<u32> = ts.iter().map(|t| bucket(t)).collect();
                v.sort_unstable();
                v
            };
            prop_assert_eq!(uni(&tokens), uni(&perm));
            // Total raw count is identical too (n unigrams + n-1 bigrams),
            // so any difference is confined to bigram buckets.
            let raw = |ts: &[String]| -> f64 {
                let f = featurize(ts);
                let norm_sq: f64 = {
                    let mut counts = std::collections::BTreeMap::<u32, f64>::new();
                    for t in ts { *counts.entry(bucket(t)).or_default() += 1.0; }
                    for w in ts.windows(2) { *counts.entry(bucket(&format!("{} {}", w[0], w[1]))).or_default() += 1.0; }
                    counts.values().map(|c| c * c).sum()
                };
                f.values().iter().sum::<f64>() * norm_sq.sqrt()
            };
            prop_assert!((raw(&tokens) - raw(&perm)).abs() < 1e-9);
        }

        #[test]
        fn deterministic(text in ".{0,40}") {
            prop_assert_eq!(featurize_text(&text), featurize_text(&text));
        }
    }
}
