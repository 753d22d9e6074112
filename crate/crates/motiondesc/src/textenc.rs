//! Frozen deterministic text encoder, object masking, and corpus statistics.
//!
//! The encoder stands in for a pretrained text tower: it maps a bag of
//! tokens to a unit vector, is bit-reproducible from its spec, and never
//! receives gradients. Token embeddings are hash-derived (FNV-1a into a
//! splitmix64 stream), averaged, pushed through a fixed seeded projection,
//! and L2-normalized.

use crate::numkit::{l2_normalize, Matrix};
use crate::stream::{fnv1a64, stream_at, to_signed_unit, GOLDEN_GAMMA};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("empty token")]
    EmptyToken,
    #[error("description has no tokens")]
    EmptyTokenList,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    BadDescriptionFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("normalize: {0}")]
    Num(#[from] crate::numkit::NumError),
}

/// Shape and seed of the frozen encoder. Two specs that compare equal
/// produce bit-identical embeddings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextEncoderSpec {
    /// Dimension of per-token embeddings.
    pub token_dim: usize,
    /// Dimension of the output description embedding.
    pub embed_dim: usize,
    /// Seed of the fixed token_dim x embed_dim projection.
    pub projection_seed: u64,
}

impl Default for TextEncoderSpec {
    fn default() -> Self {
        TextEncoderSpec {
            token_dim: 64,
            embed_dim: 16,
            projection_seed: 0x7E87,
        }
    }
}

/// The literal token substituted for object names.
pub const MASK_TOKEN: &str = "object";

/// One class's motion description: lowercase tokens plus the object-masked
/// variant (same length; differs only where an object token was replaced).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Description {
    pub class_id: u32,
    pub name: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub masked_tokens: Vec<String>,
}

impl Description {
    pub fn new(class_id: u32, name: impl Into<String>, tokens: Vec<String>) -> Self {
        let masked_tokens = tokens.clone();
        Description {
            class_id,
            name: name.into(),
            tokens,
            masked_tokens,
        }
    }
}

/// Deterministic embedding of a single token: FNV-1a of the token bytes
/// seeds a splitmix64 stream; component `j` is
/// `to_signed_unit(mix64(h0 + (j+1) * GOLDEN_GAMMA))`.
pub fn token_embed(token: &str, spec: &TextEncoderSpec) -> Result<Vec<f64>, TextError> {
    if token.is_empty() {
        return Err(TextError::EmptyToken);
    }
    let h0 = fnv1a64(token.as_bytes());
    Ok((0..spec.token_dim)
        .map(|j| to_signed_unit(stream_at(h0, j as u64)))
        .collect())
}

/// The fixed token_dim x embed_dim projection, entries drawn row-major from
/// the stream seeded by `projection_seed`.
pub fn projection_matrix(spec: &TextEncoderSpec) -> Matrix {
    let n = spec.token_dim * spec.embed_dim;
    let data: Vec<f64> = (0..n)
        .map(|i| to_signed_unit(stream_at(spec.projection_seed, i as u64)))
        .collect();
    Matrix::from_vec(spec.token_dim, spec.embed_dim, data).expect("shape is consistent")
}

/// Encode a bag of tokens to a unit vector of length `embed_dim`:
/// mean token embedding, projected, L2-normalized. Order-insensitive.
pub fn encode_description(tokens: &[String], spec: &TextEncoderSpec) -> Result<Vec<f64>, TextError> {
    if tokens.is_empty() {
        return Err(TextError::EmptyTokenList);
    }
    let mut mean = vec![0.0; spec.token_dim];
    for token in tokens {
        let e = token_embed(token, spec)?;
        for (m, v) in mean.iter_mut().zip(&e) {
            *m += v;
        }
    }
    let inv = 1.0 / tokens.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    let projected = projection_matrix(spec).matvec_t(&mean)?;
    Ok(l2_normalize(&projected)?)
}

/// Replace every token found in `lexicon` with the literal `"object"`.
/// Length-preserving and idempotent.
pub fn mask_objects(tokens: &[String], lexicon: &HashSet<String>) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            if lexicon.contains(t) {
                MASK_TOKEN.to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

/// Whitespace tokenization of lowercased text with punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric() || *c == '-' || *c == '\'')
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    /// Number of distinct token sequences.
    pub unique_descriptions: usize,
    /// Mean token count over all descriptions (not only unique ones).
    pub avg_words: f64,
}

pub fn corpus_stats(descriptions: &[Description]) -> Result<CorpusStats, TextError> {
    if descriptions.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let unique: HashSet<&[String]> = descriptions.iter().map(|d| d.tokens.as_slice()).collect();
    let total: usize = descriptions.iter().map(|d| d.tokens.len()).sum();
    Ok(CorpusStats {
        unique_descriptions: unique.len(),
        avg_words: total as f64 / descriptions.len() as f64,
    })
}

/// Read a description file: one JSON object per line with keys `class_id`,
/// `name`, `tokens`, and optional `masked_tokens`. A missing or empty
/// `masked_tokens` defaults to the unmasked tokens.
pub fn read_descriptions(path: &Path) -> Result<Vec<Description>, TextError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut desc: Description =
            serde_json::from_str(&line).map_err(|e| TextError::BadDescriptionFile {
                line: i + 1,
                message: e.to_string(),
            })?;
        if desc.tokens.is_empty() {
            return Err(TextError::BadDescriptionFile {
                line: i + 1,
                message: "description has no tokens".into(),
            });
        }
        if desc.masked_tokens.is_empty() {
            desc.masked_tokens = desc.tokens.clone();
        } else if desc.masked_tokens.len() != desc.tokens.len() {
            return Err(TextError::BadDescriptionFile {
                line: i + 1,
                message: format!(
                    "masked_tokens length {} != tokens length {}",
                    desc.masked_tokens.len(),
                    desc.tokens.len()
                ),
            });
        }
        out.push(desc);
    }
    Ok(out)
}

pub fn write_descriptions(descriptions: &[Description], path: &Path) -> Result<(), TextError> {
    let mut file = std::fs::File::create(path)?;
    for d in descriptions {
        let line = serde_json::to_string(d).expect("description serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Read an object lexicon: one token per line, blank lines ignored.
pub fn read_lexicon(path: &Path) -> Result<HashSet<String>, TextError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = HashSet::new();
    for line in reader.lines() {
        let token = line?.trim().to_string();
        if !token.is_empty() {
            out.insert(token);
        }
    }
    Ok(out)
}

// Keep the constant referenced so the formula in the doc comment stays honest.
const _: u64 = GOLDEN_GAMMA;

#[cfg(test)]
mod tests {
    use super::*;

    fn spec4x3() -> TextEncoderSpec {
        TextEncoderSpec {
            token_dim: 4,
            embed_dim: 3,
            projection_seed: 7,
        }
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn token_embed_is_deterministic() {
        let spec = spec4x3();
        assert_eq!(
            token_embed("jump", &spec).unwrap(),
            token_embed("jump", &spec).unwrap()
        );
    }

    #[test]
    fn token_embed_matches_reference_script() {
        // Frozen values from tools/reference_streams.py.
        let spec = spec4x3();
        let expected = [
            0.8349406851545274,
            -0.49812832387920114,
            0.39287321471594483,
            -0.20394670193505426,
        ];
        let got = token_embed("jump", &spec).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-15, "{g} vs {e}");
        }

        let expected_kick = [
            0.4942915529578149,
            0.24391803265748524,
            -0.26108203288362075,
            -0.6162063231905861,
        ];
        let got_kick = token_embed("kick", &spec).unwrap();
        for (g, e) in got_kick.iter().zip(&expected_kick) {
            assert!((g - e).abs() < 1e-15);
        }
        assert_ne!(got, got_kick);
    }

    #[test]
    fn token_embed_rejects_empty() {
        assert!(matches!(
            token_embed("", &spec4x3()),
            Err(TextError::EmptyToken)
        ));
    }

    #[test]
    fn encode_single_token_is_normalized_projection() {
        let spec = spec4x3();
        let direct = encode_description(&toks(&["jump"]), &spec).unwrap();
        let manual = {
            let e = token_embed("jump", &spec).unwrap();
            let p = projection_matrix(&spec).matvec_t(&e).unwrap();
            l2_normalize(&p).unwrap()
        };
        for (a, b) in direct.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-15);
        }
        // Frozen values from tools/reference_streams.py.
        let expected = [
            -0.28661641083320505,
            -0.8194639279366518,
            0.4963163344599143,
        ];
        for (a, e) in direct.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn encode_matches_reference_script() {
        // Frozen values from tools/reference_streams.py.
        let spec = spec4x3();
        let got = encode_description(&toks(&["jump", "high"]), &spec).unwrap();
        let expected = [
            -0.3326995082732763,
            -0.6169702373566693,
            -0.7132031712007282,
        ];
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn encode_is_order_free() {
        let spec = TextEncoderSpec::default();
        let a = encode_description(&toks(&["swing", "the", "bat"]), &spec).unwrap();
        let b = encode_description(&toks(&["bat", "the", "swing"]), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_output_is_unit_norm() {
        let spec = TextEncoderSpec::default();
        let e = encode_description(&toks(&["spinning", "rapidly"]), &spec).unwrap();
        let norm: f64 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_rejects_empty_list() {
        assert!(matches!(
            encode_description(&[], &spec4x3()),
            Err(TextError::EmptyTokenList)
        ));
    }

    #[test]
    fn mask_objects_basic() {
        let lexicon: HashSet<String> = ["guitar".to_string()].into_iter().collect();
        let out = mask_objects(&toks(&["strumming", "the", "guitar", "strings"]), &lexicon);
        assert_eq!(out, toks(&["strumming", "the", "object", "strings"]));
    }

    #[test]
    fn mask_objects_empty_lexicon_is_identity() {
        let input = toks(&["a", "b"]);
        assert_eq!(mask_objects(&input, &HashSet::new()), input);
    }

    #[test]
    fn mask_objects_all_in_lexicon() {
        let lexicon: HashSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            mask_objects(&toks(&["a", "b"]), &lexicon),
            toks(&["object", "object"])
        );
    }

    #[test]
    fn mask_objects_is_idempotent() {
        let lexicon: HashSet<String> = ["ball", "net"].iter().map(|s| s.to_string()).collect();
        let input = toks(&["throwing", "ball", "into", "net"]);
        let once = mask_objects(&input, &lexicon);
        let twice = mask_objects(&once, &lexicon);
        assert_eq!(once, twice);
    }

    #[test]
    fn masked_embedding_differs_only_when_lexicon_intersects() {
        let spec = TextEncoderSpec::default();
        let lexicon: HashSet<String> = ["ball".to_string()].into_iter().collect();
        let with_obj = toks(&["kicking", "the", "ball"]);
        let masked = mask_objects(&with_obj, &lexicon);
        assert_ne!(
            encode_description(&with_obj, &spec).unwrap(),
            encode_description(&masked, &spec).unwrap()
        );

        let without = toks(&["running", "fast"]);
        let masked2 = mask_objects(&without, &lexicon);
        assert_eq!(
            encode_description(&without, &spec).unwrap(),
            encode_description(&masked2, &spec).unwrap()
        );
    }

    #[test]
    fn tokenize_strips_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Doing rhythmic, exaggerated hand-and-arm movement."),
            toks(&["doing", "rhythmic", "exaggerated", "hand-and-arm", "movement"])
        );
    }

    #[test]
    fn corpus_stats_basic() {
        let descs = vec![
            Description::new(0, "c0", toks(&["a", "b", "c"])),
            Description::new(1, "c1", toks(&["a", "b"])),
        ];
        let stats = corpus_stats(&descs).unwrap();
        assert_eq!(stats.unique_descriptions, 2);
        assert!((stats.avg_words - 2.5).abs() < 1e-12);
    }

    #[test]
    fn corpus_stats_counts_unique_only_once() {
        let descs = vec![
            Description::new(0, "c0", toks(&["a", "b"])),
            Description::new(1, "c1", toks(&["a", "b"])),
        ];
        let stats = corpus_stats(&descs).unwrap();
        assert_eq!(stats.unique_descriptions, 1);
        assert!((stats.avg_words - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_stats_empty_errors() {
        assert!(matches!(corpus_stats(&[]), Err(TextError::EmptyCorpus)));
    }

    #[test]
    fn description_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descs.jsonl");
        let mut d = Description::new(3, "kick", toks(&["kicking", "the", "ball"]));
        d.masked_tokens = toks(&["kicking", "the", "object"]);
        let descs = vec![d, Description::new(4, "run", toks(&["running"]))];
        write_descriptions(&descs, &path).unwrap();
        let back = read_descriptions(&path).unwrap();
        assert_eq!(back, descs);
    }

    #[test]
    fn description_file_defaults_masked_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descs.jsonl");
        std::fs::write(
            &path,
            "{\"class_id\": 1, \"name\": \"jump\", \"tokens\": [\"jumping\", \"up\"]}\n",
        )
        .unwrap();
        let back = read_descriptions(&path).unwrap();
        assert_eq!(back[0].masked_tokens, back[0].tokens);
    }

    #[test]
    fn description_file_rejects_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descs.jsonl");
        std::fs::write(
            &path,
            "{\"class_id\": 1, \"name\": \"x\", \"tokens\": [\"a\", \"b\"], \"masked_tokens\": [\"a\"]}\n",
        )
        .unwrap();
        assert!(matches!(
            read_descriptions(&path),
            Err(TextError::BadDescriptionFile { line: 1, .. })
        ));
    }
}
