//! Seeded synthetic source/target datasets with a known generative link
//! between description embeddings and frame features.
//!
//! This module is openly a surrogate for real action videos: each class's
//! frames are a fixed linear image of its frozen description embedding
//! (`A^T e_c`), plus an optional object component (`beta * B^T o_c`), plus
//! iid Gaussian noise. Because the link is linear and shared between source
//! and target, transfer to unseen classes is a property the tests can check
//! rather than hope for. Everything is a pure function of (seed, config).

use crate::numkit::Matrix;
use crate::stream::{derive_key, gaussian_at, stream_at, to_open_unit, to_signed_unit, Stream};
use crate::textenc::{
    encode_description, mask_objects, projection_matrix, token_embed, Description, TextEncoderSpec,
};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary exhausted: cannot draw {needed} distinct descriptions from the pool")]
    VocabularyExhausted { needed: usize },
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("bad magic")]
    BadMagic,
    #[error("version mismatch: got {0}")]
    VersionMismatch(u32),
    #[error("truncated file: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("shape overflow in header")]
    ShapeOverflow,
    #[error("non-finite frame value at sample {sample}")]
    NonFinite { sample: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Text(#[from] crate::textenc::TextError),
}

/// Generation knobs for one dataset (source or target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub videos_per_class: usize,
    pub frames_per_video: usize,
    pub frame_dim: usize,
    pub embed_dim: usize,
    /// Std of the iid Gaussian frame noise.
    pub noise_sigma: f64,
    /// Scale of the object component mixed into frames.
    pub object_strength: f64,
    /// Probability that a class carries an object token.
    pub object_prob: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_classes < 2 {
            return Err(SynthError::InvalidConfig("num_classes must be >= 2".into()));
        }
        if self.num_classes > TARGET_CLASS_BASE as usize {
            return Err(SynthError::InvalidConfig(format!(
                "num_classes must be <= {TARGET_CLASS_BASE}"
            )));
        }
        if self.videos_per_class == 0 {
            return Err(SynthError::InvalidConfig("videos_per_class must be >= 1".into()));
        }
        if self.frames_per_video == 0 {
            return Err(SynthError::InvalidConfig("frames_per_video must be >= 1".into()));
        }
        if self.frame_dim == 0 || self.embed_dim == 0 {
            return Err(SynthError::InvalidConfig("dimensions must be >= 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.object_strength < 0.0 {
            return Err(SynthError::InvalidConfig("object_strength must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.object_prob) {
            return Err(SynthError::InvalidConfig("object_prob must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Which side of the zero-shot split a dataset belongs to. Roles select
/// disjoint class-id ranges and disjoint token pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

/// Target class ids start here; source ids start at 0.
pub const TARGET_CLASS_BASE: u32 = 100_000;

impl Role {
    pub fn class_base(self) -> u32 {
        match self {
            Role::Source => 0,
            Role::Target => TARGET_CLASS_BASE,
        }
    }

    fn code(self) -> u64 {
        match self {
            Role::Source => 0,
            Role::Target => 1,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Role::Source => "src",
            Role::Target => "tgt",
        }
    }
}

// Stream tags; arbitrary but fixed.
const TAG_MIX_A: u64 = 0x004D_4958_5F41;
const TAG_MIX_B: u64 = 0x004D_4958_5F42;
const TAG_DESC: u64 = 0x4445_5343;
const TAG_NOISE: u64 = 0x4E4F_4953;

// Token pools. Source and target pools are disjoint (enforced by a test),
// and no pool contains the literal mask token "object".
const SOURCE_MOTION_WORDS: &[&str] = &[
    "twisting", "bending", "swaying", "lunging", "crouching", "leaping", "spinning", "gliding",
    "shuffling", "stomping", "reaching", "pulling", "pushing", "lifting", "lowering", "circling",
    "rocking", "bouncing", "sliding", "sweeping", "arching", "extending", "flexing", "curling",
    "swinging", "thrusting", "dipping", "rising", "turning", "pivoting", "stepping", "hopping",
    "skipping", "striding", "marching", "jogging", "sprinting", "crawling", "rolling", "tumbling",
    "balancing", "stretching", "squatting", "kneeling", "vaulting", "dashing", "ducking",
    "drifting", "snapping", "flapping", "waving", "clapping", "tapping", "shaking", "nodding",
    "tilting", "wobbling", "lurching", "heaving", "tugging", "flinging", "tossing", "gripping",
    "swerving",
];

const TARGET_MOTION_WORDS: &[&str] = &[
    "pedaling", "paddling", "rowing", "climbing", "descending", "hurdling", "galloping",
    "trotting", "skating", "skiing", "surfing", "diving", "floating", "treading", "kicking",
    "punching", "jabbing", "blocking", "parrying", "dodging", "grappling", "wrestling",
    "throwing", "catching", "juggling", "dribbling", "volleying", "smashing", "serving",
    "batting", "bowling", "pitching", "casting", "reeling", "hammering", "sawing", "drilling",
    "chopping", "slicing", "whisking", "stirring", "kneading", "folding", "wringing",
    "scrubbing", "polishing", "sketching", "strumming", "plucking", "drumming", "conducting",
    "typing", "knitting", "sewing", "pointing", "saluting", "scaling", "bounding",
    "springing", "coasting", "swooping", "darting", "lobbing", "flicking",
];

const SOURCE_OBJECT_WORDS: &[&str] = &[
    "guitar", "ball", "rope", "hammer", "ladder", "bucket", "shovel", "broom", "racket",
    "helmet", "saddle", "kayak", "barbell", "skateboard", "frisbee", "dart", "drum", "flute",
    "canoe", "sled", "anvil", "chisel", "trowel", "rake", "whisk", "axe", "crate", "pole",
    "hoop", "net", "club", "spear",
];

const TARGET_OBJECT_WORDS: &[&str] = &[
    "violin", "puck", "chain", "mallet", "rail", "basin", "spade", "mop", "paddle", "visor",
    "harness", "surfboard", "dumbbell", "scooter", "discus", "javelin", "cymbal", "horn",
    "raft", "toboggan", "spatula", "brush", "comb", "needle", "loom", "easel", "crayon",
    "stylus", "wand", "baton", "oar", "sledge",
];

/// All object words (both roles): the masking lexicon.
pub fn object_lexicon() -> HashSet<String> {
    SOURCE_OBJECT_WORDS
        .iter()
        .chain(TARGET_OBJECT_WORDS)
        .map(|s| s.to_string())
        .collect()
}

/// One generated class: its description, optional object token, and the
/// precomputed frozen embeddings used by the generative link.
#[derive(Debug, Clone)]
pub struct SynthClass {
    pub description: Description,
    pub object_token: Option<String>,
    /// Frozen embedding of the unmasked tokens (length embed_dim).
    pub embed: Vec<f64>,
    /// Token embedding of the object token, if any (length token_dim).
    pub object_embed: Option<Vec<f64>>,
}

/// Ground truth of a generated dataset: classes plus the mixing matrices
/// tying description embeddings to frame features.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub cfg: SynthConfig,
    pub role: Role,
    pub text_spec: TextEncoderSpec,
    pub classes: Vec<SynthClass>,
    /// embed_dim x frame_dim; frames carry `A^T e_c`.
    pub mixing: Matrix,
    /// token_dim x frame_dim; frames carry `beta * B^T o_c`.
    pub object_mixing: Matrix,
}

/// One video: T x frame_dim feature rows (stored as f32) plus its label.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub label: u32,
    pub frames: Vec<f32>,
}

/// A set of samples with shared shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDataset {
    pub num_frames: usize,
    pub frame_dim: usize,
    pub samples: Vec<VideoSample>,
}

impl VideoDataset {
    /// Frames of sample `i` as a row-major T x frame_dim f64 matrix.
    pub fn frames_f64(&self, i: usize) -> Matrix {
        let data: Vec<f64> = self.samples[i].frames.iter().map(|&v| f64::from(v)).collect();
        Matrix::from_vec(self.num_frames, self.frame_dim, data).expect("sample shape is consistent")
    }

    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

fn draw_distinct_tokens(stream: &mut Stream, pool: &[&str], count: usize) -> Vec<String> {
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    while picked.len() < count {
        let idx = stream.next_below(pool.len() as u64) as usize;
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    picked.iter().map(|&i| pool[i].to_string()).collect()
}

const MAX_DRAW_ATTEMPTS: u64 = 1000;

/// Generate the class set for one role: descriptions with 3-6 motion tokens
/// drawn from the role's pool (distinct sequences across classes), an object
/// token with probability `object_prob`, masked variants, and the mixing
/// matrices. Pure in (cfg, role, text_spec).
pub fn gen_class_set(
    cfg: &SynthConfig,
    role: Role,
    text_spec: &TextEncoderSpec,
) -> Result<SynthWorld, SynthError> {
    cfg.validate()?;
    if cfg.embed_dim != text_spec.embed_dim {
        return Err(SynthError::InvalidConfig(format!(
            "embed_dim {} does not match text encoder embed_dim {}",
            cfg.embed_dim, text_spec.embed_dim
        )));
    }

    let (motion_pool, object_pool) = match role {
        Role::Source => (SOURCE_MOTION_WORDS, SOURCE_OBJECT_WORDS),
        Role::Target => (TARGET_MOTION_WORDS, TARGET_OBJECT_WORDS),
    };
    let lexicon = object_lexicon();
    let base = role.class_base();

    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut classes = Vec::with_capacity(cfg.num_classes);
    for index in 0..cfg.num_classes {
        let mut accepted = None;
        for attempt in 0..MAX_DRAW_ATTEMPTS {
            let key = derive_key(cfg.seed, TAG_DESC, &[role.code(), index as u64, attempt]);
            let mut stream = Stream::new(key);
            let count = 3 + stream.next_below(4) as usize;
            let motion = draw_distinct_tokens(&mut stream, motion_pool, count);
            if seen.contains(&motion) {
                continue;
            }
            let with_object = to_open_unit(stream.next_u64()) < cfg.object_prob;
            let object_token = if with_object {
                Some(object_pool[stream.next_below(object_pool.len() as u64) as usize].to_string())
            } else {
                None
            };
            seen.insert(motion.clone());
            accepted = Some((motion, object_token));
            break;
        }
        let (motion, object_token) =
            accepted.ok_or(SynthError::VocabularyExhausted { needed: cfg.num_classes })?;

        let mut tokens = motion;
        if let Some(obj) = &object_token {
            tokens.push(obj.clone());
        }
        let class_id = base + index as u32;
        let name = format!("{}_{:03}", role.prefix(), index);
        let masked_tokens = mask_objects(&tokens, &lexicon);
        let embed = encode_description(&tokens, text_spec)?;
        let object_embed = match &object_token {
            Some(obj) => Some(token_embed(obj, text_spec)?),
            None => None,
        };
        classes.push(SynthClass {
            description: Description {
                class_id,
                name,
                tokens,
                masked_tokens,
            },
            object_token,
            embed,
            object_embed,
        });
    }

    // The mixing matrices are keyed by seed only, so source and target
    // worlds generated from the same seed share the same link.
    //
    // The object matrix factors through the text projection: B = P·C, so a
    // video carries its object token only via the projected embedding P^T·o
    // — the same quantity that enters the class prototype. A raw seeded
    // d_txt×d_in matrix would bury half the object signal in the null space
    // (d_txt > d_in), making the masked-object effect depend on luck instead
    // of on object_strength. The scale 1.5/sqrt(d·d_txt) makes the object
    // component match the motion component's per-component magnitude at
    // object_strength 2.
    let mixing = seeded_matrix(cfg.seed, TAG_MIX_A, cfg.embed_dim, cfg.frame_dim);
    let projection = projection_matrix(text_spec);
    let mut link = seeded_matrix(cfg.seed, TAG_MIX_B, cfg.embed_dim, cfg.frame_dim);
    let link_scale = 1.5 / ((cfg.embed_dim * text_spec.token_dim) as f64).sqrt();
    for v in link.as_mut_slice() {
        *v *= link_scale;
    }
    let object_mixing = projection.matmul(&link).expect("projection cols match link rows");

    Ok(SynthWorld {
        cfg: cfg.clone(),
        role,
        text_spec: text_spec.clone(),
        classes,
        mixing,
        object_mixing,
    })
}

fn seeded_matrix(seed: u64, tag: u64, rows: usize, cols: usize) -> Matrix {
    let key = derive_key(seed, tag, &[]);
    let data: Vec<f64> = (0..rows * cols)
        .map(|i| to_signed_unit(stream_at(key, i as u64)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent")
}

impl SynthWorld {
    pub fn class_index(&self, class_id: u32) -> Result<usize, SynthError> {
        let base = self.role.class_base();
        let idx = class_id.checked_sub(base).ok_or(SynthError::UnknownClass(class_id))? as usize;
        if idx >= self.classes.len() {
            return Err(SynthError::UnknownClass(class_id));
        }
        Ok(idx)
    }

    pub fn descriptions(&self) -> Vec<Description> {
        self.classes.iter().map(|c| c.description.clone()).collect()
    }

    /// Noise-free frame mean of a class: `A^T e_c + beta * B^T o_c`.
    pub fn class_mean(&self, class_id: u32) -> Result<Vec<f64>, SynthError> {
        let class = &self.classes[self.class_index(class_id)?];
        let mut mean = self.mixing.matvec_t(&class.embed).expect("dims fixed at build");
        if let Some(obj) = &class.object_embed {
            let obj_part = self.object_mixing.matvec_t(obj).expect("dims fixed at build");
            for (m, o) in mean.iter_mut().zip(&obj_part) {
                *m += self.cfg.object_strength * o;
            }
        }
        Ok(mean)
    }
}

/// Generate one video: every frame is the class mean plus iid Gaussian noise
/// drawn from the stream keyed by (seed, class, sample, frame, component).
pub fn gen_video(
    world: &SynthWorld,
    class_id: u32,
    sample_index: usize,
) -> Result<VideoSample, SynthError> {
    let mean = world.class_mean(class_id)?;
    let cfg = &world.cfg;
    let mut frames = Vec::with_capacity(cfg.frames_per_video * cfg.frame_dim);
    for frame in 0..cfg.frames_per_video {
        for (component, &m) in mean.iter().enumerate() {
            let value = if cfg.noise_sigma > 0.0 {
                let key = derive_key(
                    cfg.seed,
                    TAG_NOISE,
                    &[
                        u64::from(class_id),
                        sample_index as u64,
                        frame as u64,
                        component as u64,
                    ],
                );
                m + cfg.noise_sigma * gaussian_at(key, 0)
            } else {
                m
            };
            frames.push(value as f32);
        }
    }
    Ok(VideoSample {
        label: class_id,
        frames,
    })
}

/// Generate the full dataset for a world: classes in id order,
/// `videos_per_class` samples each.
pub fn gen_dataset(world: &SynthWorld) -> Result<VideoDataset, SynthError> {
    let cfg = &world.cfg;
    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.videos_per_class);
    for class in &world.classes {
        for sample_index in 0..cfg.videos_per_class {
            samples.push(gen_video(world, class.description.class_id, sample_index)?);
        }
    }
    Ok(VideoDataset {
        num_frames: cfg.frames_per_video,
        frame_dim: cfg.frame_dim,
        samples,
    })
}

/// True iff the two class-id sets do not intersect.
pub fn verify_disjoint(source_ids: &[u32], target_ids: &[u32]) -> bool {
    let source: HashSet<u32> = source_ids.iter().copied().collect();
    target_ids.iter().all(|id| !source.contains(id))
}

const VIDEO_MAGIC: &[u8; 4] = b"MDVB";
const VIDEO_VERSION: u32 = 1;

/// Write the binary video format: magic "MDVB", version u32, N, T, D (u32),
/// N labels (u32), then N*T*D f32 payload. All little-endian.
pub fn write_videos(dataset: &VideoDataset, path: &Path) -> Result<(), SynthError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(VIDEO_MAGIC);
    buf.extend_from_slice(&VIDEO_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dataset.samples.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.num_frames as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.frame_dim as u32).to_le_bytes());
    for s in &dataset.samples {
        buf.extend_from_slice(&s.label.to_le_bytes());
    }
    for s in &dataset.samples {
        debug_assert_eq!(s.frames.len(), dataset.num_frames * dataset.frame_dim);
        for v in &s.frames {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_videos(path: &Path) -> Result<VideoDataset, SynthError> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 20 {
        return Err(SynthError::Truncated {
            expected: 20,
            got: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != VIDEO_MAGIC {
        return Err(SynthError::BadMagic);
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VIDEO_VERSION {
        return Err(SynthError::VersionMismatch(version));
    }
    let n = u32_at(8) as u64;
    let t = u32_at(12) as u64;
    let d = u32_at(16) as u64;
    let payload = n
        .checked_mul(t)
        .and_then(|v| v.checked_mul(d))
        .ok_or(SynthError::ShapeOverflow)?;
    let expected = 20u64
        .checked_add(n.checked_mul(4).ok_or(SynthError::ShapeOverflow)?)
        .and_then(|v| v.checked_add(payload.checked_mul(4)?))
        .ok_or(SynthError::ShapeOverflow)?;
    if expected > usize::MAX as u64 {
        return Err(SynthError::ShapeOverflow);
    }
    if bytes.len() as u64 != expected {
        return Err(SynthError::Truncated {
            expected,
            got: bytes.len() as u64,
        });
    }

    let mut labels = Vec::with_capacity(n as usize);
    let mut off = 20;
    for _ in 0..n {
        labels.push(u32_at(off));
        off += 4;
    }
    let per_sample = (t * d) as usize;
    let mut samples = Vec::with_capacity(n as usize);
    for label in labels {
        let mut frames = Vec::with_capacity(per_sample);
        for _ in 0..per_sample {
            let value = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            if !value.is_finite() {
                return Err(SynthError::NonFinite { sample: samples.len() });
            }
            frames.push(value);
            off += 4;
        }
        samples.push(VideoSample { label, frames });
    }
    Ok(VideoDataset {
        num_frames: t as usize,
        frame_dim: d as usize,
        samples,
    })
}

/// Top-1 accuracy of the nearest-mean classifier that uses the generator's
/// ground-truth mixing matrices. This is the ceiling the learned model is
/// measured against in tests.
pub fn bayes_nearest_prototype_accuracy(
    world: &SynthWorld,
    dataset: &VideoDataset,
) -> Result<f64, SynthError> {
    let means: Vec<(u32, Vec<f64>)> = world
        .classes
        .iter()
        .map(|c| {
            let id = c.description.class_id;
            world.class_mean(id).map(|m| (id, m))
        })
        .collect::<Result<_, _>>()?;
    let mut correct = 0usize;
    for i in 0..dataset.samples.len() {
        let frames = dataset.frames_f64(i);
        let mut mean_frame = vec![0.0; dataset.frame_dim];
        for tf in 0..dataset.num_frames {
            for (j, m) in mean_frame.iter_mut().enumerate() {
                *m += frames.get(tf, j);
            }
        }
        for m in &mut mean_frame {
            *m /= dataset.num_frames as f64;
        }
        let mut best = (f64::INFINITY, 0u32);
        for (id, mu) in &means {
            let dist: f64 = mean_frame
                .iter()
                .zip(mu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist < best.0 {
                best = (dist, *id);
            }
        }
        if best.1 == dataset.samples[i].label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / dataset.samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_cfg() -> SynthConfig {
        SynthConfig {
            seed: 11,
            num_classes: 6,
            videos_per_class: 3,
            frames_per_video: 4,
            frame_dim: 8,
            embed_dim: 5,
            noise_sigma: 0.0,
            object_strength: 0.0,
            object_prob: 0.0,
        }
    }

    fn test_spec() -> TextEncoderSpec {
        TextEncoderSpec {
            token_dim: 16,
            embed_dim: 5,
            projection_seed: 3,
        }
    }

    #[test]
    fn token_pools_are_disjoint_and_never_the_mask_token() {
        let all: Vec<&str> = SOURCE_MOTION_WORDS
            .iter()
            .chain(TARGET_MOTION_WORDS)
            .chain(SOURCE_OBJECT_WORDS)
            .chain(TARGET_OBJECT_WORDS)
            .copied()
            .collect();
        let unique: HashSet<&str> = all.iter().copied().collect();
        assert_eq!(all.len(), unique.len(), "pools overlap");
        assert!(!unique.contains("object"));
    }

    #[test]
    fn class_set_is_deterministic() {
        let cfg = test_cfg();
        let spec = test_spec();
        let a = gen_class_set(&cfg, Role::Source, &spec).unwrap();
        let b = gen_class_set(&cfg, Role::Source, &spec).unwrap();
        assert_eq!(a.descriptions(), b.descriptions());
        assert_eq!(a.mixing, b.mixing);
    }

    #[test]
    fn source_and_target_are_disjoint() {
        let cfg = test_cfg();
        let spec = test_spec();
        let src = gen_class_set(&cfg, Role::Source, &spec).unwrap();
        let tgt = gen_class_set(&cfg, Role::Target, &spec).unwrap();
        let src_ids: Vec<u32> = src.descriptions().iter().map(|d| d.class_id).collect();
        let tgt_ids: Vec<u32> = tgt.descriptions().iter().map(|d| d.class_id).collect();
        assert!(verify_disjoint(&src_ids, &tgt_ids));

        let src_tokens: HashSet<String> = src
            .descriptions()
            .iter()
            .flat_map(|d| d.tokens.clone())
            .collect();
        let tgt_tokens: HashSet<String> = tgt
            .descriptions()
            .iter()
            .flat_map(|d| d.tokens.clone())
            .collect();
        assert!(src_tokens.is_disjoint(&tgt_tokens));
    }

    #[test]
    fn no_object_prob_means_masked_equals_tokens() {
        let cfg = test_cfg();
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        for class in &world.classes {
            assert!(class.object_token.is_none());
            assert_eq!(class.description.masked_tokens, class.description.tokens);
        }
    }

    #[test]
    fn object_prob_one_gives_every_class_an_object() {
        let mut cfg = test_cfg();
        cfg.object_prob = 1.0;
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        for class in &world.classes {
            let obj = class.object_token.as_ref().expect("object token present");
            assert!(class.description.tokens.contains(obj));
            assert!(class.description.masked_tokens.contains(&"object".to_string()));
            assert_ne!(class.description.masked_tokens, class.description.tokens);
        }
    }

    #[test]
    fn descriptions_are_unique_per_role() {
        let mut cfg = test_cfg();
        cfg.num_classes = 40;
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        let seqs: HashSet<Vec<String>> =
            world.classes.iter().map(|c| c.description.tokens.clone()).collect();
        assert_eq!(seqs.len(), 40);
        // Masked sequences stay distinct too: the motion part is unique.
        let masked: HashSet<Vec<String>> = world
            .classes
            .iter()
            .map(|c| c.description.masked_tokens.clone())
            .collect();
        assert_eq!(masked.len(), 40);
    }

    #[test]
    fn noiseless_frames_equal_class_mean() {
        let cfg = test_cfg();
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        let mean = world.class_mean(2).unwrap();
        let video = gen_video(&world, 2, 0).unwrap();
        for frame in 0..cfg.frames_per_video {
            for (j, m) in mean.iter().enumerate() {
                let got = video.frames[frame * cfg.frame_dim + j];
                assert_eq!(got, *m as f32);
            }
        }
    }

    #[test]
    fn video_generation_is_deterministic() {
        let mut cfg = test_cfg();
        cfg.noise_sigma = 0.3;
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        let a = gen_video(&world, 1, 5).unwrap();
        let b = gen_video(&world, 1, 5).unwrap();
        assert_eq!(a, b);
        let c = gen_video(&world, 1, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_class_errors() {
        let world = gen_class_set(&test_cfg(), Role::Source, &test_spec()).unwrap();
        assert!(matches!(
            gen_video(&world, 999, 0),
            Err(SynthError::UnknownClass(999))
        ));
    }

    #[test]
    fn noise_std_shrinks_with_frame_count() {
        // Monte Carlo: per-component std of the video mean is sigma/sqrt(T).
        let mut cfg = test_cfg();
        cfg.noise_sigma = 0.1;
        cfg.num_classes = 2;
        cfg.videos_per_class = 1000;
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        let mean = world.class_mean(0).unwrap();
        let t = cfg.frames_per_video;
        let mut sq_sum = 0.0;
        let mut count = 0usize;
        for sample in 0..cfg.videos_per_class {
            let video = gen_video(&world, 0, sample).unwrap();
            for (j, m) in mean.iter().enumerate() {
                let avg: f64 = (0..t)
                    .map(|f| f64::from(video.frames[f * cfg.frame_dim + j]))
                    .sum::<f64>()
                    / t as f64;
                let dev = avg - m;
                sq_sum += dev * dev;
                count += 1;
            }
        }
        let std = (sq_sum / count as f64).sqrt();
        let expected = cfg.noise_sigma / (t as f64).sqrt();
        assert!(
            (std / expected - 1.0).abs() < 0.2,
            "std {std} vs expected {expected}"
        );
    }

    #[test]
    fn verify_disjoint_cases() {
        let a: Vec<u32> = (0..40).collect();
        let b: Vec<u32> = (100..110).collect();
        assert!(verify_disjoint(&a, &b));
        let c: Vec<u32> = (39..49).collect();
        assert!(!verify_disjoint(&a, &c));
        assert!(verify_disjoint(&a, &[]));
    }

    #[test]
    fn video_file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.mdvb");
        let dataset = VideoDataset {
            num_frames: 2,
            frame_dim: 4,
            samples: vec![
                VideoSample { label: 0, frames: vec![0.5, -1.25, 3.0, 0.0, 1.0, 2.0, -0.125, 7.5] },
                VideoSample { label: 3, frames: vec![1.5; 8] },
                VideoSample { label: 100_000, frames: vec![-2.0; 8] },
            ],
        };
        write_videos(&dataset, &path).unwrap();
        let back = read_videos(&path).unwrap();
        assert_eq!(back, dataset);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.mdvb");
        let dataset = VideoDataset {
            num_frames: 1,
            frame_dim: 2,
            samples: vec![VideoSample { label: 0, frames: vec![1.0, 2.0] }],
        };
        write_videos(&dataset, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_videos(&path), Err(SynthError::BadMagic)));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.mdvb");
        let dataset = VideoDataset {
            num_frames: 1,
            frame_dim: 2,
            samples: vec![VideoSample { label: 0, frames: vec![1.0, 2.0] }],
        };
        write_videos(&dataset, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_videos(&path), Err(SynthError::Truncated { .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("videos.mdvb");
        let dataset = VideoDataset {
            num_frames: 1,
            frame_dim: 1,
            samples: vec![VideoSample { label: 0, frames: vec![1.0] }],
        };
        write_videos(&dataset, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_videos(&path),
            Err(SynthError::VersionMismatch(9))
        ));
    }

    #[test]
    fn bayes_oracle_is_perfect_without_noise() {
        let cfg = test_cfg();
        let world = gen_class_set(&cfg, Role::Source, &test_spec()).unwrap();
        let dataset = gen_dataset(&world).unwrap();
        let acc = bayes_nearest_prototype_accuracy(&world, &dataset).unwrap();
        assert_eq!(acc, 100.0);
    }
}
