//! The method core: frozen text-embedding prototypes as classifier weights,
//! a trainable visual encoder (per-frame MLP plus optional attention head),
//! logits as a pure dot product, and a hand-derived backward pass.
//!
//! The prototype matrix is built once from descriptions and never receives
//! gradients; only [`VisualEncoderParams`] train. All math is f64 and pure,
//! so every gradient here can be (and is) checked against finite differences.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::numkit::{cross_entropy, relu, relu_backward, softmax, Matrix, NumError};
use crate::stream::{derive_key, stream_at, to_signed_unit};
use crate::textenc::{encode_description, Description, TextEncoderSpec, TextError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate class id {0}")]
    DuplicateClass(u32),
    #[error("no descriptions given")]
    EmptyDescriptions,
    #[error("label {0} not among prototype classes")]
    UnknownLabel(u32),
    #[error("bad magic")]
    BadMagic,
    #[error("version mismatch: got {0}")]
    VersionMismatch(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("checkpoint layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How per-frame embeddings are pooled into one video embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalMode {
    Mean,
    Attention,
}

fn default_temporal() -> TemporalMode {
    TemporalMode::Mean
}

fn default_attn_layers() -> usize {
    1
}

fn default_temperature() -> f64 {
    1.0
}

/// Architecture of the visual encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// T: frames sampled per video.
    pub frames: usize,
    #[serde(default = "default_temporal")]
    pub temporal: TemporalMode,
    #[serde(default = "default_attn_layers")]
    pub attn_layers: usize,
    /// When set, the video embedding is L2-normalized and scaled by
    /// `temperature` before the dot product. Off by default: the base method
    /// uses raw dot-product logits.
    #[serde(default)]
    pub normalize_features: bool,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(ModelError::InvalidConfig("dimensions must be >= 1".into()));
        }
        if self.frames == 0 {
            return Err(ModelError::InvalidConfig("frames must be >= 1".into()));
        }
        if self.temporal == TemporalMode::Attention && self.attn_layers == 0 {
            return Err(ModelError::InvalidConfig(
                "attn_layers must be >= 1 in attention mode".into(),
            ));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(ModelError::InvalidConfig("temperature must be positive".into()));
        }
        Ok(())
    }

    fn active_blocks(&self) -> usize {
        match self.temporal {
            TemporalMode::Mean => 0,
            TemporalMode::Attention => self.attn_layers,
        }
    }
}

/// Classifier weights: one frozen unit-norm text embedding per class,
/// rows in ascending class-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix {
    pub weights: Matrix,
    pub class_ids: Vec<u32>,
    pub masked: bool,
}

impl PrototypeMatrix {
    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn index_of(&self, class_id: u32) -> Option<usize> {
        self.class_ids.binary_search(&class_id).ok()
    }
}

/// Build the prototype matrix from descriptions. `masked` selects the
/// object-masked token sequences. Rows are ordered by ascending class id.
pub fn build_prototypes(
    descriptions: &[Description],
    masked: bool,
    spec: &TextEncoderSpec,
) -> Result<PrototypeMatrix, ModelError> {
    if descriptions.is_empty() {
        return Err(ModelError::EmptyDescriptions);
    }
    let mut ordered: Vec<&Description> = descriptions.iter().collect();
    ordered.sort_by_key(|d| d.class_id);
    for pair in ordered.windows(2) {
        if pair[0].class_id == pair[1].class_id {
            return Err(ModelError::DuplicateClass(pair[0].class_id));
        }
    }
    let mut rows = Vec::with_capacity(ordered.len());
    let mut class_ids = Vec::with_capacity(ordered.len());
    for desc in ordered {
        let tokens = if masked { &desc.masked_tokens } else { &desc.tokens };
        rows.push(encode_description(tokens, spec)?);
        class_ids.push(desc.class_id);
    }
    let weights = Matrix::from_rows(&rows)?;
    Ok(PrototypeMatrix {
        weights,
        class_ids,
        masked,
    })
}

/// One self-attention block: query/key/value matrices, each d x d.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnBlock {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

/// All trainable parameters of the visual encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualEncoderParams {
    /// input_dim x hidden_dim; applied as layer1^T * frame.
    pub layer1: Matrix,
    /// hidden_dim x embed_dim; applied as layer2^T * hidden.
    pub layer2: Matrix,
    pub attn: Vec<AttnBlock>,
}

const TAG_INIT: u64 = 0x494E_4954;

fn init_matrix(seed: u64, parts: &[u64], rows: usize, cols: usize, scale: f64) -> Matrix {
    let key = derive_key(seed, TAG_INIT, parts);
    let data: Vec<f64> = (0..rows * cols)
        .map(|i| scale * to_signed_unit(stream_at(key, i as u64)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent")
}

impl VisualEncoderParams {
    /// All-zero parameters with the config's shapes.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let blocks = (0..cfg.active_blocks())
            .map(|_| AttnBlock {
                wq: Matrix::zeros(cfg.embed_dim, cfg.embed_dim),
                wk: Matrix::zeros(cfg.embed_dim, cfg.embed_dim),
                wv: Matrix::zeros(cfg.embed_dim, cfg.embed_dim),
            })
            .collect();
        VisualEncoderParams {
            layer1: Matrix::zeros(cfg.input_dim, cfg.hidden_dim),
            layer2: Matrix::zeros(cfg.hidden_dim, cfg.embed_dim),
            attn: blocks,
        }
    }

    pub fn shapes_match(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let check = |m: &Matrix, rows: usize, cols: usize, what: &str| {
            if m.rows() != rows || m.cols() != cols {
                return Err(ModelError::Shape(format!(
                    "{what} is {}x{}, config wants {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(())
        };
        check(&self.layer1, cfg.input_dim, cfg.hidden_dim, "layer1")?;
        check(&self.layer2, cfg.hidden_dim, cfg.embed_dim, "layer2")?;
        if self.attn.len() != cfg.active_blocks() {
            return Err(ModelError::Shape(format!(
                "{} attention blocks, config wants {}",
                self.attn.len(),
                cfg.active_blocks()
            )));
        }
        for (l, block) in self.attn.iter().enumerate() {
            check(&block.wq, cfg.embed_dim, cfg.embed_dim, &format!("attn{l}.wq"))?;
            check(&block.wk, cfg.embed_dim, cfg.embed_dim, &format!("attn{l}.wk"))?;
            check(&block.wv, cfg.embed_dim, cfg.embed_dim, &format!("attn{l}.wv"))?;
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layer1.as_slice().len()
            + self.layer2.as_slice().len()
            + self
                .attn
                .iter()
                .map(|b| b.wq.as_slice().len() + b.wk.as_slice().len() + b.wv.as_slice().len())
                .sum::<usize>()
    }

    /// All parameters as one vector: layer1, layer2, then per block wq, wk, wv.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        flat.extend_from_slice(self.layer1.as_slice());
        flat.extend_from_slice(self.layer2.as_slice());
        for block in &self.attn {
            flat.extend_from_slice(block.wq.as_slice());
            flat.extend_from_slice(block.wk.as_slice());
            flat.extend_from_slice(block.wv.as_slice());
        }
        flat
    }

    /// Overwrite parameter values from a flat vector (inverse of `flatten`).
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.num_params() {
            return Err(ModelError::Shape(format!(
                "flat vector has {} values, params have {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        let mut take = |dst: &mut Matrix| {
            let n = dst.as_slice().len();
            dst.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        };
        take(&mut self.layer1);
        take(&mut self.layer2);
        for block in &mut self.attn {
            take(&mut block.wq);
            take(&mut block.wk);
            take(&mut block.wv);
        }
        Ok(())
    }
}

/// Seeded initialization used for training: both MLP layers and the
/// query/key matrices are uniform in ±1/sqrt(fan_in); value matrices start
/// at zero so an attention block begins as the identity (residual only) and
/// the head departs from mean pooling only as far as training pushes it.
pub fn init_seeded(cfg: &ModelConfig, seed: u64) -> VisualEncoderParams {
    let mut params = init_seeded_dense(cfg, seed);
    for block in &mut params.attn {
        block.wv = Matrix::zeros(cfg.embed_dim, cfg.embed_dim);
    }
    params
}

/// Seeded initialization with every matrix (including values) random;
/// used by gradient checks so all attention paths carry signal.
pub fn init_seeded_dense(cfg: &ModelConfig, seed: u64) -> VisualEncoderParams {
    let s1 = 1.0 / (cfg.input_dim as f64).sqrt();
    let s2 = 1.0 / (cfg.hidden_dim as f64).sqrt();
    let sa = 1.0 / (cfg.embed_dim as f64).sqrt();
    let blocks = (0..cfg.active_blocks())
        .map(|l| AttnBlock {
            wq: init_matrix(seed, &[2, l as u64, 0], cfg.embed_dim, cfg.embed_dim, sa),
            wk: init_matrix(seed, &[2, l as u64, 1], cfg.embed_dim, cfg.embed_dim, sa),
            wv: init_matrix(seed, &[2, l as u64, 2], cfg.embed_dim, cfg.embed_dim, sa),
        })
        .collect();
    VisualEncoderParams {
        layer1: init_matrix(seed, &[0], cfg.input_dim, cfg.hidden_dim, s1),
        layer2: init_matrix(seed, &[1], cfg.hidden_dim, cfg.embed_dim, s2),
        attn: blocks,
    }
}

/// Uniform frame sampling: index_i = floor((i + 0.5) * N / T).
pub fn sample_frames(num_frames: usize, target: usize) -> Result<Vec<usize>, ModelError> {
    if num_frames == 0 {
        return Err(ModelError::InvalidConfig("num_frames must be >= 1".into()));
    }
    if target == 0 {
        return Err(ModelError::InvalidConfig("target frame count must be >= 1".into()));
    }
    Ok((0..target)
        .map(|i| ((2 * i as u128 + 1) * num_frames as u128 / (2 * target as u128)) as usize)
        .collect())
}

/// Gather a T-row frame matrix from an N-row one via `sample_frames`.
pub fn resample_frames(frames: &Matrix, target: usize) -> Result<Matrix, ModelError> {
    if frames.rows() == target {
        return Ok(frames.clone());
    }
    let indices = sample_frames(frames.rows(), target)?;
    let mut out = Matrix::zeros(target, frames.cols());
    for (i, &src) in indices.iter().enumerate() {
        for j in 0..frames.cols() {
            out.set(i, j, frames.get(src, j));
        }
    }
    Ok(out)
}

struct BlockTrace {
    input: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    weights: Matrix,
    output: Matrix,
}

struct ForwardTrace {
    frames: Matrix,
    pre: Matrix,
    hidden: Matrix,
    blocks: Vec<BlockTrace>,
    pooled: Vec<f64>,
    embedding: Vec<f64>,
}

fn apply_rows(m: &Matrix, w: &Matrix) -> Result<Matrix, NumError> {
    // Row i of the result is w * row_i(m): equal to m * w^T.
    m.matmul(&w.transpose())
}

fn attn_forward(x: &Matrix, block: &AttnBlock, scale: f64) -> Result<BlockTrace, ModelError> {
    let t = x.rows();
    let q = apply_rows(x, &block.wq)?;
    let k = apply_rows(x, &block.wk)?;
    let v = apply_rows(x, &block.wv)?;
    let mut weights = Matrix::zeros(t, t);
    for s in 0..t {
        let mut scores = Vec::with_capacity(t);
        for tt in 0..t {
            let dot: f64 = q.row(s).iter().zip(k.row(tt)).map(|(a, b)| a * b).sum();
            scores.push(dot * scale);
        }
        let probs = softmax(&scores)?;
        for (tt, p) in probs.iter().enumerate() {
            weights.set(s, tt, *p);
        }
    }
    let mut output = x.clone();
    for s in 0..t {
        for tt in 0..t {
            let w = weights.get(s, tt);
            for j in 0..x.cols() {
                let cur = output.get(s, j);
                output.set(s, j, cur + w * v.get(tt, j));
            }
        }
    }
    Ok(BlockTrace {
        input: x.clone(),
        q,
        k,
        v,
        weights,
        output,
    })
}

/// Standalone attention block forward: residual single-head self-attention
/// with no layer normalization.
pub fn attn_block(z: &Matrix, block: &AttnBlock) -> Result<Matrix, ModelError> {
    if block.wq.rows() != z.cols() || block.wq.cols() != z.cols() {
        return Err(ModelError::Shape(format!(
            "attention block is {}x{}, input rows have dimension {}",
            block.wq.rows(),
            block.wq.cols(),
            z.cols()
        )));
    }
    let scale = 1.0 / (z.cols() as f64).sqrt();
    Ok(attn_forward(z, block, scale)?.output)
}

fn forward(
    frames: &Matrix,
    params: &VisualEncoderParams,
    cfg: &ModelConfig,
) -> Result<ForwardTrace, ModelError> {
    cfg.validate()?;
    params.shapes_match(cfg)?;
    if frames.rows() != cfg.frames || frames.cols() != cfg.input_dim {
        return Err(ModelError::Shape(format!(
            "frames are {}x{}, config wants {}x{}",
            frames.rows(),
            frames.cols(),
            cfg.frames,
            cfg.input_dim
        )));
    }

    let t = cfg.frames;
    let mut pre = Matrix::zeros(t, cfg.hidden_dim);
    let mut hidden = Matrix::zeros(t, cfg.hidden_dim);
    let mut z = Matrix::zeros(t, cfg.embed_dim);
    for i in 0..t {
        let u = params.layer1.matvec_t(frames.row(i))?;
        let h = relu(&u);
        let zi = params.layer2.matvec_t(&h)?;
        for (j, val) in u.iter().enumerate() {
            pre.set(i, j, *val);
        }
        for (j, val) in h.iter().enumerate() {
            hidden.set(i, j, *val);
        }
        for (j, val) in zi.iter().enumerate() {
            z.set(i, j, *val);
        }
    }

    let scale = 1.0 / (cfg.embed_dim as f64).sqrt();
    let mut blocks = Vec::with_capacity(params.attn.len());
    let mut current = z;
    for block in &params.attn {
        let trace = attn_forward(&current, block, scale)?;
        current = trace.output.clone();
        blocks.push(trace);
    }

    let mut pooled = vec![0.0; cfg.embed_dim];
    for i in 0..t {
        for (j, p) in pooled.iter_mut().enumerate() {
            *p += current.get(i, j);
        }
    }
    for p in &mut pooled {
        *p /= t as f64;
    }

    let embedding = if cfg.normalize_features {
        let norm: f64 = pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ModelError::Num(NumError::ZeroNorm));
        }
        pooled.iter().map(|v| cfg.temperature * v / norm).collect()
    } else {
        pooled.clone()
    };

    Ok(ForwardTrace {
        frames: frames.clone(),
        pre,
        hidden,
        blocks,
        pooled,
        embedding,
    })
}

/// Encode a T x input_dim frame matrix into a d-dimensional video embedding.
pub fn encode_video(
    frames: &Matrix,
    params: &VisualEncoderParams,
    cfg: &ModelConfig,
) -> Result<Vec<f64>, ModelError> {
    Ok(forward(frames, params, cfg)?.embedding)
}

/// Classifier logits: plain dot product of the embedding with every
/// prototype row. No bias.
pub fn model_logits(embedding: &[f64], prototypes: &PrototypeMatrix) -> Result<Vec<f64>, ModelError> {
    Ok(prototypes.weights.matvec(embedding)?)
}

fn backward(
    trace: &ForwardTrace,
    params: &VisualEncoderParams,
    cfg: &ModelConfig,
    dembedding: &[f64],
) -> Result<VisualEncoderParams, ModelError> {
    let t = cfg.frames;
    let d = cfg.embed_dim;
    let mut grads = VisualEncoderParams::zeros(cfg);

    // Backward through the optional normalize-and-scale head.
    let dpooled: Vec<f64> = if cfg.normalize_features {
        let norm: f64 = trace.pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit: Vec<f64> = trace.pooled.iter().map(|v| v / norm).collect();
        let along: f64 = unit.iter().zip(dembedding).map(|(a, b)| a * b).sum();
        unit.iter()
            .zip(dembedding)
            .map(|(u, de)| cfg.temperature / norm * (de - along * u))
            .collect()
    } else {
        dembedding.to_vec()
    };

    // Mean pool: every row of the final sequence gets dpooled / T.
    let mut dx = Matrix::zeros(t, d);
    for i in 0..t {
        for (j, dp) in dpooled.iter().enumerate() {
            dx.set(i, j, dp / t as f64);
        }
    }

    // Backward through attention blocks in reverse.
    let scale = 1.0 / (d as f64).sqrt();
    for bi in (0..params.attn.len()).rev() {
        let block = &params.attn[bi];
        let bt = &trace.blocks[bi];
        let g = dx; // gradient w.r.t. block output
        // Residual path.
        let mut dinput = g.clone();
        // dv_t = sum_s w_st g_s  ->  dv = w^T g.
        let dv = bt.weights.transpose().matmul(&g)?;
        // dw_st = g_s . v_t  ->  dw = g v^T.
        let dw = g.matmul(&bt.v.transpose())?;
        // Softmax Jacobian per row: da_st = w_st (dw_st - sum_u w_su dw_su).
        let mut da = Matrix::zeros(t, t);
        for s in 0..t {
            let dot: f64 = bt
                .weights
                .row(s)
                .iter()
                .zip(dw.row(s))
                .map(|(a, b)| a * b)
                .sum();
            for tt in 0..t {
                da.set(s, tt, bt.weights.get(s, tt) * (dw.get(s, tt) - dot));
            }
        }
        // dq_s = scale * sum_t da_st k_t; dk_t = scale * sum_s da_st q_s.
        let mut dq = da.matmul(&bt.k)?;
        for v in dq.as_mut_slice() {
            *v *= scale;
        }
        let mut dk = da.transpose().matmul(&bt.q)?;
        for v in dk.as_mut_slice() {
            *v *= scale;
        }
        // Projection parameter gradients and input contributions.
        grads.attn[bi].wq = dq.transpose().matmul(&bt.input)?;
        grads.attn[bi].wk = dk.transpose().matmul(&bt.input)?;
        grads.attn[bi].wv = dv.transpose().matmul(&bt.input)?;
        dinput = add_mats(&dinput, &dq.matmul(&block.wq)?)?;
        dinput = add_mats(&dinput, &dk.matmul(&block.wk)?)?;
        dinput = add_mats(&dinput, &dv.matmul(&block.wv)?)?;
        dx = dinput;
    }

    // Backward through the per-frame MLP.
    for i in 0..t {
        let dz = dx.row(i);
        // layer2: h x d, z = layer2^T h  ->  dlayer2 = h (x) dz, dh = layer2 dz.
        grads.layer2.add_outer(trace.hidden.row(i), dz, 1.0)?;
        let dh = params.layer2.matvec(dz)?;
        let du = relu_backward(trace.pre.row(i), &dh);
        // layer1: d_in x h, u = layer1^T f  ->  dlayer1 = f (x) du.
        grads.layer1.add_outer(trace.frames.row(i), &du, 1.0)?;
    }

    Ok(grads)
}

fn add_mats(a: &Matrix, b: &Matrix) -> Result<Matrix, NumError> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(NumError::DimMismatch {
            context: "matrix add",
            left: a.rows() * a.cols(),
            right: b.rows() * b.cols(),
        });
    }
    let data: Vec<f64> = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x + y)
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// Cross-entropy loss of one video against its label, plus gradients for
/// every encoder parameter. Prototypes are frozen: they contribute to the
/// forward pass but receive no gradient.
pub fn model_backward(
    frames: &Matrix,
    label: u32,
    params: &VisualEncoderParams,
    prototypes: &PrototypeMatrix,
    cfg: &ModelConfig,
) -> Result<(f64, VisualEncoderParams), ModelError> {
    let trace = forward(frames, params, cfg)?;
    let logits = prototypes.weights.matvec(&trace.embedding)?;
    let idx = prototypes
        .index_of(label)
        .ok_or(ModelError::UnknownLabel(label))?;
    let (loss, dlogits) = cross_entropy(&logits, idx)?;
    let dembedding = prototypes.weights.matvec_t(&dlogits)?;
    let grads = backward(&trace, params, cfg, &dembedding)?;
    Ok((loss, grads))
}
