//! Supervised fine-tuning on the source split, zero-shot evaluation on a
//! disjoint target split, and the sweep/ablation harnesses built on top.
//!
//! Training follows the published recipe: mini-batch cross-entropy against
//! frozen prototypes, decoupled-weight-decay Adam, linear warmup into a
//! cosine decay. Everything is a pure function of (configs, data, seeds):
//! two runs with the same inputs produce bit-identical parameters.

use crate::numkit::{adam_step, clip_global_norm, AdamState, Matrix, NumError, Schedule};
use crate::protomodel::{
    build_prototypes, encode_video, init_seeded, model_backward, model_logits, resample_frames,
    ModelConfig, ModelError, PrototypeMatrix, TemporalMode, VisualEncoderParams,
};
use crate::stream::{derive_key, permutation};
use crate::synthgen::{verify_disjoint, VideoDataset};
use crate::textenc::{Description, TextEncoderSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {0} has no prototype row")]
    LabelMismatch(u32),
    #[error("target classes overlap source classes")]
    ClassOverlap,
    #[error("empty epoch list")]
    EmptyEpochList,
    #[error("epoch {0} outside the training schedule")]
    EpochOutOfSchedule(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

fn default_epochs() -> usize {
    10
}

fn default_batch_size() -> usize {
    20
}

fn default_base_lr() -> f64 {
    5e-5
}

fn default_warmup_epochs() -> usize {
    5
}

fn default_weight_decay() -> f64 {
    0.2
}

fn default_shuffle_seed() -> u64 {
    0x5EED
}

fn default_runs() -> usize {
    1
}

/// Optimization knobs. The defaults mirror the published recipe:
/// 10 epochs, batch 20, lr 5e-5 with 5 warmup epochs, weight decay 0.2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_base_lr")]
    pub base_lr: f64,
    #[serde(default = "default_warmup_epochs")]
    pub warmup_epochs: usize,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Optional global-norm gradient clipping; off by default.
    #[serde(default)]
    pub grad_clip_norm: Option<f64>,
    #[serde(default = "default_shuffle_seed")]
    pub shuffle_seed: u64,
    /// Independent restarts (fresh init and shuffling); the run with the
    /// best final-epoch training accuracy is kept.
    #[serde(default = "default_runs")]
    pub runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            base_lr: default_base_lr(),
            warmup_epochs: default_warmup_epochs(),
            weight_decay: default_weight_decay(),
            grad_clip_norm: None,
            shuffle_seed: default_shuffle_seed(),
            runs: default_runs(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.runs == 0 {
            return Err(TrainError::InvalidConfig("runs must be >= 1".into()));
        }
        if !self.base_lr.is_finite() || self.base_lr < 0.0 {
            return Err(TrainError::InvalidConfig("base_lr must be >= 0".into()));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(TrainError::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if self.warmup_epochs > self.epochs {
            return Err(TrainError::InvalidConfig(
                "warmup_epochs must not exceed epochs".into(),
            ));
        }
        if let Some(c) = self.grad_clip_norm {
            if !c.is_finite() || c <= 0.0 {
                return Err(TrainError::InvalidConfig("grad_clip_norm must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Exact mean of the epoch's batch losses.
    pub mean_loss: f64,
    pub train_acc: f64,
    pub wall_ms: u64,
}

/// Zero-shot evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy_percent: f64,
    pub masked: bool,
    pub epoch: usize,
    pub per_class: Vec<ClassCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class_id: u32,
    pub correct: usize,
    pub total: usize,
}

/// Result of `train`: the winning run's parameters and log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: VisualEncoderParams,
    pub log: Vec<EpochLog>,
    pub chosen_run: usize,
    /// Final-epoch training accuracy of every run, in run order.
    pub run_final_train_acc: Vec<f64>,
}

const TAG_RUN: u64 = 0x52_554E;
const TAG_SHUFFLE: u64 = 0x5348_5546;

/// The parameters run 0 starts from. Exposed so untrained baselines can be
/// evaluated against exactly what training would have begun with.
pub fn initial_params(model_cfg: &ModelConfig, train_cfg: &TrainConfig) -> VisualEncoderParams {
    init_seeded(model_cfg, derive_key(train_cfg.shuffle_seed, TAG_RUN, &[0]))
}

/// Predicted class id for one video: argmax over prototype logits, lowest
/// class index winning ties.
pub fn predict_class(
    frames: &Matrix,
    params: &VisualEncoderParams,
    prototypes: &PrototypeMatrix,
    cfg: &ModelConfig,
) -> Result<u32, TrainError> {
    let embedding = encode_video(frames, params, cfg)?;
    let logits = model_logits(&embedding, prototypes)?;
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    Ok(prototypes.class_ids[best])
}

/// Fine-tune the encoder on the source split. See `train_with` for the
/// epoch callback variant.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &VideoDataset,
    prototypes: &PrototypeMatrix,
) -> Result<TrainOutcome, TrainError> {
    train_with(model_cfg, train_cfg, data, prototypes, |_, _, _| Ok(()))
}

/// Fine-tune with a callback fired after every epoch as
/// `(run, completed_epochs, params)`; `completed_epochs` is 1-based.
pub fn train_with<F>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &VideoDataset,
    prototypes: &PrototypeMatrix,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(usize, usize, &VisualEncoderParams) -> Result<(), TrainError>,
{
    model_cfg.validate()?;
    train_cfg.validate()?;
    if data.samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if data.frame_dim != model_cfg.input_dim {
        return Err(TrainError::InvalidConfig(format!(
            "data frame_dim {} does not match model input_dim {}",
            data.frame_dim, model_cfg.input_dim
        )));
    }
    for s in &data.samples {
        if prototypes.index_of(s.label).is_none() {
            return Err(TrainError::LabelMismatch(s.label));
        }
    }

    let n = data.samples.len();
    let frames: Vec<Matrix> = (0..n)
        .map(|i| resample_frames(&data.frames_f64(i), model_cfg.frames))
        .collect::<Result<_, _>>()?;
    let labels: Vec<u32> = data.labels();
    let schedule = Schedule::new(train_cfg.base_lr, train_cfg.warmup_epochs, train_cfg.epochs);

    let mut best: Option<TrainOutcome> = None;
    let mut run_final_train_acc = Vec::with_capacity(train_cfg.runs);
    for run in 0..train_cfg.runs {
        let run_seed = derive_key(train_cfg.shuffle_seed, TAG_RUN, &[run as u64]);
        let mut params = init_seeded(model_cfg, run_seed);
        let mut adam = AdamState::new(params.num_params());
        let mut log = Vec::with_capacity(train_cfg.epochs);
        for epoch in 0..train_cfg.epochs {
            let start = Instant::now();
            let lr = schedule.lr_at(epoch)?;
            let order = permutation(derive_key(run_seed, TAG_SHUFFLE, &[epoch as u64]), n);
            let mut batch_losses = Vec::new();
            let mut correct = 0usize;
            for batch in order.chunks(train_cfg.batch_size) {
                let mut grad = vec![0.0; params.num_params()];
                let mut loss_sum = 0.0;
                for &i in batch {
                    // Accuracy is measured on the pre-update parameters the
                    // gradient is taken at.
                    if predict_class(&frames[i], &params, prototypes, model_cfg)? == labels[i] {
                        correct += 1;
                    }
                    let (loss, g) =
                        model_backward(&frames[i], labels[i], &params, prototypes, model_cfg)?;
                    loss_sum += loss;
                    for (a, b) in grad.iter_mut().zip(g.flatten()) {
                        *a += b;
                    }
                }
                let inv = 1.0 / batch.len() as f64;
                for g in &mut grad {
                    *g *= inv;
                }
                if let Some(max_norm) = train_cfg.grad_clip_norm {
                    clip_global_norm(&mut grad, max_norm);
                }
                let mut flat = params.flatten();
                adam_step(&mut flat, &grad, &mut adam, lr, train_cfg.weight_decay)?;
                params.load_flat(&flat)?;
                batch_losses.push(loss_sum * inv);
            }
            let mean_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
            log.push(EpochLog {
                epoch,
                lr,
                mean_loss,
                train_acc: 100.0 * correct as f64 / n as f64,
                wall_ms: start.elapsed().as_millis() as u64,
            });
            on_epoch(run, epoch + 1, &params)?;
        }
        let final_acc = log.last().expect("epochs >= 1").train_acc;
        run_final_train_acc.push(final_acc);
        let better = match &best {
            None => true,
            Some(b) => final_acc > b.log.last().expect("epochs >= 1").train_acc,
        };
        if better {
            best = Some(TrainOutcome {
                params,
                log,
                chosen_run: run,
                run_final_train_acc: Vec::new(),
            });
        }
    }
    let mut outcome = best.expect("runs >= 1");
    outcome.run_final_train_acc = run_final_train_acc;
    Ok(outcome)
}

/// Zero-shot evaluation: build target prototypes from the descriptions
/// (masked or not), classify every video by highest dot product, and report
/// top-1 accuracy with per-class counts. `source_class_ids` is checked for
/// disjointness; pass an empty slice when there is no source context.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_zero_shot(
    params: &VisualEncoderParams,
    model_cfg: &ModelConfig,
    epoch: usize,
    data: &VideoDataset,
    descriptions: &[Description],
    masked: bool,
    source_class_ids: &[u32],
    text_spec: &TextEncoderSpec,
) -> Result<EvalReport, TrainError> {
    if data.samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let target_ids: Vec<u32> = descriptions.iter().map(|d| d.class_id).collect();
    if !verify_disjoint(source_class_ids, &target_ids) {
        return Err(TrainError::ClassOverlap);
    }
    let prototypes = build_prototypes(descriptions, masked, text_spec)?;
    for s in &data.samples {
        if prototypes.index_of(s.label).is_none() {
            return Err(TrainError::LabelMismatch(s.label));
        }
    }

    let predictions: Vec<(u32, u32)> = (0..data.samples.len())
        .into_par_iter()
        .map(|i| {
            let frames = resample_frames(&data.frames_f64(i), model_cfg.frames)?;
            let predicted = predict_class(&frames, params, &prototypes, model_cfg)?;
            Ok((data.samples[i].label, predicted))
        })
        .collect::<Result<_, TrainError>>()?;

    let mut counts: Vec<ClassCount> = prototypes
        .class_ids
        .iter()
        .map(|&class_id| ClassCount {
            class_id,
            correct: 0,
            total: 0,
        })
        .collect();
    for (label, predicted) in predictions {
        let idx = prototypes.index_of(label).expect("label checked above");
        counts[idx].total += 1;
        if predicted == label {
            counts[idx].correct += 1;
        }
    }
    let total: usize = counts.iter().map(|c| c.total).sum();
    let correct: usize = counts.iter().map(|c| c.correct).sum();
    Ok(EvalReport {
        accuracy_percent: 100.0 * correct as f64 / total as f64,
        masked,
        epoch,
        per_class: counts,
    })
}

/// Unmasked and masked evaluation of the same checkpoint, plus their
/// difference (unmasked minus masked): the object-bias signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedDelta {
    pub unmasked: EvalReport,
    pub masked: EvalReport,
    pub delta: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn masked_delta_report(
    params: &VisualEncoderParams,
    model_cfg: &ModelConfig,
    epoch: usize,
    data: &VideoDataset,
    descriptions: &[Description],
    source_class_ids: &[u32],
    text_spec: &TextEncoderSpec,
) -> Result<MaskedDelta, TrainError> {
    let unmasked = evaluate_zero_shot(
        params,
        model_cfg,
        epoch,
        data,
        descriptions,
        false,
        source_class_ids,
        text_spec,
    )?;
    let masked = evaluate_zero_shot(
        params,
        model_cfg,
        epoch,
        data,
        descriptions,
        true,
        source_class_ids,
        text_spec,
    )?;
    let delta = unmasked.accuracy_percent - masked.accuracy_percent;
    Ok(MaskedDelta {
        unmasked,
        masked,
        delta,
    })
}

/// Train once, snapshotting parameters after each requested epoch count
/// (1-based), then evaluate every snapshot on the target split. Duplicates
/// in the list are collapsed; reports come back in ascending epoch order.
#[allow(clippy::too_many_arguments)]
pub fn epoch_sweep(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    source_data: &VideoDataset,
    source_prototypes: &PrototypeMatrix,
    target_data: &VideoDataset,
    target_descriptions: &[Description],
    epochs: &[usize],
    text_spec: &TextEncoderSpec,
) -> Result<Vec<EvalReport>, TrainError> {
    if epochs.is_empty() {
        return Err(TrainError::EmptyEpochList);
    }
    let mut wanted: Vec<usize> = epochs.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    for &e in &wanted {
        if e == 0 || e > train_cfg.epochs {
            return Err(TrainError::EpochOutOfSchedule(e));
        }
    }

    let mut snapshots: HashMap<(usize, usize), VisualEncoderParams> = HashMap::new();
    let outcome = train_with(
        model_cfg,
        train_cfg,
        source_data,
        source_prototypes,
        |run, completed, params| {
            if wanted.contains(&completed) {
                snapshots.insert((run, completed), params.clone());
            }
            Ok(())
        },
    )?;

    let mut reports = Vec::with_capacity(wanted.len());
    for &e in &wanted {
        let params = snapshots
            .get(&(outcome.chosen_run, e))
            .expect("snapshot recorded for every requested epoch");
        reports.push(evaluate_zero_shot(
            params,
            model_cfg,
            e,
            target_data,
            target_descriptions,
            false,
            &source_prototypes.class_ids,
            text_spec,
        )?);
    }
    Ok(reports)
}

/// Mean-pooling and attention-head variants trained with identical seeds
/// and evaluated on the same target split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPair {
    pub mean: EvalReport,
    pub attention: EvalReport,
}

#[allow(clippy::too_many_arguments)]
pub fn temporal_ablation(
    base_cfg: &ModelConfig,
    attn_layers: usize,
    train_cfg: &TrainConfig,
    source_data: &VideoDataset,
    source_descriptions: &[Description],
    target_data: &VideoDataset,
    target_descriptions: &[Description],
    text_spec: &TextEncoderSpec,
) -> Result<AblationPair, TrainError> {
    let source_prototypes = build_prototypes(source_descriptions, false, text_spec)?;
    let run = |cfg: &ModelConfig| -> Result<EvalReport, TrainError> {
        let outcome = train(cfg, train_cfg, source_data, &source_prototypes)?;
        evaluate_zero_shot(
            &outcome.params,
            cfg,
            train_cfg.epochs,
            target_data,
            target_descriptions,
            false,
            &source_prototypes.class_ids,
            text_spec,
        )
    };
    let mean_cfg = ModelConfig {
        temporal: TemporalMode::Mean,
        ..base_cfg.clone()
    };
    let attn_cfg = ModelConfig {
        temporal: TemporalMode::Attention,
        attn_layers,
        ..base_cfg.clone()
    };
    Ok(AblationPair {
        mean: run(&mean_cfg)?,
        attention: run(&attn_cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{gen_class_set, gen_dataset, Role, SynthConfig};

    fn spec() -> TextEncoderSpec {
        TextEncoderSpec {
            token_dim: 12,
            embed_dim: 6,
            projection_seed: 2,
        }
    }

    fn synth_cfg() -> SynthConfig {
        SynthConfig {
            seed: 5,
            num_classes: 4,
            videos_per_class: 6,
            frames_per_video: 3,
            frame_dim: 8,
            embed_dim: 6,
            noise_sigma: 0.05,
            object_strength: 0.0,
            object_prob: 0.0,
        }
    }

    fn model_cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 8,
            hidden_dim: 16,
            embed_dim: 6,
            frames: 3,
            temporal: TemporalMode::Mean,
            attn_layers: 1,
            normalize_features: false,
            temperature: 1.0,
        }
    }

    fn quick_train_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 5,
            base_lr: 1e-3,
            warmup_epochs: 1,
            weight_decay: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let cfg = model_cfg();
        let tcfg = quick_train_cfg();
        let a = train(&cfg, &tcfg, &data, &protos).unwrap();
        let b = train(&cfg, &tcfg, &data, &protos).unwrap();
        let fa = a.params.flatten();
        let fb = b.params.flatten();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // Everything but wall time matches in the log too.
        for (la, lb) in a.log.iter().zip(&b.log) {
            assert_eq!(la.epoch, lb.epoch);
            assert_eq!(la.lr, lb.lr);
            assert_eq!(la.mean_loss, lb.mean_loss);
            assert_eq!(la.train_acc, lb.train_acc);
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_at_init() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let cfg = model_cfg();
        let tcfg = TrainConfig {
            base_lr: 0.0,
            ..quick_train_cfg()
        };
        let outcome = train(&cfg, &tcfg, &data, &protos).unwrap();
        let init = initial_params(&cfg, &tcfg);
        let a = outcome.params.flatten();
        let b = init.flatten();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // Training accuracy never moves either: both epochs saw the same
        // parameters.
        assert_eq!(outcome.log[0].train_acc, outcome.log[1].train_acc);
    }

    #[test]
    fn training_mutates_neither_prototypes_nor_data() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let data_before = data.clone();
        let protos_before = protos.clone();
        train(&model_cfg(), &quick_train_cfg(), &data, &protos).unwrap();
        assert_eq!(data, data_before);
        assert_eq!(protos, protos_before);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let empty = VideoDataset {
            num_frames: 3,
            frame_dim: 8,
            samples: vec![],
        };
        assert!(matches!(
            train(&model_cfg(), &quick_train_cfg(), &empty, &protos),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn unknown_label_is_rejected() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let mut data = gen_dataset(&world).unwrap();
        data.samples[0].label = 999;
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        assert!(matches!(
            train(&model_cfg(), &quick_train_cfg(), &data, &protos),
            Err(TrainError::LabelMismatch(999))
        ));
    }

    #[test]
    fn class_overlap_is_rejected() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let descs = world.descriptions();
        let ids: Vec<u32> = descs.iter().map(|d| d.class_id).collect();
        let params = initial_params(&model_cfg(), &TrainConfig::default());
        let err = evaluate_zero_shot(
            &params,
            &model_cfg(),
            0,
            &data,
            &descs,
            false,
            &ids,
            &spec(),
        );
        assert!(matches!(err, Err(TrainError::ClassOverlap)));
    }

    #[test]
    fn logged_lr_follows_schedule() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let tcfg = TrainConfig {
            epochs: 4,
            warmup_epochs: 2,
            base_lr: 1e-3,
            ..quick_train_cfg()
        };
        let outcome = train(&model_cfg(), &tcfg, &data, &protos).unwrap();
        let schedule = Schedule::new(1e-3, 2, 4);
        for (e, line) in outcome.log.iter().enumerate() {
            assert_eq!(line.epoch, e);
            assert_eq!(line.lr, schedule.lr_at(e).unwrap());
        }
    }

    #[test]
    fn epoch_sweep_dedupes_and_orders() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let tgt_world = gen_class_set(&synth_cfg(), Role::Target, &spec()).unwrap();
        let tgt_data = gen_dataset(&tgt_world).unwrap();
        let tcfg = quick_train_cfg();
        let reports = epoch_sweep(
            &model_cfg(),
            &tcfg,
            &data,
            &protos,
            &tgt_data,
            &tgt_world.descriptions(),
            &[2, 1, 2],
            &spec(),
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].epoch, 1);
        assert_eq!(reports[1].epoch, 2);

        assert!(matches!(
            epoch_sweep(
                &model_cfg(),
                &tcfg,
                &data,
                &protos,
                &tgt_data,
                &tgt_world.descriptions(),
                &[],
                &spec(),
            ),
            Err(TrainError::EmptyEpochList)
        ));
        assert!(matches!(
            epoch_sweep(
                &model_cfg(),
                &tcfg,
                &data,
                &protos,
                &tgt_data,
                &tgt_world.descriptions(),
                &[3],
                &spec(),
            ),
            Err(TrainError::EpochOutOfSchedule(3))
        ));
    }

    #[test]
    fn sweep_final_epoch_matches_plain_training() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let tgt_world = gen_class_set(&synth_cfg(), Role::Target, &spec()).unwrap();
        let tgt_data = gen_dataset(&tgt_world).unwrap();
        let tcfg = quick_train_cfg();
        let cfg = model_cfg();
        let reports = epoch_sweep(
            &cfg,
            &tcfg,
            &data,
            &protos,
            &tgt_data,
            &tgt_world.descriptions(),
            &[tcfg.epochs],
            &spec(),
        )
        .unwrap();
        let outcome = train(&cfg, &tcfg, &data, &protos).unwrap();
        let direct = evaluate_zero_shot(
            &outcome.params,
            &cfg,
            tcfg.epochs,
            &tgt_data,
            &tgt_world.descriptions(),
            false,
            &protos.class_ids,
            &spec(),
        )
        .unwrap();
        assert_eq!(reports[0], direct);
    }

    #[test]
    fn relabeling_leaves_accuracy_unchanged() {
        // Shift every target class id by a constant and rename videos
        // consistently: accuracy must not move.
        let world = gen_class_set(&synth_cfg(), Role::Target, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let params = initial_params(&model_cfg(), &TrainConfig::default());
        let descs = world.descriptions();
        let a = evaluate_zero_shot(&params, &model_cfg(), 0, &data, &descs, false, &[], &spec())
            .unwrap();
        let mut shifted_descs = descs.clone();
        for d in &mut shifted_descs {
            d.class_id += 7;
        }
        let mut shifted_data = data.clone();
        for s in &mut shifted_data.samples {
            s.label += 7;
        }
        let b = evaluate_zero_shot(
            &params,
            &model_cfg(),
            0,
            &shifted_data,
            &shifted_descs,
            false,
            &[],
            &spec(),
        )
        .unwrap();
        assert_eq!(a.accuracy_percent, b.accuracy_percent);
    }

    #[test]
    fn masked_delta_is_zero_without_objects() {
        let world = gen_class_set(&synth_cfg(), Role::Target, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let params = initial_params(&model_cfg(), &TrainConfig::default());
        let report = masked_delta_report(
            &params,
            &model_cfg(),
            0,
            &data,
            &world.descriptions(),
            &[],
            &spec(),
        )
        .unwrap();
        assert_eq!(report.delta, 0.0);
        assert_eq!(
            report.unmasked.accuracy_percent,
            report.masked.accuracy_percent
        );
    }

    #[test]
    fn multiple_runs_pick_best_final_accuracy() {
        let world = gen_class_set(&synth_cfg(), Role::Source, &spec()).unwrap();
        let data = gen_dataset(&world).unwrap();
        let protos = build_prototypes(&world.descriptions(), false, &spec()).unwrap();
        let tcfg = TrainConfig {
            runs: 3,
            ..quick_train_cfg()
        };
        let outcome = train(&model_cfg(), &tcfg, &data, &protos).unwrap();
        assert_eq!(outcome.run_final_train_acc.len(), 3);
        let max = outcome
            .run_final_train_acc
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(outcome.run_final_train_acc[outcome.chosen_run], max);
    }
}
