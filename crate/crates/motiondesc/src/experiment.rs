//! End-to-end experiment drivers: generate datasets, train, evaluate,
//! sweep, and ablate, with every artifact written to the configured
//! directories. The CLI and the C API are thin shells over this module.
//!
//! Every artifact-writing step also writes the fully-resolved config next
//! to its outputs, so any result can be re-derived from disk alone.

use crate::config::{ConfigError, ExperimentConfig};
use crate::numkit::NumError;
use crate::protomodel::{
    build_prototypes, init_seeded_dense, load_checkpoint, model_backward, save_checkpoint,
    ModelError, VisualEncoderParams,
};
use crate::stream::{stream_at, to_signed_unit};
use crate::synthgen::{
    gen_class_set, gen_dataset, read_videos, write_videos, Role, SynthError,
};
use crate::textenc::{
    mask_objects, read_descriptions, read_lexicon, write_descriptions, Description, TextError,
};
use crate::trainer::{
    evaluate_zero_shot, train_with, AblationPair, EpochLog, EvalReport, TrainError, TrainOutcome,
};
use crate::numkit::{grad_check, Matrix, DEFAULT_PERTURBATION};
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{hint}: {path} not found")]
    MissingArtifact { path: PathBuf, hint: &'static str },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Process exit code this error maps to: 2 for configuration and
    /// validation problems, 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            ExperimentError::Config(_) | ExperimentError::MissingArtifact { .. } => 2,
            ExperimentError::Train(TrainError::InvalidConfig(_))
            | ExperimentError::Train(TrainError::ClassOverlap)
            | ExperimentError::Train(TrainError::EmptyEpochList)
            | ExperimentError::Train(TrainError::EpochOutOfSchedule(_))
            | ExperimentError::Model(ModelError::InvalidConfig(_))
            | ExperimentError::Synth(SynthError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSummary {
    pub source_classes: usize,
    pub source_videos: usize,
    pub target_classes: usize,
    pub target_videos: usize,
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub chosen_run: usize,
    pub run_final_train_acc: Vec<f64>,
    pub log: Vec<EpochLog>,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub params_checked: usize,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.threshold
    }
}

/// A validated experiment bound to its artifact directories.
pub struct Experiment {
    config: ExperimentConfig,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        Ok(Experiment { config })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn source_videos_path(&self) -> PathBuf {
        self.config.paths.data_dir.join("source_videos.mdvb")
    }

    pub fn target_videos_path(&self) -> PathBuf {
        self.config.paths.data_dir.join("target_videos.mdvb")
    }

    pub fn source_descriptions_path(&self) -> PathBuf {
        self.config.paths.data_dir.join("source_descriptions.jsonl")
    }

    pub fn target_descriptions_path(&self) -> PathBuf {
        self.config.paths.data_dir.join("target_descriptions.jsonl")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.config.paths.checkpoint_dir.join("checkpoint.mdck")
    }

    pub fn epoch_checkpoint_path(&self, epoch: usize) -> PathBuf {
        self.config
            .paths
            .checkpoint_dir
            .join(format!("checkpoint_epoch_{epoch}.mdck"))
    }

    pub fn epoch_log_path(&self) -> PathBuf {
        self.config.paths.checkpoint_dir.join("epoch_log.jsonl")
    }

    pub fn eval_report_path(&self, masked: bool) -> PathBuf {
        let name = if masked {
            "eval_report_masked.json"
        } else {
            "eval_report.json"
        };
        self.config.paths.report_dir.join(name)
    }

    pub fn sweep_report_path(&self) -> PathBuf {
        self.config.paths.report_dir.join("sweep_report.json")
    }

    pub fn ablation_report_path(&self) -> PathBuf {
        self.config.paths.report_dir.join("ablation_report.json")
    }

    fn write_resolved_config(&self, dir: &Path, name: &str) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut file = std::fs::File::create(dir.join(name))?;
        let mut text = serde_json::to_string_pretty(&self.config)?;
        text.push('\n');
        file.write_all(text.as_bytes())?;
        Ok(())
    }

    fn require(path: PathBuf, hint: &'static str) -> Result<PathBuf, ExperimentError> {
        if path.exists() {
            Ok(path)
        } else {
            Err(ExperimentError::MissingArtifact { path, hint })
        }
    }

    /// Generate both splits and write every data artifact.
    pub fn generate(&self) -> Result<GenSummary, ExperimentError> {
        let data_dir = &self.config.paths.data_dir;
        std::fs::create_dir_all(data_dir)?;

        let source_world = gen_class_set(&self.config.synth.source, Role::Source, &self.config.text)?;
        let target_world = gen_class_set(&self.config.synth.target, Role::Target, &self.config.text)?;
        let source_data = gen_dataset(&source_world)?;
        let target_data = gen_dataset(&target_world)?;

        write_videos(&source_data, &self.source_videos_path())?;
        write_videos(&target_data, &self.target_videos_path())?;
        write_descriptions(&source_world.descriptions(), &self.source_descriptions_path())?;
        write_descriptions(&target_world.descriptions(), &self.target_descriptions_path())?;
        self.write_resolved_config(data_dir, "gen_config.json")?;

        Ok(GenSummary {
            source_classes: source_world.classes.len(),
            source_videos: source_data.samples.len(),
            target_classes: target_world.classes.len(),
            target_videos: target_data.samples.len(),
            data_dir: data_dir.clone(),
        })
    }

    fn load_source(&self) -> Result<(crate::synthgen::VideoDataset, Vec<Description>), ExperimentError> {
        let hint = "no generated dataset (run `gen` first)";
        let videos = read_videos(&Self::require(self.source_videos_path(), hint)?)?;
        let descs = read_descriptions(&Self::require(self.source_descriptions_path(), hint)?)?;
        Ok((videos, descs))
    }

    fn load_target(&self) -> Result<(crate::synthgen::VideoDataset, Vec<Description>), ExperimentError> {
        let hint = "no generated dataset (run `gen` first)";
        let videos = read_videos(&Self::require(self.target_videos_path(), hint)?)?;
        let descs = read_descriptions(&Self::require(self.target_descriptions_path(), hint)?)?;
        Ok((videos, descs))
    }

    fn write_epoch_log(&self, log: &[EpochLog]) -> Result<(), ExperimentError> {
        let mut file = std::fs::File::create(self.epoch_log_path())?;
        for line in log {
            let mut text = serde_json::to_string(line)?;
            text.push('\n');
            file.write_all(text.as_bytes())?;
        }
        Ok(())
    }

    /// Train on the generated source split and write the final checkpoint
    /// plus the per-epoch log.
    pub fn train(&self) -> Result<TrainSummary, ExperimentError> {
        let (outcome, _) = self.train_collecting(&[])?;
        let checkpoint = self.checkpoint_path();
        Ok(TrainSummary {
            chosen_run: outcome.chosen_run,
            run_final_train_acc: outcome.run_final_train_acc,
            log: outcome.log,
            checkpoint,
        })
    }

    /// Shared training path: trains once, writes the final checkpoint, the
    /// epoch log, and the resolved config; additionally returns parameter
    /// snapshots of the winning run for the requested 1-based epoch counts.
    fn train_collecting(
        &self,
        snapshot_epochs: &[usize],
    ) -> Result<(TrainOutcome, HashMap<usize, VisualEncoderParams>), ExperimentError> {
        let (source_data, source_descs) = self.load_source()?;
        let prototypes = build_prototypes(&source_descs, false, &self.config.text)?;

        let mut snapshots: HashMap<(usize, usize), VisualEncoderParams> = HashMap::new();
        let outcome = train_with(
            &self.config.model,
            &self.config.train,
            &source_data,
            &prototypes,
            |run, completed, params| {
                if snapshot_epochs.contains(&completed) {
                    snapshots.insert((run, completed), params.clone());
                }
                Ok(())
            },
        )?;

        std::fs::create_dir_all(&self.config.paths.checkpoint_dir)?;
        save_checkpoint(
            &outcome.params,
            &self.config.model,
            self.config.train.epochs,
            &self.checkpoint_path(),
        )?;
        self.write_epoch_log(&outcome.log)?;
        self.write_resolved_config(&self.config.paths.checkpoint_dir, "train_config.json")?;

        let chosen = outcome.chosen_run;
        let kept: HashMap<usize, VisualEncoderParams> = snapshots
            .into_iter()
            .filter_map(|((run, epoch), params)| (run == chosen).then_some((epoch, params)))
            .collect();
        Ok((outcome, kept))
    }

    /// Evaluate the trained checkpoint zero-shot on the target split and
    /// write the report.
    pub fn evaluate(&self, masked: bool) -> Result<EvalReport, ExperimentError> {
        let checkpoint = Self::require(
            self.checkpoint_path(),
            "checkpoint not found (run `train` first)",
        )?;
        let (params, model_cfg, epoch) = load_checkpoint(&checkpoint)?;
        let (target_data, target_descs) = self.load_target()?;
        let (_, source_descs) = self.load_source()?;
        let source_ids: Vec<u32> = source_descs.iter().map(|d| d.class_id).collect();

        let report = evaluate_zero_shot(
            &params,
            &model_cfg,
            epoch,
            &target_data,
            &target_descs,
            masked,
            &source_ids,
            &self.config.text,
        )?;

        let report_dir = &self.config.paths.report_dir;
        std::fs::create_dir_all(report_dir)?;
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(self.eval_report_path(masked), text)?;
        self.write_resolved_config(report_dir, "eval_config.json")?;
        Ok(report)
    }

    /// Read a previously written eval report, if any.
    pub fn read_report(&self, masked: bool) -> Option<EvalReport> {
        let text = std::fs::read_to_string(self.eval_report_path(masked)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Train once, saving a checkpoint for every epoch, then evaluate the
    /// requested (1-based) epoch counts on the target split.
    pub fn sweep(&self, epochs: &[usize]) -> Result<Vec<EvalReport>, ExperimentError> {
        if epochs.is_empty() {
            return Err(TrainError::EmptyEpochList.into());
        }
        let mut wanted: Vec<usize> = epochs.to_vec();
        wanted.sort_unstable();
        wanted.dedup();
        for &e in &wanted {
            if e == 0 || e > self.config.train.epochs {
                return Err(TrainError::EpochOutOfSchedule(e).into());
            }
        }

        let all_epochs: Vec<usize> = (1..=self.config.train.epochs).collect();
        let (_, snapshots) = self.train_collecting(&all_epochs)?;
        for (&epoch, params) in &snapshots {
            save_checkpoint(
                params,
                &self.config.model,
                epoch,
                &self.epoch_checkpoint_path(epoch),
            )?;
        }

        let (target_data, target_descs) = self.load_target()?;
        let (_, source_descs) = self.load_source()?;
        let source_ids: Vec<u32> = source_descs.iter().map(|d| d.class_id).collect();
        let mut reports = Vec::with_capacity(wanted.len());
        for &epoch in &wanted {
            let params = snapshots
                .get(&epoch)
                .expect("snapshot saved for every epoch");
            reports.push(evaluate_zero_shot(
                params,
                &self.config.model,
                epoch,
                &target_data,
                &target_descs,
                false,
                &source_ids,
                &self.config.text,
            )?);
        }

        let report_dir = &self.config.paths.report_dir;
        std::fs::create_dir_all(report_dir)?;
        let mut text = serde_json::to_string_pretty(&reports)?;
        text.push('\n');
        std::fs::write(self.sweep_report_path(), text)?;
        self.write_resolved_config(report_dir, "sweep_config.json")?;
        Ok(reports)
    }

    /// Train mean-pooling and attention variants with identical seeds and
    /// evaluate both.
    pub fn ablate(&self, attn_layers: usize) -> Result<AblationPair, ExperimentError> {
        let (source_data, source_descs) = self.load_source()?;
        let (target_data, target_descs) = self.load_target()?;
        let pair = crate::trainer::temporal_ablation(
            &self.config.model,
            attn_layers,
            &self.config.train,
            &source_data,
            &source_descs,
            &target_data,
            &target_descs,
            &self.config.text,
        )?;
        let report_dir = &self.config.paths.report_dir;
        std::fs::create_dir_all(report_dir)?;
        let mut text = serde_json::to_string_pretty(&pair)?;
        text.push('\n');
        std::fs::write(self.ablation_report_path(), text)?;
        self.write_resolved_config(report_dir, "ablation_config.json")?;
        Ok(pair)
    }

    /// Finite-difference check of the configured model's backward pass on a
    /// seeded random input against two seeded prototype classes.
    pub fn grad_check_report(&self) -> Result<GradCheckReport, ExperimentError> {
        let cfg = &self.config.model;
        let params = init_seeded_dense(cfg, 0xC0DE);
        let frame_data: Vec<f64> = (0..cfg.frames * cfg.input_dim)
            .map(|i| 2.0 * to_signed_unit(stream_at(0xF00D, i as u64)))
            .collect();
        let frames = Matrix::from_vec(cfg.frames, cfg.input_dim, frame_data)?;
        let descriptions = vec![
            Description::new(0, "probe_a", vec!["swaying".into(), "low".into()]),
            Description::new(1, "probe_b", vec!["leaping".into(), "high".into()]),
        ];
        let prototypes = build_prototypes(&descriptions, false, &self.config.text)?;

        let template = params.clone();
        let model_cfg = cfg.clone();
        let eval = move |flat: &[f64]| {
            let mut p = template.clone();
            p.load_flat(flat).expect("flat length fixed");
            let (loss, grads) =
                model_backward(&frames, 1, &p, &prototypes, &model_cfg).expect("valid setup");
            (loss, grads.flatten())
        };
        let flat = params.flatten();
        let max_rel_err = grad_check(&eval, &flat, DEFAULT_PERTURBATION)?;
        Ok(GradCheckReport {
            max_rel_err,
            params_checked: flat.len(),
            threshold: 1e-5,
        })
    }

    /// Rewrite a description file with `masked_tokens` recomputed from a
    /// lexicon file (one object word per line). Returns how many
    /// descriptions changed.
    pub fn mask_file(
        input: &Path,
        lexicon_path: &Path,
        output: &Path,
    ) -> Result<usize, ExperimentError> {
        let mut descriptions = read_descriptions(input)?;
        let lexicon = read_lexicon(lexicon_path)?;
        let mut changed = 0;
        for d in &mut descriptions {
            let masked = mask_objects(&d.tokens, &lexicon);
            if masked != d.masked_tokens {
                changed += 1;
            }
            d.masked_tokens = masked;
        }
        write_descriptions(&descriptions, output)?;
        Ok(changed)
    }
}
