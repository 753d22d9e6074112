//! Shared helpers for integration tests: a small fast experiment config and
//! a handle on the compiled binary.
//!
//! Each test binary compiles this module separately and not all of them use
//! every helper, so dead-code warnings are suppressed here.
#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

/// A complete config for a small experiment that trains in well under a
/// second. Paths are relative, so callers set the working directory.
pub fn tiny_config_json() -> String {
    serde_json::json!({
        "synth": {
            "source": {
                "seed": 7, "num_classes": 5, "videos_per_class": 6,
                "frames_per_video": 3, "frame_dim": 8, "embed_dim": 6,
                "noise_sigma": 0.05, "object_strength": 0.0, "object_prob": 0.0
            },
            "target": {
                "seed": 7, "num_classes": 3, "videos_per_class": 5,
                "frames_per_video": 3, "frame_dim": 8, "embed_dim": 6,
                "noise_sigma": 0.05, "object_strength": 0.0, "object_prob": 0.0
            }
        },
        "model": {
            "input_dim": 8, "hidden_dim": 32, "embed_dim": 6, "frames": 3,
            "temporal": "mean"
        },
        "train": {
            "epochs": 10, "batch_size": 5, "base_lr": 1e-3, "warmup_epochs": 1,
            "shuffle_seed": 99
        },
        "text": { "token_dim": 16, "embed_dim": 6, "projection_seed": 777 },
        "paths": { "data_dir": "data", "checkpoint_dir": "ckpt", "report_dir": "reports" }
    })
    .to_string()
}

/// Command for the compiled CLI with its working directory set to `dir`.
pub fn bin_in(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_motiondesc"));
    cmd.current_dir(dir);
    cmd
}
