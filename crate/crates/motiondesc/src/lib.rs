//! Zero-shot retrieval of motion descriptions with class-prototype classifiers.
//!
//! The pipeline: a frozen, deterministic text encoder turns per-class motion
//! descriptions into unit-norm prototype vectors; those prototypes are used as
//! the (frozen) weight rows of a linear classifier; a small visual encoder is
//! fine-tuned with cross-entropy on a source dataset and then evaluated on a
//! disjoint set of target classes, where new prototypes built from the target
//! descriptions act as the classifier. A seeded synthetic generator provides
//! source/target datasets whose frame features are linked to the description
//! embeddings by a known mixing matrix, so transfer to unseen classes is a
//! checkable property instead of an accident.
//!
//! Modules:
//! - [`numkit`]: dense kernels, loss, Adam, schedules, finite-difference checks
//! - [`textenc`]: frozen text encoder, object masking, corpus statistics
//! - [`synthgen`]: seeded dataset generation and the video file format
//! - [`protomodel`]: prototype classifier + visual encoder forward/backward
//! - [`trainer`]: training loop, zero-shot evaluation, ablation sweeps
//! - [`qualstats`]: Likert/agreement/majority-vote annotation statistics
//! - [`config`] / [`experiment`]: experiment configuration and drivers

pub mod config;
pub mod experiment;
pub mod numkit;
pub mod protomodel;
pub mod qualstats;
pub mod stream;
pub mod synthgen;
pub mod textenc;
pub mod trainer;
