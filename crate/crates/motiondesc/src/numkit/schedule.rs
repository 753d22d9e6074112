//! Per-epoch learning rate: linear warmup, then cosine decay to zero.

use super::NumError;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

impl Schedule {
    pub fn new(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> Self {
        assert!(base_lr >= 0.0, "base_lr must be non-negative");
        assert!(warmup_epochs <= total_epochs, "warmup exceeds total epochs");
        Schedule {
            base_lr,
            warmup_epochs,
            total_epochs,
        }
    }

    /// Learning rate for `epoch` (0-indexed). During warmup the rate ramps
    /// linearly to `base_lr`, reaching it at epoch `warmup_epochs - 1`; from
    /// `warmup_epochs` on it follows a half cosine down to zero.
    pub fn lr_at(&self, epoch: usize) -> Result<f64, NumError> {
        if epoch >= self.total_epochs {
            return Err(NumError::EpochOutOfRange {
                epoch,
                total: self.total_epochs,
            });
        }
        if epoch < self.warmup_epochs {
            return Ok(self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64);
        }
        let span = (self.total_epochs - self.warmup_epochs) as f64;
        let phase = (epoch - self.warmup_epochs) as f64 / span;
        Ok(self.base_lr * 0.5 * (1.0 + (PI * phase).cos()))
    }
}
