//! Error rate against a ground-truth mask.
//!
//! Only pixels that were unlabeled in the trimap are scored, and ground-truth
//! pixels that are neither pure background (0) nor pure foreground (255) are
//! treated as uncertain and skipped.

use serde::Serialize;

use crate::features::Grid;
use crate::knn::{LabelMap, TrimapCode, BACKGROUND, FOREGROUND};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthCode {
    Background,
    Foreground,
    Uncertain,
}

impl TruthCode {
    pub fn from_gray(value: u8) -> Self {
        match value {
            0 => Self::Background,
            255 => Self::Foreground,
            _ => Self::Uncertain,
        }
    }

    fn class(self) -> Option<u8> {
        match self {
            Self::Background => Some(BACKGROUND),
            Self::Foreground => Some(FOREGROUND),
            Self::Uncertain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    grid: Grid,
    codes: Vec<TruthCode>,
}

impl GroundTruth {
    pub fn from_gray(width: usize, height: usize, values: &[u8]) -> Result<Self> {
        if values.len() != width * height || values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} ground truth needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            grid: Grid { width, height },
            codes: values.iter().map(|&v| TruthCode::from_gray(v)).collect(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn codes(&self) -> &[TruthCode] {
        &self.codes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub error_rate: f64,
    pub evaluated: usize,
    pub wrong: usize,
    /// Foreground predicted as foreground.
    pub true_foreground: usize,
    pub true_background: usize,
    /// Background predicted as foreground.
    pub false_foreground: usize,
    pub false_background: usize,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        format!(
            "error_rate        {:.6}\n\
             evaluated         {}\n\
             wrong             {}\n\
             true_foreground   {}\n\
             true_background   {}\n\
             false_foreground  {}\n\
             false_background  {}\n",
            self.error_rate,
            self.evaluated,
            self.wrong,
            self.true_foreground,
            self.true_background,
            self.false_foreground,
            self.false_background
        )
    }
}

/// Scores per-pixel predicted classes (0 = background, 1 = foreground).
pub fn error_rate(predicted: &[u8], trimap: &LabelMap, truth: &GroundTruth) -> Result<EvalReport> {
    if trimap.grid() != truth.grid() || predicted.len() != truth.codes.len() {
        return Err(Error::InvalidInput(format!(
            "geometry mismatch: {} predictions, {}x{} trimap, {}x{} ground truth",
            predicted.len(),
            trimap.width(),
            trimap.height(),
            truth.grid.width,
            truth.grid.height
        )));
    }
    let mut r = EvalReport {
        error_rate: 0.0,
        evaluated: 0,
        wrong: 0,
        true_foreground: 0,
        true_background: 0,
        false_foreground: 0,
        false_background: 0,
    };
    for ((&pred, &code), &gt) in predicted.iter().zip(trimap.codes()).zip(&truth.codes) {
        if code != TrimapCode::Unlabeled {
            continue;
        }
        let Some(actual) = gt.class() else { continue };
        r.evaluated += 1;
        let pred_fg = pred != BACKGROUND;
        match (actual == FOREGROUND, pred_fg) {
            (true, true) => r.true_foreground += 1,
            (false, false) => r.true_background += 1,
            (false, true) => r.false_foreground += 1,
            (true, false) => r.false_background += 1,
        }
    }
    r.wrong = r.false_foreground + r.false_background;
    r.error_rate = if r.evaluated == 0 {
        0.0
    } else {
        r.wrong as f64 / r.evaluated as f64
    };
    Ok(r)
}
