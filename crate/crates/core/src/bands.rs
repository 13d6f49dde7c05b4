//! Qualitative bands over a quantitative score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::Score;

/// One closed interval of a [`BandTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Band<S = Score> {
    #[serde(with = "crate::scalar::text")]
    pub lower: S,
    #[serde(with = "crate::scalar::text")]
    pub upper: S,
    pub label: String,
    #[serde(default)]
    pub guidance: String,
}

impl<S: Scalar> Band<S> {
    pub fn new(lower: S, upper: S, label: impl Into<String>, guidance: impl Into<String>) -> Self {
        Band { lower, upper, label: label.into(), guidance: guidance.into() }
    }
}

/// Sorted, disjoint intervals. Adjacent bands may leave a gap of at most one
/// unit (integer-edged tables such as `0–7, 8–15`); a score falling inside such
/// a gap belongs to the lower band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct BandTable<S = Score> {
    pub bands: Vec<Band<S>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BandError {
    #[error("score {score} is outside the band table coverage [{lower}, {upper}]")]
    OutOfRange { score: String, lower: String, upper: String },
    #[error("band table is empty")]
    Empty,
}

/// A violated table invariant; `index` is the offending band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandIssue {
    pub index: usize,
    pub message: String,
}

impl<S: Scalar> BandTable<S> {
    pub fn new(bands: Vec<Band<S>>) -> Self {
        BandTable { bands }
    }

    pub fn lower(&self) -> Option<&S> {
        self.bands.first().map(|b| &b.lower)
    }

    pub fn upper(&self) -> Option<&S> {
        self.bands.last().map(|b| &b.upper)
    }

    /// The band containing `score`.
    pub fn band_of(&self, score: &S) -> Result<&Band<S>, BandError> {
        let (Some(lo), Some(hi)) = (self.lower(), self.upper()) else {
            return Err(BandError::Empty);
        };
        if score < lo || score > hi {
            return Err(BandError::OutOfRange {
                score: score.to_text(),
                lower: lo.to_text(),
                upper: hi.to_text(),
            });
        }
        let idx = self.bands.iter().rposition(|b| b.lower <= *score).unwrap_or(0);
        Ok(&self.bands[idx])
    }

    /// Structural checks; `range` is the attainable score range when known.
    pub fn check(&self, range: Option<(&S, &S)>) -> Vec<BandIssue> {
        let mut issues = Vec::new();
        if self.bands.is_empty() {
            issues.push(BandIssue { index: 0, message: "band table is empty".into() });
            return issues;
        }
        let one = S::one();
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.lower.is_finite_value() && b.upper.is_finite_value()) {
                issues.push(BandIssue { index: i, message: "band bounds must be finite".into() });
            }
            if b.lower > b.upper {
                issues.push(BandIssue { index: i, message: format!("band `{}` has lower > upper", b.label) });
            }
            if b.label.trim().is_empty() {
                issues.push(BandIssue { index: i, message: "band label is empty".into() });
            }
            if i > 0 {
                let prev = &self.bands[i - 1];
                if b.lower <= prev.upper {
                    issues.push(BandIssue {
                        index: i,
                        message: format!("band `{}` overlaps or is not sorted after `{}`", b.label, prev.label),
                    });
                } else if b.lower.clone() - prev.upper.clone() > one {
                    issues.push(BandIssue {
                        index: i,
                        message: format!("gap between `{}` and `{}`", prev.label, b.label),
                    });
                }
            }
        }
        if let Some((lo, hi)) = range {
            let first = &self.bands[0];
            let last = &self.bands[self.bands.len() - 1];
            if first.lower > *lo || last.upper < *hi {
                issues.push(BandIssue {
                    index: 0,
                    message: format!(
                        "bands cover [{}, {}] but attainable range is [{}, {}]",
                        first.lower.to_text(),
                        last.upper.to_text(),
                        lo.to_text(),
                        hi.to_text()
                    ),
                });
            }
        }
        issues
    }
}
