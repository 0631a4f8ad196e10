//! Zero-order Takagi-Sugeno-Kang compensator over a single switching variable.
//!
//! Each rule `r` fires with a triangular membership centered at `c_r`. The
//! output is the normalized weighted sum of the rule consequents, and the
//! consequents follow the gradient adaptation `Ḋ = ϕ s Ψ(s)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("at least two rules are required, got {0}")]
    TooFewRules(usize),
    #[error("rule centers must be strictly increasing")]
    UnsortedCenters,
    #[error("rule centers must be symmetric about zero")]
    AsymmetricCenters,
    #[error("membership half-width {half_width} leaves gaps between centers spaced {spacing}")]
    GappedMemberships { half_width: f64, spacing: f64 },
    #[error("invalid compensator parameter: {0}")]
    InvalidParameter(String),
}

/// One compensator axis: rule grid, consequents and adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyAxis {
    centers: Vec<f64>,
    half_width: f64,
    consequents: Vec<f64>,
    rate: f64,
    cap: f64,
}

impl FuzzyAxis {
    pub fn new(
        centers: Vec<f64>,
        half_width: f64,
        rate: f64,
        cap: f64,
    ) -> Result<Self, FuzzyError> {
        let n = centers.len();
        if n < 2 {
            return Err(FuzzyError::TooFewRules(n));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(FuzzyError::InvalidParameter(
                "non-finite rule center".into(),
            ));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FuzzyError::UnsortedCenters);
        }
        let scale = centers[n - 1].abs().max(1.0);
        let symmetric = (0..n).all(|i| (centers[i] + centers[n - 1 - i]).abs() <= 1e-12 * scale);
        if !symmetric {
            return Err(FuzzyError::AsymmetricCenters);
        }
        let spacing = centers.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if !(half_width >= spacing * (1.0 - 1e-12)) || !half_width.is_finite() {
            return Err(FuzzyError::GappedMemberships {
                half_width,
                spacing,
            });
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(FuzzyError::InvalidParameter(format!(
                "adaptation rate must be non-negative, got {rate}"
            )));
        }
        if !(cap > 0.0) {
            return Err(FuzzyError::InvalidParameter(format!(
                "output cap must be positive, got {cap}"
            )));
        }
        Ok(Self {
            consequents: vec![0.0; n],
            centers,
            half_width,
            rate,
            cap,
        })
    }

    /// `rules` centers spread evenly over `[−extent, extent]`, half-width equal
    /// to the spacing so adjacent memberships cross at 0.5.
    pub fn uniform(rules: usize, extent: f64, rate: f64, cap: f64) -> Result<Self, FuzzyError> {
        if rules < 2 {
            return Err(FuzzyError::TooFewRules(rules));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(FuzzyError::InvalidParameter(format!(
                "rule extent must be positive, got {extent}"
            )));
        }
        let spacing = 2.0 * extent / (rules - 1) as f64;
        let centers = (0..rules)
            .map(|i| {
                // Mirror the upper half so the grid is exactly symmetric.
                let j = i.min(rules - 1 - i);
                let c = -extent + spacing * j as f64;
                if 2 * i + 1 == rules {
                    0.0
                } else if i == j {
                    c
                } else {
                    -c
                }
            })
            .collect();
        Self::new(centers, spacing, rate, cap)
    }

    pub fn with_consequents(mut self, consequents: Vec<f64>) -> Result<Self, FuzzyError> {
        if consequents.len() != self.centers.len() {
            return Err(FuzzyError::InvalidParameter(format!(
                "expected {} consequents, got {}",
                self.centers.len(),
                consequents.len()
            )));
        }
        self.consequents = consequents
            .into_iter()
            .map(|d| d.clamp(-self.cap, self.cap))
            .collect();
        Ok(self)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn consequents(&self) -> &[f64] {
        &self.consequents
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn rules(&self) -> usize {
        self.centers.len()
    }

    /// Triangular firing strengths. Inputs beyond the outer centers are held
    /// at the nearest center so the boundary rule saturates at 1.
    pub fn firing_strengths(&self, s: f64) -> Vec<f64> {
        let lo = self.centers[0];
        let hi = self.centers[self.centers.len() - 1];
        let clamped = if s.is_nan() { 0.0 } else { s.clamp(lo, hi) };
        self.centers
            .iter()
            .map(|c| (1.0 - (clamped - c).abs() / self.half_width).max(0.0))
            .collect()
    }

    /// Normalized strengths `Ψ`.
    pub fn normalized_strengths(&self, s: f64) -> Vec<f64> {
        let mut w = self.firing_strengths(s);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    pub fn infer(&self, s: f64) -> f64 {
        let psi = self.normalized_strengths(s);
        let d: f64 = psi.iter().zip(&self.consequents).map(|(p, d)| p * d).sum();
        d.clamp(-self.cap, self.cap)
    }

    /// One explicit Euler step of the adaptation law.
    pub fn adapt(&self, s: f64, dt: f64) -> Self {
        let mut next = self.clone();
        next.adapt_in_place(s, dt);
        next
    }

    pub fn adapt_in_place(&mut self, s: f64, dt: f64) {
        if self.rate == 0.0 || s == 0.0 {
            return;
        }
        let psi = self.normalized_strengths(s);
        let gain = self.rate * s * dt;
        for (d, p) in self.consequents.iter_mut().zip(psi) {
            if p > 0.0 {
                *d = (*d + gain * p).clamp(-self.cap, self.cap);
            }
        }
    }
}
