//! Imperfections of the photonic apparatus: partial distinguishability and
//! spurious coincidences from multi-pair emission and accidentals.

use serde::{Deserialize, Serialize};

use super::OpticsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Visibility between photons of the same down-conversion pair.
    pub visibility_intra: f64,
    /// Visibility between photons of different pairs.
    pub visibility_inter: f64,
    /// Spurious coincidences from double-pair emission, per unit exposure.
    pub double_pair_rate: f64,
    /// Spurious coincidences from uncorrelated photons and dark counts, per
    /// unit exposure.
    pub accidental_rate: f64,
}

/// Measured interference contrasts of the photon source.
pub const VISIBILITY_INTRA: f64 = 0.970;
pub const VISIBILITY_INTER: f64 = 0.900;

impl NoiseParams {
    pub fn ideal() -> Self {
        Self {
            visibility_intra: 1.0,
            visibility_inter: 1.0,
            double_pair_rate: 0.0,
            accidental_rate: 0.0,
        }
    }

    /// Measured visibilities and no background.
    pub fn visibility_only() -> Self {
        Self {
            visibility_intra: VISIBILITY_INTRA,
            visibility_inter: VISIBILITY_INTER,
            ..Self::ideal()
        }
    }

    pub fn with_rates(self, double_pair_rate: f64, accidental_rate: f64) -> Self {
        Self {
            double_pair_rate,
            accidental_rate,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        for (name, v) in [
            ("visibility_intra", self.visibility_intra),
            ("visibility_inter", self.visibility_inter),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(OpticsError::BadParameter { name, value: v });
            }
        }
        for (name, v) in [
            ("double_pair_rate", self.double_pair_rate),
            ("accidental_rate", self.accidental_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(OpticsError::BadParameter { name, value: v });
            }
        }
        Ok(())
    }

    pub fn has_background(&self) -> bool {
        self.double_pair_rate > 0.0 || self.accidental_rate > 0.0
    }
}

/// How strongly a post-selected experiment is exposed to spurious events.
/// Background relative to signal grows as the post-selection probability
/// shrinks, with the number of down-conversion pairs (double-pair emission)
/// and with the number of detectors in the coincidence (accidentals).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub pairs: usize,
    pub detectors: usize,
    pub success_probability: f64,
}

impl Exposure {
    pub fn double_pair(&self) -> f64 {
        self.pairs as f64 / self.success_probability
    }

    pub fn accidental(&self) -> f64 {
        self.detectors.saturating_sub(1) as f64 / self.success_probability
    }

    /// Expected spurious events per signal event.
    pub fn background_ratio(&self, noise: &NoiseParams) -> f64 {
        noise.double_pair_rate * self.double_pair() + noise.accidental_rate * self.accidental()
    }
}

/// Expected spurious counts per outcome for a setting that recorded
/// `signal_counts`. Both mechanisms produce photons uncorrelated with the
/// encoded qubit, so their counts spread uniformly over the outcomes.
pub fn background_model(
    signal_counts: &[f64],
    noise: &NoiseParams,
    exposure: &Exposure,
) -> Result<Vec<f64>, OpticsError> {
    noise.validate()?;
    if signal_counts.is_empty() {
        return Ok(Vec::new());
    }
    let total: f64 = signal_counts.iter().sum();
    let per_outcome = total * exposure.background_ratio(noise) / signal_counts.len() as f64;
    Ok(vec![per_outcome; signal_counts.len()])
}

/// `max(raw - expected, 0)` element-wise.
pub fn background_subtract(raw: &[f64], expected: &[f64]) -> Vec<f64> {
    raw.iter().zip(expected).map(|(r, e)| (r - e).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPOSURE: Exposure = Exposure {
        pairs: 1,
        detectors: 2,
        success_probability: 1.0 / 9.0,
    };

    #[test]
    fn no_rates_no_background() {
        let b = background_model(&[10.0, 30.0], &NoiseParams::visibility_only(), &EXPOSURE).unwrap();
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn accidentals_are_uniform() {
        let noise = NoiseParams::ideal().with_rates(0.0, 0.01);
        let b = background_model(&[100.0, 0.0, 50.0, 250.0], &noise, &EXPOSURE).unwrap();
        assert!(b.iter().all(|&x| (x - b[0]).abs() < 1e-12 && x > 0.0));
    }

    #[test]
    fn double_pair_component_is_linear() {
        let one = NoiseParams::ideal().with_rates(0.01, 0.0);
        let two = NoiseParams::ideal().with_rates(0.02, 0.0);
        let b1 = background_model(&[40.0, 60.0], &one, &EXPOSURE).unwrap();
        let b2 = background_model(&[40.0, 60.0], &two, &EXPOSURE).unwrap();
        for (x, y) in b1.iter().zip(&b2) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_rates_are_rejected() {
        let bad = NoiseParams::ideal().with_rates(-0.1, 0.0);
        assert!(background_model(&[1.0], &bad, &EXPOSURE).is_err());
    }

    #[test]
    fn subtraction_examples() {
        assert_eq!(background_subtract(&[5.0, 3.0], &[0.0, 0.0]), vec![5.0, 3.0]);
        assert_eq!(background_subtract(&[5.0, 3.0], &[5.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(background_subtract(&[1.0, 3.0], &[2.0, 2.0]), vec![0.0, 1.0]);
    }
}
