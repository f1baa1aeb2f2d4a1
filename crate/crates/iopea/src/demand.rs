//! Demand model shared by the two inventory environments: an atom at zero
//! with probability γ, otherwise a draw from a named continuous distribution
//! truncated to `(0, support]`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

/// Continuous part of the demand mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandKind {
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// Normal with the given mean and standard deviation.
    Normal { mean: f64, std: f64 },
    /// Uniform over the whole support.
    Uniform,
}

/// `D = 0` with probability γ, else a truncated draw from the named
/// distribution on `(0, support]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// Pr(D = 0).
    pub gamma: f64,
    /// Upper end of the demand support.
    pub support: f64,
    #[serde(flatten)]
    pub kind: DemandKind,
}

impl DemandModel {
    pub fn new(gamma: f64, support: f64, kind: DemandKind) -> Self {
        assert!((0.0..1.0).contains(&gamma) && gamma > 0.0, "gamma must lie in (0,1)");
        assert!(support > 0.0, "demand support must be positive");
        Self { gamma, support, kind }
    }

    /// Degenerate all-zero demand (γ = 1), for structural tests.
    pub fn all_zero(support: f64) -> Self {
        Self { gamma: 1.0, support, kind: DemandKind::Uniform }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.gamma >= 1.0 || rng.gen::<f64>() < self.gamma {
            return 0.0;
        }
        match self.kind {
            DemandKind::Exponential { mean } => {
                let d = Exp::new(1.0 / mean).expect("positive rate");
                loop {
                    let x = d.sample(rng);
                    if x > 0.0 && x <= self.support {
                        return x;
                    }
                }
            }
            DemandKind::Normal { mean, std } => {
                let d = Normal::new(mean, std).expect("valid normal");
                loop {
                    let x = d.sample(rng);
                    if x > 0.0 && x <= self.support {
                        return x;
                    }
                }
            }
            DemandKind::Uniform => {
                let d = Uniform::new_inclusive(0.0, self.support);
                loop {
                    let x = d.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    fn rng() -> StreamRng {
        StreamKey::new(99, 0, 0, 0, Purpose::Explore).rng()
    }

    #[test]
    fn atom_frequency_close_to_gamma() {
        let m = DemandModel::new(0.3, 3.0, DemandKind::Exponential { mean: 1.0 });
        let mut r = rng();
        let n = 200_000;
        let zeros = (0..n).filter(|_| m.sample(&mut r) == 0.0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "zero-demand frequency {freq}");
    }

    #[test]
    fn positive_part_respects_support() {
        for kind in [
            DemandKind::Exponential { mean: 1.0 },
            DemandKind::Normal { mean: 1.0, std: 0.5 },
            DemandKind::Uniform,
        ] {
            let m = DemandModel::new(0.3, 3.0, kind);
            let mut r = rng();
            for _ in 0..10_000 {
                let d = m.sample(&mut r);
                assert!((0.0..=3.0).contains(&d));
            }
        }
    }

    #[test]
    fn all_zero_model() {
        let m = DemandModel::all_zero(3.0);
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(m.sample(&mut r), 0.0);
        }
    }
}
