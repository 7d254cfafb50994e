//! Seeded rejection sampling of valid populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::population::{validate, youden, PopulationSpec};

/// Covariances never leave [-0.25, 0.25] under the box constraints.
const COV_RANGE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Force xi = eps = 0.
    pub hci: bool,
    /// Draw a single covariance and use it for both classes.
    pub equal_covariances: bool,
    /// Reject specs whose prevalence is at or above this value.
    pub eta_max: f64,
    /// Require a positive Youden index for Z1 and Z2 as well.
    pub informative_references: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            hci: false,
            equal_covariances: false,
            eta_max: 1.0,
            informative_references: false,
        }
    }
}

impl SamplerConfig {
    pub fn hci() -> Self {
        SamplerConfig {
            hci: true,
            ..Default::default()
        }
    }

    fn accepts(&self, spec: &PopulationSpec) -> bool {
        if spec.eta >= self.eta_max {
            return false;
        }
        if self.informative_references
            && !(youden(spec.se_z1, spec.sp_z1).is_informative()
                && youden(spec.se_z2, spec.sp_z2).is_informative())
        {
            return false;
        }
        validate(spec).is_empty()
    }
}

/// Deterministic stream of valid specs drawn uniformly from the region
/// described by `config`.
pub struct SpecSampler {
    rng: ChaCha8Rng,
    config: SamplerConfig,
}

impl SpecSampler {
    pub fn new(seed: u64, config: SamplerConfig) -> Self {
        SpecSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        }
    }

    fn draw(&mut self) -> PopulationSpec {
        let mut unit = || self.rng.random::<f64>();
        let mut spec = PopulationSpec {
            se_x: unit(),
            sp_x: unit(),
            se_z1: unit(),
            sp_z1: unit(),
            se_z2: unit(),
            sp_z2: unit(),
            eta: unit(),
            xi: 0.0,
            eps: 0.0,
        };
        if !self.config.hci {
            spec.xi = self.rng.random_range(-COV_RANGE..COV_RANGE);
            spec.eps = if self.config.equal_covariances {
                spec.xi
            } else {
                self.rng.random_range(-COV_RANGE..COV_RANGE)
            };
        }
        spec
    }
}

impl Iterator for SpecSampler {
    type Item = PopulationSpec;

    fn next(&mut self) -> Option<PopulationSpec> {
        loop {
            let spec = self.draw();
            if spec.eta > 0.0 && self.config.accepts(&spec) {
                return Some(spec);
            }
        }
    }
}

pub fn sample_specs(seed: u64, n: usize, config: SamplerConfig) -> Vec<PopulationSpec> {
    SpecSampler::new(seed, config).take(n).collect()
}
