//! Accuracy deviations of an index test evaluated without a gold standard.
//!
//! Four reference-based methods (an imperfect reference, two composite
//! references and discrepant analysis) and a three-test latent class model
//! are evaluated in closed form, with an optional conditional dependence
//! between the index test and the first reference test.

pub mod error;
pub mod format;
pub mod lcm;
pub mod methods;
pub mod oracle;
pub mod population;
pub mod sampling;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use lcm::{EtaSource, LcmDeviation, LcmEstimate, MomentSet, Scenario};
pub use methods::{evaluate, MethodId, MethodResult, TildeReference};
pub use population::{
    admissible_bounds, joint_distribution, validate, youden, BoundsContext, CovarianceBounds,
    JointDistribution, PopulationSpec, ValidationReport,
};
pub use sweep::{
    export, find_crossovers, import, sweep, Crossover, ExportFormat, Quantity, SweepAxis,
    SweepParam, SweepResult,
};
