#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod bounds;
pub mod density;
pub mod divergence;
pub mod error;
pub mod holder;
pub mod hypothesis;
pub mod learning;
pub mod quadrature;
pub mod rng;
pub mod rosenblatt;

pub use error::{Error, Result};
pub use bounds::{BoundInputs, BoundReport, RhoMetricParams};
pub use density::{families::DensitySpec, Density, GridDensity};
pub use divergence::DiscriminatorFn;
pub use hypothesis::{EpsNet, FamilyKind, GeneratorFamily, GeneratorParams, HypothesisConfig};
pub use learning::{
    FitOptions, MinimaxResult, NetEvaluator, NetPair, NetSpec, RateOptions, RateReport, Strategy, Target,
    TrainingSample,
};
pub use quadrature::{EvalGrid, QuadRule};
pub use rosenblatt::{Direction, PointSet, TriangularMap};
