//! Benchmark data-generating designs and replicate orchestration.

mod generate;
mod replicate;

pub use generate::{
    f_a, f_r, generate, ml_m0, Config, Generated, GeneratorSpec, Oracle, HdGaussianDesign, ZETA_A, ZETA_R,
};
pub use replicate::{aggregate, run_replicates, Estimate, Estimator, ReplicateRecord, SimReport, Summary};
