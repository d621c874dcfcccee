//! Benchmark problems: fairness-constrained logistic regression and
//! structured matrix completion, with generators and CSV ingestion.

mod fairness;
mod ingest;
mod matrix_completion;
mod synthetic;

pub use fairness::{FairClassificationProblem, FairData};
pub use ingest::{ingest_csv, load_csv, split_data, CsvSchema, FairSplit};
pub use matrix_completion::{MatrixCompletionProblem, McSample, Normalization};
pub use synthetic::{
    gen_synthetic_fairness, gen_synthetic_mc, synthetic_fairness_data, synthetic_mc_instance,
    McInstance, SyntheticFairnessConfig, SyntheticMcConfig,
};
