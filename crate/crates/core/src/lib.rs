//! Multinomial Naive Bayes text classification from partially labeled data:
//! documents known to belong to a class, and documents known only *not* to
//! belong to one or more classes.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod labeling;
pub mod rng;
pub mod theory;

pub use classifier::{evaluate, log_score, predict, predict_all, EvalReport, Prediction};
pub use corpus::{build_vocabulary, load_corpus, tokenize, vectorize, CorpusFormat, DocVector, RawDocument, Vocabulary};
pub use error::{Error, Result};
pub use estimators::{
    estimate_l1, estimate_l2, estimate_nb, estimate_self_correct, fit, ClassParams, EstimatorConfig, EstimatorKind,
    Model, PriorMode,
};
pub use experiments::{run_experiment, ExperimentReport, ExperimentSpec, Preset};
pub use labeling::{
    make_s1_record, split_dataset, synthesize_negative_labels, ClassSet, LabeledRecord, Origin, PartialDataset, Split,
};
pub use theory::{
    analytic_l1_bias, analytic_l2_expectation, analytic_l2_variance, analytic_nb_variance, convergence_study,
    generate_document, generate_synthetic_dataset, monte_carlo_stats, EstimatorStats, SyntheticSpec,
};
