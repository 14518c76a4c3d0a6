//! Predictor contract, reference models and tabular ingestion.

mod dataset;
mod predictor;
mod reference;

pub use dataset::{ingest_csv, parse_csv, ColumnStats, Dataset, SchemaHints, TabularSchema};
pub use predictor::{
    check_probabilities, BowTextClassifier, CountingPredictor, FnPredictor, LinearTabular, NetworkPredictor,
    Predictor, Probabilities,
};
pub use reference::{
    build_reference_cnn, build_reference_cnn_planted, planted_quadrant, REFERENCE_CLASSES, REFERENCE_INPUT,
    REFERENCE_LAYER_NAMES,
};
