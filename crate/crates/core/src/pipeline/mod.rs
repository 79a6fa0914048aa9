//! Ingestion, preprocessing, fold splitting and synthetic data.

pub mod preprocess;
pub mod schema;
pub mod split;
pub mod synthetic;
pub mod table;

pub use preprocess::{preprocess, write_features_csv, ColumnStats, PreprocessStats};
pub use schema::{ColumnKind, ColumnSpec, DatasetSchema};
pub use split::{kfold_split, train_val_split, FoldSplit};
pub use synthetic::{generate_records, generate_synthetic, SyntheticConfig};
pub use table::{load_csv, read_csv, ColumnData, FeatureColumn, RawTable};
