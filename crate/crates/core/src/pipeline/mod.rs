//! Panel ingestion, per-year fitting, order analytics and synthetic data.

pub mod analytics;
pub mod annual;
pub mod dataset;
pub mod synthetic;

pub use analytics::{family_counts, optimal_order, predictor_ranks, FamilyCounts, OptimalOrder, OrderAnalytics};
pub use annual::{fit_annual_models, fit_slice, tau_pair, AnnualConfig, AnnualModelSet, ModelKind, TauPair};
pub use dataset::{load_grid_csv, read_grid_csv, GridDataset, Record, Schema, YearSlice};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticTruth};
