//! Matches, rating fits, ablation grids and embedding dumps.

mod embeddings;
mod grid;
mod matches;
mod stats;

pub use embeddings::{
    dump_embeddings, embeddings_csv, sig6, triplet_success, triplet_success_from_csv, triplet_success_from_rows,
    EmbeddingRow, Role,
};
pub use grid::{ablation_grid, AblationSpec, Axis, Grid, GridCell};
pub use matches::{check_agent, run_match, EvalError, MatchGame, MatchResult, MatchSpec};
pub use stats::{elo_fit, win_rate_ci, EloTable, PairResult, StatsError, ELO_TOLERANCE};
