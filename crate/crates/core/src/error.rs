use crate::graph::{Color, EdgeId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown edge id {0}")]
    UnknownEdge(EdgeId),
    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("edge {0} is uncolored")]
    UncoloredEdge(EdgeId),
    #[error("improper coloring: edges {0} and {1} share color {2}")]
    ImproperColoring(EdgeId, EdgeId, Color),
    #[error("edge {0} was already processed")]
    AlreadyProcessed(EdgeId),
    #[error("stored tuple missing for arrived edge {0}")]
    MissingTuple(EdgeId),
    #[error("infeasible outcome: {0}")]
    Infeasible(String),
    #[error("locality violation: step at edge {center} read edge {edge} outside radius {limit}")]
    LocalityViolation {
        center: EdgeId,
        edge: EdgeId,
        limit: usize,
    },
    #[error("lazy reconstruction disagrees with eager state at edge {0}")]
    LazyMismatch(EdgeId),
    #[error("estimator breach at edge {edge}: every outcome increases the potential\n{dump}")]
    EstimatorBreach { edge: EdgeId, dump: String },
    #[error("exact enumeration refused: family cardinality exceeds the budget of {budget} martingales")]
    BudgetExceeded { budget: u64 },
    #[error("step counter of {term} exceeded its bound N = {bound}")]
    StepOverflow { term: String, bound: f64 },
    #[error("schedule class {class} contains conflicting edges {e} and {f}")]
    ConflictInClass { class: usize, e: EdgeId, f: EdgeId },
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("round cap {cap} exceeded after {rounds} rounds")]
    RoundCap { cap: usize, rounds: usize },
    #[error("grid denominator Delta^10 overflows for Delta = {0}")]
    GridOverflow(usize),
    #[error("tuple of edge {0} not delivered before use")]
    Undelivered(EdgeId),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
