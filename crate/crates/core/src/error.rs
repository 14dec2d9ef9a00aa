use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("SCF did not converge after {iterations} iterations (commutator norm {residual:.3e})")]
    ScfNotConverged { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate orbital energies for ({i}, {j}, {a}, {b}): denominator {denominator:.3e}")]
    Degenerate {
        i: usize,
        j: usize,
        a: usize,
        b: usize,
        denominator: f64,
    },

    #[error("degenerate Fermi level: gap {gap:.3e} eV")]
    DegenerateFermiLevel { gap: f64 },

    #[error("gate {index} ({gate}) does not conserve particle number per spin sector")]
    NonConservingGate { index: usize, gate: String },

    #[error("resource guard exceeded: {0}")]
    Guard(String),

    #[error("Davidson did not converge after {iterations} iterations (residual {residual:.3e})")]
    DavidsonNotConverged { iterations: usize, residual: f64 },

    #[error("determinant outside sector: {0}")]
    OutsideSector(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
