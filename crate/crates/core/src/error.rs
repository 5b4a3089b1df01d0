//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Everything that can go wrong between reading a complex and reporting an
/// invariant.
///
/// Variants split into two families: validation errors (the input complex or
/// document is malformed) and numeric failures (the input is fine but some
/// geometric or linear-algebra quantity is degenerate). The CLI maps them to
/// different exit codes via [`Error::is_validation`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid gluing record: {0}")]
    InvalidGluing(String),
    #[error("complex is not closed: face {face} of tetrahedron {tet} {reason}")]
    NotClosed {
        tet: usize,
        face: usize,
        reason: &'static str,
    },
    #[error("face {face} of tetrahedron {tet} is glued to itself")]
    SelfGluedFace { tet: usize, face: usize },
    #[error("gluing records are not involutive at tetrahedron {tet} face {face}")]
    Inconsistent { tet: usize, face: usize },
    #[error("complex is not a closed 3-manifold: {0}")]
    NotManifold(String),
    #[error("complex is not orientable (parity clash at tetrahedron {tet} face {face})")]
    NonOrientable { tet: usize, face: usize },
    #[error("index {index} out of range for {what} (count {count})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        count: usize,
    },

    #[error("edge lengths admit no Euclidean tetrahedron")]
    NotRealizable,
    #[error("tetrahedron {tet} cannot be realized from its edge lengths")]
    NotRealizableTet { tet: usize },
    #[error("degenerate tetrahedron (6V = {six_volume:.3e} below threshold {threshold:.3e})")]
    DegenerateTetrahedron { six_volume: f64, threshold: f64 },
    #[error("tetrahedron {tet} is degenerate under the realization")]
    DegenerateTet { tet: usize },
    #[error("edges {a} and {b} are not in the required relative position")]
    WrongEdgeRelation { a: usize, b: usize },
    #[error("no coordinate given for vertex class {0}")]
    MissingCoordinate(usize),
    #[error("edge class {0} has zero length")]
    ZeroLengthEdge(usize),
    #[error("finite-difference step left the realizable region at tetrahedron {tet}")]
    StepNotRealizable { tet: usize },

    #[error("frame ({a}, {b}, {c}) is degenerate")]
    DegenerateFrame { a: usize, b: usize, c: usize },
    #[error("form degrees differ: {complement} edges outside the basis vs {chart} chart coordinates")]
    DegreeMismatch { complement: usize, chart: usize },
    #[error("length Jacobian is singular (condition number {condition:.3e})")]
    SingularJacobian { condition: f64 },
    #[error("invalid principal basis: {0}")]
    InvalidBasis(String),
    #[error("basis exchange is invalid: {0}")]
    InvalidExchange(String),
    #[error("rank decision is ambiguous: pivoting found {pivoted}, singular values give {svd}")]
    RankAmbiguous { pivoted: usize, svd: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("could not sample a nondegenerate realization in {0} attempts")]
    SamplingFailed(usize),

    #[error("move would create a degenerate tetrahedron: {0}")]
    DegenerateMove(String),
    #[error("both sides of face class {0} belong to the same tetrahedron")]
    SameTetrahedron(usize),
    #[error("move is not applicable: {0}")]
    NotRemovable(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported format tag {0:?}")]
    SchemaVersionUnsupported(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGluing(_)
                | Error::NotClosed { .. }
                | Error::SelfGluedFace { .. }
                | Error::Inconsistent { .. }
                | Error::NotManifold(_)
                | Error::NonOrientable { .. }
                | Error::IndexOutOfRange { .. }
                | Error::MissingCoordinate(_)
                | Error::Parse { .. }
                | Error::SchemaVersionUnsupported(_)
                | Error::InvalidBasis(_)
                | Error::InvalidExchange(_)
                | Error::SameTetrahedron(_)
                | Error::NotRemovable(_)
                | Error::WrongEdgeRelation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
