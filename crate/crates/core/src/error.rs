use thiserror::Error;

/// Errors surfaced by the arithmetic layers and the height pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a unit: {0} is divisible by the residue prime")]
    NotAUnit(String),
    #[error("modulus mismatch between operands")]
    ModulusMismatch,
    #[error("series coefficient at index {index} is not divisible by p^{required}; cannot integrate")]
    NotIntegrable { index: usize, required: u32 },
    #[error("curve has bad reduction at p = {0}")]
    BadReduction(String),
    #[error("cubic has a repeated root mod p; Frobenius lift undefined")]
    SingularReduction,
    #[error("top-right Frobenius entry vanishes at full precision; column completion degenerate")]
    DegenerateColumn,
    #[error("division-polynomial modulus must be odd and >= 3")]
    EvenModulus,
    #[error("psi_m vanishes exactly: mQ is the point at infinity (torsion collapse)")]
    TorsionCollapse,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("p does not divide d(mQ); condition (A1) fails for the multiple (check n)")]
    A1Violated,
    #[error("point fails condition (A2) at bad prime {0} (check the supplied Tamagawa LCM)")]
    A2Violated(String),
    #[error("curve does not have good ordinary reduction at p = {0}")]
    NotGoodOrdinary(String),
    #[error("point is torsion; its height is not computed")]
    TorsionPoint,
    #[error("discriminant has a composite cofactor above 2^64 after trial division")]
    FactorizationTooHard,
    #[error("point counting budget exceeded for p = {0}")]
    EnumerationBudget(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
