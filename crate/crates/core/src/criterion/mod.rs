//! Noise-robust two-setting steering criterion.
//!
//! Measured game data are mapped onto a great-circle cut of Bob's Bloch
//! sphere (the "plane"), whose z-axis is Bob's analyzer axis for the joint
//! measurement. In that plane:
//!
//! * the two NCS-check conditional states lie on chords `tau1`, `tau2`
//!   perpendicular to the announced-state axes `M1`, `M2`;
//! * the two joint-measurement conditional states have known heights `h3`
//!   (Alice's winning outcome) and `h4` (the other one).
//!
//! After the chords are symmetrized about the z-axis, steering is certified
//! when `|OB| - |OG| > 0` over the whole error box.

mod geometry;
mod lhs;
mod record;
mod verdict;

pub use geometry::{
    criterion_value, criterion_value_with_slack, symmetrize, CriterionPoint, PlanePoint,
    SymmetrizedRecord,
};
pub use lhs::{
    lhs_oracle, symmetrize_lhs_model, Branch, ConditionalPlane, HiddenState, LhsModel, Response,
};
pub use record::{build_geometric_record, GeometricRecord, RecordErrors};
pub use verdict::{delta_prime, delta_prime_with, DeltaPrimeOptions, SteeringVerdict};

/// Default points per axis for the brute-force LHS oracle.
pub const DEFAULT_ORACLE_GRID: usize = 2001;
