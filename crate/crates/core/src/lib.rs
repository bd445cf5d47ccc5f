//! Exact falsification checks for instrument validity.
//!
//! Given a binned joint law of (outcome `Y`, treatment `X`, instrument `Z`),
//! decide whether some distribution over instrument-response types explains
//! the treatment shares while respecting declared restrictions and the
//! overlap bounds implied by exclusion. All arithmetic is exact.
//!
//! The modules are generic over a [`Scalar`]; the aliases below fix it to
//! arbitrary-precision rationals.

pub mod config;
pub mod error;
pub mod feasibility;
pub mod flownet;
pub mod fosd;
pub mod obs;
pub mod psi;
pub mod report;
pub mod scalar;
pub mod selfcheck;
pub mod simulate;
pub mod submono;
pub mod subset;
pub mod typespace;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use subset::Subset;

pub use feasibility::{brute_force_oracle, solve_feasibility, verify_certificate, verify_witness, OracleAnswer, RowKind, Sense, Status};
pub use fosd::{classify, corollary1_report, enumerate_part1, enumerate_part2, BinaryRelation, Case, FosdCaps};
pub use psi::{pointwise_min, psi_mass, psi_table, PsiCaps};
pub use typespace::{Preset, DEFAULT_TYPE_CAP};

pub type Rational = num_rational::BigRational;

pub type Support = obs::Support<Rational>;
pub type ObservedDistribution = obs::ObservedDistribution<Rational>;
pub type PsiTable = psi::PsiTable<Rational>;
pub type TypeDistribution = typespace::TypeDistribution<Rational>;
pub type RestrictionSpec = typespace::RestrictionSpec<Rational>;
pub type LinearSystem = feasibility::LinearSystem<Rational>;
pub type FeasibilityResult = feasibility::FeasibilityResult<Rational>;
pub type FlowNetwork = flownet::FlowNetwork<Rational>;
pub type Cut = flownet::Cut<Rational>;
pub type InequalityRecord = fosd::InequalityRecord<Rational>;
pub type DgpSpec = simulate::DgpSpec<Rational>;

/// Parses `"p/q"`, an integer or a decimal into a [`Rational`].
pub fn rational(s: &str) -> Option<Rational> {
    Rational::parse_exact(s)
}
