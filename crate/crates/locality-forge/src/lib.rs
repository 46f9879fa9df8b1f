//! locality-forge: fusion systems (Frobenius P-categories) over small finite
//! p-groups, their basic bisets and localities, functor cohomology over the
//! exterior quotient, and the inductive construction of the perfect locality —
//! all verified exactly at desk scale against independent group-theoretic
//! oracles.
//!
//! Module map:
//! - [`zlin`]: exact integer linear algebra (Smith normal form, finite abelian
//!   groups); internal arithmetic backbone.
//! - [`group`]: enumerated permutation groups, subgroups, injective
//!   homomorphisms, catalog of ambient groups.
//! - [`fusion`]: fusion systems, axioms, exterior quotient, divisibility sets,
//!   intersections in the additive cover.
//! - [`biset`]: P×P-set arithmetic and the natural basic set.
//! - [`locality`]: localities, structural functors, the biset locality and its
//!   quotients up to the natural locality.
//! - [`cohomology`]: chains, cochains, differentials, H^n via integer SNF.
//! - [`perfect`]: localizers and the inductive perfect-locality construction
//!   with oracle comparison.
//! - [`cli`]: batch driver and JSON certificate emission.

pub mod biset;
pub mod cli;
pub mod cohomology;
pub mod fusion;
pub mod group;
pub mod locality;
pub mod perfect;
pub mod tgroup;
pub mod zlin;
