//! # pboihs
//!
//! Exact pseudo-Boolean (0-1 integer linear) optimization built around the
//! implicit hitting set loop: a conflict-driven PB decision oracle extracts
//! cores, interchangeable hitting-set backends (solution-improving search,
//! core-guided reformulation, core-boosted search, stochastic local search
//! and certified hybrids) optimize over the accumulated cores, and the whole
//! run can be logged as a cutting-planes proof that an independent checker
//! replays.

pub mod certify;
pub mod driver;
pub mod exhaustive;
pub mod families;
pub mod hs;
pub mod opb;
pub mod oracle;
pub mod pb;
pub mod sls;

pub use pb::{
    Assignment, Bounds, ConstraintId, Core, Instance, Int, Lit, Objective, PbConstraint,
    Relation, Var,
};
