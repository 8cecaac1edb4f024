//! Global single-drug supply chain design under geopolitical strain.
//!
//! The crate solves a two-stage stochastic program: plants are located
//! first, then capacities, demand and export bans are realized and the
//! drug is produced and shipped (or goes short). Expected recourse is
//! approximated by sampling and the sampled problems are solved with an
//! L-shaped (Benders) loop whose subproblems are min-cost transshipment
//! networks.
//!
//! Module map:
//!
//! * [`model`]: instance data, designs, instance file format, synthetic generator
//! * [`scenario`]: the sampling sequence of events, retained exports and price escalation
//! * [`flow`]: a small primal-dual min-cost flow engine with node potentials
//! * [`recourse`]: the second-stage LP, its duals, cut terms and structural checks
//! * [`lshaped`]: master problem and the aggregated-cut loop
//! * [`saa`]: replications, statistical bounds and design evaluation
//! * [`stats`]: Student-t and normal critical values
//! * [`policy`]: experiment families (export-ban cases, alliances, pricing, back-shoring, sensitivity)
//! * [`report`]: run artifacts and their JSON/CSV serialization

// Parallel-array index loops; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod lshaped;
pub mod model;
pub mod policy;
pub mod recourse;
pub mod report;
pub mod rng;
pub mod saa;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    generate_synthetic_instance, load_instance, validate_design, write_instance, CountryId, Design,
    IncomeLevel, Instance, InstanceFile, Pmf, RiskProfile, SyntheticSpec,
};
pub use recourse::{solve_recourse, DualVector, RecourseSolution};
pub use scenario::{sample_batch, sample_scenario, RiskOverrides, Scenario};
