//! Exact group arithmetic and Monte Carlo machinery for random walks on the
//! free group F2 and the lamplighter Z wr Z/2Z, driven by randomized stopping
//! times.
//!
//! The crate has three layers:
//!
//! * exact algebra: reduced words ([`group::FreeWord`]), lamplighter elements
//!   ([`group::LampElem`]) and the projection homomorphisms between them;
//! * stopping machinery: heavy-tailed record measures, lamp-clearing stopping
//!   times, their inductive calibration, and the mixture measure they define
//!   ([`stopping`]); switching-element certification and hash-thinned
//!   switch-hitting stopping times ([`switching`]); scales, ladders and
//!   despiking forests ([`switching::ladder`]);
//! * estimators: trajectory simulation, boundary cylinder histograms, lamp
//!   stabilization, harmonicity tests and entropy profiles ([`walks`]).
//!
//! Every estimator is deterministic given a master seed: per-trial generators
//! are derived by hashing `(seed, stream, trial)`, so results do not depend on
//! thread count or scheduling.

pub mod group;
pub mod measures;
pub mod report;
pub mod seeding;
pub mod stats;
pub mod stopping;
pub mod switching;
pub mod walks;
