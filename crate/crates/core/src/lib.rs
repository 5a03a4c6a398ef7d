//! Instance-wise algorithm configuration for MILP solvers.
//!
//! The crate covers the full tuning pipeline:
//!
//! * [`milp`] / [`mps`]: MILP instance model, canonical JSON and MPS readers;
//! * [`graph`]: bipartite variable/constraint graph extraction with a fixed
//!   feature schema, the input representation for the predictor;
//! * [`configspace`]: emphasis-parameter enumeration, expansion-table
//!   deduplication and solver settings emission;
//! * [`perfdb`]: performance record store, instance × configuration
//!   aggregation and instance-wise target standardization;
//! * [`selector`]: greedy portfolio construction over a measured performance
//!   matrix, with a brute-force oracle;
//! * [`gnn`]: the bipartite graph convolution network that predicts
//!   per-configuration performance, plus training and serialization;
//! * [`cluster`]: the size-signature cluster predictor for heterogeneous
//!   instance sets;
//! * [`eval`]: primal-dual integrals from bound traces and candidate vs
//!   baseline comparison reports;
//! * [`harness`]: data collection over (instance, configuration, seed)
//!   through a process-level solver adapter, with a deterministic synthetic
//!   solver and instance generator for desk-scale runs;
//! * [`plot`]: self-contained SVG exports for reports and demos.

pub mod cluster;
pub mod configspace;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod milp;
pub mod mps;
pub mod perfdb;
pub mod plot;
pub mod rng;
pub mod selector;
