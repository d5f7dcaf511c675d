//! Federated training: data, model, partitioning, local SGD, aggregation
//! schemes and the round loop.

pub mod aggregators;
pub mod data;
pub mod experiment;
pub mod model;
pub mod partition;
pub mod train;
