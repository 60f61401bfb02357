//! Error-probability analysis and particle simulation of cooperative
//! molecular communication: one transmitter, K passive receivers making
//! local hard decisions, and a fusion center combining the reported
//! decisions with an N-out-of-K rule.

pub mod channel;
pub mod cli;
pub mod detection;
pub mod evaluator;
pub mod experiments;
pub mod fusion;
pub mod model;
pub mod sim;
