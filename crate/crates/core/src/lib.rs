pub mod adversary;
pub mod authenticator;
pub mod bench;
pub mod codec;
pub mod dataset;
pub mod feasibility;
pub mod fmh;
pub mod hash;
pub mod itree;
pub mod mesh;
pub mod query;
pub mod ranking;
pub mod scalar;
pub mod server;
pub mod sign;
pub mod verifier;
