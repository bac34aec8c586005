pub mod channel;
pub mod cli;
pub mod codec;
pub mod corpus;
pub mod curriculum;
pub mod grammar;
pub mod lm;
pub mod metrics;
pub mod perturb;
pub mod stats;
