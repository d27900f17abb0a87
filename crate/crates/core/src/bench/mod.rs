pub mod checkout;
pub mod dataset;
pub mod experiment;
pub mod export;
pub mod hits;
pub mod metrics;
