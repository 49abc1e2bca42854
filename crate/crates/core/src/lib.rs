pub mod cli;
pub mod conjunction;
pub mod error;
pub mod ingest;
pub mod orbital;
pub mod simulator;
pub mod stability;
