pub mod dataset;
pub mod models;
pub mod nn;
pub mod sim;
pub mod train;
