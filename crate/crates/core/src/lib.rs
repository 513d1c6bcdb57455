pub mod cli;
pub mod controllers;
pub mod error;
pub mod graph;
pub mod models;
pub mod observers;
pub mod sim;
pub mod stability;
