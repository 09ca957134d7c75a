pub mod output;
pub mod problem;
pub mod svg;
pub mod tasks;
