pub mod evaluate;
pub mod generate;
pub mod graph;
pub mod predict;
pub mod report;
pub mod sweep;
pub mod train;
