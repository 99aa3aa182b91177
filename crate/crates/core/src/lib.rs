pub mod adam;
pub mod autodiff;
pub mod field;
pub mod geometry;
pub mod scene;
pub mod trajectory;
pub mod losses;
pub mod optimizer;
pub mod harness;
pub mod config;
pub mod svg;
pub mod report;
pub mod cli;
