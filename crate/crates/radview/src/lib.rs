//! File formats, configuration, reports and the command-line front end for
//! the radiograph view-classification pipeline.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dicom;
pub mod pgm;
pub mod ppm;
pub mod records;
pub mod report;
