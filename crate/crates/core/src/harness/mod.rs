//! Command implementations behind the `oam-tomo` binary, usable as a library.
//!
//! Every command takes a [`RunConfig`], writes its files under
//! `RunConfig::out_dir` and returns the record it wrote.

mod commands;
mod config;
mod report;
mod samples;

pub use commands::{
    calibrate, method1, method2, model_alpha, render, reproduce, scan_file_stem, scan_noiseless,
    scan_noisy_errors, standard_readings, summarize_noisy_scans, table_readings, table_row,
    table_run, CalibrationFile, CalibrationSetup, CliError, CurveRow, ImageFormat, Input,
    Method1Report, NoisyScanRow, NoisyScanSummary, Readings, RenderOptions, ReproduceTarget,
    Reproduction, ScanErrors, ScanReproduction, ScanRow, Session, TableReproduction,
    TableSummary, CALIBRATION_FILE, EXIT_ANALYSIS, EXIT_USAGE, METHOD1_CURVE, METHOD1_JSON,
    METHOD2_CSV, METHOD2_JSON,
};
pub use config::{
    ConfigError, GridConfig, LensConfig, Pipeline, ReproduceConfig, RunConfig, Tolerances,
};
pub use report::{round_to, write_csv, write_json, OutputError, Table1Row};
pub use samples::{meridian_sequence, parallel_sequence, table_targets, SamplePoint};
