//! Command-line front end of `thzsim`.

pub mod checks;
pub mod commands;
pub mod manifest;

/// Default config file when `--config` is not given.
pub const CONFIG_ENV: &str = "THZSIM_CONFIG";
