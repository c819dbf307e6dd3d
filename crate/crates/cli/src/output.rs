use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{CliError, Result};

/// Environment variable bounding the worker thread count.
pub const THREADS_VAR: &str = "QOSGAME_THREADS";

/// Thread pool sized from [`THREADS_VAR`]; unset or `0` lets rayon decide.
pub fn thread_pool() -> Result<ThreadPool> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            CliError::Config(format!(
                "{THREADS_VAR} must be a non-negative integer, got `{v}`"
            ))
        })?,
        Err(_) => 0,
    };
    ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))
}

/// CSV writer with LF line endings.
pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_db(x: f64) -> f64 {
    qosgame::units::to_db(x)
}
