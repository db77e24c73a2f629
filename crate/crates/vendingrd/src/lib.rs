//! Command-line front end: JSON spec and policy documents, closed-form
//! tables, sweeps and simulations written as CSV with a JSON run manifest.

pub mod commands;
mod error;
pub mod format;
pub mod output;

pub use error::CliError;

/// Caps the rayon pool at `VENDINGRD_THREADS` workers when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VENDINGRD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("VENDINGRD_THREADS: expected a positive integer, found `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("VENDINGRD_THREADS: {e}")))
}
