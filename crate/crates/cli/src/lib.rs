//! Experiment runner for the kicked Tonks-Girardeau gas: single runs,
//! phase-diagram scans, oracle checks and offline post-processing.

pub mod checks;
pub mod config;
pub mod output;
pub mod postprocess;
pub mod runner;
pub mod scan;

pub use config::RunConfig;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "TONKS_THREADS";

/// Sizes the global rayon pool; `None` leaves rayon's default.
pub fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
