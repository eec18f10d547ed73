//! Worker-pool setup. The harness owns the only thread pool in the
//! process; library code parallelizes through rayon's current pool and
//! never spawns workers of its own. Results are reduced in a fixed
//! order, so the thread count never changes any output bit.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FEEDBACKLAB_THREADS";

/// Reads the thread cap from the environment; `None` means "let rayon
/// pick" (one worker per logical CPU).
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
}

/// Installs the global rayon pool honoring [`THREADS_ENV`]. Safe to call
/// more than once; later calls are no-ops (the first pool wins).
pub fn init_global_pool() {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_cap() {
        builder = builder.num_threads(k);
    }
    // An Err here means a pool already exists, which is fine.
    let _ = builder.build_global();
}
