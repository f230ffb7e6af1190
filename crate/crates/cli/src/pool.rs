//! Worker-count plumbing over the library's execution switch.

use freqgen::par::Exec;

/// Runs `f` with at most `workers` threads (`None` uses every core).
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce(Exec) -> T + Send) -> T {
    match workers {
        Some(1) => f(Exec::Sequential),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| f(Exec::Auto)),
            Err(e) => {
                log::warn!("cannot build a {n}-thread pool ({e}); using the global pool");
                f(Exec::Auto)
            }
        },
        None => f(Exec::Auto),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce(Exec) -> T + Send) -> T {
    f(Exec::Sequential)
}
