use crate::error::Result;

/// Maps `f` over `0..n` into a fresh vector. The first error by index wins,
/// so failures are reported the same way for any worker count.
pub(crate) fn par_map_result<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let out: Vec<Result<T>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<T>> = (0..n).map(f).collect();
    out.into_iter().collect()
}

/// Runs `f` on a pool with `threads` workers (0 = default).
pub(crate) fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build thread pool ({e}), using the global one");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(not(target_arch = "wasm32"))]
pub(crate) struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

// no monotonic clock on bare wasm
#[cfg(target_arch = "wasm32")]
pub(crate) struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    pub(crate) fn start() -> Self {
        Stopwatch
    }

    pub(crate) fn ms(&self) -> f64 {
        0.0
    }
}
