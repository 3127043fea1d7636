//! Cell-level data parallelism. With the `parallel` feature (default) work is
//! spread over a rayon pool of the requested size; without it everything runs
//! on the calling thread.

/// Maps `f` over `items` preserving order, using up to `workers` threads.
#[cfg(feature = "parallel")]
pub fn map_cells<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 || items.len() <= 1 {
        return map_cells_sequential(items, f);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("could not build worker pool ({e}); running sequentially");
            map_cells_sequential(items, f)
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_cells<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_cells_sequential(items, f)
}

pub fn map_cells_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
