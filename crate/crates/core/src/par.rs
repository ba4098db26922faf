//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) row loops and chunked reductions
//! run on the rayon global pool. Without it, or inside [`sequential`], the same
//! closures run in order on the calling thread. Work is always split into the
//! same chunks and reduced in chunk order, so both paths give bitwise identical
//! results.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with every helper in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let _reset = Reset(prev);
    f()
}

/// Whether the helpers will currently dispatch to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Calls `f(y, row)` for each `width`-long row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
        return;
    }
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Maps `0..n` through `f`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps each item of `items` through `f`, preserving order.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Fixed chunk length for reductions. Independent of the thread count.
pub const REDUCE_CHUNK: usize = 4096;

/// Splits `items` into [`REDUCE_CHUNK`]-sized chunks, maps each chunk through
/// `f` and returns the partial results in chunk order.
pub fn map_chunks<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&[I]) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_chunks(REDUCE_CHUNK).map(f).collect();
    }
    items.chunks(REDUCE_CHUNK).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_flag_is_scoped() {
        let outer = is_parallel();
        sequential(|| assert!(!is_parallel()));
        assert_eq!(is_parallel(), outer);
    }

    #[test]
    fn row_helper_visits_every_row_once() {
        let mut data = vec![0usize; 12];
        for_each_row(&mut data, 4, |y, row| {
            row.iter_mut().for_each(|v| *v += y + 1)
        });
        assert_eq!(data, vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
    }

    #[test]
    fn chunked_partials_match_between_paths() {
        let items: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let par: Vec<f64> = map_chunks(&items, |c| c.iter().sum());
        let seq: Vec<f64> = sequential(|| map_chunks(&items, |c| c.iter().sum()));
        assert_eq!(par.len(), 3);
        assert_eq!(par, seq);
    }
}
