//! Data-parallel execution switch.
//!
//! Hot loops (per date or per cell) go through these helpers. With the
//! `parallel` feature the work is spread over the rayon pool; without it, or
//! with [`Exec::Sequential`], the same closures run in order. Results never
//! depend on the mode: outputs are written by index and no floating-point
//! reduction crosses a task boundary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// `f(i)` for `i in 0..n`, collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Calls `f(i, chunk)` on consecutive `chunk_len`-sized pieces of `out`.
    pub fn fill_chunks<T, F>(self, out: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if chunk_len == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => out.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)),
            _ => out.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }
}
