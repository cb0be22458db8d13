//! Index-ordered fan-out over path ranges.
//!
//! With the `parallel` feature the work runs on a rayon pool of the requested
//! size; without it everything runs on the calling thread. Either way the
//! output vector is ordered by index, so downstream reductions see the same
//! sequence regardless of scheduling.

use std::ops::Range;

/// Worker-count hint. `0` means "rayon default".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Parallelism(pub usize);

impl Parallelism {
    pub const SEQUENTIAL: Parallelism = Parallelism(1);

    pub fn threads(self) -> usize {
        self.0
    }
}

/// Evaluates `f` on every index of `range`, returning results in index order.
pub fn map_indexed<T, F>(range: Range<u64>, parallelism: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallelism.0 != 1 {
            return map_parallel(range, parallelism.0, f);
        }
    }
    let _ = parallelism;
    range.map(f).collect()
}

#[cfg(feature = "parallel")]
fn map_parallel<T, F>(range: Range<u64>, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || range.clone().into_par_iter().map(&f).collect::<Vec<T>>();
    if threads == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        // Pool creation only fails on OS thread exhaustion; the global pool still works.
        Err(_) => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_for_any_parallelism() {
        let a = map_indexed(0..1000, Parallelism(1), |i| i * i);
        let b = map_indexed(0..1000, Parallelism(8), |i| i * i);
        let c = map_indexed(0..1000, Parallelism(0), |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
