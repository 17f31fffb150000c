//! Data-parallel execution of independent replications.
//!
//! With the default `parallel` feature the work is spread across the rayon
//! pool; without it the same closures run on a plain sequential iterator.
//! Results are collected by replication index, so the output is identical
//! either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every index in `0..count` and collect the results in order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Send + Sync,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Apply `f` to every index in `0..count` and collect the results in order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Send + Sync,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(100, |i| i * i);
        assert_eq!(out.len(), 100);
        assert!(out.iter().enumerate().all(|(i, &v)| v == (i as u64) * (i as u64)));
    }
}
