//! Execution helpers: data-parallel when the `parallel` feature is on,
//! plain loops otherwise.
//!
//! Every helper preserves element order, and reductions inside a single
//! output element run in a fixed order, so parallel and sequential
//! execution produce bitwise-identical results. A process-wide switch
//! ([`force_sequential`]) forces the sequential path even in parallel
//! builds; benches use it to compare both paths in one binary, and the
//! `DIVREC_SEQUENTIAL` / `DIVREC_THREADS=1` environment variables expose
//! it to the CLI.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential code path at runtime (no-op in sequential builds).
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// True when the parallel path is compiled in and not disabled.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Cap the worker pool size (no-op in sequential builds). Must run
/// before the first parallel operation.
pub fn configure_threads(n: usize) -> Result<(), String> {
    if n == 0 {
        return Err("thread count must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    Ok(())
}

/// Read the environment switches once at startup (called by the CLI):
/// `DIVREC_SEQUENTIAL` forces the sequential path, `DIVREC_THREADS=n`
/// caps the worker pool (n = 1 also forces sequential).
pub fn init_from_env() -> Result<(), String> {
    let seq = std::env::var("DIVREC_SEQUENTIAL").is_ok_and(|v| v != "0" && !v.is_empty());
    if seq {
        force_sequential(true);
    }
    if let Ok(v) = std::env::var("DIVREC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| format!("DIVREC_THREADS must be a positive integer, got {v:?}"))?;
        if n == 1 {
            force_sequential(true);
        } else {
            configure_threads(n)?;
        }
    }
    Ok(())
}

/// `(0..n).map(f)` collected in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_range`]; returns the first error by index.
pub fn try_map_range<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Apply `f(row_index, row)` to each `width`-sized chunk of `data`.
pub fn for_each_row_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(width > 0 && data.len().is_multiple_of(width));
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    for (i, row) in data.chunks_mut(width).enumerate() {
        f(i, row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v[17], 289);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn sequential_switch_matches_parallel() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let par: Vec<f64> = map_range(1000, f);
        force_sequential(true);
        let seq: Vec<f64> = map_range(1000, f);
        force_sequential(false);
        assert_eq!(par, seq);
    }
}
