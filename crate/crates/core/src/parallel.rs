//! Optional fan-out for embarrassingly parallel loops.
//!
//! `FPGRAD_THREADS` caps the worker count; unset or `0` runs sequentially.
//! Results are always returned in index order, so output does not depend on
//! the thread count.

use std::thread;

pub const THREADS_ENV: &str = "FPGRAD_THREADS";

/// Worker count from the environment (0 = sequential).
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// `(0..n).map(f)` spread over at most `threads` scoped workers.
pub fn map_indexed<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads.min(n));
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| {
                let end = (start + chunk).min(n);
                scope.spawn(move || (start..end).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(37, 0, |i| i * i);
        for threads in [1, 2, 5, 64] {
            assert_eq!(map_indexed(37, threads, |i| i * i), seq);
        }
    }
}
