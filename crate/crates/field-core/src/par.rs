//! Tiny deterministic fork-join helper.
//!
//! Work items are split into contiguous index ranges, one per worker, and
//! results are returned in input order. Reductions performed by the caller
//! over the returned vector are therefore bit-deterministic regardless of
//! the thread count.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(0);

/// Overrides the worker count; 0 restores the hardware default.
pub fn set_threads(n: usize) {
    THREADS.store(n, Ordering::Relaxed);
}

pub fn threads() -> usize {
    let n = THREADS.load(Ordering::Relaxed);
    if n > 0 {
        n
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Applies `f` to every index in `0..n`, returning results in index order.
pub fn par_map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let workers = threads().min(n.max(1));
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    let slots: Vec<&mut [Option<R>]> = out.chunks_mut(chunk).collect();
    std::thread::scope(|scope| {
        for (wi, slot) in slots.into_iter().enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = wi * chunk;
                for (off, cell) in slot.iter_mut().enumerate() {
                    *cell = Some(f(base + off));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("worker filled every slot")).collect()
}
