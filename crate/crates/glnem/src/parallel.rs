//! Order-preserving parallel map over independent jobs (chains, folds,
//! replicates) using scoped threads. `GLNEM_THREADS` caps the worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker count: `GLNEM_THREADS` when set, otherwise the machine parallelism.
pub fn thread_count() -> usize {
    if let Ok(v) = std::env::var("GLNEM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Applies `f` to every item, possibly concurrently; results keep the input
/// order regardless of scheduling.
pub fn parallel_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let n_items = items.len();
    let workers = thread_count().min(n_items.max(1));
    if workers <= 1 || n_items <= 1 {
        return items.into_iter().map(f).collect();
    }
    let jobs: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<U>>> = (0..n_items).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= n_items {
                    break;
                }
                let item = jobs[idx].lock().unwrap().take().unwrap();
                let out = f(item);
                *results[idx].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().unwrap())
        .collect()
}
