use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `job(0..n_jobs)` on at most `max_in_flight` threads and returns the
/// results in job order.
pub(crate) fn run_in_order<T, F>(n_jobs: usize, max_in_flight: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n_jobs).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(n_jobs);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_jobs {
                    break;
                }
                let out = job(i);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every job ran"))
        .collect()
}
