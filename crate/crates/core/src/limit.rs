use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrent requests.
pub(crate) struct InFlight {
    free: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    pub(crate) fn new(limit: usize) -> Self {
        Self {
            free: Mutex::new(limit.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}
