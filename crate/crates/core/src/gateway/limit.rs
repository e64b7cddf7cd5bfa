//! Request pacing: a sliding-window rate limiter and a counting semaphore.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::clock::Clock;

const WINDOW: Duration = Duration::from_secs(60);

/// Admits at most `per_minute` requests in any 60 second window.
pub struct RateLimiter {
    per_minute: usize,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(per_minute: usize, clock: Arc<dyn Clock>) -> RateLimiter {
        assert!(
            per_minute >= 1,
            "rate limit must be at least one request per minute"
        );
        RateLimiter {
            per_minute,
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(&self) -> usize {
        self.per_minute
    }

    /// Blocks until a request may be issued, then records it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut issued = self.issued.lock().unwrap();
                let now = self.clock.now();
                while issued
                    .front()
                    .is_some_and(|&t| now.saturating_sub(t) >= WINDOW)
                {
                    issued.pop_front();
                }
                if issued.len() < self.per_minute {
                    issued.push_back(now);
                    return;
                }
                (issued[0] + WINDOW).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }

    /// Issue times still inside the window, oldest first.
    pub fn recent(&self) -> Vec<Duration> {
        self.issued.lock().unwrap().iter().copied().collect()
    }
}

pub struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Semaphore {
        assert!(permits >= 1, "semaphore needs at least one permit");
        Semaphore {
            available: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit { sem: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.sem.available.lock().unwrap() += 1;
        self.sem.freed.notify_one();
    }
}
