use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

/// Time source for rate limiting, retry backoff and cache expiry.
pub trait Clock: Send + Sync {
    /// Seconds since the epoch.
    fn now(&self) -> f64;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually driven clock; `sleep` advances time instantly.
#[derive(Debug, Clone, Default)]
pub struct SimulatedClock {
    now: Arc<Mutex<f64>>,
    slept: Arc<Mutex<Vec<Duration>>>,
}

impl SimulatedClock {
    pub fn new(start: f64) -> Self {
        SimulatedClock {
            now: Arc::new(Mutex::new(start)),
            slept: Arc::default(),
        }
    }

    pub fn advance(&self, secs: f64) {
        *self.now.lock().unwrap() += secs;
    }

    /// Every sleep requested so far, in order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> f64 {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
        *self.now.lock().unwrap() += d.as_secs_f64();
    }
}

/// Sliding one-second window limiter: at most `per_second` permits are
/// handed out in any window of length one second. Shared across threads.
pub struct RateLimiter {
    per_second: usize,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<f64>>,
}

impl RateLimiter {
    pub fn new(per_second: usize, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            per_second: per_second.max(1),
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a request may be issued and records it. Returns the
    /// time the permit was granted.
    pub fn acquire(&self) -> f64 {
        let mut issued = self.issued.lock().unwrap();
        loop {
            let now = self.clock.now();
            while issued.front().is_some_and(|&t| t <= now - 1.0) {
                issued.pop_front();
            }
            if issued.len() < self.per_second {
                issued.push_back(now);
                return now;
            }
            let wait = issued.front().copied().unwrap_or(now) + 1.0 - now;
            // The lock is held while sleeping so waiting callers queue in order.
            self.clock.sleep(Duration::from_secs_f64(wait.max(1e-6)));
        }
    }
}
