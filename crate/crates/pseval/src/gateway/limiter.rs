//! Token-bucket rate limiting, one bucket per source.
//!
//! The contract: over any time window, a source receives at most
//! ceil(window_seconds × rate) + 1 requests. A bucket with burst capacity 1
//! satisfies that bound — the +1 covers a token already available when the
//! window opens.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

struct Bucket {
    tokens: f64,
    last_refill: Instant,
}

/// Shared limiter; `acquire` blocks until the source may proceed.
pub struct RateLimiter {
    /// Tokens added per second.
    rate: f64,
    buckets: Mutex<HashMap<String, Bucket>>,
}

impl RateLimiter {
    pub fn new(rate_per_second: f64) -> Self {
        assert!(rate_per_second > 0.0, "rate must be positive");
        RateLimiter { rate: rate_per_second, buckets: Mutex::new(HashMap::new()) }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Blocks until a token is available for `source`, then consumes it.
    pub fn acquire(&self, source: &str) {
        loop {
            let wait = {
                let mut buckets = self.buckets.lock().expect("limiter lock");
                let now = Instant::now();
                let bucket = buckets
                    .entry(source.to_string())
                    .or_insert_with(|| Bucket { tokens: 1.0, last_refill: now });
                let elapsed = now.duration_since(bucket.last_refill).as_secs_f64();
                bucket.tokens = (bucket.tokens + elapsed * self.rate).min(1.0);
                bucket.last_refill = now;
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    None
                } else {
                    Some(Duration::from_secs_f64((1.0 - bucket.tokens) / self.rate))
                }
            };
            match wait {
                None => return,
                Some(duration) => std::thread::sleep(duration),
            }
        }
    }
}
