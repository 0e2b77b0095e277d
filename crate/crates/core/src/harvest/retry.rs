use std::time::Duration;

use rand::Rng;

use super::BackendError;

/// Exponential backoff with jitter for retryable backend errors.
///
/// A rate-limit reset hint from the backend replaces the computed delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Upper bound on how long a reset hint may make us wait.
    pub max_reset_wait: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
            max_reset_wait: Duration::from_secs(15 * 60),
        }
    }
}

impl RetryPolicy {
    /// Same attempt budget, no waiting. Used against local backends.
    pub fn immediate() -> Self {
        Self {
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            max_reset_wait: Duration::ZERO,
            ..Self::default()
        }
    }

    /// Delay before retry number `attempt` (1-based), without jitter.
    pub fn backoff(&self, attempt: u32, err: &BackendError) -> Duration {
        if let BackendError::RateLimited { reset_after: Some(hint) } = err {
            return (*hint).min(self.max_reset_wait);
        }
        let exp = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.base_delay.saturating_mul(exp).min(self.max_delay)
    }

    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    let mut delay = self.backoff(attempt, &e);
                    if !delay.is_zero() {
                        let jitter = rand::thread_rng().gen_range(0..=delay.as_millis() as u64 / 2);
                        delay += Duration::from_millis(jitter);
                        tracing::debug!(attempt, ?delay, error = %e, "retrying");
                        std::thread::sleep(delay);
                    }
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
