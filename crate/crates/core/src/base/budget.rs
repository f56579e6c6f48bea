use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Counts full feed-forward passes over the training split.
///
/// Charges are atomic so concurrent evaluations of one population can share a
/// meter. A charge that would exceed the cap is refused as a whole and leaves
/// the count untouched.
#[derive(Debug)]
pub struct BudgetMeter {
    used: AtomicU64,
    cap: u64,
}

impl BudgetMeter {
    pub fn new(cap: u64) -> Self {
        Self {
            used: AtomicU64::new(0),
            cap,
        }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn remaining(&self) -> u64 {
        self.cap - self.used()
    }

    pub fn try_consume(&self, n: u64) -> Result<()> {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |used| {
                used.checked_add(n).filter(|&next| next <= self.cap)
            })
            .map(|_| ())
            .map_err(|used| Error::BudgetExhausted {
                used,
                cap: self.cap,
                requested: n,
            })
    }

    /// Fails without charging unless at least `n` passes remain.
    pub fn ensure_remaining(&self, n: u64) -> Result<()> {
        let used = self.used();
        if self.cap - used < n {
            return Err(Error::BudgetExhausted {
                used,
                cap: self.cap,
                requested: n,
            });
        }
        Ok(())
    }
}
