//! Transient-buffer accounting.
//!
//! Kernels declare each scratch allocation they make; the meter keeps the
//! largest one. This is the platform-independent memory metric reported by
//! benchmarks, as opposed to process RSS.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct BufferMeter {
    peak: u64,
    budget: Option<u64>,
}

impl BufferMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_budget(budget: u64) -> Self {
        Self {
            peak: 0,
            budget: Some(budget),
        }
    }

    /// Records a scratch buffer of `elements` values of `elem_bytes` each.
    ///
    /// Fails with [`Error::Capacity`] before anything is allocated when the
    /// buffer would exceed the budget.
    pub fn declare(&mut self, what: &str, elements: usize, elem_bytes: usize) -> Result<()> {
        let needed = (elements as u64).saturating_mul(elem_bytes as u64);
        if let Some(budget) = self.budget {
            if needed > budget {
                return Err(Error::Capacity {
                    what: what.to_string(),
                    needed,
                    budget,
                });
            }
        }
        self.peak = self.peak.max(needed);
        Ok(())
    }

    /// Declares and allocates a buffer of `elements` copies of `fill`.
    ///
    /// An allocator refusal is reported as [`Error::OutOfMemory`] rather than
    /// aborting the process.
    pub fn alloc<R: Clone>(&mut self, what: &str, elements: usize, fill: R) -> Result<Vec<R>> {
        self.declare(what, elements, std::mem::size_of::<R>())?;
        let mut v = Vec::new();
        v.try_reserve_exact(elements)
            .map_err(|_| Error::OutOfMemory {
                what: what.to_string(),
                needed: (elements as u64).saturating_mul(std::mem::size_of::<R>() as u64),
            })?;
        v.resize(elements, fill);
        Ok(v)
    }

    pub fn peak_bytes(&self) -> u64 {
        self.peak
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }
}
