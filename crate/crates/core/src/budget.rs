//! Memory/enumeration budget shared by tensor-power and blocklength code.
//!
//! Dense operators dominate memory, so the budget is charged in bytes of
//! complex matrix storage (16 bytes per entry). The default is 512 MiB and
//! can be raised via the `PFP_BUDGET_MB` environment variable or explicitly.

use crate::error::{Error, Result};

pub const DEFAULT_BUDGET_MB: u64 = 512;
pub const BUDGET_ENV_VAR: &str = "PFP_BUDGET_MB";

/// Hard cap on classical enumerations (sequence sets), independent of bytes.
pub const MAX_ENUMERATION: u128 = 1 << 24;

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    bytes: u128,
}

impl Budget {
    pub fn from_mb(mb: u64) -> Self {
        Budget {
            bytes: mb as u128 * 1024 * 1024,
        }
    }

    /// Default budget, honoring the `PFP_BUDGET_MB` override.
    pub fn from_env() -> Self {
        let mb = std::env::var(BUDGET_ENV_VAR)
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or(DEFAULT_BUDGET_MB);
        Budget::from_mb(mb)
    }

    pub fn bytes(&self) -> u128 {
        self.bytes
    }

    /// Check that `count` dense square matrices of dimension `dim` fit.
    pub fn check_matrices(&self, context: &str, dim: u128, count: u128) -> Result<()> {
        let required = dim
            .checked_mul(dim)
            .and_then(|e| e.checked_mul(16))
            .and_then(|b| b.checked_mul(count))
            .unwrap_or(u128::MAX);
        if required > self.bytes {
            return Err(Error::Budget {
                context: format!("{context} (bytes for {count} matrices of dim {dim})"),
                required,
                budget: self.bytes,
            });
        }
        Ok(())
    }

    /// Check a combinatorial enumeration size against the fixed cap.
    pub fn check_enumeration(context: &str, count: u128) -> Result<()> {
        if count > MAX_ENUMERATION {
            return Err(Error::Budget {
                context: format!("{context} (enumeration size)"),
                required: count,
                budget: MAX_ENUMERATION,
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::from_mb(DEFAULT_BUDGET_MB)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_budget_rejects_large_matrices() {
        let b = Budget::from_mb(1);
        assert!(b.check_matrices("test", 64, 1).is_ok());
        assert!(b.check_matrices("test", 4096, 4).is_err());
    }

    #[test]
    fn enumeration_cap() {
        assert!(Budget::check_enumeration("seq", 1 << 20).is_ok());
        assert!(Budget::check_enumeration("seq", 1 << 25).is_err());
    }
}
