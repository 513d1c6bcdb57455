use thiserror::Error;

/// An argument whose length or shape disagrees with the system dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dimension mismatch in {what}: expected {expected}, found {found}")]
pub struct DimensionMismatch {
    pub what: &'static str,
    pub expected: usize,
    pub found: usize,
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), DimensionMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
