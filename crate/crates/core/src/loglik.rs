//! Per-observation log-density vectors.

/// Log-density addends `log f(r_t | r_1..r_{t-1})` for a contiguous block of
/// observations.
///
/// `first_index` is the 0-based position in the rate series of the level
/// `r_t` that the first addend conditions on being observed; models that
/// treat `r_1` as a pre-sample value start at 1, the jump-diffusion (which
/// also needs `r_{t-2}`) starts at 2.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensities {
    pub first_index: usize,
    pub values: Vec<f64>,
}

impl LogDensities {
    pub fn new(first_index: usize, values: Vec<f64>) -> Self {
        Self { first_index, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the series index of the last addend.
    pub fn end_index(&self) -> usize {
        self.first_index + self.values.len()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Restricts to series indices `[start, end)`; returns `None` when the
    /// range is not covered.
    pub fn window(&self, start: usize, end: usize) -> Option<&[f64]> {
        if start < self.first_index || end > self.end_index() || start > end {
            return None;
        }
        Some(&self.values[start - self.first_index..end - self.first_index])
    }
}
