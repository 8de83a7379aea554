use alloc::vec::Vec;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|, SCALE_FLOOR)`.
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub rtol: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.rel_err <= self.rtol)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FdEntry> {
        self.entries.iter().filter(move |e| e.rel_err > self.rtol)
    }

    pub fn worst(&self) -> Option<&FdEntry> {
        self.entries.iter().max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
    }
}

/// Compares `analytic` against central differences of `f` at `theta`.
pub fn finite_diff_check<F>(mut f: F, theta: &[f64], analytic: &[f64], h: f64, rtol: f64) -> FdReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len(), "gradient length must match parameter count");
    let mut probe = theta.to_vec();
    let entries = (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + h;
            let up = f(&probe);
            probe[i] = theta[i] - h;
            let down = f(&probe);
            probe[i] = theta[i];
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(numeric.abs()).max(SCALE_FLOOR);
            FdEntry { index: i, analytic: a, numeric, rel_err: (a - numeric).abs() / scale }
        })
        .collect();
    FdReport { entries, rtol }
}
