//! Analysis and synthesis windows.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Hanning,
    Blackman,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hanning => "hanning",
            WindowKind::Blackman => "blackman",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "hamming" => Some(WindowKind::Hamming),
            "hanning" => Some(WindowKind::Hanning),
            "blackman" => Some(WindowKind::Blackman),
            _ => None,
        }
    }

    /// Symmetric window of length `len`.
    pub fn symmetric(self, len: usize) -> Vec<f64> {
        if len == 1 {
            return vec![1.0];
        }
        let denom = (len - 1) as f64;
        (0..len).map(|n| self.value(n as f64 / denom)).collect()
    }

    fn value(self, x: f64) -> f64 {
        let c1 = (2.0 * PI * x).cos();
        match self {
            WindowKind::Hamming => 0.54 - 0.46 * c1,
            WindowKind::Hanning => 0.5 - 0.5 * c1,
            WindowKind::Blackman => 0.42 - 0.5 * c1 + 0.08 * (4.0 * PI * x).cos(),
        }
    }
}

/// Blackman window of even length `len` whose peak (exactly 1) sits at `len / 2`.
///
/// This is the DFT-even form: index 0 is zero and the window is symmetric
/// around `len / 2`, which is where the GCI of a two-period frame lands.
pub fn centered_blackman(len: usize) -> Vec<f64> {
    let l = len as f64;
    (0..len)
        .map(|n| {
            let x = n as f64 / l;
            (0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()).max(0.0)
        })
        .collect()
}
