//! Band-limited rational-ratio resampling of finite frames with a
//! Kaiser-windowed sinc prototype.
//!
//! Output sample `j` of an `in_len -> out_len` conversion sits at input
//! position `j * in_len / out_len`, so index 0 and the frame centre of even
//! lengths map onto each other. Samples outside the frame are zero.

use std::sync::OnceLock;

pub const KAISER_BETA: f64 = 8.0;
/// Zero crossings of the prototype on each side, counted at the lower of the two rates.
pub const HALF_ZERO_CROSSINGS: usize = 16;

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(x: f64, beta: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - x * x).sqrt()) / bessel_i0(beta)
}

/// Table entries per zero crossing of the prototype.
const TABLE_DENSITY: usize = 4096;

/// `sinc(u) * kaiser(u / HALF_ZERO_CROSSINGS)` sampled on `u in [0, HALF_ZERO_CROSSINGS]`.
fn prototype_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = HALF_ZERO_CROSSINGS * TABLE_DENSITY;
        (0..=n + 1)
            .map(|i| {
                let u = i as f64 / TABLE_DENSITY as f64;
                sinc(u) * kaiser(u / HALF_ZERO_CROSSINGS as f64, KAISER_BETA)
            })
            .collect()
    })
}

fn prototype(u: f64) -> f64 {
    let x = u.abs() * TABLE_DENSITY as f64;
    let i = x as usize;
    let table = prototype_table();
    if i + 1 >= table.len() {
        return 0.0;
    }
    let f = x - i as f64;
    table[i] + f * (table[i + 1] - table[i])
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Precomputed polyphase filter for one `(in_len, out_len)` pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    in_len: usize,
    out_len: usize,
    up: usize,
    down: usize,
    taps_per_side: usize,
    /// `phases[p][k]` weights input `base - taps_per_side + 1 + k`.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(in_len: usize, out_len: usize) -> Self {
        assert!(in_len > 0 && out_len > 0, "resampling needs non-empty frames");
        let g = gcd(in_len, out_len);
        let (up, down) = (out_len / g, in_len / g);
        let cutoff = (up as f64 / down as f64).min(1.0);
        let half_width = HALF_ZERO_CROSSINGS as f64 / cutoff;
        let taps_per_side = half_width.ceil() as usize;
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (0..2 * taps_per_side)
                    .map(|k| {
                        let d = frac + taps_per_side as f64 - 1.0 - k as f64;
                        cutoff * prototype(cutoff * d)
                    })
                    .collect()
            })
            .collect();
        Self {
            in_len,
            out_len,
            up,
            down,
            taps_per_side,
            phases,
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Upsampling ratio `out_len / in_len`.
    pub fn ratio(&self) -> f64 {
        self.out_len as f64 / self.in_len as f64
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_len);
        if self.in_len == self.out_len {
            return x.to_vec();
        }
        (0..self.out_len)
            .map(|j| {
                let pos = j * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let first = base - self.taps_per_side as isize + 1;
                let lo = (-first).max(0) as usize;
                let hi = ((self.in_len as isize - first).max(0) as usize).min(taps.len());
                if lo >= hi {
                    return 0.0;
                }
                let start = (first + lo as isize) as usize;
                taps[lo..hi].iter().zip(&x[start..start + hi - lo]).map(|(t, v)| t * v).sum()
            })
            .collect()
    }
}

/// One-off resampling of `x` to `out_len` samples.
pub fn resample(x: &[f64], out_len: usize) -> Vec<f64> {
    Resampler::new(x.len(), out_len).process(x)
}
