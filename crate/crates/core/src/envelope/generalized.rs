//! Conversion between mel-cepstra and mel-generalized cepstra.

/// Gain normalisation: `c0` becomes the gain `K`, the rest are scaled by `1 / (1 + gamma c0)`.
pub fn gnorm(c: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    if gamma == 0.0 {
        out[0] = c[0].exp();
        return out;
    }
    let k = 1.0 + gamma * c[0];
    for v in &mut out[1..] {
        *v /= k;
    }
    out[0] = k.powf(1.0 / gamma);
    out
}

/// Inverse of [`gnorm`].
pub fn ignorm(c: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    if gamma == 0.0 {
        out[0] = c[0].ln();
        return out;
    }
    let k = c[0].powf(gamma);
    for v in &mut out[1..] {
        *v *= k;
    }
    out[0] = (k - 1.0) / gamma;
    out
}

/// Recursion between gain-normalised generalized cepstra of exponents `g1` and `g2`.
fn gc2gc(c1: &[f64], g1: f64, order2: usize, g2: f64) -> Vec<f64> {
    let m1 = c1.len() - 1;
    let mut c2 = vec![0.0; order2 + 1];
    c2[0] = c1[0];
    for i in 1..=order2 {
        let mut ss1 = 0.0;
        let mut ss2 = 0.0;
        for k in 1..=m1.min(i - 1) {
            let mk = i - k;
            let cc = c1[k] * c2[mk];
            ss2 += k as f64 * cc;
            ss1 += mk as f64 * cc;
        }
        let base = if i <= m1 { c1[i] } else { 0.0 };
        c2[i] = base + (g2 * ss2 - g1 * ss1) / i as f64;
    }
    c2
}

/// Re-expresses coefficients of exponent `from` with exponent `to`, same order and warping.
pub fn convert(c: &[f64], from: f64, to: f64) -> Vec<f64> {
    if from == to {
        return c.to_vec();
    }
    let normalized = gnorm(c, from);
    let converted = gc2gc(&normalized, from, c.len() - 1, to);
    ignorm(&converted, to)
}
