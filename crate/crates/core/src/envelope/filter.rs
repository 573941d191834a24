//! Warped synthesis filters and their exact inverses.
//!
//! Both filters are driven sample by sample with per-sample coefficients in the
//! MLSA `b` domain. Each stage keeps its internal state on the signal that the
//! synthesis recursion feeds back, so running a stage backwards reproduces the
//! excitation exactly, even with time-varying coefficients.

use rustfft::num_complex::Complex64;

/// Pade coefficients of order 5 for `exp(w) ~ P(w) / P(-w)`.
const PADE5: [f64; 6] = [
    1.0,
    0.499_939_1,
    0.110_709_8,
    0.013_699_84,
    0.000_956_485_3,
    0.000_030_417_21,
];

/// `|F(e^jw)|` must stay below this for `1 / P(-F)` to be stable: the smallest
/// root modulus of the order-5 Pade polynomial is about 7.65.
pub const MAX_PADE_MAGNITUDE: f64 = 7.5;

/// First-order all-pass chain producing the warped basis `Phi_m`, `m >= 1`:
/// `Phi_1 = (1 - a^2) z^-1 / (1 - a z^-1)`, `Phi_m = Phi_(m-1) (z^-1 - a) / (1 - a z^-1)`.
///
/// Every `Phi_m` has a pure delay, so the outputs at time `n` depend only on
/// inputs up to `n - 1`.
#[derive(Debug, Clone)]
struct WarpedChain {
    alpha: f64,
    last_input: f64,
    state: Vec<f64>,
}

impl WarpedChain {
    fn new(alpha: f64, order: usize) -> Self {
        Self {
            alpha,
            last_input: 0.0,
            state: vec![0.0; order],
        }
    }

    /// Advances the basis outputs to the current sample.
    fn advance(&mut self) {
        let a = self.alpha;
        let mut prev_old = self.last_input;
        let mut prev_new = 0.0;
        for (m, s) in self.state.iter_mut().enumerate() {
            let old = *s;
            *s = if m == 0 {
                a * old + (1.0 - a * a) * prev_old
            } else {
                a * old + prev_old - a * prev_new
            };
            prev_old = old;
            prev_new = *s;
        }
    }

    /// `sum_m b[m] Phi_m` over `m` in `from..b.len()`, `from >= 1`.
    fn output(&self, b: &[f64], from: usize) -> f64 {
        b[from..]
            .iter()
            .zip(&self.state[from - 1..])
            .map(|(c, s)| c * s)
            .sum()
    }

    fn push(&mut self, input: f64) {
        self.last_input = input;
    }
}

/// `exp(F)` with `F = sum_{m in range} b_m Phi_m`, realised as `P(F) / P(-F)`.
#[derive(Debug, Clone)]
struct PadeStage {
    from: usize,
    chains: Vec<WarpedChain>,
    taps: [f64; 6],
}

impl PadeStage {
    fn new(alpha: f64, order: usize, from: usize) -> Self {
        Self {
            from,
            chains: (0..5).map(|_| WarpedChain::new(alpha, order)).collect(),
            taps: [0.0; 6],
        }
    }

    /// Fills `taps[i] = F^i v` (i >= 1) at the current sample; returns (feedback, feedforward) sums.
    fn prepare(&mut self, b: &[f64]) -> (f64, f64) {
        let mut fb = 0.0;
        let mut ff = 0.0;
        for i in 1..=5 {
            let chain = &mut self.chains[i - 1];
            chain.advance();
            let t = chain.output(b, self.from);
            self.taps[i] = t;
            let v = PADE5[i] * t;
            if i % 2 == 1 {
                fb += v;
            } else {
                fb -= v;
            }
            ff += v;
        }
        (fb, ff)
    }

    fn commit(&mut self, v: f64) {
        self.taps[0] = v;
        for i in 0..5 {
            let input = self.taps[i];
            self.chains[i].push(input);
        }
    }

    fn forward(&mut self, x: f64, b: &[f64]) -> f64 {
        let (fb, ff) = self.prepare(b);
        let v = x + fb;
        self.commit(v);
        v + ff
    }

    fn backward(&mut self, y: f64, b: &[f64]) -> f64 {
        let (fb, ff) = self.prepare(b);
        let v = y - ff;
        self.commit(v);
        v - fb
    }
}

/// Mel-log-spectrum approximation filter: gain `exp(b_0)`, then two Pade
/// stages for `b_1 Phi_1` and `sum_{m>=2} b_m Phi_m`.
#[derive(Debug, Clone)]
pub struct MlsaFilter {
    first: PadeStage,
    rest: PadeStage,
    order: usize,
}

impl MlsaFilter {
    pub fn new(alpha: f64, order: usize) -> Self {
        Self {
            first: PadeStage::new(alpha, 1, 1),
            rest: PadeStage::new(alpha, order.max(1), 2),
            order,
        }
    }

    pub fn synthesize(&mut self, x: f64, b: &[f64]) -> f64 {
        debug_assert_eq!(b.len(), self.order + 1);
        let mut y = x * b[0].exp();
        if self.order >= 1 {
            y = self.first.forward(y, &b[..2]);
        }
        if self.order >= 2 {
            y = self.rest.forward(y, b);
        }
        y
    }

    pub fn inverse(&mut self, y: f64, b: &[f64]) -> f64 {
        debug_assert_eq!(b.len(), self.order + 1);
        let mut x = y;
        if self.order >= 2 {
            x = self.rest.backward(x, b);
        }
        if self.order >= 1 {
            x = self.first.backward(x, &b[..2]);
        }
        x * (-b[0]).exp()
    }
}

/// Generalized filter for `gamma = -1/stages`:
/// `H = K (1 + gamma sum_{m>=1} b'_m Phi_m)^(-stages)`, each factor an all-pole stage.
#[derive(Debug, Clone)]
pub struct MglsaFilter {
    gamma: f64,
    stages: Vec<WarpedChain>,
    order: usize,
    normalized: Vec<f64>,
}

impl MglsaFilter {
    pub fn new(alpha: f64, order: usize, stages: usize) -> Self {
        Self {
            gamma: -1.0 / stages as f64,
            stages: (0..stages).map(|_| WarpedChain::new(alpha, order.max(1))).collect(),
            order,
            normalized: vec![0.0; order + 1],
        }
    }

    /// Loads `b` and returns the gain `K = (1 + gamma b_0)^(1/gamma)`.
    fn normalize(&mut self, b: &[f64]) -> f64 {
        let k = 1.0 + self.gamma * b[0];
        self.normalized[0] = 0.0;
        for m in 1..=self.order {
            self.normalized[m] = b[m] / k;
        }
        k.powf(1.0 / self.gamma)
    }

    pub fn synthesize(&mut self, x: f64, b: &[f64]) -> f64 {
        let gain = self.normalize(b);
        let mut y = x * gain;
        if self.order == 0 {
            return y;
        }
        for chain in &mut self.stages {
            chain.advance();
            y -= self.gamma * chain.output(&self.normalized, 1);
            chain.push(y);
        }
        y
    }

    pub fn inverse(&mut self, y: f64, b: &[f64]) -> f64 {
        let gain = self.normalize(b);
        let mut x = y;
        if self.order > 0 {
            for chain in self.stages.iter_mut().rev() {
                chain.advance();
                let fb = self.gamma * chain.output(&self.normalized, 1);
                chain.push(x);
                x += fb;
            }
        }
        x / gain
    }
}

fn phi1(omega: f64, alpha: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -omega);
    (1.0 - alpha * alpha) * z1 / (1.0 - alpha * z1)
}

/// `sum_{m >= from} b_m Phi_m(e^jw)`.
pub(crate) fn warped_response(b: &[f64], alpha: f64, omega: f64, from: usize) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -omega);
    let allpass = (z1 - alpha) / (1.0 - alpha * z1);
    let mut phi = phi1(omega, alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, bm) in b.iter().enumerate().skip(1) {
        if m >= from {
            acc += *bm * phi;
        }
        phi *= allpass;
    }
    acc
}

/// Largest `|F1|` and `|F2|` of an MLSA coefficient frame over a dense grid.
pub fn mlsa_peak_magnitudes(b: &[f64], alpha: f64) -> (f64, f64) {
    const POINTS: usize = 256;
    let mut f1 = 0.0f64;
    let mut f2 = 0.0f64;
    for k in 0..=POINTS {
        let w = std::f64::consts::PI * k as f64 / POINTS as f64;
        if b.len() > 1 {
            f1 = f1.max((b[1] * phi1(w, alpha)).norm());
        }
        f2 = f2.max(warped_response(b, alpha, w, 2).norm());
    }
    (f1, f2)
}

/// Minimum-phase test of `1 + sum_{m>=1} a_m x^m` by the step-down recursion.
pub fn is_minimum_phase(a: &[f64]) -> bool {
    let mut poly = a.to_vec();
    for i in (1..poly.len()).rev() {
        let k = poly[i];
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..i).map(|j| (poly[j] - k * poly[i - j]) / denom).collect();
        poly.truncate(i);
        poly.copy_from_slice(&prev);
    }
    true
}
