//! Synthetic speech with known glottal closure instants.
//!
//! Voiced stretches are a Rosenberg-Klatt glottal flow derivative driven
//! through a cascade of time-varying formant resonators. Unvoiced stretches
//! are shaped noise. Every closure instant is recorded, so pitch and GCI
//! estimators can be scored against ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SAMPLE_RATE: u32 = 16_000;

/// Formant frequencies and bandwidths in Hz.
#[derive(Debug, Clone, Copy)]
pub struct Vowel {
    pub formants: [f64; 5],
    pub bandwidths: [f64; 5],
}

pub const VOWELS: [Vowel; 5] = [
    // a
    Vowel { formants: [730.0, 1090.0, 2440.0, 3400.0, 4200.0], bandwidths: [90.0, 110.0, 170.0, 250.0, 300.0] },
    // i
    Vowel { formants: [270.0, 2290.0, 3010.0, 3500.0, 4300.0], bandwidths: [60.0, 100.0, 170.0, 250.0, 300.0] },
    // u
    Vowel { formants: [300.0, 870.0, 2240.0, 3300.0, 4200.0], bandwidths: [60.0, 90.0, 150.0, 250.0, 300.0] },
    // e
    Vowel { formants: [530.0, 1840.0, 2480.0, 3450.0, 4250.0], bandwidths: [80.0, 110.0, 170.0, 250.0, 300.0] },
    // o
    Vowel { formants: [570.0, 840.0, 2410.0, 3350.0, 4200.0], bandwidths: [80.0, 100.0, 160.0, 250.0, 300.0] },
];

#[derive(Debug, Clone)]
pub struct Speaker {
    /// Median F0 in Hz.
    pub f0: f64,
    /// Intonation excursion as a fraction of `f0`.
    pub f0_range: f64,
    /// Open quotient of the glottal cycle.
    pub open_quotient: f64,
    /// Relative period jitter (standard deviation).
    pub jitter: f64,
    /// Relative amplitude shimmer (standard deviation).
    pub shimmer: f64,
    /// Aspiration noise level relative to the pulse peak.
    pub aspiration: f64,
    /// Formant scale (shorter tracts have higher formants).
    pub formant_scale: f64,
}

impl Speaker {
    pub fn male() -> Self {
        Self {
            f0: 115.0,
            f0_range: 0.25,
            open_quotient: 0.6,
            jitter: 0.005,
            shimmer: 0.03,
            aspiration: 0.02,
            formant_scale: 1.0,
        }
    }

    pub fn female() -> Self {
        Self {
            f0: 200.0,
            f0_range: 0.25,
            open_quotient: 0.65,
            jitter: 0.005,
            shimmer: 0.03,
            aspiration: 0.03,
            formant_scale: 1.15,
        }
    }
}

/// A voiced stretch `[start, end)` in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoicedSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Utterance {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Closure instants in samples, ascending.
    pub gci: Vec<usize>,
    /// Exact closure instants in seconds, parallel to `gci`.
    pub gci_times: Vec<f64>,
    pub voiced: Vec<VoicedSpan>,
}

impl Utterance {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// True F0 at `time`, from the local closure spacing.
    pub fn f0_at(&self, time: f64) -> Option<f64> {
        let n = (time * self.sample_rate as f64) as usize;
        if !self.voiced.iter().any(|v| n >= v.start && n < v.end) {
            return None;
        }
        let i = self.gci_times.partition_point(|&t| t < time);
        if i == 0 || i >= self.gci_times.len() {
            return None;
        }
        let period = self.gci_times[i] - self.gci_times[i - 1];
        (period < 0.03).then(|| 1.0 / period)
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Silence(f64),
    Voiced(f64),
    Fricative(f64),
}

/// Deterministic utterance generator.
pub struct Generator {
    rng: ChaCha8Rng,
    speaker: Speaker,
}

impl Generator {
    pub fn new(speaker: Speaker, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            speaker,
        }
    }

    fn gauss(&mut self) -> f64 {
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// An utterance of roughly `seconds` length: leading and trailing silence,
    /// alternating voiced and fricative stretches in between.
    pub fn utterance(&mut self, seconds: f64) -> Utterance {
        let mut plan = vec![Segment::Silence(self.rng.random_range(0.08..0.15))];
        let mut total = 0.0;
        while total < seconds - 0.3 {
            let v = self.rng.random_range(0.25..0.7);
            plan.push(Segment::Voiced(v));
            total += v;
            if self.rng.random_bool(0.6) {
                let f = self.rng.random_range(0.05..0.12);
                plan.push(Segment::Fricative(f));
                total += f;
            } else {
                let s = self.rng.random_range(0.05..0.1);
                plan.push(Segment::Silence(s));
                total += s;
            }
        }
        plan.push(Segment::Silence(self.rng.random_range(0.08..0.15)));
        self.render(&plan)
    }

    /// A single steady vowel at constant F0 with no jitter, between short silences.
    pub fn sustained(&mut self, seconds: f64, f0: f64, vowel: usize) -> Utterance {
        let sr = SAMPLE_RATE as f64;
        let lead = (0.05 * sr) as usize;
        let len = (seconds * sr) as usize;
        let mut src = vec![0.0; lead + len + lead];
        let mut gci_times = Vec::new();
        let mut t = lead as f64 / sr;
        let end = (lead + len) as f64 / sr;
        let oq = self.speaker.open_quotient;
        while t + 1.0 / f0 <= end {
            pulse(&mut src, t, 1.0 / f0, oq, 1.0, sr);
            gci_times.push(t + oq / f0);
            t += 1.0 / f0;
        }
        let v = VOWELS[vowel % VOWELS.len()];
        let targets = vec![(0usize, v), (src.len(), v)];
        let mut out = formant_cascade(&src, &targets, self.speaker.formant_scale, sr);
        self.add_floor(&mut out);
        finish(out, gci_times, vec![VoicedSpan { start: lead, end: lead + len }])
    }

    fn add_floor(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x += 1e-4 * self.gauss();
        }
    }

    fn render(&mut self, plan: &[Segment]) -> Utterance {
        let sr = SAMPLE_RATE as f64;
        let total: usize = plan
            .iter()
            .map(|s| match *s {
                Segment::Silence(d) | Segment::Voiced(d) | Segment::Fricative(d) => (d * sr) as usize,
            })
            .sum();
        let mut src = vec![0.0; total];
        let mut fric = vec![0.0; total];
        let mut gci_times = Vec::new();
        let mut voiced = Vec::new();
        let mut targets = Vec::new();
        let mut pos = 0usize;
        let sp = self.speaker.clone();
        for seg in plan {
            match *seg {
                Segment::Silence(d) => pos += (d * sr) as usize,
                Segment::Fricative(d) => {
                    let n = (d * sr) as usize;
                    let amp = self.rng.random_range(0.05..0.15);
                    for i in 0..n {
                        let w = (PI * i as f64 / n as f64).sin();
                        fric[pos + i] = amp * w * self.gauss();
                    }
                    pos += n;
                }
                Segment::Voiced(d) => {
                    let n = (d * sr) as usize;
                    let start_t = pos as f64 / sr;
                    let end_t = (pos + n) as f64 / sr;
                    let (f_start, f_end) = (
                        sp.f0 * (1.0 + sp.f0_range * self.rng.random_range(-1.0..1.0)),
                        sp.f0 * (1.0 + sp.f0_range * self.rng.random_range(-1.0..1.0)),
                    );
                    let v0 = self.rng.random_range(0..VOWELS.len());
                    let v1 = self.rng.random_range(0..VOWELS.len());
                    targets.push((pos, VOWELS[v0]));
                    targets.push((pos + n, VOWELS[v1]));
                    let mut t = start_t;
                    loop {
                        let frac = (t - start_t) / (end_t - start_t);
                        let bell = (PI * frac).sin();
                        let f0 = f_start + (f_end - f_start) * frac + 0.1 * sp.f0 * bell;
                        let period = (1.0 + sp.jitter * self.gauss()) / f0;
                        if t + period > end_t {
                            break;
                        }
                        let ramp = (4.0 * frac.min(1.0 - frac)).clamp(0.15, 1.0);
                        let amp = ramp * (1.0 + sp.shimmer * self.gauss());
                        pulse(&mut src, t, period, sp.open_quotient, amp, sr);
                        let closure = t + sp.open_quotient * period;
                        gci_times.push(closure);
                        let open_end = ((closure * sr) as usize).min(total);
                        let open_start = ((t * sr).ceil() as usize).min(open_end);
                        for v in &mut src[open_start..open_end] {
                            *v += sp.aspiration * amp * self.gauss();
                        }
                        t += period;
                    }
                    voiced.push(VoicedSpan { start: pos, end: pos + n });
                    pos += n;
                }
            }
        }
        if targets.is_empty() {
            targets.push((0, VOWELS[0]));
        }
        let mut out = formant_cascade(&src, &targets, sp.formant_scale, sr);
        let shaped = fricative_filter(&fric, sr);
        for (o, f) in out.iter_mut().zip(&shaped) {
            *o += f;
        }
        self.add_floor(&mut out);
        finish(out, gci_times, voiced)
    }
}

fn finish(mut out: Vec<f64>, gci_times: Vec<f64>, voiced: Vec<VoicedSpan>) -> Utterance {
    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        for x in &mut out {
            *x *= 0.5 / peak;
        }
    }
    let sr = SAMPLE_RATE as f64;
    let gci = gci_times.iter().map(|t| (t * sr).round() as usize).collect();
    Utterance {
        samples: out,
        sample_rate: SAMPLE_RATE,
        gci,
        gci_times,
        voiced,
    }
}

/// Adds one Rosenberg-Klatt flow derivative cycle starting at `t0` seconds.
/// The flow is `a(t/T)^2 - b(t/T)^3` over the open phase and closes abruptly,
/// so the derivative has its negative extreme at `t0 + oq * period`.
fn pulse(out: &mut [f64], t0: f64, period: f64, oq: f64, amp: f64, sr: f64) {
    let te = oq * period;
    let first = (t0 * sr).ceil() as usize;
    let last = ((t0 + te) * sr).ceil() as usize;
    for n in first..last.min(out.len()) {
        let x = (n as f64 / sr - t0) / te;
        // d/dx (x^2 - x^3), extreme -1 at closure
        out[n] += amp * (2.0 * x - 3.0 * x * x);
    }
}

struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn step(&mut self, x: f64, f: f64, bw: f64, sr: f64) -> f64 {
        let r = (-PI * bw / sr).exp();
        let c = -r * r;
        let b = 2.0 * r * (2.0 * PI * f / sr).cos();
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn formant_cascade(src: &[f64], targets: &[(usize, Vowel)], scale: f64, sr: f64) -> Vec<f64> {
    let mut res: Vec<Resonator> = (0..5).map(|_| Resonator { y1: 0.0, y2: 0.0 }).collect();
    let mut seg = 0;
    src.iter()
        .enumerate()
        .map(|(n, &x)| {
            while seg + 1 < targets.len() && targets[seg + 1].0 <= n {
                seg += 1;
            }
            let (a, va) = targets[seg];
            let (b, vb) = targets.get(seg + 1).copied().unwrap_or(targets[seg]);
            let w = if b > a { ((n.saturating_sub(a)) as f64 / (b - a) as f64).min(1.0) } else { 0.0 };
            let mut y = x;
            for (k, r) in res.iter_mut().enumerate() {
                let f = scale * (va.formants[k] + w * (vb.formants[k] - va.formants[k]));
                let bw = va.bandwidths[k] + w * (vb.bandwidths[k] - va.bandwidths[k]);
                y = r.step(y, f.min(0.45 * sr), bw, sr);
            }
            y
        })
        .collect()
}

fn fricative_filter(x: &[f64], sr: f64) -> Vec<f64> {
    let mut r = Resonator { y1: 0.0, y2: 0.0 };
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            d + 0.5 * r.step(d, 5000.0, 1500.0, sr)
        })
        .collect()
}

/// `count` utterances of about `seconds` each from one speaker.
pub fn corpus(speaker: Speaker, count: usize, seconds: f64, seed: u64) -> Vec<Utterance> {
    let mut g = Generator::new(speaker, seed);
    (0..count).map(|_| g.utterance(seconds)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = corpus(Speaker::male(), 2, 1.0, 7);
        let b = corpus(Speaker::male(), 2, 1.0, 7);
        assert_eq!(a[1].samples, b[1].samples);
        assert_eq!(a[1].gci, b[1].gci);
    }

    #[test]
    fn gci_inside_voiced_spans_and_ascending() {
        let u = Generator::new(Speaker::female(), 3).utterance(2.0);
        assert!(u.gci.windows(2).all(|w| w[0] < w[1]));
        for &g in &u.gci {
            assert!(u.voiced.iter().any(|v| g >= v.start && g <= v.end), "{g}");
        }
        let peak = u.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sustained_period_matches() {
        let u = Generator::new(Speaker::male(), 1).sustained(0.5, 125.0, 0);
        let d: Vec<f64> = u.gci_times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d.iter().all(|p| (p - 0.008).abs() < 1e-12));
        assert!((u.f0_at(0.3).unwrap() - 125.0).abs() < 1e-6);
        assert!(u.f0_at(0.01).is_none());
    }

    #[test]
    fn f0_within_speaker_range() {
        let sp = Speaker::male();
        let u = Generator::new(sp.clone(), 9).utterance(3.0);
        let d: Vec<f64> = u.gci_times.windows(2).map(|w| w[1] - w[0]).filter(|p| *p < 0.03).collect();
        assert!(!d.is_empty());
        for p in d {
            let f = 1.0 / p;
            assert!(f > sp.f0 * 0.6 && f < sp.f0 * 1.5, "{f}");
        }
    }
}
