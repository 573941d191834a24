//! Line-oriented text formats: pitch tracks, vocoder parameters and envelope dumps.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! written file parses back to bit-identical values.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::envelope::EnvelopeTrack;
use crate::pitch::{PitchFrame, PitchTrack, PITCH_HOP};
use crate::synth::{DsmFrame, DsmParams};
use crate::{Error, Result};

pub const PARAMS_TAG: &str = "#DSMPARAMS";

/// Shortest round-trip decimal, in exponent form for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn parse<T: FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} `{token}`"),
    })
}

fn parse_flag(token: &str, line: usize) -> Result<bool> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse {
            line,
            message: format!("voicing flag must be 0 or 1, got `{token}`"),
        }),
    }
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// `time_s f0_hz voiced` lines. The hop is taken from the first two frames.
pub fn parse_pitch(text: &str, f0_min: f64, f0_max: f64) -> Result<PitchTrack> {
    let mut frames = Vec::new();
    for (line, l) in content_lines(text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected `time f0 voiced`, got {} fields", t.len()),
            });
        }
        let time: f64 = parse(t[0], line, "time")?;
        let f0: f64 = parse(t[1], line, "f0")?;
        let voiced = parse_flag(t[2], line)?;
        if voiced && !(f0_min..=f0_max).contains(&f0) {
            return Err(Error::Parse {
                line,
                message: format!("f0 {f0} Hz outside [{f0_min}, {f0_max}]"),
            });
        }
        if frames.last().is_some_and(|p: &PitchFrame| time <= p.time) {
            return Err(Error::Parse {
                line,
                message: "times must be strictly increasing".into(),
            });
        }
        frames.push(PitchFrame { time, f0, voiced });
    }
    let hop = match frames.as_slice() {
        [a, b, ..] => b.time - a.time,
        _ => PITCH_HOP,
    };
    PitchTrack::new(frames, hop, f0_min, f0_max)
}

pub fn format_pitch(track: &PitchTrack) -> String {
    let mut out = String::new();
    for f in track.frames() {
        writeln!(out, "{} {} {}", num(f.time), num(f.f0), u8::from(f.voiced)).expect("string write");
    }
    out
}

pub fn format_params(p: &DsmParams) -> String {
    let mut out = format!(
        "{PARAMS_TAG} k={} order={} alpha={} gamma={} seed={}\n",
        p.k,
        p.order,
        num(p.alpha),
        num(p.gamma),
        p.seed
    );
    for f in &p.frames {
        write!(out, "{} {} {}", num(f.time), u8::from(f.voiced), num(f.f0)).expect("string write");
        for v in f.weights.iter().chain(&f.envelope) {
            write!(out, " {}", num(*v)).expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Parses a parameter file. An empty file is a zero-frame parameter set.
pub fn parse_params(text: &str) -> Result<DsmParams> {
    let mut params = DsmParams {
        k: 0,
        order: 24,
        alpha: 0.42,
        gamma: 0.0,
        seed: 0,
        frames: Vec::new(),
    };
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix(PARAMS_TAG) {
            if header_seen || !params.frames.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "header must come first and only once".into(),
                });
            }
            header_seen = true;
            for kv in rest.split_whitespace() {
                let (key, value) = kv.split_once('=').ok_or_else(|| Error::Parse {
                    line,
                    message: format!("expected key=value, got `{kv}`"),
                })?;
                match key {
                    "k" => params.k = parse(value, line, "k")?,
                    "order" => params.order = parse(value, line, "order")?,
                    "alpha" => params.alpha = parse(value, line, "alpha")?,
                    "gamma" => params.gamma = parse(value, line, "gamma")?,
                    "seed" => params.seed = parse(value, line, "seed")?,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown header key `{key}`"),
                        })
                    }
                }
            }
            continue;
        }
        if l.starts_with('#') {
            continue;
        }
        if !header_seen {
            return Err(Error::Parse {
                line,
                message: format!("missing `{PARAMS_TAG}` header"),
            });
        }
        let t: Vec<&str> = l.split_whitespace().collect();
        let expected = 3 + params.k + params.order + 1;
        if t.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} fields, got {}", t.len()),
            });
        }
        let time: f64 = parse(t[0], line, "time")?;
        let voiced = parse_flag(t[1], line)?;
        let f0: f64 = parse(t[2], line, "f0")?;
        let numbers = t[3..]
            .iter()
            .map(|v| parse::<f64>(v, line, "coefficient"))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = numbers.iter().chain([&time, &f0]).find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {bad}"),
            });
        }
        if voiced && !(f0 > 0.0) {
            return Err(Error::Parse {
                line,
                message: "voiced frame needs a positive f0".into(),
            });
        }
        if params.frames.last().is_some_and(|p: &DsmFrame| time <= p.time) {
            return Err(Error::Parse {
                line,
                message: "times must be strictly increasing".into(),
            });
        }
        params.frames.push(DsmFrame {
            time,
            voiced,
            f0: if voiced { f0 } else { 0.0 },
            weights: numbers[..params.k].to_vec(),
            envelope: numbers[params.k..].to_vec(),
        });
    }
    Ok(params)
}

pub fn format_envelope(env: &EnvelopeTrack) -> String {
    let mut out = String::new();
    for f in env.frames() {
        let line: Vec<String> = f.iter().map(|v| num(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_envelope(text: &str) -> Result<Vec<Vec<f64>>> {
    content_lines(text)
        .map(|(line, l)| l.split_whitespace().map(|v| parse(v, line, "coefficient")).collect())
        .collect()
}
