//! Deterministic synthetic clips used by tests, examples and the CLI.

use std::f64::consts::TAU;

use crate::audio::AudioClip;
use crate::rng::{self, Stream};

pub const FIXTURE_RATE: u32 = 22_050;

/// Drum-like hits over a sustained chord.
///
/// A major triad pad at low level runs through the whole clip; every 0.375 s
/// a hit adds a decaying noise burst and a 60 Hz thump.
pub fn drums_over_pad(seconds: f64, seed: u64) -> AudioClip {
    let rate = FIXTURE_RATE as f64;
    let n = (seconds * rate).round() as usize;
    let hit_every = (0.375 * rate) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let pad: f64 = [220.0, 277.18, 329.63].iter().map(|f| 0.08 * (TAU * f * t).sin()).sum::<f64>()
                * (0.8 + 0.2 * (TAU * 0.5 * t).sin());
            let since = (i % hit_every) as f64 / rate;
            let noise = rng::uniform(seed, Stream::Fixture, i as u64, 0, -1.0, 1.0);
            let hit = (-since / 0.03).exp() * 0.45 * noise + (-since / 0.08).exp() * 0.35 * (TAU * 60.0 * since).sin();
            pad + hit
        })
        .collect();
    AudioClip::new(samples, FIXTURE_RATE).expect("fixture samples are finite and in range")
}

/// A `freq` Hz sine present only in `[start, end)` seconds over a quiet
/// low-frequency bed.
pub fn tone_burst(seconds: f64, freq: f64, start: f64, end: f64) -> AudioClip {
    let rate = FIXTURE_RATE as f64;
    let n = (seconds * rate).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let bed = 0.05 * (TAU * 110.0 * t).sin();
            // 10 ms raised-cosine edges
            let ramp = 0.01;
            let env = if t < start || t >= end {
                0.0
            } else {
                let edge = ((t - start).min(end - t) / ramp).min(1.0);
                0.5 - 0.5 * (std::f64::consts::PI * edge).cos()
            };
            bed + 0.3 * env * (TAU * freq * t).sin()
        })
        .collect();
    AudioClip::new(samples, FIXTURE_RATE).expect("fixture samples are finite and in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = drums_over_pad(1.0, 42);
        assert_eq!(a, drums_over_pad(1.0, 42));
        assert_ne!(a, drums_over_pad(1.0, 43));
        assert_eq!(a.len(), 22_050);
        assert!(a.samples.iter().all(|s| s.abs() < 1.0));
    }

    #[test]
    fn burst_is_confined() {
        let c = tone_burst(2.0, 2000.0, 0.5, 1.5);
        let rate = FIXTURE_RATE as f64;
        let quiet = &c.samples[..(0.5 * rate) as usize];
        assert!(quiet.iter().all(|s| s.abs() <= 0.05 + 1e-12));
        let loud = &c.samples[(0.9 * rate) as usize..(1.1 * rate) as usize];
        assert!(loud.iter().any(|s| s.abs() > 0.3));
    }
}
