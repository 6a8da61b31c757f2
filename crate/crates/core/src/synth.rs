//! Synthetic disturbance events.
//!
//! Waveform models (t' = t - onset, angles in degrees):
//!
//! - generation trip: `θ0 - A (t' - τ (1 - e^(-t'/τ)))`, the angle integral of
//!   a first-order frequency dip
//! - load shedding: the same ramp with `+A`
//! - oscillation: `θ0 + B e^(-ζ ω t') sin(ω t' + φ)`, `ω = 2π f`
//!
//! Before onset every waveform sits at `θ0`. Gaussian measurement noise
//! with standard deviation `noise_sigma_deg` is added afterwards. Each event
//! draws from its own ChaCha20 stream keyed by `(seed, event index)`, so a
//! dataset is identical whether events are generated serially or in
//! parallel.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, TimeSeriesEvent};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Closed interval a parameter is drawn from uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(value: f64) -> Self {
        Self::new(value, value)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            // still consume a draw so streams stay aligned
            let _: f64 = rng.random();
            self.min
        } else {
            self.min + (self.max - self.min) * rng.random::<f64>()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub noise_sigma_deg: f64,
    pub event_onset_s: f64,
    /// Pre-event angle offset.
    pub theta0_deg: ParamRange,
    /// Post-dip angle drift rate `A` for trips and load shedding (deg/s).
    pub step_amplitude_deg: ParamRange,
    pub time_constant_s: ParamRange,
    pub osc_freq_hz: ParamRange,
    pub osc_damping: ParamRange,
    pub osc_amplitude_deg: ParamRange,
    pub osc_phase_rad: ParamRange,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 10.0,
            duration_s: 60.0,
            noise_sigma_deg: 0.25,
            event_onset_s: 5.0,
            theta0_deg: ParamRange::new(-2.0, 2.0),
            step_amplitude_deg: ParamRange::new(0.1, 1.5),
            time_constant_s: ParamRange::new(0.5, 4.0),
            osc_freq_hz: ParamRange::new(0.2, 1.0),
            osc_damping: ParamRange::new(0.01, 0.15),
            osc_amplitude_deg: ParamRange::new(0.4, 4.0),
            osc_phase_rad: ParamRange::new(0.0, 2.0 * PI),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0) {
            return bad("sample rate and duration must be positive".into());
        }
        let n = self.duration_s * self.sample_rate_hz;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
            return bad(format!("duration x rate = {n} is not a positive integer"));
        }
        if !(self.noise_sigma_deg >= 0.0) {
            return bad("noise sigma must be non-negative".into());
        }
        let ranges = [
            ("theta0_deg", self.theta0_deg),
            ("step_amplitude_deg", self.step_amplitude_deg),
            ("time_constant_s", self.time_constant_s),
            ("osc_freq_hz", self.osc_freq_hz),
            ("osc_damping", self.osc_damping),
            ("osc_amplitude_deg", self.osc_amplitude_deg),
            ("osc_phase_rad", self.osc_phase_rad),
        ];
        for (name, r) in ranges {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                return bad(format!("{name}: range [{}, {}] is invalid", r.min, r.max));
            }
        }
        if self.time_constant_s.min <= 0.0 {
            return bad("time constants must be positive".into());
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    fn elapsed_since_onset(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.num_samples()).map(move |k| {
            let t = k as f64 / self.sample_rate_hz;
            (t >= self.event_onset_s).then(|| t - self.event_onset_s)
        })
    }
}

/// Parameters of one ramp event (trip or shedding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampShape {
    pub theta0: f64,
    pub amplitude: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationShape {
    pub theta0: f64,
    pub amplitude: f64,
    pub freq_hz: f64,
    pub damping: f64,
    pub phase: f64,
}

/// Noise-free ramp; `direction` is -1 for a trip and +1 for load shedding.
pub fn ramp_waveform(cfg: &GeneratorConfig, shape: &RampShape, direction: f64) -> Vec<f64> {
    cfg.elapsed_since_onset()
        .map(|dt| match dt {
            None => shape.theta0,
            Some(dt) => {
                let drift = dt - shape.tau * (1.0 - (-dt / shape.tau).exp());
                shape.theta0 + direction * shape.amplitude * drift
            }
        })
        .collect()
}

pub fn oscillation_waveform(cfg: &GeneratorConfig, shape: &OscillationShape) -> Vec<f64> {
    let omega = 2.0 * PI * shape.freq_hz;
    cfg.elapsed_since_onset()
        .map(|dt| match dt {
            None => shape.theta0,
            Some(dt) => {
                shape.theta0
                    + shape.amplitude
                        * (-shape.damping * omega * dt).exp()
                        * (omega * dt + shape.phase).sin()
            }
        })
        .collect()
}

fn draw_ramp<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> RampShape {
    RampShape {
        theta0: cfg.theta0_deg.sample(rng),
        amplitude: cfg.step_amplitude_deg.sample(rng),
        tau: cfg.time_constant_s.sample(rng),
    }
}

fn draw_oscillation<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> OscillationShape {
    OscillationShape {
        theta0: cfg.theta0_deg.sample(rng),
        amplitude: cfg.osc_amplitude_deg.sample(rng),
        freq_hz: cfg.osc_freq_hz.sample(rng),
        damping: cfg.osc_damping.sample(rng),
        phase: cfg.osc_phase_rad.sample(rng),
    }
}

fn add_noise<R: Rng + ?Sized>(samples: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");
    for s in samples {
        *s += normal.sample(rng);
    }
}

fn finish(cfg: &GeneratorConfig, id: String, label: Label, samples: Vec<f64>) -> TimeSeriesEvent {
    TimeSeriesEvent::new(id, label, cfg.sample_rate_hz, samples)
        .expect("validated config produces a finite, non-empty series")
}

pub fn gen_generation_trip<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
    event_id: impl Into<String>,
) -> TimeSeriesEvent {
    let shape = draw_ramp(cfg, rng);
    let mut samples = ramp_waveform(cfg, &shape, -1.0);
    add_noise(&mut samples, cfg.noise_sigma_deg, rng);
    finish(cfg, event_id.into(), Label::GenerationTrip, samples)
}

pub fn gen_load_shedding<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
    event_id: impl Into<String>,
) -> TimeSeriesEvent {
    let shape = draw_ramp(cfg, rng);
    let mut samples = ramp_waveform(cfg, &shape, 1.0);
    add_noise(&mut samples, cfg.noise_sigma_deg, rng);
    finish(cfg, event_id.into(), Label::LoadShedding, samples)
}

pub fn gen_oscillation<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
    event_id: impl Into<String>,
) -> TimeSeriesEvent {
    let shape = draw_oscillation(cfg, rng);
    let mut samples = oscillation_waveform(cfg, &shape);
    add_noise(&mut samples, cfg.noise_sigma_deg, rng);
    finish(cfg, event_id.into(), Label::Oscillation, samples)
}

pub fn gen_event<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    label: Label,
    rng: &mut R,
    event_id: impl Into<String>,
) -> TimeSeriesEvent {
    match label {
        Label::GenerationTrip => gen_generation_trip(cfg, rng, event_id),
        Label::LoadShedding => gen_load_shedding(cfg, rng, event_id),
        Label::Oscillation => gen_oscillation(cfg, rng, event_id),
    }
}

/// Class composition of the reference dataset: 142 trips, 145 load
/// shedding events, 87 oscillations.
pub fn reference_counts() -> BTreeMap<Label, usize> {
    class_counts([142, 145, 87])
}

pub fn class_counts(counts: [usize; 3]) -> BTreeMap<Label, usize> {
    Label::ALL.into_iter().zip(counts).collect()
}

/// Generate `counts[label]` events per class, ids `<label>_<nnnn>`.
pub fn build_dataset(cfg: &GeneratorConfig, counts: &BTreeMap<Label, usize>) -> Result<Dataset> {
    cfg.validate()?;
    if counts.values().any(|&c| c == 0) {
        return Err(Error::InvalidArgument("class counts must be positive".into()));
    }
    let jobs: Vec<(Label, usize)> = Label::ALL
        .into_iter()
        .flat_map(|l| (0..counts.get(&l).copied().unwrap_or(0)).map(move |k| (l, k)))
        .collect();
    let events = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(label, k))| {
            let mut rng = rng::stream(cfg.seed, Purpose::Synth, index as u64);
            gen_event(cfg, label, &mut rng, format!("{label}_{k:04}"))
        })
        .collect();
    Dataset::new(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::truncate_window;

    fn quiet() -> GeneratorConfig {
        GeneratorConfig {
            noise_sigma_deg: 0.0,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn trip_starts_at_theta0() {
        let cfg = GeneratorConfig {
            event_onset_s: 0.0,
            ..quiet()
        };
        let shape = RampShape {
            theta0: 3.25,
            amplitude: 1.0,
            tau: 1.0,
        };
        assert_eq!(ramp_waveform(&cfg, &shape, -1.0)[0], 3.25);
    }

    #[test]
    fn noiseless_ramps_are_monotone_after_onset() {
        let cfg = quiet();
        let onset = (cfg.event_onset_s * cfg.sample_rate_hz) as usize;
        for seed in 0..20 {
            let mut rng = rng::stream(seed, Purpose::Synth, 0);
            let trip = gen_generation_trip(&cfg, &mut rng, "t");
            let shed = gen_load_shedding(&cfg, &mut rng, "s");
            for w in trip.samples()[onset..].windows(2) {
                assert!(w[1] <= w[0]);
            }
            for w in shed.samples()[onset..].windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn shedding_mirrors_trip_about_theta0() {
        let cfg = quiet();
        let shape = RampShape {
            theta0: -1.5,
            amplitude: 0.7,
            tau: 2.0,
        };
        let trip = ramp_waveform(&cfg, &shape, -1.0);
        let shed = ramp_waveform(&cfg, &shape, 1.0);
        for (a, b) in trip.iter().zip(&shed) {
            assert!(((a - shape.theta0) + (b - shape.theta0)).abs() < 1e-12);
        }
        let onset = (cfg.event_onset_s * cfg.sample_rate_hz) as usize;
        assert!(shed[..onset].iter().all(|&v| v == shape.theta0));
    }

    #[test]
    fn oscillation_analytic_values() {
        let cfg = GeneratorConfig {
            event_onset_s: 0.0,
            ..quiet()
        };
        let shape = OscillationShape {
            theta0: 0.0,
            amplitude: 1.0,
            freq_hz: 0.5,
            damping: 0.0,
            phase: 0.0,
        };
        let w = oscillation_waveform(&cfg, &shape);
        assert_eq!(w[0], 0.0);
        assert!((w[5] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn damped_oscillation_stays_inside_envelope() {
        let cfg = quiet();
        let shape = OscillationShape {
            theta0: 2.0,
            amplitude: 3.0,
            freq_hz: 0.7,
            damping: 0.1,
            phase: 0.4,
        };
        let omega = 2.0 * PI * shape.freq_hz;
        for (k, v) in oscillation_waveform(&cfg, &shape).iter().enumerate() {
            let t = k as f64 / cfg.sample_rate_hz - cfg.event_onset_s;
            if t >= 0.0 {
                let env = shape.amplitude * (-shape.damping * omega * t).exp();
                assert!((v - shape.theta0).abs() <= env + 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_events_match_closed_form() {
        let cfg = GeneratorConfig { seed: 3, ..quiet() };
        let mut rng = rng::stream(1, Purpose::Synth, 0);
        let ev = gen_oscillation(&cfg, &mut rng, "o");
        let mut rng = rng::stream(1, Purpose::Synth, 0);
        let shape = draw_oscillation(&cfg, &mut rng);
        let omega = 2.0 * PI * shape.freq_hz;
        for (k, v) in ev.samples().iter().enumerate() {
            let t = k as f64 / 10.0 - 5.0;
            let want = if t < 0.0 {
                shape.theta0
            } else {
                shape.theta0
                    + shape.amplitude * (-shape.damping * omega * t).exp() * (omega * t + shape.phase).sin()
            };
            assert!((v - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn reference_dataset_composition() {
        let d = build_dataset(&GeneratorConfig::default(), &reference_counts()).unwrap();
        assert_eq!(d.len(), 374);
        assert_eq!(d.class_counts(), &class_counts([142, 145, 87]));
        assert!(d.events().iter().all(|e| e.len() == 600));
    }

    #[test]
    fn one_per_class_and_determinism() {
        let cfg = GeneratorConfig {
            seed: 11,
            ..GeneratorConfig::default()
        };
        let a = build_dataset(&cfg, &class_counts([1, 1, 1])).unwrap();
        let b = build_dataset(&cfg, &class_counts([1, 1, 1])).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
        let labels: Vec<Label> = a.events().iter().map(|e| e.label()).collect();
        assert_eq!(labels, Label::ALL.to_vec());
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = GeneratorConfig {
            osc_freq_hz: ParamRange::new(1.0, 0.5),
            ..GeneratorConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = GeneratorConfig {
            duration_s: 0.05,
            ..GeneratorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    // Brute-force leave-one-out 1-NN on raw truncated series.
    #[test]
    fn default_classes_are_separable_by_nearest_neighbour() {
        let cfg = GeneratorConfig {
            seed: 2024,
            ..GeneratorConfig::default()
        };
        let d = build_dataset(&cfg, &class_counts([10, 10, 10])).unwrap();
        let series: Vec<Vec<f64>> = d
            .events()
            .iter()
            .map(|e| truncate_window(e, 30.0).unwrap().samples().to_vec())
            .collect();
        let mut correct = 0;
        for i in 0..series.len() {
            let nearest = (0..series.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let da: f64 = series[i].iter().zip(&series[a]).map(|(x, y)| (x - y).powi(2)).sum();
                    let db: f64 = series[i].iter().zip(&series[b]).map(|(x, y)| (x - y).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            if d.events()[nearest].label() == d.events()[i].label() {
                correct += 1;
            }
        }
        assert!(correct as f64 / 30.0 > 0.8, "1-NN LOO accuracy {correct}/30");
    }
}
