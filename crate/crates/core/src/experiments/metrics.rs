//! ESS histograms and control-rate timing.

use std::fmt::Write as _;
use std::time::Instant;

use super::{ExperimentError, Scenario};
use crate::config::Variant;
use crate::env::Contact;

/// Mass of `values` in `bins` equal-width bins over `[0, 1]`. Values at or
/// above 1 land in the top bin, values below 0 in the bottom one.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    assert!(bins >= 2, "need at least two bins");
    let mut mass = vec![0.0; bins];
    if values.is_empty() {
        return mass;
    }
    for v in values {
        let i = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        mass[i] += 1.0;
    }
    let n = values.len() as f64;
    mass.iter_mut().for_each(|m| *m /= n);
    mass
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssHistogram {
    pub variant: Variant,
    /// ESS / N of every control update, in order.
    pub normalized: Vec<f64>,
    pub mass: Vec<f64>,
}

pub const HISTOGRAM_HEADER: &str = "variant,bin_lo,bin_hi,mass";

pub fn histogram_csv(hists: &[EssHistogram]) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for h in hists {
        let bins = h.mass.len() as f64;
        for (i, m) in h.mass.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                h.variant,
                i as f64 / bins,
                (i + 1) as f64 / bins,
                m
            );
        }
    }
    out
}

/// Normalized-ESS histogram over `n_steps` control updates per variant.
/// Episodes that end early are restarted with the next seed.
pub fn ess_histogram(
    scenario: &Scenario,
    variants: &[Variant],
    n_steps: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<EssHistogram>, ExperimentError> {
    if bins < 2 {
        return Err(ExperimentError::Other(
            "histogram needs at least two bins".into(),
        ));
    }
    let samples = scenario.config().controller.samples as f64;
    variants
        .iter()
        .map(|&variant| {
            let mut normalized = Vec::with_capacity(n_steps);
            let mut episode = 0u64;
            while normalized.len() < n_steps {
                let r = scenario.run_episode(variant, seed + episode, n_steps - normalized.len());
                if r.ess.is_empty() {
                    return Err(ExperimentError::Other(format!(
                        "{variant} made no control update: {}",
                        r.cause.unwrap_or_default()
                    )));
                }
                normalized.extend(r.ess.iter().map(|e| e / samples));
                episode += 1;
            }
            Ok(EssHistogram {
                variant,
                mass: histogram(&normalized, bins),
                normalized,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub variant: Variant,
    pub steps: usize,
    pub mean_seconds: f64,
    pub p95_seconds: f64,
}

impl TimingRow {
    /// Mean control rate, Hz.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean_seconds
    }

    /// Rate at the 95th-percentile update time, Hz.
    pub fn p95_rate(&self) -> f64 {
        1.0 / self.p95_seconds
    }
}

pub const TIMING_HEADER: &str = "variant,steps,mean_s,p95_s,rate_hz,p95_rate_hz";

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.variant,
            r.steps,
            r.mean_seconds,
            r.p95_seconds,
            r.rate(),
            r.p95_rate()
        );
    }
    out
}

/// Times `n_steps` closed-loop control updates per variant after `warmup`
/// untimed ones. The episode restarts from the initial state whenever it
/// crashes or reaches its goal.
pub fn timing_report(
    scenario: &Scenario,
    variants: &[Variant],
    n_steps: usize,
    warmup: usize,
    seed: u64,
) -> Result<Vec<TimingRow>, ExperimentError> {
    if n_steps == 0 {
        return Err(ExperimentError::Other(
            "timing needs at least one step".into(),
        ));
    }
    let env = scenario.env().as_ref();
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let mut controller = scenario.controller(variant, seed)?;
        let mut rng = crate::sampler::stream_rng(seed, super::PLANT_STREAM, 0);
        let mut x = env.initial_state();
        let mut times = Vec::with_capacity(n_steps);
        for k in 0..warmup + n_steps {
            let started = Instant::now();
            let (u, _) = controller.step(&x)?;
            let elapsed = started.elapsed().as_secs_f64();
            if k >= warmup {
                times.push(elapsed);
            }
            let next = env.plant_step(&x, &u, &mut rng);
            match next {
                Ok(next) if env.contact(&next) != Contact::Crash && !env.done(&next) => x = next,
                _ => {
                    x = env.initial_state();
                    controller.reset_plan();
                }
            }
        }
        let mean_seconds = times.iter().sum::<f64>() / times.len() as f64;
        times.sort_by(f64::total_cmp);
        let p95 = times[((0.95 * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1];
        rows.push(TimingRow {
            variant,
            steps: n_steps,
            mean_seconds,
            p95_seconds: p95,
        });
    }
    Ok(rows)
}
