//! Deterministic, parallel Monte-Carlo engine.
//!
//! Thresholds are set empirically: `calibrate` runs null-hypothesis trials at
//! the designated reference-channel DNR (`DNR_avg^eta`) and takes the upper
//! `(1 - pfa)` order statistic of each detector's statistic pool. The curve
//! runners then measure empirical false-alarm probability against DNR or MNR
//! and detection probability against SNR, with Wilson 95% intervals.
//!
//! Reproducibility contract: every trial owns a ChaCha8 stream addressed by
//! `(master seed, purpose tag, trial index)`, and aggregation is
//! order-independent, so results are bit-identical for a given
//! `(seed, n_trials, config)` regardless of the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detectors::{compute_statistics, DetectorError, DetectorKind};
use crate::scenario::{draw_amplitudes, PathGeometry, Scenario, ScenarioError};
use crate::signal::{
    compensate_with_tables, synthesize_with_tables, AlignedData, DelayDopplerPlan, Hypothesis,
    OperatorTables, SignalError,
};
use crate::{CMatrix, C64};

/// z-score of the two-sided 95% interval.
pub const WILSON_Z_95: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum McError {
    #[error("quantile guard violated: n_trials * pfa = {product} < 50")]
    GuardViolation { product: f64 },
    #[error("pfa must lie strictly inside (0, 1), got {0}")]
    InvalidPfa(f64),
    #[error("empty detector list")]
    NoDetectors,
    #[error("empty sweep")]
    EmptySweep,
    #[error("thresholds missing detector {0}")]
    MissingThreshold(DetectorKind),
    #[error("MNR sweep requires a scenario with a scatterer")]
    MissingScatterer,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("geometry: {0}")]
    Geometry(#[from] crate::scenario::GeometryError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Purpose tags partition the RNG stream space between campaign stages.
mod purpose {
    pub const CALIBRATE: u64 = 0x0001;
    pub const FAP_SWEEP_BASE: u64 = 0x0100;
    pub const PD_SWEEP_BASE: u64 = 0x0200;
    pub const MNR_SWEEP_BASE: u64 = 0x0300;
    pub const INVARIANCE: u64 = 0x0400;
}

/// Per-trial RNG: one ChaCha8 stream per (seed, purpose, trial index).
fn trial_rng(seed: u64, purpose_tag: u64, trial: u64) -> ChaCha8Rng {
    assert!(purpose_tag < (1 << 16) && trial < (1 << 48));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose_tag << 48) | trial);
    rng
}

/// Empirical thresholds calibrated at one reference-channel DNR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub pfa: f64,
    pub dnr_eta_db: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub thresholds: BTreeMap<DetectorKind, f64>,
}

impl ThresholdTable {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("threshold table serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn detectors(&self) -> Vec<DetectorKind> {
        self.thresholds.keys().copied().collect()
    }
}

/// One (sweep value, detector) estimate with its Wilson 95% interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sweep_db: f64,
    pub detector: DetectorKind,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_trials: u64,
}

impl CurvePoint {
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Stable CSV header for curve files.
pub const CURVE_CSV_HEADER: &str = "sweep_db,detector,estimate,ci_low,ci_high,n_trials";

/// Renders curve points as RFC-4180 CSV with the stable column order.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.sweep_db, p.detector, p.estimate, p.ci_low, p.ci_high, p.n_trials
        ));
    }
    out
}

/// Wilson score interval for `successes` out of `n` at z-score `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The analytic bounds at k = 0 and k = n are exactly 0 and 1; clamping
    // keeps the estimate inside the interval despite rounding.
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Runs `n_trials` independent syntheses and returns one statistic pool per
/// requested detector, in trial order.
fn statistic_pools(
    scenario: &Scenario,
    detectors: &[DetectorKind],
    hypothesis: Hypothesis,
    n_trials: u64,
    seed: u64,
    purpose_tag: u64,
) -> Result<Vec<Vec<f64>>, McError> {
    scenario.validate()?;
    if detectors.is_empty() {
        return Err(McError::NoDetectors);
    }
    let geometry = PathGeometry::from_scenario(scenario)?;
    let plan = DelayDopplerPlan::new(scenario.n_samples);
    let tables = OperatorTables::new(&geometry, scenario.n_samples, scenario.sample_rate);
    let per_trial: Result<Vec<Vec<f64>>, McError> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, purpose_tag, trial);
            let amps = draw_amplitudes(scenario, &mut rng);
            let obs = synthesize_with_tables(
                scenario, &amps, &geometry, hypothesis, &plan, &tables, &mut rng,
            )?;
            let aligned = compensate_with_tables(&obs, &geometry, &plan, &tables)?;
            let set = compute_statistics(&aligned, detectors)?;
            Ok(detectors.iter().map(|k| set.get(*k).unwrap()).collect())
        })
        .collect();
    let per_trial = per_trial?;
    let mut pools = vec![Vec::with_capacity(n_trials as usize); detectors.len()];
    for row in per_trial {
        for (pool, v) in pools.iter_mut().zip(row) {
            pool.push(v);
        }
    }
    Ok(pools)
}

/// Upper `(1 - pfa)` empirical quantile: the `ceil(n * (1 - pfa))`-th order
/// statistic of the ascending sort.
fn upper_quantile(pool: &mut [f64], pfa: f64) -> f64 {
    pool.sort_unstable_by(f64::total_cmp);
    let n = pool.len();
    let idx = ((n as f64) * (1.0 - pfa)).ceil() as usize;
    pool[idx.clamp(1, n) - 1]
}

/// Calibrates thresholds on null-hypothesis data at the scenario's DNR
/// (which becomes the table's `dnr_eta_db`). Multipath is excluded from the
/// threshold-setting model even if the scenario carries a scatterer.
pub fn calibrate(
    scenario: &Scenario,
    detectors: &[DetectorKind],
    pfa: f64,
    n_trials: u64,
    seed: u64,
) -> Result<ThresholdTable, McError> {
    if pfa.is_nan() || pfa <= 0.0 || pfa >= 1.0 {
        return Err(McError::InvalidPfa(pfa));
    }
    let product = n_trials as f64 * pfa;
    if product < 50.0 {
        return Err(McError::GuardViolation { product });
    }
    let scn = scenario.without_multipath();
    let pools = statistic_pools(
        &scn,
        detectors,
        Hypothesis::H0,
        n_trials,
        seed,
        purpose::CALIBRATE,
    )?;
    let mut thresholds = BTreeMap::new();
    for (kind, mut pool) in detectors.iter().zip(pools) {
        thresholds.insert(*kind, upper_quantile(&mut pool, pfa));
    }
    Ok(ThresholdTable {
        pfa,
        dnr_eta_db: scenario.dnr_avg_db,
        n_trials,
        seed,
        thresholds,
    })
}

#[allow(clippy::too_many_arguments)]
fn exceedance_points(
    scenario: &Scenario,
    table: &ThresholdTable,
    sweep_db: &[f64],
    hypothesis: Hypothesis,
    n_trials: u64,
    seed: u64,
    purpose_base: u64,
    rebuild: impl Fn(&Scenario, f64) -> Result<Scenario, McError>,
) -> Result<Vec<CurvePoint>, McError> {
    if sweep_db.is_empty() {
        return Err(McError::EmptySweep);
    }
    // Purpose tags allocate one block of 256 per sweep family.
    assert!(sweep_db.len() <= 0xff, "sweep limited to 255 points");
    let detectors = table.detectors();
    if detectors.is_empty() {
        return Err(McError::NoDetectors);
    }
    let mut out = Vec::with_capacity(sweep_db.len() * detectors.len());
    for (p_idx, &db) in sweep_db.iter().enumerate() {
        let scn = rebuild(scenario, db)?;
        let pools = statistic_pools(
            &scn,
            &detectors,
            hypothesis,
            n_trials,
            seed,
            purpose_base + p_idx as u64,
        )?;
        for (kind, pool) in detectors.iter().zip(pools) {
            let eta = *table
                .thresholds
                .get(kind)
                .ok_or(McError::MissingThreshold(*kind))?;
            let hits = pool.iter().filter(|&&v| v > eta).count() as u64;
            let estimate = hits as f64 / n_trials as f64;
            let (ci_low, ci_high) = wilson_interval(hits, n_trials, WILSON_Z_95);
            out.push(CurvePoint {
                sweep_db: db,
                detector: *kind,
                estimate,
                ci_low,
                ci_high,
                n_trials,
            });
        }
    }
    Ok(out)
}

/// Empirical false-alarm probability vs reference-channel DNR at fixed
/// thresholds (null hypothesis, no multipath).
pub fn fap_curve(
    scenario: &Scenario,
    table: &ThresholdTable,
    sweep_db: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<CurvePoint>, McError> {
    exceedance_points(
        scenario,
        table,
        sweep_db,
        Hypothesis::H0,
        n_trials,
        seed,
        purpose::FAP_SWEEP_BASE,
        |s, db| Ok(s.with_dnr_db(db).without_multipath()),
    )
}

/// Empirical false-alarm probability vs reference-channel MNR: multipath on
/// the reference channels at the swept ratio, DNR held at the scenario value.
pub fn mnr_curve(
    scenario: &Scenario,
    table: &ThresholdTable,
    sweep_db: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<CurvePoint>, McError> {
    if scenario.scatterer_position.is_none() {
        return Err(McError::MissingScatterer);
    }
    exceedance_points(
        scenario,
        table,
        sweep_db,
        Hypothesis::H0,
        n_trials,
        seed,
        purpose::MNR_SWEEP_BASE,
        |s, db| Ok(s.with_mnr_db(db)?),
    )
}

/// Detection probability vs surveillance-channel SNR at fixed thresholds.
pub fn pd_curve(
    scenario: &Scenario,
    table: &ThresholdTable,
    sweep_db: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<CurvePoint>, McError> {
    exceedance_points(
        scenario,
        table,
        sweep_db,
        Hypothesis::H1,
        n_trials,
        seed,
        purpose::PD_SWEEP_BASE,
        |s, db| Ok(s.with_snr_db(db).without_multipath()),
    )
}

/// Scaling-group invariance campaign: synthesizes `n_cases` datasets under
/// H1, applies random per-receiver complex scalings to both channels, and
/// returns the maximum relative deviation across the five two-channel
/// statistics.
pub fn invariance_campaign(scenario: &Scenario, n_cases: u64, seed: u64) -> Result<f64, McError> {
    scenario.validate()?;
    let geometry = PathGeometry::from_scenario(scenario)?;
    let plan = DelayDopplerPlan::new(scenario.n_samples);
    let tables = OperatorTables::new(&geometry, scenario.n_samples, scenario.sample_rate);
    let kinds = DetectorKind::TWO_CHANNEL;
    let deviations: Result<Vec<f64>, McError> = (0..n_cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = trial_rng(seed, purpose::INVARIANCE, case);
            let amps = draw_amplitudes(scenario, &mut rng);
            let obs = synthesize_with_tables(
                scenario,
                &amps,
                &geometry,
                Hypothesis::H1,
                &plan,
                &tables,
                &mut rng,
            )?;
            let aligned = compensate_with_tables(&obs, &geometry, &plan, &tables)?;
            let gammas = random_gammas(scenario.nt(), scenario.nr(), &mut rng);
            max_relative_deviation(&aligned, &gammas, &kinds)
        })
        .collect();
    Ok(deviations?.into_iter().fold(0.0, f64::max))
}

/// Random nonzero scalings with |gamma| log-uniform in [0.1, 10].
fn random_gammas<R: rand::Rng + ?Sized>(nt: usize, nr: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(nt, nr, |_, _| {
        let mag = 10f64.powf(rng.random::<f64>() * 2.0 - 1.0);
        C64::from_polar(mag, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// Maximum relative deviation of the listed statistics under one scaling.
pub fn max_relative_deviation(
    aligned: &AlignedData,
    gammas: &CMatrix,
    kinds: &[DetectorKind],
) -> Result<f64, McError> {
    let base = compute_statistics(aligned, kinds)?;
    let scaled = compute_statistics(&aligned.scaled_per_receiver(gammas), kinds)?;
    let mut worst = 0.0f64;
    for &kind in kinds {
        let a = base.get(kind).unwrap();
        let b = scaled.get(kind).unwrap();
        let denom = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((a - b).abs() / denom);
    }
    Ok(worst)
}
