//! Multistatic scenario description and channel parameterization.
//!
//! A [`Scenario`] holds the network geometry (transmitters, receivers, target,
//! optional clutter scatterer), the per-transmitter carriers, the sampling
//! parameters, the per-channel noise floors and the requested average power
//! ratios. From it, [`PathGeometry`] derives bistatic delays and Doppler
//! shifts, and [`draw_amplitudes`] realizes complex channel amplitudes whose
//! empirical DNR/SNR/MNR averages match the request exactly.

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{CMatrix, RMatrix, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2-D position or velocity, meters / meters-per-second.
pub type Point = Vector2<f64>;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario needs at least one transmitter")]
    NoTransmitters,
    #[error("scenario needs at least one receiver")]
    NoReceivers,
    #[error("carriers count {carriers} does not match transmitter count {nt}")]
    CarrierCountMismatch { carriers: usize, nt: usize },
    #[error("noise variance matrix is {rows}x{cols}, expected {nt}x{nr}")]
    NoiseShapeMismatch {
        rows: usize,
        cols: usize,
        nt: usize,
        nr: usize,
    },
    #[error("noise variance at ({j},{k}) must be positive, got {value}")]
    NonPositiveNoise { j: usize, k: usize, value: f64 },
    #[error("n_samples {l} must be at least 2*Nr = {min}")]
    TooFewSamples { l: usize, min: usize },
    #[error("mnr_avg_db and scatterer_position must be present or absent together")]
    MultipathFieldsInconsistent,
    #[error("sample_rate must be positive, got {0}")]
    NonPositiveSampleRate(f64),
    #[error("carrier {j} must be positive, got {value}")]
    NonPositiveCarrier { j: usize, value: f64 },
    #[error("non-finite coordinate in scenario geometry")]
    NonFiniteGeometry,
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("target coincides with transmitter {j}")]
    TargetAtTransmitter { j: usize },
    #[error("target coincides with receiver {k}")]
    TargetAtReceiver { k: usize },
    #[error("wavelength must be positive, got {0}")]
    NonPositiveWavelength(f64),
}

/// Full description of one multistatic detection problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Transmitter positions, meters.
    pub tx_positions: Vec<Point>,
    /// Receiver positions, meters.
    pub rx_positions: Vec<Point>,
    /// Target position, meters.
    pub target_position: Point,
    /// Target velocity, m/s.
    pub target_velocity: Point,
    /// Clutter scatterer position, meters; present iff `mnr_avg_db` is.
    pub scatterer_position: Option<Point>,
    /// Carrier frequency per transmitter, Hz.
    pub carriers: Vec<f64>,
    /// Baseband sample rate, Hz.
    pub sample_rate: f64,
    /// Integration length in samples (L).
    pub n_samples: usize,
    /// Per-channel noise variances, Nt x Nr, watts (total per complex sample).
    pub noise_variances: RMatrix,
    /// Average direct-path-to-noise ratio of the reference channels, dB.
    pub dnr_avg_db: f64,
    /// Average target-path-to-noise ratio of the surveillance channels, dB.
    pub snr_avg_db: f64,
    /// Average multipath-to-noise ratio of the reference channels, dB.
    pub mnr_avg_db: Option<f64>,
}

impl Scenario {
    pub fn nt(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn nr(&self) -> usize {
        self.rx_positions.len()
    }

    /// Checks the structural invariants. Returns non-fatal warnings (e.g. a
    /// single-receiver network, where the eigen-difference statistics
    /// degenerate) on success.
    pub fn validate(&self) -> Result<Vec<String>, ScenarioError> {
        let nt = self.nt();
        let nr = self.nr();
        if nt == 0 {
            return Err(ScenarioError::NoTransmitters);
        }
        if nr == 0 {
            return Err(ScenarioError::NoReceivers);
        }
        if self.carriers.len() != nt {
            return Err(ScenarioError::CarrierCountMismatch {
                carriers: self.carriers.len(),
                nt,
            });
        }
        if self.noise_variances.nrows() != nt || self.noise_variances.ncols() != nr {
            return Err(ScenarioError::NoiseShapeMismatch {
                rows: self.noise_variances.nrows(),
                cols: self.noise_variances.ncols(),
                nt,
                nr,
            });
        }
        for j in 0..nt {
            for k in 0..nr {
                let v = self.noise_variances[(j, k)];
                if v.is_nan() || v <= 0.0 {
                    return Err(ScenarioError::NonPositiveNoise { j, k, value: v });
                }
            }
        }
        if self.n_samples < 2 * nr {
            return Err(ScenarioError::TooFewSamples {
                l: self.n_samples,
                min: 2 * nr,
            });
        }
        if self.mnr_avg_db.is_some() != self.scatterer_position.is_some() {
            return Err(ScenarioError::MultipathFieldsInconsistent);
        }
        if self.sample_rate.is_nan() || self.sample_rate <= 0.0 {
            return Err(ScenarioError::NonPositiveSampleRate(self.sample_rate));
        }
        for (j, &f) in self.carriers.iter().enumerate() {
            if f.is_nan() || f <= 0.0 {
                return Err(ScenarioError::NonPositiveCarrier { j, value: f });
            }
        }
        let finite = |p: &Point| p.x.is_finite() && p.y.is_finite();
        if !self.tx_positions.iter().all(finite)
            || !self.rx_positions.iter().all(finite)
            || !finite(&self.target_position)
            || !finite(&self.target_velocity)
            || !self.scatterer_position.iter().all(finite)
        {
            return Err(ScenarioError::NonFiniteGeometry);
        }
        let mut warnings = Vec::new();
        if nr < 2 {
            warnings.push(format!(
                "only {nr} receiver(s): eigenvalue-difference detectors degenerate below Nr = 2"
            ));
        }
        Ok(warnings)
    }

    /// Clone with a different average DNR.
    pub fn with_dnr_db(&self, dnr_avg_db: f64) -> Self {
        Self {
            dnr_avg_db,
            ..self.clone()
        }
    }

    /// Clone with a different average SNR.
    pub fn with_snr_db(&self, snr_avg_db: f64) -> Self {
        Self {
            snr_avg_db,
            ..self.clone()
        }
    }

    /// Clone with a different average MNR; the scatterer must already exist.
    pub fn with_mnr_db(&self, mnr_avg_db: f64) -> Result<Self, ScenarioError> {
        if self.scatterer_position.is_none() {
            return Err(ScenarioError::MultipathFieldsInconsistent);
        }
        Ok(Self {
            mnr_avg_db: Some(mnr_avg_db),
            ..self.clone()
        })
    }

    /// Clone with the multipath scatterer removed.
    pub fn without_multipath(&self) -> Self {
        Self {
            scatterer_position: None,
            mnr_avg_db: None,
            ..self.clone()
        }
    }

    /// The reference two-transmitter, three-receiver network used throughout
    /// the bundled experiments: receivers at (1,30), (5,50), (12,80) km,
    /// transmitters at (30,10), (40,50) km, target at (35,45) km moving at
    /// (100,100) m/s, L = 1024 samples, noise floors sigma0^2*[1,0.75,1.3] and
    /// 1.15*sigma0^2*[1,0.75,1.3] with sigma0^2 = 8.28e-13 W.
    pub fn reference_network() -> Self {
        let sigma0 = 8.28e-13;
        let row: [f64; 3] = [1.0, 0.75, 1.3];
        let mut noise = RMatrix::zeros(2, 3);
        for k in 0..3 {
            noise[(0, k)] = sigma0 * row[k];
            noise[(1, k)] = 1.15 * sigma0 * row[k];
        }
        Self {
            tx_positions: vec![Point::new(30e3, 10e3), Point::new(40e3, 50e3)],
            rx_positions: vec![
                Point::new(1e3, 30e3),
                Point::new(5e3, 50e3),
                Point::new(12e3, 80e3),
            ],
            target_position: Point::new(35e3, 45e3),
            target_velocity: Point::new(100.0, 100.0),
            scatterer_position: None,
            carriers: vec![600e6, 650e6],
            sample_rate: 10e6,
            n_samples: 1024,
            noise_variances: noise,
            dnr_avg_db: -10.0,
            snr_avg_db: -5.0,
            mnr_avg_db: None,
        }
    }

    /// Same network as [`Scenario::reference_network`] with the clutter
    /// scatterer at (10,15) km enabled for the multipath studies.
    pub fn reference_network_with_multipath(mnr_avg_db: f64) -> Self {
        let mut s = Self::reference_network();
        s.scatterer_position = Some(Point::new(10e3, 15e3));
        s.mnr_avg_db = Some(mnr_avg_db);
        s
    }

    pub fn from_json_str(json: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(json).map_err(|e| ScenarioError::Config(e.to_string()))?;
        let s = Scenario::from(cfg);
        s.validate()?;
        Ok(s)
    }

    pub fn to_json_pretty(&self) -> String {
        let cfg = ScenarioConfig::from(self);
        serde_json::to_string_pretty(&cfg).expect("scenario config serializes")
    }
}

/// On-disk scenario schema. Positions are given in kilometers, velocities in
/// meters per second, noise variances in watts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tx_positions_km: Vec<[f64; 2]>,
    pub rx_positions_km: Vec<[f64; 2]>,
    pub target_position_km: [f64; 2],
    pub target_velocity_mps: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatterer_position_km: Option<[f64; 2]>,
    pub carriers_hz: Vec<f64>,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    /// Nt rows by Nr columns.
    pub noise_variances_w: Vec<Vec<f64>>,
    pub dnr_avg_db: f64,
    pub snr_avg_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnr_avg_db: Option<f64>,
}

impl From<ScenarioConfig> for Scenario {
    fn from(cfg: ScenarioConfig) -> Self {
        let km = |p: [f64; 2]| Point::new(p[0] * 1e3, p[1] * 1e3);
        let nt = cfg.noise_variances_w.len();
        let nr = cfg.noise_variances_w.first().map_or(0, Vec::len);
        let mut noise = RMatrix::zeros(nt, nr);
        for (j, row) in cfg.noise_variances_w.iter().enumerate() {
            for (k, &v) in row.iter().take(nr).enumerate() {
                noise[(j, k)] = v;
            }
        }
        Scenario {
            tx_positions: cfg.tx_positions_km.into_iter().map(km).collect(),
            rx_positions: cfg.rx_positions_km.into_iter().map(km).collect(),
            target_position: km(cfg.target_position_km),
            target_velocity: Point::new(cfg.target_velocity_mps[0], cfg.target_velocity_mps[1]),
            scatterer_position: cfg.scatterer_position_km.map(km),
            carriers: cfg.carriers_hz,
            sample_rate: cfg.sample_rate_hz,
            n_samples: cfg.n_samples,
            noise_variances: noise,
            dnr_avg_db: cfg.dnr_avg_db,
            snr_avg_db: cfg.snr_avg_db,
            mnr_avg_db: cfg.mnr_avg_db,
        }
    }
}

impl From<&Scenario> for ScenarioConfig {
    fn from(s: &Scenario) -> Self {
        let to_km = |p: &Point| [p.x / 1e3, p.y / 1e3];
        ScenarioConfig {
            tx_positions_km: s.tx_positions.iter().map(to_km).collect(),
            rx_positions_km: s.rx_positions.iter().map(to_km).collect(),
            target_position_km: to_km(&s.target_position),
            target_velocity_mps: [s.target_velocity.x, s.target_velocity.y],
            scatterer_position_km: s.scatterer_position.as_ref().map(to_km),
            carriers_hz: s.carriers.clone(),
            sample_rate_hz: s.sample_rate,
            n_samples: s.n_samples,
            noise_variances_w: (0..s.noise_variances.nrows())
                .map(|j| {
                    (0..s.noise_variances.ncols())
                        .map(|k| s.noise_variances[(j, k)])
                        .collect()
                })
                .collect(),
            dnr_avg_db: s.dnr_avg_db,
            snr_avg_db: s.snr_avg_db,
            mnr_avg_db: s.mnr_avg_db,
        }
    }
}

/// Complex channel amplitudes realizing the scenario's power ratios.
#[derive(Debug, Clone)]
pub struct ChannelAmplitudes {
    /// Target-path amplitudes, Nt x Nr.
    pub alpha: CMatrix,
    /// Direct-path amplitudes, Nt x Nr.
    pub beta: CMatrix,
    /// Multipath amplitudes, Nt x Nr; present iff the scenario has a scatterer.
    pub zeta: Option<CMatrix>,
}

impl ChannelAmplitudes {
    /// Empirical average of |a_jk|^2 / sigma^2_jk over all channels.
    pub fn empirical_avg_ratio(amps: &CMatrix, noise: &RMatrix) -> f64 {
        let (nt, nr) = (noise.nrows(), noise.ncols());
        let mut acc = 0.0;
        for j in 0..nt {
            for k in 0..nr {
                acc += amps[(j, k)].norm_sqr() / noise[(j, k)];
            }
        }
        acc / (nt * nr) as f64
    }
}

/// Bistatic delays and Doppler shifts for every (transmitter, receiver) pair.
#[derive(Debug, Clone)]
pub struct PathGeometry {
    /// Direct-path delays d_jk, seconds, Nt x Nr.
    pub direct_delays: RMatrix,
    /// Target-path delays p_jk, seconds, Nt x Nr.
    pub target_delays: RMatrix,
    /// Target-path Doppler shifts f_jk, Hz, Nt x Nr.
    pub target_dopplers: RMatrix,
    /// Scatterer-path delays m_jk, seconds, Nt x Nr; the scatterer is static
    /// so its Doppler is zero.
    pub scatterer_delays: Option<RMatrix>,
}

impl PathGeometry {
    pub fn from_scenario(s: &Scenario) -> Result<Self, GeometryError> {
        let (nt, nr) = (s.nt(), s.nr());
        let mut direct = RMatrix::zeros(nt, nr);
        let mut target = RMatrix::zeros(nt, nr);
        let mut doppler = RMatrix::zeros(nt, nr);
        let mut scatter = s.scatterer_position.map(|_| RMatrix::zeros(nt, nr));
        for j in 0..nt {
            let wavelength = SPEED_OF_LIGHT / s.carriers[j];
            for k in 0..nr {
                let (tx, rx) = (&s.tx_positions[j], &s.rx_positions[k]);
                direct[(j, k)] = bistatic_delay(tx, rx, None);
                target[(j, k)] = bistatic_delay(tx, rx, Some(&s.target_position));
                doppler[(j, k)] =
                    target_doppler(tx, rx, &s.target_position, &s.target_velocity, wavelength)?;
                if let (Some(m), Some(pos)) = (scatter.as_mut(), s.scatterer_position.as_ref()) {
                    m[(j, k)] = bistatic_delay(tx, rx, Some(pos));
                }
            }
        }
        Ok(Self {
            direct_delays: direct,
            target_delays: target,
            target_dopplers: doppler,
            scatterer_delays: scatter,
        })
    }
}

/// Propagation delay between `tx` and `rx`, optionally via a reflection point.
pub fn bistatic_delay(tx: &Point, rx: &Point, via: Option<&Point>) -> f64 {
    match via {
        None => (rx - tx).norm() / SPEED_OF_LIGHT,
        Some(v) => ((v - tx).norm() + (v - rx).norm()) / SPEED_OF_LIGHT,
    }
}

/// Bistatic Doppler shift of a moving reflector:
/// `v . (unit(target - tx) + unit(target - rx)) / wavelength`.
pub fn target_doppler(
    tx: &Point,
    rx: &Point,
    target: &Point,
    velocity: &Point,
    wavelength: f64,
) -> Result<f64, GeometryError> {
    if wavelength.is_nan() || wavelength <= 0.0 {
        return Err(GeometryError::NonPositiveWavelength(wavelength));
    }
    let dt = target - tx;
    let dr = target - rx;
    let (nt, nr) = (dt.norm(), dr.norm());
    if nt == 0.0 {
        return Err(GeometryError::TargetAtTransmitter { j: 0 });
    }
    if nr == 0.0 {
        return Err(GeometryError::TargetAtReceiver { k: 0 });
    }
    Ok(velocity.dot(&(dt / nt + dr / nr)) / wavelength)
}

/// Draws channel amplitudes with per-channel ratios set equal to the requested
/// averages: |a_jk|^2 = ratio_linear * sigma^2_jk with an i.i.d. uniform phase.
/// A ratio of -inf dB yields a zero matrix.
///
/// Draw order (beta, then alpha, then zeta if present, row-major over (j,k))
/// is part of the reproducibility contract.
pub fn draw_amplitudes<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> ChannelAmplitudes {
    let beta = draw_equal_ratio(scenario.dnr_avg_db, &scenario.noise_variances, rng);
    let alpha = draw_equal_ratio(scenario.snr_avg_db, &scenario.noise_variances, rng);
    let zeta = scenario
        .mnr_avg_db
        .map(|mnr| draw_equal_ratio(mnr, &scenario.noise_variances, rng));
    ChannelAmplitudes { alpha, beta, zeta }
}

fn draw_equal_ratio<R: Rng + ?Sized>(ratio_db: f64, noise: &RMatrix, rng: &mut R) -> CMatrix {
    let linear = 10f64.powf(ratio_db / 10.0);
    let (nt, nr) = (noise.nrows(), noise.ncols());
    let mut out = CMatrix::zeros(nt, nr);
    for j in 0..nt {
        for k in 0..nr {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let magnitude = (linear * noise[(j, k)]).sqrt();
            out[(j, k)] = C64::from_polar(magnitude, phase);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn km(x: f64, y: f64) -> Point {
        Point::new(x * 1e3, y * 1e3)
    }

    #[test]
    fn bistatic_delay_direct_path() {
        let d = bistatic_delay(&km(30.0, 10.0), &km(1.0, 30.0), None);
        assert_relative_eq!(d, 1.175073920892869e-4, max_relative = 1e-12);
    }

    #[test]
    fn bistatic_delay_via_target() {
        let d = bistatic_delay(&km(30.0, 10.0), &km(1.0, 30.0), Some(&km(35.0, 45.0)));
        assert_relative_eq!(d, 2.4189116662651824e-4, max_relative = 1e-12);
    }

    #[test]
    fn bistatic_delay_coincident_and_symmetric() {
        let p = km(3.0, 4.0);
        assert_eq!(bistatic_delay(&p, &p, None), 0.0);
        let (a, b) = (km(1.0, 2.0), km(-7.0, 11.0));
        assert_eq!(bistatic_delay(&a, &b, None), bistatic_delay(&b, &a, None));
    }

    #[test]
    fn doppler_stationary_target_is_zero() {
        let f = target_doppler(
            &km(30.0, 10.0),
            &km(1.0, 30.0),
            &km(35.0, 45.0),
            &Point::new(0.0, 0.0),
            0.5,
        )
        .unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn doppler_orthogonal_velocity_is_zero() {
        let (tx, rx, t) = (km(30.0, 10.0), km(1.0, 30.0), km(35.0, 45.0));
        let dt = t - tx;
        let dr = t - rx;
        let sum = dt / dt.norm() + dr / dr.norm();
        let v = Point::new(-sum.y, sum.x) * 123.4;
        let f = target_doppler(&tx, &rx, &t, &v, 0.5).unwrap();
        assert!(f.abs() < 1e-9, "got {f}");
    }

    #[test]
    fn doppler_reference_value() {
        // Independent evaluation of the unit-vector sum and dot product.
        let f = target_doppler(
            &km(30.0, 10.0),
            &km(1.0, 30.0),
            &km(35.0, 45.0),
            &Point::new(100.0, 100.0),
            SPEED_OF_LIGHT / 600e6,
        )
        .unwrap();
        assert_relative_eq!(f, 490.3249817007141, max_relative = 1e-12);
    }

    #[test]
    fn doppler_linear_in_velocity() {
        let (tx, rx, t) = (km(30.0, 10.0), km(1.0, 30.0), km(35.0, 45.0));
        let lam = 0.5;
        let va = Point::new(12.0, -7.0);
        let vb = Point::new(-3.0, 19.0);
        let fa = target_doppler(&tx, &rx, &t, &va, lam).unwrap();
        let fb = target_doppler(&tx, &rx, &t, &vb, lam).unwrap();
        let fab = target_doppler(&tx, &rx, &t, &(va * 2.0 + vb * 3.0), lam).unwrap();
        assert_relative_eq!(fab, 2.0 * fa + 3.0 * fb, max_relative = 1e-12);
    }

    #[test]
    fn doppler_degenerate_geometry_errors() {
        let p = km(1.0, 2.0);
        assert!(target_doppler(&p, &km(0.0, 0.0), &p, &Point::new(1.0, 0.0), 0.5).is_err());
        assert!(target_doppler(&km(0.0, 0.0), &p, &p, &Point::new(1.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn amplitudes_hit_requested_ratios_exactly() {
        let mut s = Scenario::reference_network();
        s.dnr_avg_db = -10.0;
        s.snr_avg_db = -3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let amps = draw_amplitudes(&s, &mut rng);
        let dnr = ChannelAmplitudes::empirical_avg_ratio(&amps.beta, &s.noise_variances);
        let snr = ChannelAmplitudes::empirical_avg_ratio(&amps.alpha, &s.noise_variances);
        assert_relative_eq!(dnr, 0.1, max_relative = 1e-12);
        assert_relative_eq!(snr, 10f64.powf(-0.3), max_relative = 1e-12);
        assert!(amps.zeta.is_none());
    }

    #[test]
    fn amplitudes_neg_infinity_gives_zeros() {
        let mut s = Scenario::reference_network();
        s.snr_avg_db = f64::NEG_INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let amps = draw_amplitudes(&s, &mut rng);
        assert!(amps.alpha.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn amplitudes_unit_ratio_unit_noise() {
        let mut s = Scenario::reference_network();
        s.noise_variances.fill(1.0);
        s.dnr_avg_db = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amps = draw_amplitudes(&s, &mut rng);
        for b in amps.beta.iter() {
            assert_relative_eq!(b.norm(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn multipath_ratio_matches_request() {
        let s = Scenario::reference_network_with_multipath(-7.0);
        s.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let amps = draw_amplitudes(&s, &mut rng);
        let mnr =
            ChannelAmplitudes::empirical_avg_ratio(amps.zeta.as_ref().unwrap(), &s.noise_variances);
        assert_relative_eq!(mnr, 10f64.powf(-0.7), max_relative = 1e-12);
    }

    #[test]
    fn validation_catches_structural_errors() {
        let mut s = Scenario::reference_network();
        s.carriers.pop();
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::CarrierCountMismatch { .. })
        ));

        let mut s = Scenario::reference_network();
        s.n_samples = 5;
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::TooFewSamples { .. })
        ));

        let mut s = Scenario::reference_network();
        s.noise_variances[(1, 2)] = 0.0;
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::NonPositiveNoise { .. })
        ));

        let mut s = Scenario::reference_network();
        s.mnr_avg_db = Some(-10.0);
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::MultipathFieldsInconsistent)
        ));

        let mut s = Scenario::reference_network();
        s.rx_positions.truncate(1);
        s.noise_variances = s.noise_variances.clone().remove_columns(1, 2);
        let warnings = s.validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn config_roundtrip_preserves_scenario() {
        let s = Scenario::reference_network_with_multipath(-12.0);
        let json = s.to_json_pretty();
        let back = Scenario::from_json_str(&json).unwrap();
        assert_eq!(back.nt(), 2);
        assert_eq!(back.nr(), 3);
        assert_eq!(back.n_samples, 1024);
        assert_relative_eq!(back.tx_positions[0].x, 30e3);
        assert_relative_eq!(back.noise_variances[(1, 1)], 1.15 * 8.28e-13 * 0.75);
        assert_eq!(back.mnr_avg_db, Some(-12.0));
        assert!(json.contains("tx_positions_km"));
        assert!(json.contains("noise_variances_w"));
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let mut v: serde_json::Value =
            serde_json::from_str(&Scenario::reference_network().to_json_pretty()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(Scenario::from_json_str(&v.to_string()).is_err());
    }
}
