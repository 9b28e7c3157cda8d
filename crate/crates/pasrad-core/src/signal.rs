//! Waveform generation, the DFT-based delay–Doppler operator, observation
//! synthesis under both hypotheses, and delay/Doppler compensation.
//!
//! The operator is the circular, unitary construction
//! `D_tau(f) = B(f/fs) * F^H * B(-tau*df) * F` with `F` the unitary L-point
//! DFT, `[B(a)]_ii = exp(-i*2*pi*i*a)` and `df = fs/L`. Synthesis and
//! compensation use the same operator, so a compensated noise-free column is
//! recovered exactly. It is applied with O(L log L) FFTs; the L x L matrix is
//! never materialized (see [`crate::oracle::dense_delay_doppler_matrix`] for
//! the literal matrix form used in verification).

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::io::{self, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::scenario::{ChannelAmplitudes, PathGeometry, Scenario};
use crate::{CMatrix, CVector, RMatrix, C64};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("amplitude matrices are {got_rows}x{got_cols}, scenario expects {nt}x{nr}")]
    AmplitudeShapeMismatch {
        got_rows: usize,
        got_cols: usize,
        nt: usize,
        nr: usize,
    },
    #[error("geometry is {got_rows}x{got_cols}, expected {nt}x{nr}")]
    GeometryShapeMismatch {
        got_rows: usize,
        got_cols: usize,
        nt: usize,
        nr: usize,
    },
    #[error("scenario requests multipath but amplitudes have no zeta matrix")]
    MissingMultipathAmplitudes,
    #[error("observation and geometry disagree on dimensions")]
    ObservationShapeMismatch,
}

/// Which hypothesis an observation was synthesized under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Noise-only surveillance channels.
    H0,
    /// Target echo present in the surveillance channels.
    H1,
}

/// One transmitted baseband sequence of unit-modulus samples.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: CVector,
}

/// Unit-modulus waveform with i.i.d. phases uniform on [0, 2*pi):
/// `s[n] = exp(-i*phi_n)`.
pub fn generate_waveform<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Waveform {
    let samples = CVector::from_iterator(
        l,
        (0..l).map(|_| C64::from_polar(1.0, -(rng.random::<f64>() * TAU))),
    );
    Waveform { samples }
}

/// Cached FFT plans for one transform length.
#[derive(Clone)]
pub struct DelayDopplerPlan {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl DelayDopplerPlan {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "transform length must be positive");
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT of `v`; feed to [`Self::apply_from_spectrum`]
    /// to apply several delay/Doppler pairs to one waveform.
    pub fn forward_spectrum(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.len);
        let mut buf = v.clone();
        self.forward_in_place(&mut buf);
        buf
    }

    fn forward_in_place(&self, buf: &mut CVector) {
        process_with_tls_scratch(&*self.fwd, buf.as_mut_slice());
    }

    fn inverse_scaled_in_place(&self, buf: &mut CVector) {
        process_with_tls_scratch(&*self.inv, buf.as_mut_slice());
        buf.scale_mut(1.0 / self.len as f64);
    }

    /// `D_tau(f) v` given the precomputed forward spectrum of `v`.
    pub fn apply_from_spectrum(
        &self,
        spectrum: &CVector,
        delay_s: f64,
        doppler_hz: f64,
        sample_rate: f64,
    ) -> CVector {
        assert_eq!(spectrum.len(), self.len);
        let mut buf = spectrum.clone();
        let df = sample_rate / self.len as f64;
        // B(-tau*df): bin i gains exp(+i*2*pi*i*tau*df)
        if delay_s != 0.0 {
            let theta = TAU * delay_s * df;
            for (i, b) in buf.iter_mut().enumerate() {
                *b *= C64::from_polar(1.0, theta * i as f64);
            }
        }
        self.inverse_scaled_in_place(&mut buf);
        // B(f/fs): sample i gains exp(-i*2*pi*i*f/fs)
        if doppler_hz != 0.0 {
            let phi = TAU * doppler_hz / sample_rate;
            for (i, b) in buf.iter_mut().enumerate() {
                *b *= C64::from_polar(1.0, -phi * i as f64);
            }
        }
        buf
    }

    /// `D_tau(f) v`.
    pub fn apply(&self, v: &CVector, delay_s: f64, doppler_hz: f64, sample_rate: f64) -> CVector {
        let spectrum = self.forward_spectrum(v);
        self.apply_from_spectrum(&spectrum, delay_s, doppler_hz, sample_rate)
    }

    /// `D_tau(f)^H v`, the inverse of [`Self::apply`] (the operator is
    /// unitary).
    pub fn apply_adjoint(
        &self,
        v: &CVector,
        delay_s: f64,
        doppler_hz: f64,
        sample_rate: f64,
    ) -> CVector {
        assert_eq!(v.len(), self.len);
        let mut buf = v.clone();
        if doppler_hz != 0.0 {
            let phi = TAU * doppler_hz / sample_rate;
            for (i, b) in buf.iter_mut().enumerate() {
                *b *= C64::from_polar(1.0, phi * i as f64);
            }
        }
        self.forward_in_place(&mut buf);
        if delay_s != 0.0 {
            let theta = TAU * delay_s * df_of(sample_rate, self.len);
            for (i, b) in buf.iter_mut().enumerate() {
                *b *= C64::from_polar(1.0, -theta * i as f64);
            }
        }
        self.inverse_scaled_in_place(&mut buf);
        buf
    }
}

fn df_of(sample_rate: f64, len: usize) -> f64 {
    sample_rate / len as f64
}

thread_local! {
    // Reused FFT scratch; the engine runs many transforms per trial.
    static FFT_SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

fn process_with_tls_scratch(fft: &dyn Fft<f64>, buf: &mut [C64]) {
    FFT_SCRATCH.with(|cell| {
        let mut scratch = cell.borrow_mut();
        scratch.resize(fft.get_inplace_scratch_len(), C64::new(0.0, 0.0));
        fft.process_with_scratch(buf, &mut scratch);
    });
}

/// Frequency-domain ramp of a delay: entry i is `exp(+i 2 pi i tau df)`.
fn delay_ramp(l: usize, delay_s: f64, sample_rate: f64) -> CVector {
    let theta = TAU * delay_s * df_of(sample_rate, l);
    CVector::from_fn(l, |i, _| C64::from_polar(1.0, theta * i as f64))
}

/// Time-domain ramp of a Doppler shift: entry i is `exp(-i 2 pi i f / fs)`.
fn doppler_ramp(l: usize, doppler_hz: f64, sample_rate: f64) -> CVector {
    let phi = TAU * doppler_hz / sample_rate;
    CVector::from_fn(l, |i, _| C64::from_polar(1.0, -phi * i as f64))
}

/// Per-channel phase ramps precomputed for one fixed geometry. The Monte-Carlo
/// engine synthesizes and compensates millions of trials against the same
/// delays and Dopplers; building the ramps once keeps the per-trial cost at
/// FFTs and element-wise products. Values are bit-identical to the per-call
/// ramps of [`DelayDopplerPlan::apply`].
pub struct OperatorTables {
    /// exp(+i 2 pi i d_jk df), per (j, k).
    direct_freq: Vec<Vec<CVector>>,
    /// exp(+i 2 pi i p_jk df), per (j, k).
    target_freq: Vec<Vec<CVector>>,
    /// exp(-i 2 pi i f_jk / fs), per (j, k); `None` for zero Doppler.
    target_time: Vec<Vec<Option<CVector>>>,
    /// exp(+i 2 pi i m_jk df), per (j, k), when a scatterer exists.
    scatterer_freq: Option<Vec<Vec<CVector>>>,
}

impl OperatorTables {
    pub fn new(geometry: &PathGeometry, l: usize, sample_rate: f64) -> Self {
        let (nt, nr) = (
            geometry.direct_delays.nrows(),
            geometry.direct_delays.ncols(),
        );
        let build = |delays: &RMatrix| -> Vec<Vec<CVector>> {
            (0..nt)
                .map(|j| {
                    (0..nr)
                        .map(|k| delay_ramp(l, delays[(j, k)], sample_rate))
                        .collect()
                })
                .collect()
        };
        let target_time = (0..nt)
            .map(|j| {
                (0..nr)
                    .map(|k| {
                        let f = geometry.target_dopplers[(j, k)];
                        (f != 0.0).then(|| doppler_ramp(l, f, sample_rate))
                    })
                    .collect()
            })
            .collect();
        Self {
            direct_freq: build(&geometry.direct_delays),
            target_freq: build(&geometry.target_delays),
            target_time,
            scatterer_freq: geometry.scatterer_delays.as_ref().map(build),
        }
    }
}

fn mul_ramp(buf: &mut CVector, ramp: &CVector) {
    for (b, r) in buf.iter_mut().zip(ramp.iter()) {
        *b *= r;
    }
}

fn mul_ramp_conj(buf: &mut CVector, ramp: &CVector) {
    for (b, r) in buf.iter_mut().zip(ramp.iter()) {
        *b *= r.conj();
    }
}

/// Applies the delay–Doppler operator to one vector. Convenience wrapper that
/// plans FFTs on each call; use [`DelayDopplerPlan`] in loops.
pub fn delay_doppler_apply(
    v: &CVector,
    delay_s: f64,
    doppler_hz: f64,
    sample_rate: f64,
) -> CVector {
    DelayDopplerPlan::new(v.len()).apply(v, delay_s, doppler_hz, sample_rate)
}

/// Raw two-channel observations, one L x Nr matrix pair per transmitter.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Surveillance matrices X_j.
    pub x: Vec<CMatrix>,
    /// Reference matrices Y_j.
    pub y: Vec<CMatrix>,
    /// Hypothesis the data was generated under.
    pub truth: Hypothesis,
}

/// Synthesizes one observation:
/// `y_jk = beta_jk D_{d_jk}(0) s_j [+ zeta_jk D_{m_jk}(0) s_j] + e_jk` and
/// `x_jk = alpha_jk D_{p_jk}(f_jk) s_j + n_jk` under H1 (noise only under H0),
/// with circular complex Gaussian noise of total per-sample variance
/// sigma^2_jk. A fresh waveform is drawn per transmitter.
///
/// Draw order per transmitter (waveform, then e_j1..e_jNr, then n_j1..n_jNr;
/// noise samples interleave re/im) is part of the reproducibility contract.
pub fn synthesize<R: Rng + ?Sized>(
    scenario: &Scenario,
    amplitudes: &ChannelAmplitudes,
    geometry: &PathGeometry,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<Observation, SignalError> {
    let plan = DelayDopplerPlan::new(scenario.n_samples);
    synthesize_with_plan(scenario, amplitudes, geometry, hypothesis, &plan, rng)
}

/// [`synthesize`] with a caller-provided FFT plan.
pub fn synthesize_with_plan<R: Rng + ?Sized>(
    scenario: &Scenario,
    amplitudes: &ChannelAmplitudes,
    geometry: &PathGeometry,
    hypothesis: Hypothesis,
    plan: &DelayDopplerPlan,
    rng: &mut R,
) -> Result<Observation, SignalError> {
    let tables = OperatorTables::new(geometry, scenario.n_samples, scenario.sample_rate);
    synthesize_with_tables(
        scenario, amplitudes, geometry, hypothesis, plan, &tables, rng,
    )
}

/// [`synthesize`] with precomputed phase ramps (hot-loop variant; produces
/// bit-identical output to the plain paths).
pub fn synthesize_with_tables<R: Rng + ?Sized>(
    scenario: &Scenario,
    amplitudes: &ChannelAmplitudes,
    geometry: &PathGeometry,
    hypothesis: Hypothesis,
    plan: &DelayDopplerPlan,
    tables: &OperatorTables,
    rng: &mut R,
) -> Result<Observation, SignalError> {
    let (nt, nr, l) = (scenario.nt(), scenario.nr(), scenario.n_samples);
    check_shape(&amplitudes.beta, nt, nr)?;
    check_shape(&amplitudes.alpha, nt, nr)?;
    if let Some(zeta) = &amplitudes.zeta {
        check_shape(zeta, nt, nr)?;
    }
    if scenario.scatterer_position.is_some() && amplitudes.zeta.is_none() {
        return Err(SignalError::MissingMultipathAmplitudes);
    }
    if geometry.direct_delays.nrows() != nt || geometry.direct_delays.ncols() != nr {
        return Err(SignalError::GeometryShapeMismatch {
            got_rows: geometry.direct_delays.nrows(),
            got_cols: geometry.direct_delays.ncols(),
            nt,
            nr,
        });
    }
    let multipath = scenario.scatterer_position.is_some();
    if multipath && tables.scatterer_freq.is_none() {
        return Err(SignalError::ObservationShapeMismatch);
    }

    let mut xs = Vec::with_capacity(nt);
    let mut ys = Vec::with_capacity(nt);
    for j in 0..nt {
        let s = generate_waveform(l, rng).samples;
        let spectrum = plan.forward_spectrum(&s);
        let mut y = CMatrix::zeros(l, nr);
        for k in 0..nr {
            let mut col = spectrum.clone();
            mul_ramp(&mut col, &tables.direct_freq[j][k]);
            plan.inverse_scaled_in_place(&mut col);
            col.scale_mut_complex(amplitudes.beta[(j, k)]);
            if multipath {
                let mut mp = spectrum.clone();
                mul_ramp(&mut mp, &tables.scatterer_freq.as_ref().unwrap()[j][k]);
                plan.inverse_scaled_in_place(&mut mp);
                mp.scale_mut_complex(amplitudes.zeta.as_ref().unwrap()[(j, k)]);
                col += mp;
            }
            add_noise(&mut col, scenario.noise_variances[(j, k)], rng);
            y.set_column(k, &col);
        }
        let mut x = CMatrix::zeros(l, nr);
        for k in 0..nr {
            let mut col = match hypothesis {
                Hypothesis::H1 => {
                    let mut c = spectrum.clone();
                    mul_ramp(&mut c, &tables.target_freq[j][k]);
                    plan.inverse_scaled_in_place(&mut c);
                    if let Some(ramp) = &tables.target_time[j][k] {
                        mul_ramp(&mut c, ramp);
                    }
                    c.scale_mut_complex(amplitudes.alpha[(j, k)]);
                    c
                }
                Hypothesis::H0 => CVector::zeros(l),
            };
            add_noise(&mut col, scenario.noise_variances[(j, k)], rng);
            x.set_column(k, &col);
        }
        xs.push(x);
        ys.push(y);
    }
    Ok(Observation {
        x: xs,
        y: ys,
        truth: hypothesis,
    })
}

fn check_shape(m: &CMatrix, nt: usize, nr: usize) -> Result<(), SignalError> {
    if m.nrows() != nt || m.ncols() != nr {
        return Err(SignalError::AmplitudeShapeMismatch {
            got_rows: m.nrows(),
            got_cols: m.ncols(),
            nt,
            nr,
        });
    }
    Ok(())
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, c: C64);
}

impl ScaleComplex for CVector {
    fn scale_mut_complex(&mut self, c: C64) {
        for v in self.iter_mut() {
            *v *= c;
        }
    }
}

/// Circular complex Gaussian noise with total per-sample variance `sigma2`
/// (real and imaginary parts each carry `sigma2 / 2`).
fn add_noise<R: Rng + ?Sized>(col: &mut CVector, sigma2: f64, rng: &mut R) {
    let std = (sigma2 / 2.0).sqrt();
    for v in col.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += C64::new(re * std, im * std);
    }
}

/// Delay/Doppler-compensated data with cached squared column norms. The
/// columns are `x_jk = D_{p_jk}(f_jk)^H x_jk` and `y_jk = D_{d_jk}(0)^H y_jk`.
#[derive(Debug, Clone)]
pub struct AlignedData {
    pub x: Vec<CMatrix>,
    pub y: Vec<CMatrix>,
    /// ||x_jk||^2, Nt x Nr.
    pub col_norms_sq_x: RMatrix,
    /// ||y_jk||^2, Nt x Nr.
    pub col_norms_sq_y: RMatrix,
}

impl AlignedData {
    /// Wraps already-compensated matrices, caching the squared column norms.
    pub fn new(x: Vec<CMatrix>, y: Vec<CMatrix>) -> Self {
        let nt = x.len();
        let nr = x.first().map_or(0, CMatrix::ncols);
        let mut nx = RMatrix::zeros(nt, nr);
        let mut ny = RMatrix::zeros(nt, nr);
        for j in 0..nt {
            for k in 0..nr {
                nx[(j, k)] = x[j].column(k).norm_squared();
                ny[(j, k)] = y[j].column(k).norm_squared();
            }
        }
        Self {
            x,
            y,
            col_norms_sq_x: nx,
            col_norms_sq_y: ny,
        }
    }

    pub fn nt(&self) -> usize {
        self.x.len()
    }

    pub fn nr(&self) -> usize {
        self.col_norms_sq_x.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.x.first().map_or(0, CMatrix::nrows)
    }

    /// Applies the per-receiver scaling group: column k of both channels of
    /// transmitter j is multiplied by `gammas[(j, k)]`. Detector statistics
    /// are invariant under this transformation.
    pub fn scaled_per_receiver(&self, gammas: &CMatrix) -> AlignedData {
        assert_eq!(gammas.nrows(), self.nt());
        assert_eq!(gammas.ncols(), self.nr());
        let scale = |mats: &[CMatrix]| -> Vec<CMatrix> {
            mats.iter()
                .enumerate()
                .map(|(j, m)| {
                    let mut out = m.clone();
                    for k in 0..out.ncols() {
                        let g = gammas[(j, k)];
                        for v in out.column_mut(k).iter_mut() {
                            *v *= g;
                        }
                    }
                    out
                })
                .collect()
        };
        AlignedData::new(scale(&self.x), scale(&self.y))
    }
}

/// Applies the adjoint operator per column, undoing the path delay and
/// Doppler of each channel, and caches the squared column norms.
pub fn compensate(
    obs: &Observation,
    geometry: &PathGeometry,
    sample_rate: f64,
) -> Result<AlignedData, SignalError> {
    let l = obs.x.first().map_or(0, CMatrix::nrows);
    let plan = DelayDopplerPlan::new(l);
    compensate_with_plan(obs, geometry, sample_rate, &plan)
}

/// [`compensate`] with a caller-provided FFT plan.
pub fn compensate_with_plan(
    obs: &Observation,
    geometry: &PathGeometry,
    sample_rate: f64,
    plan: &DelayDopplerPlan,
) -> Result<AlignedData, SignalError> {
    let tables = OperatorTables::new(geometry, plan.len(), sample_rate);
    compensate_with_tables(obs, geometry, plan, &tables)
}

/// [`compensate`] with precomputed phase ramps (hot-loop variant; produces
/// bit-identical output to the plain paths).
pub fn compensate_with_tables(
    obs: &Observation,
    geometry: &PathGeometry,
    plan: &DelayDopplerPlan,
    tables: &OperatorTables,
) -> Result<AlignedData, SignalError> {
    let nt = obs.x.len();
    if nt != geometry.direct_delays.nrows() || obs.y.len() != nt {
        return Err(SignalError::ObservationShapeMismatch);
    }
    let nr = geometry.direct_delays.ncols();
    let mut xs = Vec::with_capacity(nt);
    let mut ys = Vec::with_capacity(nt);
    for j in 0..nt {
        if obs.x[j].ncols() != nr || obs.y[j].ncols() != nr {
            return Err(SignalError::ObservationShapeMismatch);
        }
        let l = obs.x[j].nrows();
        let mut x = CMatrix::zeros(l, nr);
        let mut y = CMatrix::zeros(l, nr);
        for k in 0..nr {
            let mut xc = obs.x[j].column(k).into_owned();
            if let Some(ramp) = &tables.target_time[j][k] {
                mul_ramp_conj(&mut xc, ramp);
            }
            plan.forward_in_place(&mut xc);
            mul_ramp_conj(&mut xc, &tables.target_freq[j][k]);
            plan.inverse_scaled_in_place(&mut xc);
            x.set_column(k, &xc);

            let mut yc = obs.y[j].column(k).into_owned();
            plan.forward_in_place(&mut yc);
            mul_ramp_conj(&mut yc, &tables.direct_freq[j][k]);
            plan.inverse_scaled_in_place(&mut yc);
            y.set_column(k, &yc);
        }
        xs.push(x);
        ys.push(y);
    }
    Ok(AlignedData::new(xs, ys))
}

/// Binary debug-dump magic, first 8 bytes of the header.
pub const OBSERVATION_MAGIC: &[u8; 8] = b"PASRADO1";

/// Writes an observation as little-endian float64 interleaved re/im, row-major
/// per matrix, X_1..X_Nt then Y_1..Y_Nt, behind a 32-byte header
/// (8-byte magic, then L, Nr, Nt as u64 little-endian).
pub fn write_observation<W: Write>(obs: &Observation, w: &mut W) -> io::Result<()> {
    let nt = obs.x.len() as u64;
    let l = obs.x.first().map_or(0, CMatrix::nrows) as u64;
    let nr = obs.x.first().map_or(0, CMatrix::ncols) as u64;
    w.write_all(OBSERVATION_MAGIC)?;
    w.write_all(&l.to_le_bytes())?;
    w.write_all(&nr.to_le_bytes())?;
    w.write_all(&nt.to_le_bytes())?;
    let mut dump = |m: &CMatrix| -> io::Result<()> {
        for i in 0..m.nrows() {
            for k in 0..m.ncols() {
                let v = m[(i, k)];
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    };
    for m in &obs.x {
        dump(m)?;
    }
    for m in &obs.y {
        dump(m)?;
    }
    Ok(())
}
