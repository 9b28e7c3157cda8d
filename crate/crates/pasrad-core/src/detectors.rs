//! Detector statistics for the two-channel MIMO detection problem.
//!
//! All statistics operate on [`AlignedData`], i.e. delay/Doppler-compensated
//! columns. The LRT is the eigenvalue difference
//! `sum_j lambda_max(Z_j^H Z_j) - lambda_max(R_j^H R_j)` with
//! `R_j = Y_j Xi_j^{-1/2}`, `T_j = X_j Xi_j^{-1/2}`, `Z_j = [R_j, T_j]`; the
//! alternative Wald, usual/alternative Gradient and Rao-Durbin statistics make
//! up a unified family parameterized by `(p, a, b, P)`. The large-L strategy
//! everywhere is to solve the small `Nr x Nr` / `2Nr x 2Nr` Hermitian
//! eigenproblems and map the eigenvectors back (`s = M v / sqrt(lambda)`);
//! no `L x L` Gram matrix is ever formed.
//!
//! Eigenvector conventions: `s_{j,0}` and `s_{j,1}` are unit norm; `s_{j,0}`
//! is phased so its largest-magnitude entry is real positive, and `s_{j,1}` is
//! then re-phased so `s_{j,1}^H s_{j,0}` is real nonnegative. The usual
//! Gradient statistic mixes both eigenvectors and is only well defined under
//! such a convention.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::AlignedData;
use crate::{CMatrix, CVector, RMatrix, C64};

/// Guard below which a unified-statistic denominator is treated as an error
/// rather than clamped.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("zero combined column energy at transmitter {j}, receiver {k}")]
    ZeroEnergy { j: usize, k: usize },
    #[error("reference matrix of transmitter {j} is rank zero")]
    RankZero { j: usize },
    #[error("denominator underflow at transmitter {j}, receiver {k}")]
    DenominatorUnderflow { j: usize, k: usize },
    #[error("{kind} is not a member of the unified detector family")]
    NotUnified { kind: DetectorKind },
    #[error("{kind} is not a single-channel baseline")]
    NotBaseline { kind: DetectorKind },
    #[error("baseline statistics need at least 2 receivers, got {nr}")]
    TooFewReceivers { nr: usize },
    #[error("singular sample-variance diagonal at transmitter {j}, receiver {k}")]
    SingularDiagonal { j: usize, k: usize },
    #[error("zero residual variance at transmitter {j} (degenerate, noise-free fit)")]
    ZeroResidual { j: usize },
}

/// The implemented test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    /// Likelihood-ratio eigenvalue-difference test.
    #[serde(rename = "LRT")]
    Lrt,
    /// Alternative Wald test, unified parameters (4, 1, 1, identity).
    #[serde(rename = "AW")]
    AltWald,
    /// Usual Gradient test, unified parameters (2, 1, 0, 2 Re).
    #[serde(rename = "UG")]
    UsualGradient,
    /// Alternative Gradient test, unified parameters (2, 1, 0, 2 |.|).
    #[serde(rename = "AG")]
    AltGradient,
    /// Rao test; the Durbin test is identical to it.
    #[serde(rename = "RD")]
    RaoDurbin,
    /// Single-channel baseline `2 tr{(R S0^-1 - I)^2}`.
    #[serde(rename = "P1_RAO")]
    P1Rao,
    /// Single-channel baseline `det^-1(S0^-1/2 R S0^-1/2)`.
    #[serde(rename = "P2_LRT")]
    P2Lrt,
    /// Single-channel baseline `lambda_max(S0^-1/2 R S0^-1/2)`.
    #[serde(rename = "P3_LRT")]
    P3Lrt,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 8] = [
        DetectorKind::Lrt,
        DetectorKind::AltWald,
        DetectorKind::UsualGradient,
        DetectorKind::AltGradient,
        DetectorKind::RaoDurbin,
        DetectorKind::P1Rao,
        DetectorKind::P2Lrt,
        DetectorKind::P3Lrt,
    ];

    /// The five two-channel statistics proposed for this problem.
    pub const TWO_CHANNEL: [DetectorKind; 5] = [
        DetectorKind::Lrt,
        DetectorKind::AltWald,
        DetectorKind::UsualGradient,
        DetectorKind::AltGradient,
        DetectorKind::RaoDurbin,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DetectorKind::Lrt => "LRT",
            DetectorKind::AltWald => "AW",
            DetectorKind::UsualGradient => "UG",
            DetectorKind::AltGradient => "AG",
            DetectorKind::RaoDurbin => "RD",
            DetectorKind::P1Rao => "P1_RAO",
            DetectorKind::P2Lrt => "P2_LRT",
            DetectorKind::P3Lrt => "P3_LRT",
        }
    }

    pub fn is_unified(self) -> bool {
        matches!(
            self,
            DetectorKind::AltWald
                | DetectorKind::UsualGradient
                | DetectorKind::AltGradient
                | DetectorKind::RaoDurbin
        )
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            DetectorKind::P1Rao | DetectorKind::P2Lrt | DetectorKind::P3Lrt
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_uppercase();
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.token() == t)
            .ok_or_else(|| format!("unknown detector '{s}'"))
    }
}

/// Values of a set of statistics evaluated on one dataset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StatisticSet {
    pub values: BTreeMap<DetectorKind, f64>,
}

impl StatisticSet {
    pub fn get(&self, kind: DetectorKind) -> Option<f64> {
        self.values.get(&kind).copied()
    }
}

/// Maximum-likelihood estimates under both hypotheses.
#[derive(Debug, Clone)]
pub struct MleSet {
    /// Unit-norm waveform estimates under H0, one per transmitter.
    pub s_hat_0: Vec<CVector>,
    /// Unit-norm waveform estimates under H1, re-phased against `s_hat_0`.
    pub s_hat_1: Vec<CVector>,
    /// Noise-variance estimates under H0, Nt x Nr.
    pub sigma2_hat_0: RMatrix,
    /// Noise-variance estimates under H1, Nt x Nr.
    pub sigma2_hat_1: RMatrix,
    /// Target-path amplitude estimates under H1, Nt x Nr.
    pub alpha_hat: CMatrix,
    /// Direct-path amplitude estimates under H1, Nt x Nr.
    pub beta_hat: CMatrix,
}

/// `Xi_j^{-1}` diagonal: entry k is `1 / (||y_jk||^2 + ||x_jk||^2)`.
pub fn xi_inverse(aligned: &AlignedData, j: usize) -> Result<Vec<f64>, DetectorError> {
    let nr = aligned.nr();
    let mut out = Vec::with_capacity(nr);
    for k in 0..nr {
        let denom = aligned.col_norms_sq_x[(j, k)] + aligned.col_norms_sq_y[(j, k)];
        if denom == 0.0 {
            return Err(DetectorError::ZeroEnergy { j, k });
        }
        out.push(1.0 / denom);
    }
    Ok(out)
}

fn hermitian_top_eigenpair(m: CMatrix) -> (f64, CVector) {
    let eig = SymmetricEigen::new(m);
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (
        eig.eigenvalues[best],
        eig.eigenvectors.column(best).into_owned(),
    )
}

/// Rotates `v` so its largest-magnitude entry becomes real positive.
fn phase_fix_largest(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = 0.0;
    for (i, c) in v.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
}

/// Rotates `s1` so that `s1^H s0` is real nonnegative.
fn rephase_against(s1: &mut CVector, s0: &CVector) {
    let ip = s1.dotc(s0);
    let mag = ip.norm();
    if mag > 0.0 {
        let rot = ip / mag;
        for c in s1.iter_mut() {
            *c *= rot;
        }
    }
}

/// Columns of `Z_j = [Y_j Xi^{-1/2}, X_j Xi^{-1/2}]`, L x 2Nr.
fn scaled_z(aligned: &AlignedData, j: usize) -> Result<CMatrix, DetectorError> {
    let xi = xi_inverse(aligned, j)?;
    let (l, nr) = (aligned.n_samples(), aligned.nr());
    let mut z = CMatrix::zeros(l, 2 * nr);
    for (k, &xi_k) in xi.iter().enumerate() {
        let w = xi_k.sqrt();
        z.column_mut(k).copy_from(&aligned.y[j].column(k).scale(w));
        z.column_mut(nr + k)
            .copy_from(&aligned.x[j].column(k).scale(w));
    }
    Ok(z)
}

/// Contiguous storage of column `c` of a column-major matrix.
fn col_slice(m: &CMatrix, c: usize) -> &[C64] {
    let l = m.nrows();
    &m.as_slice()[c * l..(c + 1) * l]
}

/// `conj(a) . b`; the engine's hottest inner product.
fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Hermitian Gram matrix `M^H M`, filling the lower triangle by conjugation.
fn hermitian_gram(m: &CMatrix) -> CMatrix {
    let n = m.ncols();
    let mut g = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = dot_conj(col_slice(m, a), col_slice(m, b));
            g[(a, b)] = v;
            if a != b {
                g[(b, a)] = v.conj();
            }
        }
    }
    g
}

/// `M[:, 0..cols] v` accumulated column-wise (column-major friendly).
fn matvec(m: &CMatrix, cols: usize, v: &CVector) -> CVector {
    let mut out = CVector::zeros(m.nrows());
    for c in 0..cols {
        let coeff = v[c];
        for (o, z) in out.iter_mut().zip(col_slice(m, c)) {
            *o += z * coeff;
        }
    }
    out
}

/// Per-transmitter eigen-quantities computed from one small Gram matrix.
struct TxEigen {
    lambda_r: f64,
    lambda_z: f64,
    s0: Option<CVector>,
    s1: Option<CVector>,
}

fn tx_eigen(
    aligned: &AlignedData,
    j: usize,
    need_s0: bool,
    need_s1: bool,
) -> Result<TxEigen, DetectorError> {
    let nr = aligned.nr();
    let z = scaled_z(aligned, j)?;
    let g = hermitian_gram(&z); // Z^H Z, Hermitian 2Nr x 2Nr
    let gr = g.view((0, 0), (nr, nr)).into_owned();
    let (lambda_r, vr) = hermitian_top_eigenpair(gr);
    let (lambda_z, vz) = hermitian_top_eigenpair(g);
    let mut s0 = None;
    let mut s1 = None;
    if need_s0 {
        if lambda_r <= 0.0 {
            return Err(DetectorError::RankZero { j });
        }
        let mut v = matvec(&z, nr, &vr.scale(1.0 / lambda_r.sqrt()));
        let n = v.norm();
        v.scale_mut(1.0 / n);
        phase_fix_largest(&mut v);
        s0 = Some(v);
    }
    if need_s1 {
        if lambda_z <= 0.0 {
            return Err(DetectorError::RankZero { j });
        }
        let mut v = matvec(&z, 2 * nr, &vz.scale(1.0 / lambda_z.sqrt()));
        let n = v.norm();
        v.scale_mut(1.0 / n);
        if let Some(s0) = &s0 {
            rephase_against(&mut v, s0);
        }
        s1 = Some(v);
    }
    Ok(TxEigen {
        lambda_r,
        lambda_z,
        s0,
        s1,
    })
}

/// Null-hypothesis waveform MLE: principal left singular vector of
/// `Y_j Xi_j^{-1/2}`, unit norm, largest entry real positive.
pub fn s_hat_0(aligned: &AlignedData, j: usize) -> Result<CVector, DetectorError> {
    Ok(tx_eigen(aligned, j, true, false)?.s0.unwrap())
}

/// Alternative-hypothesis waveform MLE over `Z_j = [R_j, T_j]`, unit norm,
/// re-phased so `s_hat_1^H s_hat_0 >= 0`.
pub fn s_hat_1(aligned: &AlignedData, j: usize) -> Result<CVector, DetectorError> {
    Ok(tx_eigen(aligned, j, true, true)?.s1.unwrap())
}

/// LRT statistic `sum_j lambda_max(Z_j^H Z_j) - lambda_max(R_j^H R_j)`.
pub fn lrt_statistic(aligned: &AlignedData) -> Result<f64, DetectorError> {
    let mut total = 0.0;
    for j in 0..aligned.nt() {
        let e = tx_eigen(aligned, j, false, false)?;
        total += e.lambda_z - e.lambda_r;
    }
    Ok(total)
}

/// Per-transmitter inner sums shared by the unified family. `s11` pairs
/// `s_hat_1` with itself, `s10` pairs `s_hat_1` with `s_hat_0`, `s00` pairs
/// `s_hat_0` with itself.
struct UnifiedSums {
    s11: C64,
    s10: C64,
    s00: C64,
    /// `||s_hat_0||^2 / ||s_hat_1||^2` (unity up to rounding).
    norm_ratio: f64,
}

fn unified_sums(
    aligned: &AlignedData,
    j: usize,
    s0: &CVector,
    s1: Option<&CVector>,
) -> Result<UnifiedSums, DetectorError> {
    let ns0 = s0.norm_squared();
    let ns1 = s1.map_or(1.0, CVector::norm_squared);
    let mut s11 = C64::new(0.0, 0.0);
    let mut s10 = C64::new(0.0, 0.0);
    let mut s00 = C64::new(0.0, 0.0);
    for k in 0..aligned.nr() {
        let xcol = col_slice(&aligned.x[j], k);
        let ycol = col_slice(&aligned.y[j], k);
        let tot = aligned.col_norms_sq_x[(j, k)] + aligned.col_norms_sq_y[(j, k)];
        if tot < DENOMINATOR_GUARD {
            return Err(DetectorError::DenominatorUnderflow { j, k });
        }
        let w0 = dot_conj(s0.as_slice(), ycol);
        let den = ns0 - w0.norm_sqr() / tot;
        if den < DENOMINATOR_GUARD {
            return Err(DetectorError::DenominatorUnderflow { j, k });
        }
        let u0 = dot_conj(s0.as_slice(), xcol);
        let scale = 1.0 / (tot * den);
        s00 += C64::new(u0.norm_sqr() * scale, 0.0);
        if let Some(s1) = s1 {
            let u1 = dot_conj(s1.as_slice(), xcol);
            s11 += C64::new(u1.norm_sqr() * scale, 0.0);
            s10 += u1 * u0.conj() * scale;
        }
    }
    Ok(UnifiedSums {
        s11,
        s10,
        s00,
        norm_ratio: ns0 / ns1,
    })
}

/// Evaluates one member of the unified family
/// `P( sum_j (||s0||^p/||s1||^p) sum_k [s_a^H (x x^H / tot) s_b] /
/// [s_0^H (I - y y^H / tot) s_0] )` with
/// `(p,a,b,P) = AW:(4,1,1,id), UG:(2,1,0,2Re), AG:(2,1,0,2|.|), RD:(0,0,0,id)`.
pub fn unified_statistic(aligned: &AlignedData, kind: DetectorKind) -> Result<f64, DetectorError> {
    if !kind.is_unified() {
        return Err(DetectorError::NotUnified { kind });
    }
    let need_s1 = kind != DetectorKind::RaoDurbin;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..aligned.nt() {
        let e = tx_eigen(aligned, j, true, need_s1)?;
        let sums = unified_sums(aligned, j, e.s0.as_ref().unwrap(), e.s1.as_ref())?;
        acc += match kind {
            DetectorKind::AltWald => sums.s11 * (sums.norm_ratio * sums.norm_ratio),
            DetectorKind::UsualGradient | DetectorKind::AltGradient => sums.s10 * sums.norm_ratio,
            DetectorKind::RaoDurbin => sums.s00,
            _ => unreachable!(),
        };
    }
    Ok(apply_unified_post(kind, acc))
}

fn apply_unified_post(kind: DetectorKind, acc: C64) -> f64 {
    match kind {
        DetectorKind::AltWald | DetectorKind::RaoDurbin => acc.re,
        DetectorKind::UsualGradient => 2.0 * acc.re,
        DetectorKind::AltGradient => 2.0 * acc.norm(),
        _ => unreachable!(),
    }
}

/// Evaluates the usual (standard) Wald statistic through its projection form
/// `2 sum_j ||s_{j,1}||^2 (O a)^H Pi_perp_{O a} (O a)`, which is analytically
/// zero: the projector annihilates the vector it is built from. The projector
/// is materialized and applied explicitly, so the return value measures
/// floating-point residue only (|result| stays below 1e-8 on any
/// non-degenerate input).
pub fn wald_usual_check(aligned: &AlignedData) -> Result<f64, DetectorError> {
    let l = aligned.n_samples() as f64;
    let nr = aligned.nr();
    let mut total = 0.0;
    for j in 0..aligned.nt() {
        let e = tx_eigen(aligned, j, true, true)?;
        let s1 = e.s1.as_ref().unwrap();
        let ns1 = s1.norm_squared();
        let mut w = CVector::zeros(nr);
        for k in 0..nr {
            let ux = s1.dotc(&aligned.x[j].column(k));
            let uy = s1.dotc(&aligned.y[j].column(k));
            let sigma2_1 = (aligned.col_norms_sq_y[(j, k)] - uy.norm_sqr() / ns1
                + aligned.col_norms_sq_x[(j, k)]
                - ux.norm_sqr() / ns1)
                / (2.0 * l);
            if sigma2_1 <= 0.0 {
                return Err(DetectorError::ZeroResidual { j });
            }
            let alpha_hat = ux / ns1;
            w[k] = alpha_hat / sigma2_1.sqrt();
        }
        let nw = w.norm_squared();
        if nw == 0.0 {
            continue;
        }
        let projector = CMatrix::identity(nr, nr) - (&w * w.adjoint()).unscale(nw);
        let projected = &projector * &w;
        total += 2.0 * ns1 * w.dotc(&projected).re;
    }
    Ok(total)
}

/// Durbin statistic computed through its own route: the restricted MLE
/// `alpha_hat_{j,10}` (built from `s_hat_0`) plugged into the quadratic form
/// with the Fisher-information block `||s_0||^2 diag(1/sigma2_hat_{jk,0})`.
/// The result is normalized by `2L` to sit on the same scale as the unified
/// Rao-Durbin statistic, with which it coincides.
pub fn durbin_statistic_independent(aligned: &AlignedData) -> Result<f64, DetectorError> {
    let l = aligned.n_samples() as f64;
    let mut total = 0.0;
    for j in 0..aligned.nt() {
        let s0 = s_hat_0(aligned, j)?;
        let ns0 = s0.norm_squared();
        for k in 0..aligned.nr() {
            let u0 = s0.dotc(&aligned.x[j].column(k));
            let w0 = s0.dotc(&aligned.y[j].column(k));
            let sigma2_0 = (aligned.col_norms_sq_y[(j, k)] - w0.norm_sqr() / ns0
                + aligned.col_norms_sq_x[(j, k)])
                / (2.0 * l);
            if sigma2_0 < DENOMINATOR_GUARD {
                return Err(DetectorError::DenominatorUnderflow { j, k });
            }
            let alpha_10 = u0 / ns0;
            total += alpha_10.norm_sqr() * ns0 / sigma2_0;
        }
    }
    Ok(total / (2.0 * l))
}

/// Single-channel baseline statistics on the surveillance data only, with
/// `R = X_j^H X_j` and `S0 = Diag(R)`, summed across transmitters.
pub fn baseline_statistic(aligned: &AlignedData, kind: DetectorKind) -> Result<f64, DetectorError> {
    if !kind.is_baseline() {
        return Err(DetectorError::NotBaseline { kind });
    }
    let nr = aligned.nr();
    if nr < 2 {
        return Err(DetectorError::TooFewReceivers { nr });
    }
    let mut total = 0.0;
    for j in 0..aligned.nt() {
        total += baseline_for_tx(&aligned.x[j], j, kind)?;
    }
    Ok(total)
}

fn baseline_for_tx(x: &CMatrix, j: usize, kind: DetectorKind) -> Result<f64, DetectorError> {
    let nr = x.ncols();
    let r = hermitian_gram(x);
    let mut inv_sqrt = Vec::with_capacity(nr);
    for k in 0..nr {
        let d = r[(k, k)].re;
        if d <= 0.0 {
            return Err(DetectorError::SingularDiagonal { j, k });
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    let mut w = CMatrix::zeros(nr, nr);
    for m in 0..nr {
        for n in 0..nr {
            w[(m, n)] = r[(m, n)] * (inv_sqrt[m] * inv_sqrt[n]);
        }
    }
    Ok(match kind {
        // tr{(R S0^-1 - I)^2} equals ||W - I||_F^2 because W - I is Hermitian
        // and similar to R S0^-1 - I.
        DetectorKind::P1Rao => {
            let mut acc = 0.0;
            for m in 0..nr {
                for n in 0..nr {
                    let delta = if m == n {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    acc += (w[(m, n)] - delta).norm_sqr();
                }
            }
            2.0 * acc
        }
        DetectorKind::P2Lrt => 1.0 / w.determinant().re,
        DetectorKind::P3Lrt => hermitian_top_eigenpair(w).0,
        _ => unreachable!(),
    })
}

/// All MLEs under both hypotheses.
pub fn mle_set(aligned: &AlignedData) -> Result<MleSet, DetectorError> {
    let (nt, nr) = (aligned.nt(), aligned.nr());
    let l = aligned.n_samples() as f64;
    let mut s0s = Vec::with_capacity(nt);
    let mut s1s = Vec::with_capacity(nt);
    let mut sigma2_0 = RMatrix::zeros(nt, nr);
    let mut sigma2_1 = RMatrix::zeros(nt, nr);
    let mut alpha = CMatrix::zeros(nt, nr);
    let mut beta = CMatrix::zeros(nt, nr);
    for j in 0..nt {
        let e = tx_eigen(aligned, j, true, true)?;
        let s0 = e.s0.unwrap();
        let s1 = e.s1.unwrap();
        let ns0 = s0.norm_squared();
        let ns1 = s1.norm_squared();
        for k in 0..nr {
            let xcol = aligned.x[j].column(k);
            let ycol = aligned.y[j].column(k);
            let (nx, ny) = (
                aligned.col_norms_sq_x[(j, k)],
                aligned.col_norms_sq_y[(j, k)],
            );
            let w0 = s0.dotc(&ycol);
            sigma2_0[(j, k)] = (ny - w0.norm_sqr() / ns0 + nx) / (2.0 * l);
            let ux = s1.dotc(&xcol);
            let uy = s1.dotc(&ycol);
            sigma2_1[(j, k)] = (ny - uy.norm_sqr() / ns1 + nx - ux.norm_sqr() / ns1) / (2.0 * l);
            alpha[(j, k)] = ux / ns1;
            beta[(j, k)] = uy / ns1;
        }
        s0s.push(s0);
        s1s.push(s1);
    }
    Ok(MleSet {
        s_hat_0: s0s,
        s_hat_1: s1s,
        sigma2_hat_0: sigma2_0,
        sigma2_hat_1: sigma2_1,
        alpha_hat: alpha,
        beta_hat: beta,
    })
}

/// Fisher-information block for the tested amplitudes of one transmitter:
/// `diag(||s||^2 / sigma2_k)`. Requires positive variances.
pub fn fim_rr_block(s: &CVector, sigma2: &[f64]) -> RMatrix {
    let ns = s.norm_squared();
    RMatrix::from_fn(sigma2.len(), sigma2.len(), |m, n| {
        if m == n {
            ns / sigma2[m]
        } else {
            0.0
        }
    })
}

/// Evaluates the requested statistics, sharing the per-transmitter
/// eigenproblems across the unified family and the LRT.
pub fn compute_statistics(
    aligned: &AlignedData,
    kinds: &[DetectorKind],
) -> Result<StatisticSet, DetectorError> {
    let want = |k: DetectorKind| kinds.contains(&k);
    let need_lrt = want(DetectorKind::Lrt);
    let need_s1 = want(DetectorKind::AltWald)
        || want(DetectorKind::UsualGradient)
        || want(DetectorKind::AltGradient);
    let need_s0 = need_s1 || want(DetectorKind::RaoDurbin);

    let mut lrt = 0.0;
    let mut aw = C64::new(0.0, 0.0);
    let mut grad = C64::new(0.0, 0.0);
    let mut rd = C64::new(0.0, 0.0);
    if need_lrt || need_s0 {
        for j in 0..aligned.nt() {
            let e = tx_eigen(aligned, j, need_s0, need_s1)?;
            if need_lrt {
                lrt += e.lambda_z - e.lambda_r;
            }
            if need_s0 {
                let sums = unified_sums(aligned, j, e.s0.as_ref().unwrap(), e.s1.as_ref())?;
                aw += sums.s11 * (sums.norm_ratio * sums.norm_ratio);
                grad += sums.s10 * sums.norm_ratio;
                rd += sums.s00;
            }
        }
    }

    let mut out = StatisticSet::default();
    for &kind in kinds {
        let value = match kind {
            DetectorKind::Lrt => lrt,
            DetectorKind::AltWald => apply_unified_post(kind, aw),
            DetectorKind::UsualGradient | DetectorKind::AltGradient => {
                apply_unified_post(kind, grad)
            }
            DetectorKind::RaoDurbin => apply_unified_post(kind, rd),
            DetectorKind::P1Rao | DetectorKind::P2Lrt | DetectorKind::P3Lrt => {
                baseline_statistic(aligned, kind)?
            }
        };
        out.values.insert(kind, value);
    }
    debug_assert!(
        out.get(DetectorKind::Lrt).is_none_or(|v| v >= -1e-10),
        "LRT must be nonnegative"
    );
    debug_assert!(
        out.get(DetectorKind::RaoDurbin)
            .is_none_or(|v| (-1e-10..=(aligned.nt() * aligned.nr()) as f64 + 1e-10).contains(&v)),
        "RD must lie in [0, Nt*Nr]"
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::random_aligned;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn unit_matrix_pair(l: usize, nr: usize, rng: &mut ChaCha8Rng) -> (CMatrix, CMatrix) {
        let rand_mat = |rng: &mut ChaCha8Rng| {
            CMatrix::from_fn(l, nr, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
        };
        (rand_mat(rng), rand_mat(rng))
    }

    #[test]
    fn xi_inverse_arithmetic_and_homogeneity() {
        let mut r = rng(1);
        let (x, y) = unit_matrix_pair(8, 2, &mut r);
        let aligned = AlignedData::new(vec![x.clone()], vec![y.clone()]);
        let xi = xi_inverse(&aligned, 0).unwrap();
        for (k, &v) in xi.iter().enumerate() {
            let direct = 1.0 / (x.column(k).norm_squared() + y.column(k).norm_squared());
            assert_relative_eq!(v, direct, max_relative = 1e-12);
        }
        // Scaling both columns by gamma multiplies the entry by 1/|gamma|^2.
        let gamma = C64::new(2.0, -1.0);
        let gammas = CMatrix::from_element(1, 2, gamma);
        let scaled = aligned.scaled_per_receiver(&gammas);
        let xi_s = xi_inverse(&scaled, 0).unwrap();
        for k in 0..2 {
            assert_relative_eq!(xi_s[k], xi[k] / gamma.norm_sqr(), max_relative = 1e-12);
        }
    }

    #[test]
    fn xi_inverse_unit_norms() {
        // ||x||^2 = ||y||^2 = 1 gives entries of exactly 1/2.
        let x = CMatrix::from_fn(4, 1, |i, _| {
            if i == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let aligned = AlignedData::new(vec![x.clone()], vec![x]);
        assert_eq!(xi_inverse(&aligned, 0).unwrap()[0], 0.5);
    }

    #[test]
    fn xi_inverse_zero_energy_errors() {
        let z = CMatrix::zeros(4, 1);
        let aligned = AlignedData::new(vec![z.clone()], vec![z]);
        assert!(matches!(
            xi_inverse(&aligned, 0),
            Err(DetectorError::ZeroEnergy { .. })
        ));
    }

    #[test]
    fn s_hat_0_single_receiver_is_normalized_column() {
        let mut r = rng(2);
        let (x, y) = unit_matrix_pair(16, 1, &mut r);
        let aligned = AlignedData::new(vec![x], vec![y.clone()]);
        let s0 = s_hat_0(&aligned, 0).unwrap();
        let yn = y.column(0).into_owned().scale(1.0 / y.column(0).norm());
        let ip = s0.dotc(&yn).norm();
        assert!(ip > 1.0 - 1e-10, "inner product {ip}");
        assert_relative_eq!(s0.norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn s_hat_0_recovers_rank_one_reference() {
        let mut r = rng(3);
        let l = 24;
        let s = CVector::from_fn(l, |_, _| {
            C64::from_polar(1.0, r.random::<f64>() * std::f64::consts::TAU)
        });
        let betas = [C64::new(1.0, 0.3), C64::new(-0.5, 0.8), C64::new(0.2, -1.1)];
        let mut y = CMatrix::zeros(l, 3);
        for (k, b) in betas.iter().enumerate() {
            y.set_column(k, &s.scale(1.0).map(|v| v * *b));
        }
        let x = CMatrix::from_fn(l, 3, |_, _| C64::new(r.random::<f64>() - 0.5, 0.0));
        let aligned = AlignedData::new(vec![x], vec![y]);
        let s0 = s_hat_0(&aligned, 0).unwrap();
        let ip = s0.dotc(&s.scale(1.0 / s.norm())).norm();
        assert!(ip > 1.0 - 1e-10, "inner product {ip}");
    }

    #[test]
    fn s_hat_0_rank_zero_errors() {
        let mut r = rng(4);
        let (x, _) = unit_matrix_pair(8, 2, &mut r);
        let aligned = AlignedData::new(vec![x], vec![CMatrix::zeros(8, 2)]);
        assert!(matches!(
            s_hat_0(&aligned, 0),
            Err(DetectorError::RankZero { .. })
        ));
    }

    #[test]
    fn s_hat_1_degenerates_to_s_hat_0_without_surveillance() {
        let mut r = rng(5);
        let (_, y) = unit_matrix_pair(12, 3, &mut r);
        // Tiny (nonzero) surveillance so Xi stays invertible.
        let x = CMatrix::from_fn(12, 3, |_, _| C64::new(1e-12 * r.random::<f64>(), 0.0));
        let aligned = AlignedData::new(vec![x], vec![y]);
        let s0 = s_hat_0(&aligned, 0).unwrap();
        let s1 = s_hat_1(&aligned, 0).unwrap();
        let ip = s1.dotc(&s0);
        assert!(ip.norm() > 1.0 - 1e-10);
        // Phase convention: s1^H s0 real nonnegative.
        assert!(ip.im.abs() < 1e-12 && ip.re >= 0.0);
    }

    #[test]
    fn lrt_zero_when_surveillance_empty() {
        let mut r = rng(6);
        let (_, y) = unit_matrix_pair(10, 2, &mut r);
        let x = CMatrix::zeros(10, 2);
        // Zero X columns keep Xi invertible through the Y energy.
        let aligned = AlignedData::new(vec![x], vec![y]);
        let v = lrt_statistic(&aligned).unwrap();
        assert!(v.abs() < 1e-12, "got {v}");
    }

    #[test]
    fn lrt_nonnegative_on_random_data() {
        let mut r = rng(7);
        for _ in 0..50 {
            let aligned = random_aligned(12, 2, 3, &mut r);
            assert!(lrt_statistic(&aligned).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn rd_zero_when_surveillance_orthogonal_to_s0() {
        // Build y spanning e1 only; x orthogonal to e1.
        let l = 6;
        let mut y = CMatrix::zeros(l, 2);
        y[(0, 0)] = C64::new(2.0, 0.0);
        y[(0, 1)] = C64::new(0.0, 1.0);
        let mut x = CMatrix::zeros(l, 2);
        x[(3, 0)] = C64::new(1.0, 0.5);
        x[(4, 1)] = C64::new(-0.3, 0.2);
        let aligned = AlignedData::new(vec![x], vec![y]);
        let v = unified_statistic(&aligned, DetectorKind::RaoDurbin).unwrap();
        assert!(v.abs() < 1e-12, "got {v}");
    }

    #[test]
    fn rd_terms_bounded_by_receiver_count() {
        let mut r = rng(8);
        for _ in 0..50 {
            let aligned = random_aligned(10, 2, 3, &mut r);
            let v = unified_statistic(&aligned, DetectorKind::RaoDurbin).unwrap();
            assert!((-1e-10..=6.0 + 1e-10).contains(&v), "got {v}");
        }
    }

    #[test]
    fn ug_bounded_by_ag() {
        let mut r = rng(9);
        for _ in 0..50 {
            let aligned = random_aligned(14, 1, 3, &mut r);
            let ug = unified_statistic(&aligned, DetectorKind::UsualGradient).unwrap();
            let ag = unified_statistic(&aligned, DetectorKind::AltGradient).unwrap();
            assert!(ug <= ag + 1e-12, "ug {ug} ag {ag}");
        }
    }

    #[test]
    fn unified_rejects_non_family_members() {
        let mut r = rng(10);
        let aligned = random_aligned(8, 1, 2, &mut r);
        assert!(matches!(
            unified_statistic(&aligned, DetectorKind::Lrt),
            Err(DetectorError::NotUnified { .. })
        ));
    }

    #[test]
    fn wald_usual_is_numerically_null() {
        let mut r = rng(11);
        for _ in 0..100 {
            let aligned = random_aligned(16, 2, 3, &mut r);
            let v = wald_usual_check(&aligned).unwrap();
            assert!(v.abs() < 1e-8, "got {v}");
        }
    }

    #[test]
    fn wald_usual_exactly_zero_single_receiver() {
        let mut r = rng(12);
        let (x, y) = unit_matrix_pair(10, 1, &mut r);
        let aligned = AlignedData::new(vec![x], vec![y]);
        assert_eq!(wald_usual_check(&aligned).unwrap(), 0.0);
    }

    #[test]
    fn durbin_equals_unified_rd() {
        let mut r = rng(13);
        for _ in 0..100 {
            let aligned = random_aligned(12, 2, 2, &mut r);
            let rd = unified_statistic(&aligned, DetectorKind::RaoDurbin).unwrap();
            let d = durbin_statistic_independent(&aligned).unwrap();
            assert_relative_eq!(d, rd, max_relative = 1e-10);
        }
    }

    #[test]
    fn durbin_zero_without_surveillance() {
        let mut r = rng(14);
        let (_, y) = unit_matrix_pair(8, 2, &mut r);
        let aligned = AlignedData::new(vec![CMatrix::zeros(8, 2)], vec![y]);
        assert!(durbin_statistic_independent(&aligned).unwrap().abs() < 1e-15);
    }

    #[test]
    fn baselines_white_case() {
        // Orthogonal equal-norm columns: R S0^-1 = I.
        let l = 8;
        let mut x = CMatrix::zeros(l, 3);
        x[(0, 0)] = C64::new(2.0, 0.0);
        x[(1, 1)] = C64::new(0.0, 2.0);
        x[(2, 2)] = C64::new(-2.0, 0.0);
        let aligned = AlignedData::new(
            vec![x],
            vec![CMatrix::from_element(l, 3, C64::new(1.0, 0.0))],
        );
        assert_relative_eq!(
            baseline_statistic(&aligned, DetectorKind::P1Rao).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            baseline_statistic(&aligned, DetectorKind::P2Lrt).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            baseline_statistic(&aligned, DetectorKind::P3Lrt).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn baseline_p3_identical_columns() {
        let mut r = rng(15);
        let col = CVector::from_fn(10, |_, _| {
            C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
        });
        let mut x = CMatrix::zeros(10, 2);
        x.set_column(0, &col);
        x.set_column(1, &col);
        let aligned = AlignedData::new(
            vec![x],
            vec![CMatrix::from_element(10, 2, C64::new(1.0, 0.0))],
        );
        let v = baseline_statistic(&aligned, DetectorKind::P3Lrt).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn baseline_guards() {
        let mut r = rng(16);
        let (x, y) = unit_matrix_pair(8, 1, &mut r);
        let aligned = AlignedData::new(vec![x], vec![y]);
        assert!(matches!(
            baseline_statistic(&aligned, DetectorKind::P1Rao),
            Err(DetectorError::TooFewReceivers { .. })
        ));
        let mut x = CMatrix::from_fn(8, 2, |_, _| C64::new(r.random::<f64>(), 0.0));
        x.column_mut(1).fill(C64::new(0.0, 0.0));
        let aligned = AlignedData::new(
            vec![x],
            vec![CMatrix::from_element(8, 2, C64::new(1.0, 0.0))],
        );
        assert!(matches!(
            baseline_statistic(&aligned, DetectorKind::P1Rao),
            Err(DetectorError::SingularDiagonal { .. })
        ));
        let aligned = AlignedData::new(
            vec![CMatrix::from_element(8, 2, C64::new(1.0, 0.0))],
            vec![CMatrix::from_element(8, 2, C64::new(1.0, 0.0))],
        );
        assert!(matches!(
            baseline_statistic(&aligned, DetectorKind::Lrt),
            Err(DetectorError::NotBaseline { .. })
        ));
    }

    #[test]
    fn mle_unit_norms_and_phase_convention() {
        let mut r = rng(17);
        let aligned = random_aligned(20, 2, 3, &mut r);
        let mle = mle_set(&aligned).unwrap();
        for j in 0..2 {
            assert_relative_eq!(mle.s_hat_0[j].norm(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(mle.s_hat_1[j].norm(), 1.0, max_relative = 1e-12);
            let ip = mle.s_hat_1[j].dotc(&mle.s_hat_0[j]);
            assert!(ip.im.abs() < 1e-12 && ip.re >= 0.0);
            // Largest-magnitude entry of s_hat_0 is real positive.
            let pivot = mle.s_hat_0[j]
                .iter()
                .cloned()
                .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
                .unwrap();
            assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
        }
    }

    #[test]
    fn mle_zero_surveillance_gives_zero_alpha() {
        let mut r = rng(18);
        let (_, y) = unit_matrix_pair(10, 2, &mut r);
        let aligned = AlignedData::new(vec![CMatrix::zeros(10, 2)], vec![y]);
        let mle = mle_set(&aligned).unwrap();
        assert!(mle.alpha_hat.iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn mle_noise_free_fit_has_zero_residual_variance() {
        let mut r = rng(19);
        let l = 16;
        let s = CVector::from_fn(l, |_, _| {
            C64::from_polar(1.0, r.random::<f64>() * std::f64::consts::TAU)
        });
        let coef = |r: &mut ChaCha8Rng| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        let mut x = CMatrix::zeros(l, 2);
        let mut y = CMatrix::zeros(l, 2);
        for k in 0..2 {
            let (a, b) = (coef(&mut r), coef(&mut r));
            x.set_column(k, &s.map(|v| v * a));
            y.set_column(k, &s.map(|v| v * b));
        }
        let aligned = AlignedData::new(vec![x], vec![y]);
        let scale = aligned.col_norms_sq_x.sum() + aligned.col_norms_sq_y.sum();
        let mle = mle_set(&aligned).unwrap();
        for k in 0..2 {
            assert!(mle.sigma2_hat_1[(0, k)].abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn mle_pythagorean_reconstruction() {
        let mut r = rng(20);
        let aligned = random_aligned(18, 1, 3, &mut r);
        let mle = mle_set(&aligned).unwrap();
        let l = aligned.n_samples() as f64;
        let ns1 = mle.s_hat_1[0].norm_squared();
        for k in 0..3 {
            let lhs = 2.0 * l * mle.sigma2_hat_1[(0, k)]
                + (mle.alpha_hat[(0, k)].norm_sqr() + mle.beta_hat[(0, k)].norm_sqr()) * ns1;
            let rhs = aligned.col_norms_sq_x[(0, k)] + aligned.col_norms_sq_y[(0, k)];
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn fim_rr_block_diagonal() {
        let s = CVector::from_element(16, C64::new(1.0, 0.0));
        let fim = fim_rr_block(&s, &[1.0, 0.5, 2.0]);
        assert_eq!(fim[(0, 0)], 16.0);
        assert_eq!(fim[(1, 1)], 32.0);
        assert_eq!(fim[(2, 2)], 8.0);
        assert_eq!(fim[(0, 1)], 0.0);
    }

    #[test]
    fn compute_statistics_matches_individual_ops() {
        let mut r = rng(21);
        let aligned = random_aligned(16, 2, 3, &mut r);
        let set = compute_statistics(&aligned, &DetectorKind::ALL).unwrap();
        assert_relative_eq!(
            set.get(DetectorKind::Lrt).unwrap(),
            lrt_statistic(&aligned).unwrap(),
            max_relative = 1e-14
        );
        for kind in [
            DetectorKind::AltWald,
            DetectorKind::UsualGradient,
            DetectorKind::AltGradient,
            DetectorKind::RaoDurbin,
        ] {
            assert_relative_eq!(
                set.get(kind).unwrap(),
                unified_statistic(&aligned, kind).unwrap(),
                max_relative = 1e-12
            );
        }
        for kind in [
            DetectorKind::P1Rao,
            DetectorKind::P2Lrt,
            DetectorKind::P3Lrt,
        ] {
            assert_relative_eq!(
                set.get(kind).unwrap(),
                baseline_statistic(&aligned, kind).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn detector_tokens_roundtrip() {
        for kind in DetectorKind::ALL {
            assert_eq!(kind.token().parse::<DetectorKind>().unwrap(), kind);
        }
        assert!("nope".parse::<DetectorKind>().is_err());
        assert_eq!(
            serde_json::to_string(&DetectorKind::P1Rao).unwrap(),
            "\"P1_RAO\""
        );
    }

    #[test]
    fn statistics_invariant_under_global_phase() {
        let mut r = rng(22);
        let aligned = random_aligned(12, 1, 3, &mut r);
        let phase = C64::from_polar(1.0, 1.234);
        let gammas = CMatrix::from_element(1, 3, phase);
        let scaled = aligned.scaled_per_receiver(&gammas);
        for kind in DetectorKind::TWO_CHANNEL {
            let a = compute_statistics(&aligned, &[kind])
                .unwrap()
                .get(kind)
                .unwrap();
            let b = compute_statistics(&scaled, &[kind])
                .unwrap()
                .get(kind)
                .unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }
}
