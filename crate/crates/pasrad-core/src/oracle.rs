//! Dense reference implementations for verification.
//!
//! Everything here deliberately takes the expensive route: explicit `L x L`
//! Gram matrices, materialized operator matrices, literal trace evaluation,
//! power iteration. The fast paths in [`crate::detectors`] and
//! [`crate::signal`] are checked against these routes by the self-test
//! command and the verification suites. Only use at small `L`.

use std::f64::consts::TAU;

use nalgebra::linalg::SymmetricEigen;
use rand::Rng;

use crate::detectors::DetectorKind;
use crate::signal::AlignedData;
use crate::{CMatrix, CVector, C64};

/// Circular shift: `out[n] = v[(n + k) mod L]`, the action of an integer
/// k-sample delay under the circular DFT operator.
pub fn circular_shift(v: &CVector, k: usize) -> CVector {
    let l = v.len();
    CVector::from_fn(l, |n, _| v[(n + k) % l])
}

/// The literal matrix form `B(f/fs) F^H B(-tau df) F` of the delay–Doppler
/// operator, with `F` the unitary DFT and `[B(a)]_ii = exp(-i 2 pi i a)`.
pub fn dense_delay_doppler_matrix(l: usize, delay_s: f64, doppler_hz: f64, fs: f64) -> CMatrix {
    let df = fs / l as f64;
    let f = CMatrix::from_fn(l, l, |i, n| {
        C64::from_polar(1.0 / (l as f64).sqrt(), -TAU * (i * n) as f64 / l as f64)
    });
    let b = |a: f64| {
        CMatrix::from_fn(l, l, |i, n| {
            if i == n {
                C64::from_polar(1.0, -TAU * i as f64 * a)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    };
    b(doppler_hz / fs) * f.adjoint() * b(-delay_s * df) * &f
}

fn xi_recomputed(aligned: &AlignedData, j: usize) -> Vec<f64> {
    (0..aligned.nr())
        .map(|k| {
            1.0 / (aligned.x[j].column(k).norm_squared() + aligned.y[j].column(k).norm_squared())
        })
        .collect()
}

/// `Y_j Xi^{-1} Y_j^H` (and optionally plus the X part) as an explicit L x L
/// Hermitian matrix.
fn dense_gram(aligned: &AlignedData, j: usize, include_x: bool) -> CMatrix {
    let l = aligned.n_samples();
    let xi = xi_recomputed(aligned, j);
    let mut g = CMatrix::zeros(l, l);
    for (k, &xi_k) in xi.iter().enumerate() {
        let y = aligned.y[j].column(k).into_owned();
        g += (&y * y.adjoint()).scale(xi_k);
        if include_x {
            let x = aligned.x[j].column(k).into_owned();
            g += (&x * x.adjoint()).scale(xi_k);
        }
    }
    g
}

fn dense_top_eigenpair(m: CMatrix) -> (f64, CVector) {
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

fn phase_fix_largest(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = 0.0;
    for (i, c) in v.iter().enumerate() {
        if c.norm_sqr() > best_mag {
            best_mag = c.norm_sqr();
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

/// LRT via the explicit L x L route:
/// `sum_j lambda_max(Y Xi Y^H + X Xi X^H) - lambda_max(Y Xi Y^H)`.
pub fn dense_lrt(aligned: &AlignedData) -> f64 {
    (0..aligned.nt())
        .map(|j| {
            let (lz, _) = dense_top_eigenpair(dense_gram(aligned, j, true));
            let (lr, _) = dense_top_eigenpair(dense_gram(aligned, j, false));
            lz - lr
        })
        .sum()
}

/// `s_hat_{j,0}` from the dense L x L eigenproblem, same phase convention as
/// the fast path.
pub fn dense_s_hat_0(aligned: &AlignedData, j: usize) -> CVector {
    let (_, mut v) = dense_top_eigenpair(dense_gram(aligned, j, false));
    let n = v.norm();
    v.scale_mut(1.0 / n);
    phase_fix_largest(&mut v);
    v
}

/// `s_hat_{j,1}` from the dense L x L eigenproblem, re-phased against
/// [`dense_s_hat_0`].
pub fn dense_s_hat_1(aligned: &AlignedData, j: usize) -> CVector {
    let (_, mut v) = dense_top_eigenpair(dense_gram(aligned, j, true));
    let n = v.norm();
    v.scale_mut(1.0 / n);
    let s0 = dense_s_hat_0(aligned, j);
    let ip = v.dotc(&s0);
    if ip.norm() > 0.0 {
        let rot = ip / ip.norm();
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
    v
}

/// Unified-family statistic evaluated with dense eigenvectors and explicit
/// L x L outer products in the quadratic forms.
pub fn dense_unified(aligned: &AlignedData, kind: DetectorKind) -> f64 {
    assert!(kind.is_unified(), "{kind} is not unified");
    let l = aligned.n_samples();
    let eye = CMatrix::identity(l, l);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..aligned.nt() {
        let s0 = dense_s_hat_0(aligned, j);
        let s1 = dense_s_hat_1(aligned, j);
        let (p, sa, sb): (i32, &CVector, &CVector) = match kind {
            DetectorKind::AltWald => (4, &s1, &s1),
            DetectorKind::UsualGradient | DetectorKind::AltGradient => (2, &s1, &s0),
            DetectorKind::RaoDurbin => (0, &s0, &s0),
            _ => unreachable!(),
        };
        let prefactor = (s0.norm_squared() / s1.norm_squared()).powi(p / 2);
        let mut inner = C64::new(0.0, 0.0);
        for k in 0..aligned.nr() {
            let x = aligned.x[j].column(k).into_owned();
            let y = aligned.y[j].column(k).into_owned();
            let tot = x.norm_squared() + y.norm_squared();
            let num_mat = (&x * x.adjoint()).scale(1.0 / tot);
            let den_mat = &eye - (&y * y.adjoint()).scale(1.0 / tot);
            let num = sa.dotc(&(&num_mat * sb));
            let den = s0.dotc(&(&den_mat * &s0));
            inner += num / den.re;
        }
        acc += inner * prefactor;
    }
    match kind {
        DetectorKind::AltWald | DetectorKind::RaoDurbin => acc.re,
        DetectorKind::UsualGradient => 2.0 * acc.re,
        DetectorKind::AltGradient => 2.0 * acc.norm(),
        _ => unreachable!(),
    }
}

/// Largest eigenvalue by adaptive power iteration (independent of the
/// symmetric eigensolver used by the fast path).
fn power_iteration_lambda_max(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut v = CVector::from_fn(n, |i, _| C64::new(1.0 + (i as f64) * 0.137, 0.2 * i as f64));
    v.scale_mut(1.0 / v.norm());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let mut w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        w.scale_mut(1.0 / norm);
        let rayleigh = w.dotc(&(m * &w)).re;
        if (rayleigh - lambda).abs() <= 1e-15 * rayleigh.abs().max(1.0) {
            return rayleigh;
        }
        lambda = rayleigh;
        v = w;
    }
    lambda
}

/// Baseline statistics by literal evaluation: explicit trace of the matrix
/// square for P1, determinant of the explicitly whitened matrix for P2,
/// power-iterated largest eigenvalue for P3.
pub fn dense_baseline(aligned: &AlignedData, kind: DetectorKind) -> f64 {
    assert!(kind.is_baseline(), "{kind} is not a baseline");
    let nr = aligned.nr();
    let mut total = 0.0;
    for j in 0..aligned.nt() {
        let x = &aligned.x[j];
        let r = x.ad_mul(x);
        let s0_inv = CMatrix::from_fn(nr, nr, |m, n| {
            if m == n {
                C64::new(1.0 / r[(m, m)].re, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let s0_inv_sqrt = CMatrix::from_fn(nr, nr, |m, n| {
            if m == n {
                C64::new(1.0 / r[(m, m)].re.sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        total += match kind {
            DetectorKind::P1Rao => {
                let m = &r * &s0_inv - CMatrix::identity(nr, nr);
                2.0 * (&m * &m).trace().re
            }
            DetectorKind::P2Lrt => {
                let w = &s0_inv_sqrt * &r * &s0_inv_sqrt;
                1.0 / w.determinant().re
            }
            DetectorKind::P3Lrt => {
                let w = &s0_inv_sqrt * &r * &s0_inv_sqrt;
                power_iteration_lambda_max(&w)
            }
            _ => unreachable!(),
        };
    }
    total
}

/// Random aligned dataset with an embedded rank-1 component per transmitter
/// and heteroscedastic per-channel scales, so every statistic is well away
/// from zero. Used by the identity campaigns.
pub fn random_aligned<R: Rng + ?Sized>(l: usize, nt: usize, nr: usize, rng: &mut R) -> AlignedData {
    let mut xs = Vec::with_capacity(nt);
    let mut ys = Vec::with_capacity(nt);
    let cplx = |rng: &mut R| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    for _ in 0..nt {
        let s = CVector::from_fn(l, |_, _| C64::from_polar(1.0, rng.random::<f64>() * TAU));
        let mut x = CMatrix::zeros(l, nr);
        let mut y = CMatrix::zeros(l, nr);
        for k in 0..nr {
            // Per-channel noise scale spread over roughly [0.5, 2].
            let scale = 2f64.powf(rng.random::<f64>() * 2.0 - 1.0);
            let a = cplx(rng) * 1.5;
            let b = cplx(rng) * 3.0;
            for i in 0..l {
                x[(i, k)] = a * s[i] + cplx(rng) * scale;
                y[(i, k)] = b * s[i] + cplx(rng) * scale;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    AlignedData::new(xs, ys)
}
