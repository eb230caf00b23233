//! Regularized resolvent `F_eps = Pbar ((H_0 - k)^2 + eps^2)^{-1}`, the
//! second-order form `G_eps = P V F_eps V P`, its `eps -> 0` extrapolation
//! and the finite-rank correction `B_eps = Im(F_eps V P)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::conjugate::FiniteRank;
use crate::error::{Error, Result};
use crate::model::ModelOperator;
use crate::numerics::{dot, hermitian_eigenvalues, BorderedTridiagonal, CMatrix, HermitianMatrix, LinearOperator, ShiftedSolve, C64};

/// `((A - k)^2 + eps^2)^{-1} x` from the two shifted solves at `k +- i eps`.
pub fn regularized_square_apply<A: ShiftedSolve + ?Sized>(a: &A, k: f64, eps: f64, x: &[C64]) -> Result<Vec<C64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", "must be positive"));
    }
    let up = a.shifted_solve(C64::new(k, eps), x)?;
    let down = a.shifted_solve(C64::new(k, -eps), x)?;
    let s = C64::new(0.0, -0.5 / eps);
    Ok(up.iter().zip(&down).map(|(p, q)| (p - q) * s).collect())
}

/// `F_eps x = Pbar ((H_0 - k)^2 + eps^2)^{-1} Pbar x`.
///
/// Fails when `eps` is below the box's resolution floor.
pub fn f_epsilon_apply(h0: &ModelOperator, eps: f64, x: &[C64]) -> Result<Vec<C64>> {
    let floor = h0.spacing_floor();
    if eps < floor {
        return Err(Error::Resolution { eps, floor });
    }
    let xb = h0.p.apply_complement(x);
    let y = regularized_square_apply(&h0.h0, h0.config.k, eps, &xb)?;
    Ok(h0.p.apply_complement(&y))
}

/// `F_eps V p_b` for every basis vector `p_b` of `ran P`.
pub fn f_v_p(h0: &ModelOperator, v: &BorderedTridiagonal, eps: f64) -> Result<Vec<Vec<C64>>> {
    let basis = h0.p.basis();
    (0..basis.cols())
        .map(|b| f_epsilon_apply(h0, eps, &v.apply(basis.col(b))))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FgrSample {
    pub eps: f64,
    /// `P V F_eps V P` on `ran P`, row-major.
    pub g: Vec<Vec<(f64, f64)>>,
    /// Least and largest eigenvalues of `eps G_eps`.
    pub eps_least: f64,
    pub eps_largest: f64,
    #[serde(skip)]
    pub matrix: Option<HermitianMatrix>,
}

impl FgrSample {
    pub fn least(&self) -> f64 {
        self.eps_least / self.eps
    }
}

fn to_rows(m: &HermitianMatrix) -> Vec<Vec<(f64, f64)>> {
    let a = m.as_matrix();
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| (a[(i, j)].re, a[(i, j)].im)).collect())
        .collect()
}

/// `G_eps = P V F_eps V P` restricted to `ran P`.
pub fn fgr_sample(h0: &ModelOperator, v: &BorderedTridiagonal, eps: f64) -> Result<FgrSample> {
    let dp = h0.p.rank();
    if dp == 0 {
        return Err(Error::Precondition("the embedded eigenprojector is trivial".into()));
    }
    let basis = h0.p.basis();
    let vp: Vec<Vec<C64>> = (0..dp).map(|b| v.apply(basis.col(b))).collect();
    let z = f_v_p(h0, v, eps)?;
    let g = CMatrix::from_fn(dp, dp, |a, b| dot(&vp[a], &z[b]));
    let g = HermitianMatrix::new(g)?;
    let vals = hermitian_eigenvalues(&g)?;
    let least = vals[0];
    let scale = vals[dp - 1].abs().max(1.0);
    if least < -1e-12 * scale {
        return Err(Error::Precondition(format!("G_eps is not positive semidefinite (least {least:.3e})")));
    }
    Ok(FgrSample {
        eps,
        g: to_rows(&g),
        eps_least: eps * least,
        eps_largest: eps * vals[dp - 1],
        matrix: Some(g),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FgrReport {
    pub eps_grid: Vec<f64>,
    pub samples: Vec<FgrSample>,
    /// Least-squares slope of `log(least eig G_eps)` against `log eps`.
    pub slope: f64,
    /// Extrapolated `Gamma` on `ran P`, row-major.
    pub gamma: Vec<Vec<(f64, f64)>>,
    /// Least eigenvalue of `Gamma`.
    pub c0: f64,
    /// RMS residual of the linear fit of `eps * least eig` against `eps`.
    pub fit_residual: f64,
    /// Max and min of `eps * eig` over the window.
    pub c1: f64,
    pub c2: f64,
    pub resolution_floor: f64,
    pub window_valid: bool,
    pub fgr_holds: bool,
    pub warnings: Vec<String>,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (icpt, slope, rms)
}

/// Geometric grid of `count` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Sweep `G_eps` over `eps_grid` and extrapolate `eps G_eps` to `eps = 0`
/// with a linear-in-`eps` fit per matrix entry.
pub fn fgr_limit(h0: &ModelOperator, v: &BorderedTridiagonal, eps_grid: &[f64]) -> Result<FgrReport> {
    if eps_grid.len() < 6 {
        return Err(Error::param("eps_grid", "need at least 6 points"));
    }
    let floor = h0.spacing_floor();
    if let Some(&e) = eps_grid.iter().find(|&&e| e < floor) {
        return Err(Error::Resolution { eps: e, floor });
    }
    let samples: Vec<FgrSample> = eps_grid
        .par_iter()
        .map(|&e| fgr_sample(h0, v, e))
        .collect::<Result<_>>()?;
    let dp = h0.p.rank();
    let mut warnings = Vec::new();

    let logs: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.least() > 0.0)
        .map(|s| (s.eps.ln(), s.least().ln()))
        .collect();
    let slope = if logs.len() == samples.len() {
        let (x, y): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        linear_fit(&x, &y).1
    } else {
        f64::NAN
    };
    let window_valid = slope.is_finite() && (slope + 1.0).abs() <= 0.2;
    if !window_valid {
        warnings.push(format!("log-log slope {slope:.3} is not within 0.2 of -1: eps window invalid"));
    }

    let eps: Vec<f64> = samples.iter().map(|s| s.eps).collect();
    let mut gamma = CMatrix::zeros(dp, dp);
    for a in 0..dp {
        for b in 0..dp {
            let re: Vec<f64> = samples.iter().map(|s| s.eps * s.g[a][b].0).collect();
            let im: Vec<f64> = samples.iter().map(|s| s.eps * s.g[a][b].1).collect();
            gamma[(a, b)] = C64::new(linear_fit(&eps, &re).0, linear_fit(&eps, &im).0);
        }
    }
    let gamma = HermitianMatrix::symmetrized(gamma);
    let c0 = hermitian_eigenvalues(&gamma)?[0];
    let least: Vec<f64> = samples.iter().map(|s| s.eps_least).collect();
    let (_, _, fit_residual) = linear_fit(&eps, &least);
    let c1 = samples.iter().map(|s| s.eps_largest).fold(f64::NEG_INFINITY, f64::max);
    let c2 = least.iter().copied().fold(f64::INFINITY, f64::min);
    let fgr_holds = c0 > 0.0 && c0 > 3.0 * fit_residual && c2 > 0.0;
    if !fgr_holds {
        warnings.push(format!(
            "second-order coefficient c0 = {c0:.3e} is not resolved above the fit residual {fit_residual:.3e}: FGR hypothesis violated"
        ));
    }
    Ok(FgrReport {
        eps_grid: eps,
        samples,
        slope,
        gamma: to_rows(&gamma),
        c0,
        fit_residual,
        c1,
        c2,
        resolution_floor: floor,
        window_valid,
        fgr_holds,
        warnings,
    })
}

/// `B_eps = (F_eps V P - P V F_eps)/(2i)`.
pub fn build_b_epsilon(h0: &ModelOperator, v: &BorderedTridiagonal, eps: f64) -> Result<FiniteRank> {
    let basis = h0.p.basis();
    Ok(FiniteRank {
        u: f_v_p(h0, v, eps)?,
        w: (0..basis.cols()).map(|b| basis.col(b).to_vec()).collect(),
    })
}

/// Frobenius norm of `P [H_lambda, i lambda B_eps] P - lambda^2 G_eps` on `ran P`.
pub fn commutator_identity_error(h0: &ModelOperator, v: &BorderedTridiagonal, lambda: f64, eps: f64) -> Result<f64> {
    let sample = fgr_sample(h0, v, eps)?;
    let g = sample.matrix.as_ref().expect("sample carries its matrix").as_matrix().clone();
    let b = build_b_epsilon(h0, v, eps)?;
    let h = h0.h0.add_scaled(v, lambda)?;
    let basis = h0.p.basis();
    let dp = basis.cols();
    let hp: Vec<Vec<C64>> = (0..dp).map(|a| h.apply(basis.col(a))).collect();
    let bp: Vec<Vec<C64>> = (0..dp).map(|a| b.apply(basis.col(a))).collect();
    let i_lambda = C64::new(0.0, lambda);
    let mut err = 0.0;
    for a in 0..dp {
        for c in 0..dp {
            let comm = i_lambda * (dot(&hp[a], &bp[c]) - dot(&bp[a], &hp[c]));
            err += (comm - g[(a, c)] * lambda * lambda).norm_sqr();
        }
    }
    Ok(err.sqrt())
}

/// Closed-form width for the exponential coupling `e^{-(r-c)}` at energy `k`:
/// `Gamma = xi/(1 + xi^2)^2`, `xi = sqrt(k - 1/4)`.
pub fn exponential_coupling_width(k: f64) -> f64 {
    let xi = (k - 0.25).sqrt();
    xi / (1.0 + xi * xi).powi(2)
}
