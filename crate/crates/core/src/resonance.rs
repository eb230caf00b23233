//! The embedded eigenvalue under coupling: the finite-dimensional virial
//! identity, the eigenvalue turning into a complex-scaling resonance with
//! width `lambda^2 Gamma`, and a tail proxy for compactness of
//! `[V, i S_hat](H_0 + 1)^{-1}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::conjugate::{assemble_s_hat, ConjugateOperator, FiniteRank};
use crate::error::{Error, Result};
use crate::model::{assemble_h0, assemble_potential, complex_scale, ModelConfig};
use crate::numerics::{
    dot, dot_bilinear, eigen_residual, general_eig, norm, norm_estimate, normalize, BorderedMatrix,
    BorderedTridiagonal, CMatrix, ComplexMatrix, LinearOperator, ShiftedSolve, C64, ZERO,
};

/// `|<f, i[H, S]f>| / (|f|^2 |S| |H|)` for an eigenpair `(kappa, f)` of `H`.
pub struct Virial<'a, S: ?Sized> {
    pub h: &'a BorderedTridiagonal,
    pub s: &'a S,
    pub h_norm: f64,
    pub s_norm: f64,
}

impl<'a, S: LinearOperator + ?Sized> Virial<'a, S> {
    /// Norms from the extreme eigenvalues of `h` and power iteration on `s`.
    pub fn new(h: &'a BorderedTridiagonal, s: &'a S, seed: u64) -> Result<Self> {
        let lo = h.eigenvalue_by_index(0)?;
        let hi = h.eigenvalue_by_index(h.dim() - 1)?;
        let s_norm = norm_estimate(s.dim(), |x| s.apply(x), |x| s.apply(x), 200, 1e-8, seed);
        Ok(Virial {
            h,
            s,
            h_norm: lo.abs().max(hi.abs()),
            s_norm,
        })
    }

    pub fn residual(&self, f: &[C64], kappa: f64) -> Result<f64> {
        let hf = self.h.apply(f);
        let fn2 = dot(f, f).re;
        let r = hf
            .iter()
            .zip(f)
            .map(|(a, b)| (a - b * kappa).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > 1e-8 * fn2.sqrt() {
            return Err(Error::Precondition(format!(
                "not an eigenvector: |H f - kappa f| = {r:.3e} for |f| = {:.3e}",
                fn2.sqrt()
            )));
        }
        let sf = self.s.apply(f);
        let z = dot(&hf, &sf);
        let denom = fn2 * self.s_norm * self.h_norm;
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * z.im.abs() / denom)
    }
}

pub fn virial_residual<S: LinearOperator + ?Sized>(
    h: &BorderedTridiagonal,
    s_hat: &S,
    f: &[C64],
    kappa: f64,
) -> Result<f64> {
    Virial::new(h, s_hat, 0)?.residual(f, kappa)
}

#[derive(Clone, Debug, Serialize)]
pub struct VirialReport {
    pub lambda: f64,
    pub n_pairs: usize,
    pub max_residual: f64,
    /// Eigenvalue attaining the maximum.
    pub worst_eigenvalue: f64,
    pub h_norm: f64,
    pub s_norm: f64,
}

/// Virial residual over every eigenpair of `H_lambda = H_0 + lambda V` with
/// `S_hat = Pbar S Pbar + lambda theta B_eps`.
pub fn virial_scan(config: &ModelConfig, s: &ConjugateOperator, theta: f64, eps: f64, seed: u64) -> Result<VirialReport> {
    let h0 = assemble_h0(config)?;
    let v = assemble_potential(config)?;
    let lambda = config.lambda;
    let h = h0.h0.add_scaled(&v, lambda)?;
    let b = if lambda != 0.0 && h0.p.rank() > 0 {
        crate::fgr::build_b_epsilon(&h0, &v, eps)?
    } else {
        FiniteRank::default()
    };
    let shat = assemble_s_hat(s, &h0.p, &b, lambda * theta);
    let vir = Virial::new(&h, &shat, seed)?;
    let (lo, hi) = h.gershgorin();
    let e = h.window_eig(lo - 1.0, hi + 1.0, seed)?;
    let res: Vec<f64> = (0..e.len())
        .into_par_iter()
        .map(|i| vir.residual(e.vectors.col(i), e.values[i]))
        .collect::<Result<_>>()?;
    let (worst, max) = res
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    Ok(VirialReport {
        lambda,
        n_pairs: e.len(),
        max_residual: max,
        worst_eigenvalue: e.values.get(worst).copied().unwrap_or(0.0),
        h_norm: vir.h_norm,
        s_norm: vir.s_norm,
    })
}

/// A tracked eigenvalue of the complex-scaled operator.
#[derive(Clone, Debug, Serialize)]
pub struct Resonance {
    pub lambda: f64,
    pub theta: f64,
    pub re: f64,
    pub im: f64,
    /// `|zeta(theta) - zeta(theta + 0.1)|`.
    pub theta_drift: f64,
    pub theta_stable: bool,
    pub residual: f64,
    pub steps: usize,
    pub halvings: usize,
}

impl Resonance {
    pub fn zeta(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

const KRYLOV: usize = 12;
const MAX_HALVINGS: usize = 30;

/// Ritz pairs of `(A - sigma)^{-1}` mapped back to `A`, nearest to `sigma` first.
fn shift_invert_ritz(a: &BorderedMatrix, sigma: C64, start: &[C64]) -> Result<Vec<(C64, Vec<C64>)>> {
    let lu = a.factor(sigma);
    let dim = a.dim();
    let m = KRYLOV.min(dim);
    let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut x = start.to_vec();
    normalize(&mut x);
    v.push(x);
    let mut hm = CMatrix::zeros(m + 1, m);
    let mut size = m;
    for j in 0..m {
        let mut w = lu.solve(&v[j]);
        if w.iter().any(|z| !z.is_finite()) {
            return Err(Error::SingularShift {
                shift: sigma,
                pivot: lu.min_pivot(),
            });
        }
        let scale = norm(&w);
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                hm[(i, j)] += c;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= c * vk;
                }
            }
        }
        let beta = norm(&w);
        if beta <= 1e-12 * scale {
            size = j + 1;
            break;
        }
        hm[(j + 1, j)] = C64::new(beta, 0.0);
        for wk in w.iter_mut() {
            *wk /= beta;
        }
        v.push(w);
    }
    let small = CMatrix::from_fn(size, size, |i, j| hm[(i, j)]);
    let eig = general_eig(&ComplexMatrix::new(small)?)?;
    let mut out: Vec<(C64, Vec<C64>)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, mu)| mu.norm() > 0.0)
        .map(|(i, mu)| {
            let y = eig.vectors.col(i);
            let mut u = vec![ZERO; dim];
            for (k, yk) in y.iter().enumerate() {
                for (uj, vj) in u.iter_mut().zip(&v[k]) {
                    *uj += yk * vj;
                }
            }
            (sigma + mu.inv(), u)
        })
        .collect();
    out.sort_by(|a, b| (a.0 - sigma).norm().total_cmp(&(b.0 - sigma).norm()));
    Ok(out)
}

/// Rayleigh quotient iteration with the bilinear (complex symmetric) quotient.
fn bilinear_rqi(a: &BorderedMatrix, mut zeta: C64, mut x: Vec<C64>) -> (C64, Vec<C64>, f64) {
    let tol = 1e-13 * a.max_abs().max(1.0);
    let mut res = eigen_residual(a, zeta, &x);
    for _ in 0..30 {
        if res <= tol {
            break;
        }
        let y = a.factor(zeta).solve(&x);
        if y.iter().any(|z| !z.is_finite()) {
            break;
        }
        let yy = dot_bilinear(&y, &y);
        let mut y = y;
        if yy.norm() > 1e-10 * norm(&y).powi(2) {
            let s = yy.sqrt();
            for v in y.iter_mut() {
                *v /= s;
            }
            zeta = dot_bilinear(&y, &a.apply(&y));
        } else {
            normalize(&mut y);
            zeta = dot(&y, &a.apply(&y));
        }
        x = y;
        res = eigen_residual(a, zeta, &x);
    }
    (zeta, x, res)
}

fn scaled(config: &ModelConfig, lambda: f64, theta: f64) -> Result<BorderedMatrix> {
    complex_scale(&config.with_lambda(lambda), theta)
}

/// Follow the eigenvalue from `zeta(0) = k` along `[0, lambda]`.
fn track(config: &ModelConfig, theta: f64, lambda: f64) -> Result<(C64, f64, usize, usize)> {
    let k = config.k;
    let idx = *config
        .embedded_indices()
        .first()
        .ok_or_else(|| Error::Precondition("no discrete level equals k".into()))?;
    if lambda == 0.0 {
        return Ok((C64::new(k, 0.0), 0.0, 0, 0));
    }
    let mut x = vec![ZERO; config.dim()];
    x[idx] = C64::new(1.0, 0.0);
    let mut zeta = C64::new(k, 0.0);
    let mut prev: Option<(f64, C64)> = None;
    let mut at = 0.0;
    let mut step = lambda / 4.0;
    let (mut steps, mut halvings) = (0, 0);
    let mut residual = 0.0;
    while at != lambda {
        let next = if (lambda - at).abs() <= step.abs() * (1.0 + 1e-12) {
            lambda
        } else {
            at + step
        };
        let a = scaled(config, next, theta)?;
        let sigma = match prev {
            Some((l0, z0)) => zeta + (zeta - z0) * ((next - at) / (at - l0)),
            None => zeta,
        };
        let ritz = shift_invert_ritz(&a, sigma, &x)?;
        let ambiguous = match ritz.as_slice() {
            [] => true,
            [_] => false,
            [c1, c2, ..] => (c2.0 - sigma).norm() <= 2.0 * (c1.0 - sigma).norm(),
        };
        let accepted = if ambiguous {
            None
        } else {
            let (z, v, r) = bilinear_rqi(&a, ritz[0].0, ritz[0].1.clone());
            let stays = ritz.get(1).map_or(true, |c2| (z - ritz[0].0).norm() < 0.5 * (c2.0 - ritz[0].0).norm());
            if stays {
                Some((z, v, r))
            } else {
                None
            }
        };
        match accepted {
            Some((z, v, r)) => {
                prev = Some((at, zeta));
                zeta = z;
                x = v;
                residual = r;
                at = next;
                steps += 1;
            }
            None => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::TrackingAmbiguity {
                        lambda: next,
                        detail: format!("two eigenvalues near the predicted {sigma:.6e}"),
                    });
                }
                step /= 2.0;
            }
        }
    }
    Ok((zeta, residual, steps, halvings))
}

/// Resonance of `H_lambda` continued from `k`, checked for independence of
/// the scaling angle against `theta + 0.1`.
pub fn locate_resonance(config: &ModelConfig, theta: f64, lambda: f64) -> Result<Resonance> {
    if !(theta > 0.1 && theta < 0.6) {
        return Err(Error::param("theta_scaling", "must lie in (0.1, 0.6)"));
    }
    config.validate()?;
    if !config.potential.is_analytic() || config.couplings.iter().any(|p| !p.is_analytic()) {
        return Err(Error::Precondition("complex scaling needs analytic profiles".into()));
    }
    let (z1, residual, steps, halvings) = track(config, theta, lambda)?;
    let (z2, _, _, _) = track(config, theta + 0.1, lambda)?;
    let drift = (z1 - z2).norm();
    Ok(Resonance {
        lambda,
        theta,
        re: z1.re,
        im: z1.im,
        theta_drift: drift,
        theta_stable: drift <= 1e-6 * (1.0 + z1.norm()),
        residual,
        steps,
        halvings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub theta: f64,
    pub points: Vec<Resonance>,
    /// `gamma` in `Im zeta = -gamma lambda^2` over the small-`lambda` half.
    pub gamma_fit: f64,
    pub fit_residual: f64,
    /// `Gamma` from the second-order form.
    pub gamma: f64,
    pub ratio: f64,
    /// `Re zeta - k` per point.
    pub shifts: Vec<f64>,
    /// `max |Im zeta(lambda) - Im zeta(-lambda)| / |Im zeta(lambda)|` over `lambda <= 0.02`.
    pub evenness: f64,
    /// Largest `lambda` on the grid with `-Im zeta / (lambda^2 Gamma)` within 20% of 1.
    pub lambda_quadratic_max: f64,
    pub max_im: f64,
    pub theta_stable: bool,
    pub flagged: bool,
    pub warnings: Vec<String>,
}

/// Resonances over `lambda_grid` and the fitted width coefficient.
pub fn width_scan(config: &ModelConfig, theta: f64, lambda_grid: &[f64], gamma: f64) -> Result<ResonanceReport> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| !(l > 0.0 && l <= 0.1)) {
        return Err(Error::param("lambda_grid", "values must lie in (0, 0.1]"));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let points: Vec<Resonance> = grid
        .par_iter()
        .map(|&l| locate_resonance(config, theta, l))
        .collect::<Result<_>>()?;
    let half = (points.len() + 1) / 2;
    let fit = &points[..half];
    let num: f64 = fit.iter().map(|p| -p.im * p.lambda.powi(2)).sum();
    let den: f64 = fit.iter().map(|p| p.lambda.powi(4)).sum();
    let gamma_fit = num / den;
    let model_rms = (fit.iter().map(|p| (gamma_fit * p.lambda.powi(2)).powi(2)).sum::<f64>() / half as f64).sqrt();
    let err_rms = (fit.iter().map(|p| (p.im + gamma_fit * p.lambda.powi(2)).powi(2)).sum::<f64>() / half as f64).sqrt();
    let fit_residual = if model_rms > 0.0 { err_rms / model_rms } else { err_rms };
    let mut warnings = Vec::new();
    let flagged = fit_residual > 0.3;
    if flagged {
        warnings.push(format!("quadratic width fit residual {fit_residual:.3} exceeds 30%"));
    }
    let ratio = if gamma > 0.0 { gamma_fit / gamma } else { 0.0 };
    if gamma <= 0.0 {
        warnings.push("reference Gamma vanishes".into());
    }
    let small: Vec<f64> = grid.iter().copied().filter(|&l| l <= 0.02).collect();
    let mirrored: Vec<Resonance> = small
        .par_iter()
        .map(|&l| locate_resonance(config, theta, -l))
        .collect::<Result<_>>()?;
    let evenness = mirrored
        .iter()
        .map(|m| {
            let p = points.iter().find(|p| p.lambda == -m.lambda).expect("mirrored point");
            let d = (p.im - m.im).abs();
            if p.im != 0.0 {
                d / p.im.abs()
            } else {
                d
            }
        })
        .fold(0.0, f64::max);
    let lambda_quadratic_max = if gamma > 0.0 {
        points
            .iter()
            .filter(|p| (-p.im / (p.lambda.powi(2) * gamma) - 1.0).abs() <= 0.2)
            .map(|p| p.lambda)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(ResonanceReport {
        theta,
        shifts: points.iter().map(|p| p.re - config.k).collect(),
        max_im: points.iter().chain(&mirrored).map(|p| p.im).fold(f64::NEG_INFINITY, f64::max),
        theta_stable: points.iter().all(|p| p.theta_stable),
        points,
        gamma_fit,
        fit_residual,
        gamma,
        ratio,
        evenness,
        lambda_quadratic_max,
        flagged,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Decaying,
    NonDecaying,
}

/// Tail norms `tau(rho) = |1_{rho < r < R_max - L/8} [V, i S_hat] (H_0 + 1)^{-1}|`.
#[derive(Clone, Debug, Serialize)]
pub struct CompactnessProxy {
    pub radii: Vec<f64>,
    pub tails: Vec<f64>,
    /// `tau(rho_max) / tau(rho_min)`.
    pub ratio: f64,
    pub verdict: Verdict,
    pub monotone: bool,
}

/// Number of truncation radii, geometric from `c + 3` to `R_max / 2`.
pub const PROXY_RADII: usize = 8;

pub fn compactness_proxy(config: &ModelConfig, s: &ConjugateOperator, seed: u64) -> Result<CompactnessProxy> {
    let h0 = assemble_h0(config)?;
    let v = assemble_potential(config)?;
    let none = FiniteRank::default();
    let shat = assemble_s_hat(s, &h0.p, &none, 0.0);
    let g = config.grid;
    let lo = g.c + 3.0;
    let hi = 0.5 * g.r_max;
    if hi <= lo {
        return Err(Error::Precondition("box too short for the tail radii".into()));
    }
    let radii = crate::fgr::geometric_grid(lo, hi, PROXY_RADII);
    let outer = g.r_max - g.length() / 8.0;
    let shift = C64::new(-1.0, 0.0);
    let comm = |x: &[C64]| -> Vec<C64> {
        let a = v.apply(&shat.apply(x));
        let b = shat.apply(&v.apply(x));
        a.iter().zip(&b).map(|(p, q)| C64::new(0.0, 1.0) * (p - q)).collect()
    };
    let tails: Vec<f64> = radii
        .par_iter()
        .map(|&rho| -> Result<f64> {
            let mask = |x: &mut [C64]| {
                for (j, xi) in x.iter_mut().enumerate() {
                    let inside = j < g.n && g.r(j) > rho && g.r(j) < outer;
                    if !inside {
                        *xi = ZERO;
                    }
                }
            };
            let fwd = |x: &[C64]| -> Vec<C64> {
                let y = h0.h0.shifted_solve(shift, x).expect("H_0 + 1 is positive definite");
                let mut z = comm(&y);
                mask(&mut z);
                z
            };
            let adj = |x: &[C64]| -> Vec<C64> {
                let mut y = x.to_vec();
                mask(&mut y);
                h0.h0.shifted_solve(shift, &comm(&y)).expect("H_0 + 1 is positive definite")
            };
            Ok(norm_estimate(h0.dim(), fwd, adj, 300, 1e-12, seed))
        })
        .collect::<Result<_>>()?;
    let ratio = if tails[0] > 0.0 { tails[PROXY_RADII - 1] / tails[0] } else { 0.0 };
    let monotone = tails.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    Ok(CompactnessProxy {
        verdict: if ratio <= 0.2 { Verdict::Decaying } else { Verdict::NonDecaying },
        radii,
        tails,
        ratio,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{assemble_s, CutoffChi};
    use crate::model::{build_grid, Profile};
    use crate::numerics::to_complex;

    fn small() -> ModelConfig {
        ModelConfig {
            grid: build_grid(1.0, 61.0, 1199).unwrap(),
            ..ModelConfig::default()
        }
    }

    #[test]
    fn virial_on_unperturbed_k_eigenvector() {
        let cfg = small();
        let h0 = assemble_h0(&cfg).unwrap();
        let s = assemble_s(h0.grid(), 2, 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        let mut f = vec![0.0; cfg.dim()];
        f[cfg.grid.n] = 1.0;
        let r = virial_residual(&h0.h0, &s, &to_complex(&f), 1.0).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn virial_rejects_non_eigenvectors() {
        let cfg = small();
        let h0 = assemble_h0(&cfg).unwrap();
        let s = assemble_s(h0.grid(), 2, 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        let f: Vec<C64> = (0..cfg.dim()).map(|i| C64::new((i as f64).sin(), 0.0)).collect();
        assert!(matches!(virial_residual(&h0.h0, &s, &f, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn virial_scan_small_box() {
        let cfg = ModelConfig {
            grid: build_grid(1.0, 21.0, 299).unwrap(),
            lambda: 0.05,
            ..ModelConfig::default()
        };
        let s = assemble_s(&cfg.grid, 2, 8.0, &CutoffChi::standard(&cfg.grid)).unwrap();
        let r = virial_scan(&cfg, &s, 0.3, 0.6, 1).unwrap();
        assert_eq!(r.n_pairs, cfg.dim());
        assert!(r.max_residual <= 1e-10, "{}", r.max_residual);
    }

    #[test]
    fn resonance_at_zero_coupling_is_k() {
        let cfg = small();
        let r = locate_resonance(&cfg, 0.3, 0.0).unwrap();
        assert_eq!(r.zeta(), C64::new(1.0, 0.0));
        let zero = ModelConfig {
            couplings: vec![Profile::Zero],
            ..small()
        };
        let r = locate_resonance(&zero, 0.3, 0.05).unwrap();
        assert!(r.im.abs() <= 1e-10 && (r.re - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn resonance_preconditions() {
        let cfg = small();
        assert!(locate_resonance(&cfg, 0.05, 0.01).is_err());
        let bump = ModelConfig {
            couplings: vec![Profile::Bump { center: 5.0, radius: 2.0 }],
            ..small()
        };
        assert!(matches!(locate_resonance(&bump, 0.3, 0.01), Err(Error::Precondition(_))));
        assert!(width_scan(&cfg, 0.3, &[0.2], 0.28).is_err());
    }

    #[test]
    fn resonance_moves_into_lower_half_plane() {
        let cfg = small();
        let r = locate_resonance(&cfg, 0.3, 0.05).unwrap();
        assert!(r.im < 0.0);
        assert!(r.residual <= 1e-10);
        assert!(r.theta_stable, "drift {}", r.theta_drift);
    }

    #[test]
    fn arnoldi_recovers_a_known_eigenvalue() {
        let cfg = small().with_lambda(0.0);
        let a = complex_scale(&cfg, 0.3).unwrap();
        let mut x = vec![ZERO; cfg.dim()];
        x[cfg.grid.n + 1] = C64::new(1.0, 0.0);
        let ritz = shift_invert_ritz(&a, C64::new(4.9, 0.01), &x).unwrap();
        assert!((ritz[0].0 - C64::new(5.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn tail_norms_of_a_constant_coupling_plateau() {
        let cfg = ModelConfig {
            couplings: vec![Profile::Constant { value: 1.0 }],
            ..small()
        };
        let s = assemble_s(&cfg.grid, 2, 8.0, &CutoffChi::standard(&cfg.grid)).unwrap();
        let p = compactness_proxy(&cfg, &s, 0).unwrap();
        assert_eq!(p.tails.len(), PROXY_RADII);
        assert!(p.monotone);
        assert!(p.tails.iter().all(|t| *t >= 0.0));
    }
}
