//! Spectral projectors and the chain of commutator estimates: the localized
//! gap on `E_J(H_0)`, its reduction to `ran Pbar` by shrinking `J`, the block
//! orders of the three correction terms, and the final gap for `S_hat`.
//!
//! Every commutator is compressed to the range of a spectral projector,
//! `C = Q^H i[A, S] Q` with orthonormal `Q`, and bounds are read off the
//! spectrum of `C` (form sense). On a finite box `tr C = 0` whenever `ran Q`
//! is `A`-invariant, so `C` always carries one large negative component
//! pinned to the Dirichlet wall. Components localized within `L/8` of either
//! end of the channel are reported separately and set aside before the
//! bound is read.

use serde::Serialize;

use crate::conjugate::{assemble_s_hat, ConjugateOperator, FiniteRank};
use crate::error::{Error, Result};
use crate::fgr::{build_b_epsilon, fgr_sample};
use crate::model::{Grid, ModelOperator};
use crate::numerics::{
    commutator_from_images, hermitian_eig, norm, orthonormalize, BorderedTridiagonal, CMatrix, EigenDecomposition,
    HermitianMatrix, LinearOperator, Projector, C64,
};

/// Half-width of the default interval `J` around `k`.
pub const J_HALF_WIDTH: f64 = 0.1;
/// Half-width of the default interval `I` around `k`.
pub const I_HALF_WIDTH: f64 = 0.05;
/// Fraction of `4(inf J - 1/4)` the localized gap must reach.
pub const GAP_FRACTION: f64 = 0.9;
/// Shrink factor and iteration cap of the reduction to `ran Pbar`.
pub const SHRINK_FACTOR: f64 = 0.7;
pub const MAX_SHRINK_STEPS: usize = 12;

fn check_interval(j: (f64, f64)) -> Result<()> {
    if !(j.0.is_finite() && j.1.is_finite() && j.0 < j.1) {
        return Err(Error::param("interval", format!("[{}, {}] is degenerate", j.0, j.1)));
    }
    Ok(())
}

/// `E_J(A)` for the closed interval `J = [lo, hi]`, by dense diagonalization.
pub fn spectral_projector(a: &HermitianMatrix, j: (f64, f64)) -> Result<Projector> {
    check_interval(j)?;
    let eig = hermitian_eig(a)?;
    Ok(projector_from(eig.filter(|x| x >= j.0 && x <= j.1), j))
}

/// `E_J(A)` for a bordered tridiagonal `A`, from the eigenpairs in `[lo, hi)`.
pub fn window_projector(a: &BorderedTridiagonal, j: (f64, f64), seed: u64) -> Result<Projector> {
    check_interval(j)?;
    Ok(projector_from(a.window_eig(j.0, j.1, seed)?, j))
}

fn projector_from(eig: EigenDecomposition, j: (f64, f64)) -> Projector {
    Projector::spectral(eig.vectors, eig.values, j)
}

/// Where the mass of a vector sits along the channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Localization {
    /// Share of the squared norm on the channel nodes.
    pub channel_mass: f64,
    /// Smallest `d` with 90% of the channel mass in `r - c <= d`.
    pub radius_from_c: f64,
    /// Smallest `d` with 90% of the channel mass in `R_max - r <= d`.
    pub radius_from_wall: f64,
}

impl Localization {
    pub fn radius(&self) -> f64 {
        self.radius_from_c.min(self.radius_from_wall)
    }

    /// Mostly on the channel, and within `L/8` of one of its ends.
    pub fn is_localized(&self, grid: &Grid) -> bool {
        self.channel_mass >= 0.5 && self.radius() <= grid.length() / 8.0
    }
}

pub fn localization(grid: &Grid, x: &[C64]) -> Localization {
    let n = grid.n;
    let mass: Vec<f64> = x[..n].iter().map(|v| v.norm_sqr()).collect();
    let channel: f64 = mass.iter().sum();
    let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if channel == 0.0 {
        return Localization {
            channel_mass: 0.0,
            radius_from_c: grid.length(),
            radius_from_wall: grid.length(),
        };
    }
    let reach = |order: &mut dyn Iterator<Item = usize>, dist: &dyn Fn(usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for j in order {
            acc += mass[j];
            if acc >= 0.9 * channel {
                return dist(j);
            }
        }
        grid.length()
    };
    Localization {
        channel_mass: channel / total,
        radius_from_c: reach(&mut (0..n), &|j| grid.r(j) - grid.c),
        radius_from_wall: reach(&mut (0..n).rev(), &|j| grid.r_max - grid.r(j)),
    }
}

/// One eigencomponent of a compressed commutator.
#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub eigenvalue: f64,
    pub localization: Localization,
    /// Share of the squared norm in `ran P`.
    pub p_mass: f64,
}

struct Analysis {
    values: Vec<f64>,
    removed: Vec<Component>,
    least: Option<Component>,
    largest: Option<Component>,
}

/// Diagonalize `c` and walk in from both spectral edges, setting aside
/// localized components until a delocalized one is met.
fn analyze(grid: &Grid, p: &Projector, c: &HermitianMatrix, q: &CMatrix) -> Result<Analysis> {
    let eig = hermitian_eig(c)?;
    let component = |i: usize| -> Component {
        let psi = q.mul_vec(eig.vectors.col(i));
        let pm = crate::numerics::norm(&p.apply(&psi)).powi(2);
        let total = crate::numerics::norm(&psi).powi(2);
        Component {
            eigenvalue: eig.values[i],
            localization: localization(grid, &psi),
            p_mass: if total > 0.0 { pm / total } else { 0.0 },
        }
    };
    let n = eig.len();
    let mut removed = Vec::new();
    let mut least = None;
    let mut lo = 0;
    while lo < n {
        let comp = component(lo);
        if comp.localization.is_localized(grid) {
            removed.push(comp);
            lo += 1;
        } else {
            least = Some(comp);
            break;
        }
    }
    let mut largest = None;
    let mut hi = n;
    while hi > lo + 1 {
        let comp = component(hi - 1);
        if comp.localization.is_localized(grid) {
            removed.push(comp);
            hi -= 1;
        } else {
            largest = Some(comp);
            break;
        }
    }
    if largest.is_none() {
        largest = least.clone();
    }
    Ok(Analysis {
        values: eig.values,
        removed,
        least,
        largest,
    })
}

/// The localized estimate on `ran E_J(H_0)`.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub interval: (f64, f64),
    pub upsilon: f64,
    pub rank: usize,
    /// Least eigenvalue of the compressed commutator before any removal.
    pub raw_least: f64,
    /// Least eigenvalue after the localized components are set aside.
    pub least: f64,
    pub largest: f64,
    pub least_component: Option<Component>,
    /// `4(inf J - 1/4)`, the free-channel lower bound.
    pub g_ref: f64,
    /// `4 inf J`, the alternative convention for the constant.
    pub g_paper: f64,
    /// `max(0, g_ref - least)`.
    pub eps_upsilon: f64,
    /// `|E_J K E_J|` with `K = C - g_ref` on the kept components.
    pub k_norm: f64,
    pub removed: Vec<Component>,
    pub threshold: f64,
    pub passed: bool,
    pub warnings: Vec<String>,
}

fn compressed(op: &dyn LinearOperator, hq: &CMatrix, q: &CMatrix) -> HermitianMatrix {
    commutator_from_images(hq, &op.apply_columns(q))
}

fn scale_columns(q: &CMatrix, values: &[f64]) -> CMatrix {
    CMatrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] * values[j])
}

fn check_upsilon(s: &ConjugateOperator, j: (f64, f64)) -> Result<()> {
    let need = 2.0 * (j.1 - 0.25).sqrt();
    if s.upsilon() < need {
        return Err(Error::Precondition(format!(
            "Upsilon = {} truncates the momenta of J; need at least {need:.4}",
            s.upsilon()
        )));
    }
    Ok(())
}

/// `E_J [H_0, iS] E_J` compressed to `ran E_J(H_0)`.
pub fn mourre_gap(h0: &ModelOperator, s: &ConjugateOperator, j: (f64, f64), seed: u64) -> Result<GapReport> {
    check_interval(j)?;
    if j.0 <= 0.25 {
        return Err(Error::Precondition("J must lie above the threshold 1/4".into()));
    }
    check_upsilon(s, j)?;
    let e = h0.h0.window_eig(j.0, j.1, seed)?;
    let g_ref = 4.0 * (j.0 - 0.25);
    let mut report = GapReport {
        interval: j,
        upsilon: s.upsilon(),
        rank: e.len(),
        raw_least: 0.0,
        least: 0.0,
        largest: 0.0,
        least_component: None,
        g_ref,
        g_paper: 4.0 * j.0,
        eps_upsilon: g_ref,
        k_norm: 0.0,
        removed: vec![],
        threshold: GAP_FRACTION * g_ref,
        passed: false,
        warnings: vec![],
    };
    if e.is_empty() {
        report.warnings.push("E_J(H_0) has rank 0".into());
        return Ok(report);
    }
    let c = compressed(s, &scale_columns(&e.vectors, &e.values), &e.vectors);
    let a = analyze(h0.grid(), &h0.p, &c, &e.vectors)?;
    fill_gap(&mut report, a);
    if let Some(lc) = &report.least_component {
        if lc.p_mass > 0.5 {
            report
                .warnings
                .push("least eigenvalue belongs to ran P, where S vanishes".into());
        }
    }
    report.passed = report.least >= report.threshold;
    Ok(report)
}

fn fill_gap(report: &mut GapReport, a: Analysis) {
    report.raw_least = a.values[0];
    match (&a.least, &a.largest) {
        (Some(lo), Some(hi)) => {
            report.least = lo.eigenvalue;
            report.largest = hi.eigenvalue;
            report.k_norm = (lo.eigenvalue - report.g_ref)
                .abs()
                .max((hi.eigenvalue - report.g_ref).abs());
        }
        _ => {
            report.least = report.raw_least;
            report.largest = *a.values.last().unwrap();
            report.warnings.push("every component is localized".into());
        }
    }
    report.eps_upsilon = (report.g_ref - report.least).max(0.0);
    report.least_component = a.least;
    report.removed = a.removed;
}

/// One interval of the shrinking loop.
#[derive(Clone, Debug, Serialize)]
pub struct ShrinkStep {
    pub interval: (f64, f64),
    pub rank: usize,
    pub raw_least: f64,
    pub least: f64,
    pub g_ref: f64,
    pub k_norm: f64,
    /// `g_ref - |E_J K E_J|`, the bound the shrinking argument certifies.
    pub certified: f64,
    pub removed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedGapReport {
    pub steps: Vec<ShrinkStep>,
    pub interval: (f64, f64),
    /// Certified constant on the final interval.
    pub c: f64,
    pub c_min: f64,
    pub passed: bool,
    /// `|E_J K E_J|` strictly decreased at every step.
    pub k_norm_decreasing: bool,
    /// The measured least eigenvalue never decreased.
    pub least_nondecreasing: bool,
    pub warnings: Vec<String>,
}

/// Shrink `J` about `k` until `g_ref - |E_J K E_J| >= g_ref / 2` on
/// `ran E_J(H_0) ∩ ran Pbar`, with `Pbar S Pbar` as conjugate operator.
pub fn reduced_gap(h0: &ModelOperator, s: &ConjugateOperator, j0: (f64, f64), seed: u64) -> Result<ReducedGapReport> {
    check_interval(j0)?;
    let k = h0.config.k;
    if !(j0.0 < k && k < j0.1) {
        return Err(Error::Precondition(format!("k = {k} is not inside J0")));
    }
    if j0.0 <= 0.25 {
        return Err(Error::Precondition("J0 must lie above the threshold 1/4".into()));
    }
    check_upsilon(s, j0)?;
    let none = FiniteRank::default();
    let sbar = assemble_s_hat(s, &h0.p, &none, 0.0);
    let mut steps: Vec<ShrinkStep> = Vec::new();
    let mut warnings = Vec::new();
    let mut j = j0;
    let mut passed = false;
    // Every later interval lies inside J0.
    let e0 = h0.h0.window_eig(j0.0, j0.1, seed)?;
    for _ in 0..MAX_SHRINK_STEPS {
        let e = e0.filter(|x| x >= j.0 && x < j.1);
        let cols: Vec<Vec<C64>> = e
            .vectors
            .columns()
            .map(|v| h0.p.apply_complement(v))
            .filter(|v| norm(v) > 1e-6)
            .collect();
        let q = orthonormalize(cols, 1e-8);
        let g_ref = 4.0 * (j.0 - 0.25);
        if q.is_empty() {
            warnings.push(format!("E_J(H_0 Pbar) Pbar has rank 0 on [{:.6}, {:.6}]", j.0, j.1));
            break;
        }
        let q = CMatrix::from_columns(h0.dim(), &q)?;
        let c = compressed(&sbar, &h0.h0.apply_columns(&q), &q);
        let a = analyze(h0.grid(), &h0.p, &c, &q)?;
        let mut rep = GapReport {
            interval: j,
            upsilon: s.upsilon(),
            rank: q.cols(),
            raw_least: 0.0,
            least: 0.0,
            largest: 0.0,
            least_component: None,
            g_ref,
            g_paper: 4.0 * j.0,
            eps_upsilon: 0.0,
            k_norm: 0.0,
            removed: vec![],
            threshold: 0.0,
            passed: false,
            warnings: vec![],
        };
        fill_gap(&mut rep, a);
        warnings.extend(rep.warnings);
        let certified = g_ref - rep.k_norm;
        steps.push(ShrinkStep {
            interval: j,
            rank: rep.rank,
            raw_least: rep.raw_least,
            least: rep.least,
            g_ref,
            k_norm: rep.k_norm,
            certified,
            removed: rep.removed.len(),
        });
        if certified >= 0.5 * g_ref {
            passed = true;
            break;
        }
        j = (k - SHRINK_FACTOR * (k - j.0), k + SHRINK_FACTOR * (j.1 - k));
    }
    if !passed {
        warnings.push(format!("no certified gap after {} intervals", steps.len()));
    }
    let last = steps.last();
    Ok(ReducedGapReport {
        interval: last.map_or(j0, |s| s.interval),
        c: last.map_or(0.0, |s| s.certified),
        c_min: last.map_or(0.0, |s| 0.5 * s.g_ref),
        passed,
        k_norm_decreasing: steps.windows(2).all(|w| w[1].k_norm < w[0].k_norm),
        least_nondecreasing: steps.windows(2).all(|w| w[1].least >= w[0].least),
        steps,
        warnings,
    })
}

/// `eps = lambda^a`, `theta = lambda^b` with `0 < b < a < 1`, so that
/// `lambda << eps << theta << 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingRegime {
    pub a: f64,
    pub b: f64,
}

impl Default for ScalingRegime {
    fn default() -> Self {
        ScalingRegime {
            a: 2.0 / 3.0,
            b: 1.0 / 3.0,
        }
    }
}

impl ScalingRegime {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 < b && b < a && a < 1.0) {
            return Err(Error::param("a, b", format!("need 0 < b < a < 1, got a = {a}, b = {b}")));
        }
        Ok(ScalingRegime { a, b })
    }

    pub fn eps(&self, lambda: f64) -> f64 {
        lambda.abs().powf(self.a)
    }

    pub fn theta(&self, lambda: f64) -> f64 {
        lambda.abs().powf(self.b)
    }

    /// Exponents in `lambda` of the three pieces: `1`, `1 + b - a/2`,
    /// `2 + b - 3a/2`.
    pub fn predicted_exponents(&self) -> [f64; 3] {
        [1.0, 1.0 + self.b - 0.5 * self.a, 2.0 + self.b - 1.5 * self.a]
    }
}

fn check_regime(lambda: f64, theta: f64, eps: f64) -> Result<()> {
    let l = lambda.abs();
    if !(l < eps && eps < theta && theta < 1.0) {
        return Err(Error::param(
            "scaling",
            format!("need |lambda| < eps < theta < 1, got {l:e}, {eps:e}, {theta:e}"),
        ));
    }
    Ok(())
}

/// Spectral norms of the blocks of a matrix split as `Pbar (+) P`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BlockTriple {
    pub bar_bar: f64,
    pub bar_p: f64,
    pub p_p: f64,
}

impl BlockTriple {
    fn of(m: &CMatrix, nbar: usize) -> Self {
        let n = m.rows();
        let sub = |r0: usize, r1: usize, c0: usize, c1: usize| -> f64 {
            if r1 == r0 || c1 == c0 {
                return 0.0;
            }
            CMatrix::from_fn(r1 - r0, c1 - c0, |i, j| m[(r0 + i, c0 + j)]).spectral_norm()
        };
        BlockTriple {
            bar_bar: sub(0, nbar, 0, nbar),
            bar_p: sub(0, nbar, nbar, n),
            p_p: sub(nbar, n, nbar, n),
        }
    }

    pub fn max(&self) -> f64 {
        self.bar_bar.max(self.bar_p).max(self.p_p)
    }
}

/// Blocks of `E_J[lambda V, i Pbar S Pbar]E_J`, `E_J[H_0, i lambda theta B]E_J`
/// and `E_J[lambda V, i lambda theta B]E_J` with `E_J = E_J(H_0)`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockNorms {
    pub lambda: f64,
    pub theta: f64,
    pub eps: f64,
    pub piece1: BlockTriple,
    pub piece2: BlockTriple,
    pub piece3: BlockTriple,
    /// `lambda`, `lambda theta eps^{-1/2}`, `lambda^2 theta eps^{-3/2}`.
    pub predicted: [f64; 3],
    /// `lambda^2 theta |G_eps|`.
    pub predicted_pp: f64,
    /// `|PP block of piece 3 - lambda^2 theta G_eps| / |lambda^2 theta G_eps|`.
    pub pp_identity_error: f64,
}

/// Images of `Q = [Q_bar | Q_P]` spanning `ran E_J(H_0)`, cached across a
/// `lambda` sweep.
pub struct BlockContext<'a> {
    h0: &'a ModelOperator,
    v: &'a BorderedTridiagonal,
    pub interval: (f64, f64),
    q: CMatrix,
    nbar: usize,
    hq: CMatrix,
    vq: CMatrix,
    sq: CMatrix,
}

impl<'a> BlockContext<'a> {
    pub fn new(
        h0: &'a ModelOperator,
        v: &'a BorderedTridiagonal,
        s: &ConjugateOperator,
        j: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        check_interval(j)?;
        let k = h0.config.k;
        if !(j.0 < k && k < j.1) || h0.p.rank() == 0 {
            return Err(Error::Precondition("J must contain the embedded eigenvalue k".into()));
        }
        let e = h0.h0.window_eig(j.0, j.1, seed)?;
        let mut cols = orthonormalize(
            e.vectors
                .columns()
                .map(|v| h0.p.apply_complement(v))
                .filter(|v| norm(v) > 1e-6)
                .collect(),
            1e-8,
        );
        let nbar = cols.len();
        cols.extend(h0.p.basis().columns().map(|c| c.to_vec()));
        let q = CMatrix::from_columns(h0.dim(), &cols)?;
        let none = FiniteRank::default();
        let sbar = assemble_s_hat(s, &h0.p, &none, 0.0);
        Ok(BlockContext {
            h0,
            v,
            interval: j,
            hq: h0.h0.apply_columns(&q),
            vq: v.apply_columns(&q),
            sq: sbar.apply_columns(&q),
            q,
            nbar,
        })
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.nbar, self.q.cols() - self.nbar)
    }

    pub fn norms(&self, lambda: f64, theta: f64, eps: f64) -> Result<BlockNorms> {
        let b = build_b_epsilon(self.h0, self.v, eps)?;
        let bq = b.apply_columns(&self.q);
        let lt = lambda * theta;
        let p1 = commutator_from_images(&self.vq, &self.sq).as_matrix().scale(C64::new(lambda, 0.0));
        let p2 = commutator_from_images(&self.hq, &bq).as_matrix().scale(C64::new(lt, 0.0));
        let p3 = commutator_from_images(&self.vq, &bq)
            .as_matrix()
            .scale(C64::new(lambda * lt, 0.0));
        let g = fgr_sample(self.h0, self.v, eps)?;
        let gm = g.matrix.expect("sample carries its matrix");
        let n = self.q.cols();
        let dp = n - self.nbar;
        let target = gm.as_matrix().scale(C64::new(lambda * lt, 0.0));
        let pp = CMatrix::from_fn(dp, dp, |i, j| p3[(self.nbar + i, self.nbar + j)]);
        let denom = target.spectral_norm();
        let pp_identity_error = if denom > 0.0 {
            pp.sub(&target).spectral_norm() / denom
        } else {
            pp.spectral_norm()
        };
        Ok(BlockNorms {
            lambda,
            theta,
            eps,
            piece1: BlockTriple::of(&p1, self.nbar),
            piece2: BlockTriple::of(&p2, self.nbar),
            piece3: BlockTriple::of(&p3, self.nbar),
            predicted: [lambda, lt / eps.sqrt(), lambda * lt / eps.powf(1.5)],
            predicted_pp: denom,
            pp_identity_error,
        })
    }
}

pub fn block_norms(
    h0: &ModelOperator,
    v: &BorderedTridiagonal,
    s: &ConjugateOperator,
    lambda: f64,
    theta: f64,
    eps: f64,
    j: (f64, f64),
    seed: u64,
) -> Result<BlockNorms> {
    BlockContext::new(h0, v, s, j, seed)?.norms(lambda, theta, eps)
}

/// Log-log slopes of the block norms against `lambda`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockExponents {
    /// Piece 1 off-diagonal, piece 2 off-diagonal, piece 3 `Pbar Pbar`.
    pub fitted: [f64; 3],
    pub predicted: [f64; 3],
    pub relative_error: [f64; 3],
    /// Piece 3 `PP` block against `2 + b - a`.
    pub pp_fitted: f64,
    pub pp_predicted: f64,
}

impl BlockExponents {
    pub fn within(&self, tol: f64) -> bool {
        self.relative_error.iter().all(|e| *e <= tol)
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn fit_block_exponents(samples: &[BlockNorms], regime: &ScalingRegime) -> Result<BlockExponents> {
    if samples.len() < 2 {
        return Err(Error::param("lambda_grid", "need at least two points"));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.lambda.abs().ln()).collect();
    let series: [Vec<f64>; 4] = [
        samples.iter().map(|s| s.piece1.bar_p).collect(),
        samples.iter().map(|s| s.piece2.bar_p).collect(),
        samples.iter().map(|s| s.piece3.bar_bar).collect(),
        samples.iter().map(|s| s.piece3.p_p).collect(),
    ];
    if series.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition("a block norm vanished; no exponent to fit".into()));
    }
    let f = |i: usize| slope(&x, &series[i].iter().map(|v| v.ln()).collect::<Vec<_>>());
    let fitted = [f(0), f(1), f(2)];
    let predicted = regime.predicted_exponents();
    let mut relative_error = [0.0; 3];
    for i in 0..3 {
        relative_error[i] = ((fitted[i] - predicted[i]) / predicted[i]).abs();
    }
    Ok(BlockExponents {
        fitted,
        predicted,
        relative_error,
        pp_fitted: f(3),
        pp_predicted: 2.0 + regime.b - regime.a,
    })
}

/// The final estimate on `ran E_I(H_lambda)` with `S_hat`.
#[derive(Clone, Debug, Serialize)]
pub struct FinalGapReport {
    pub lambda: f64,
    pub theta: f64,
    pub eps: f64,
    pub interval: (f64, f64),
    pub rank: usize,
    /// `lambda = 0`: the bound degenerates and is not asserted.
    pub excluded: bool,
    pub raw_least: f64,
    /// `g_lambda`, after localized components are set aside.
    pub least: f64,
    pub least_component: Option<Component>,
    pub removed: Vec<Component>,
    /// Numerical zero, `1e-9 |C|`.
    pub zero_threshold: f64,
    pub positive: bool,
    /// `lambda^2 theta / eps`.
    pub reference: f64,
    /// `g_lambda eps / (lambda^2 theta)`.
    pub c_hat: f64,
    pub warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn final_gap(
    h0: &ModelOperator,
    v: &BorderedTridiagonal,
    s: &ConjugateOperator,
    lambda: f64,
    theta: f64,
    eps: f64,
    i: (f64, f64),
    seed: u64,
) -> Result<FinalGapReport> {
    check_interval(i)?;
    let excluded = lambda == 0.0;
    if !excluded {
        check_regime(lambda, theta, eps)?;
    }
    let h = h0.h0.add_scaled(v, lambda)?;
    let b = if excluded {
        FiniteRank::default()
    } else {
        build_b_epsilon(h0, v, eps)?
    };
    let shat = assemble_s_hat(s, &h0.p, &b, lambda * theta);
    let e = h.window_eig(i.0, i.1, seed)?;
    let reference = if excluded { 0.0 } else { lambda * lambda * theta / eps };
    let mut report = FinalGapReport {
        lambda,
        theta,
        eps,
        interval: i,
        rank: e.len(),
        excluded,
        raw_least: 0.0,
        least: 0.0,
        least_component: None,
        removed: vec![],
        zero_threshold: 0.0,
        positive: false,
        reference,
        c_hat: 0.0,
        warnings: vec![],
    };
    if excluded {
        report.warnings.push("lambda = 0 is excluded: the bound is degenerate".into());
    }
    if e.is_empty() {
        report.warnings.push("E_I(H_lambda) has rank 0".into());
        return Ok(report);
    }
    let c = compressed(&shat, &scale_columns(&e.vectors, &e.values), &e.vectors);
    let a = analyze(h0.grid(), &h0.p, &c, &e.vectors)?;
    let scale = a.values[0].abs().max(a.values.last().unwrap().abs());
    report.raw_least = a.values[0];
    report.zero_threshold = 1e-9 * scale;
    match a.least {
        Some(lc) => {
            report.least = lc.eigenvalue;
            report.least_component = Some(lc);
        }
        None => {
            report.least = report.raw_least;
            report.warnings.push("every component is localized".into());
        }
    }
    report.removed = a.removed;
    report.positive = report.least > report.zero_threshold;
    if !excluded {
        report.c_hat = report.least / reference;
    }
    Ok(report)
}

/// Every value positive and within `tol` (relative) of the mean.
pub fn c_hat_stable(values: &[f64], tol: f64) -> bool {
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return false;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().all(|v| (v - mean).abs() <= tol * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{assemble_s, CutoffChi};
    use crate::model::{assemble_h0, assemble_potential, build_grid, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<C64>> = (0..n)
            .map(|_| (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        CMatrix::from_columns(n, &orthonormalize(cols, 1e-10)).unwrap()
    }

    #[test]
    fn projector_on_diagonal() {
        let a = HermitianMatrix::new(CMatrix::diagonal(&[1.0, 2.0, 3.0])).unwrap();
        let p = spectral_projector(&a, (1.5, 2.5)).unwrap();
        assert_eq!(p.rank(), 1);
        let d = p.to_dense();
        assert!((d.as_matrix()[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!(d.as_matrix()[(0, 0)].norm() < 1e-14);
        let all = spectral_projector(&a, (0.0, 4.0)).unwrap().to_dense();
        assert!(all.as_matrix().sub(&CMatrix::identity(3)).max_abs() < 1e-14);
        let none = spectral_projector(&a, (3.5, 4.0)).unwrap();
        assert_eq!(none.rank(), 0);
        assert!(spectral_projector(&a, (2.0, 2.0)).is_err());
    }

    #[test]
    fn projector_invariants_and_commutation() {
        let n = 12;
        let u = random_unitary(n, 3);
        let d: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
        let a = HermitianMatrix::symmetrized(u.matmul(&CMatrix::diagonal(&d)).matmul(&u.adjoint()));
        let p = spectral_projector(&a, (1.2, 3.3)).unwrap().to_dense().into_matrix();
        assert!(p.matmul(&p).sub(&p).max_abs() < 1e-12);
        assert!(p.sub(&p.adjoint()).max_abs() < 1e-12);
        let comm = a.as_matrix().matmul(&p).sub(&p.matmul(a.as_matrix()));
        assert!(comm.max_abs() < 1e-10);
        // oracle: the columns of u whose eigenvalue lies in J
        let sel: Vec<Vec<C64>> = (0..n).filter(|&i| d[i] >= 1.2 && d[i] <= 3.3).map(|i| u.col(i).to_vec()).collect();
        let q = CMatrix::from_columns(n, &sel).unwrap();
        assert!(q.matmul(&q.adjoint()).sub(&p).max_abs() < 1e-10);
    }

    #[test]
    fn compression_to_pbar_commutes_with_the_projector() {
        // A = A1 (+) A2 with P onto the second block, so Pbar E_J(A) = Pbar E_J(Pbar A Pbar)
        let (n1, n2) = (7, 3);
        let n = n1 + n2;
        let u1 = random_unitary(n1, 11);
        let u2 = random_unitary(n2, 12);
        let d1: Vec<f64> = (0..n1).map(|i| 1.0 + 0.4 * i as f64).collect();
        let d2 = [1.5, 2.5, 9.0];
        let b1 = u1.matmul(&CMatrix::diagonal(&d1)).matmul(&u1.adjoint());
        let b2 = u2.matmul(&CMatrix::diagonal(&d2)).matmul(&u2.adjoint());
        let a = CMatrix::from_fn(n, n, |i, j| match (i < n1, j < n1) {
            (true, true) => b1[(i, j)],
            (false, false) => b2[(i - n1, j - n1)],
            _ => C64::new(0.0, 0.0),
        });
        let a = HermitianMatrix::symmetrized(a);
        let pidx: Vec<usize> = (n1..n).collect();
        let p = Projector::coordinate(n, &pidx);
        let pbar = CMatrix::identity(n).sub(&p.to_dense().into_matrix());
        let abar = HermitianMatrix::symmetrized(pbar.matmul(a.as_matrix()).matmul(&pbar));
        let j = (1.3, 2.9);
        let lhs = pbar.matmul(&spectral_projector(&a, j).unwrap().to_dense().into_matrix());
        let rhs = pbar.matmul(&spectral_projector(&abar, j).unwrap().to_dense().into_matrix());
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
        // oracle from the known eigenvectors of the first block
        let sel: Vec<Vec<C64>> = (0..n1)
            .filter(|&i| d1[i] >= j.0 && d1[i] <= j.1)
            .map(|i| {
                let mut v = u1.col(i).to_vec();
                v.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(n2));
                v
            })
            .collect();
        let q = CMatrix::from_columns(n, &sel).unwrap();
        assert!(lhs.sub(&q.matmul(&q.adjoint())).max_abs() < 1e-10);
    }

    #[test]
    fn localization_of_edge_vectors() {
        let g = build_grid(1.0, 101.0, 999).unwrap();
        let mut x = vec![C64::new(0.0, 0.0); g.n + 1];
        x[g.n - 3] = C64::new(1.0, 0.0);
        let l = localization(&g, &x);
        assert!((l.channel_mass - 1.0).abs() < 1e-15);
        assert!(l.radius_from_wall < 0.5);
        assert!(l.is_localized(&g));
        let flat: Vec<C64> = (0..g.n).map(|_| C64::new(1.0, 0.0)).collect();
        let l = localization(&g, &flat);
        assert!((l.radius_from_c - 90.0).abs() < 0.2);
        assert!(!l.is_localized(&g));
        let mut d = vec![C64::new(0.0, 0.0); g.n + 1];
        d[g.n] = C64::new(1.0, 0.0);
        assert!(!localization(&g, &d).is_localized(&g));
    }

    #[test]
    fn compressed_commutator_is_traceless_on_invariant_ranges() {
        let cfg = ModelConfig::default();
        let h0 = assemble_h0(&cfg).unwrap();
        let s = assemble_s(h0.grid(), cfg.n_levels(), 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        let e = h0.h0.window_eig(0.9, 1.1, 1).unwrap();
        let c = compressed(&s, &scale_columns(&e.vectors, &e.values), &e.vectors);
        let tr: f64 = (0..c.dim()).map(|i| c.as_matrix()[(i, i)].re).sum();
        let scale = c.as_matrix().max_abs();
        assert!(tr.abs() < 1e-9 * scale * c.dim() as f64);
        // the k-eigenvector row vanishes: S annihilates the discrete sector
        let kcol = (0..e.len()).find(|&i| e.vectors.col(i)[cfg.grid.n].norm() > 0.99).unwrap();
        for i in 0..c.dim() {
            assert!(c.as_matrix()[(i, kcol)].norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn gap_preconditions() {
        let cfg = ModelConfig::free_channel(build_grid(1.0, 51.0, 499).unwrap());
        let h0 = assemble_h0(&cfg).unwrap();
        let s = assemble_s(h0.grid(), 0, 1.0, &CutoffChi::standard(h0.grid())).unwrap();
        assert!(matches!(mourre_gap(&h0, &s, (0.8, 1.2), 0), Err(Error::Precondition(_))));
        let s = assemble_s(h0.grid(), 0, 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        assert!(mourre_gap(&h0, &s, (0.2, 1.2), 0).is_err());
        assert!(mourre_gap(&h0, &s, (1.2, 0.8), 0).is_err());
    }

    #[test]
    fn reduced_gap_rank_zero_and_k_outside() {
        let cfg = ModelConfig::default();
        let h0 = assemble_h0(&cfg).unwrap();
        let s = assemble_s(h0.grid(), cfg.n_levels(), 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        assert!(reduced_gap(&h0, &s, (1.1, 1.2), 0).is_err());
        let r = reduced_gap(&h0, &s, (1.0 - 1e-6, 1.0 + 1e-6), 0).unwrap();
        assert!(!r.passed);
        assert!(r.steps.is_empty());
        assert!(r.warnings.iter().any(|w| w.contains("rank 0")));
    }

    #[test]
    fn block_pieces_at_zero_coupling_and_pp_identity() {
        let cfg = ModelConfig::default();
        let h0 = assemble_h0(&cfg).unwrap();
        let v = assemble_potential(&cfg).unwrap();
        let s = assemble_s(h0.grid(), cfg.n_levels(), 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        let ctx = BlockContext::new(&h0, &v, &s, (0.9, 1.1), 0).unwrap();
        assert_eq!(ctx.rank().1, 1);
        let zero = ctx.norms(0.0, 0.3, 0.1).unwrap();
        for t in [zero.piece1, zero.piece2, zero.piece3] {
            assert_eq!(t.max(), 0.0);
        }
        let b = ctx.norms(0.01, 0.3, 0.1).unwrap();
        assert!(b.piece1.p_p <= 1e-14 * b.piece1.max());
        assert!(b.piece1.bar_bar <= 1e-12 * b.piece1.max());
        assert!(b.piece2.bar_bar <= 1e-12 * b.piece2.max() && b.piece2.p_p <= 1e-12 * b.piece2.max());
        assert!(b.piece3.bar_p <= 1e-12 * b.piece3.max());
        assert!(b.pp_identity_error < 1e-12);
        assert!(b.piece1.bar_p > 0.0 && b.piece2.bar_p > 0.0 && b.piece3.bar_bar > 0.0);
    }

    #[test]
    fn regime_and_stability_helpers() {
        assert!(ScalingRegime::new(0.9, 0.95).is_err());
        assert!(ScalingRegime::new(0.5, 0.0).is_err());
        let r = ScalingRegime::default();
        let p = r.predicted_exponents();
        assert!((p[1] - 1.0).abs() < 1e-15 && (p[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((r.eps(1e-3) - 1e-2).abs() < 1e-15);
        assert!(c_hat_stable(&[2.54, 1.81, 1.36], 0.5));
        assert!(!c_hat_stable(&[1.0, 3.0], 0.4));
        assert!(!c_hat_stable(&[1.0, -1.0], 0.5));
        assert!(!c_hat_stable(&[], 0.5));
        assert!(check_regime(0.1, 0.05, 0.2).is_err());
        assert!(check_regime(1e-3, 0.1, 1e-2).is_ok());
    }

    #[test]
    fn final_gap_excludes_zero_coupling() {
        let cfg = ModelConfig::default();
        let h0 = assemble_h0(&cfg).unwrap();
        let v = assemble_potential(&cfg).unwrap();
        let s = assemble_s(h0.grid(), cfg.n_levels(), 8.0, &CutoffChi::standard(h0.grid())).unwrap();
        let r = final_gap(&h0, &v, &s, 0.0, 0.0, 0.0, (0.95, 1.05), 0).unwrap();
        assert!(r.excluded && !r.positive);
        assert!(r.rank >= 1 && r.c_hat == 0.0);
        assert!(matches!(
            final_gap(&h0, &v, &s, 0.1, 0.05, 0.2, (0.95, 1.05), 0),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
