//! Cut-off, micro-localized generator of dilations on the channel
//!
//! ```text
//!     S = X (M R + R M) X,    M = (p G + G p)/2,    p = -i D
//! ```
//!
//! `D` is the centered difference with Dirichlet ends, `G` the sine-basis
//! multiplier `beta(xi_l / Upsilon)`, `R = diag(r_j)` and `X = diag(chi(r_j))`.
//! `M` is the Weyl-type symmetrization of `Phi(p) = p beta(p/Upsilon)`. `S`
//! vanishes on the discrete sector. It is Hermitian and purely imaginary.

use crate::error::{Error, Result};
use crate::model::Grid;
use crate::numerics::{
    orthonormalize, CMatrix, HermitianMatrix, LinearOperator, Projector, SineTransform, C64, ZERO,
};

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let a = psi(t);
    let b = psi(1.0 - t);
    a / (a + b)
}

/// Even bump, `1` on `[-1, 1]`, `0` outside `[-4, 4]`.
pub fn beta(x: f64) -> f64 {
    1.0 - smooth_step((x.abs() - 1.0) / 3.0)
}

/// Symbol `Phi(x) = x beta(x / Upsilon)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolPhi {
    pub upsilon: f64,
}

pub fn build_phi(upsilon: f64) -> Result<SymbolPhi> {
    if !(upsilon.is_finite() && upsilon > 0.0) {
        return Err(Error::param("upsilon", "must be positive"));
    }
    Ok(SymbolPhi { upsilon })
}

impl SymbolPhi {
    pub fn eval(&self, x: f64) -> f64 {
        x * beta(x / self.upsilon)
    }

    /// The cut-off alone, `beta(x / Upsilon)`.
    pub fn envelope(&self, x: f64) -> f64 {
        beta(x / self.upsilon)
    }

    pub fn sample(&self, grid: &Grid) -> SampledSymbol {
        SampledSymbol {
            length: grid.length(),
            values: grid.momenta().iter().map(|&x| self.eval(x)).collect(),
        }
    }
}

/// Symbol values on the Dirichlet momentum lattice of a given box.
#[derive(Clone, Debug)]
pub struct SampledSymbol {
    pub length: f64,
    pub values: Vec<f64>,
}

/// Dense `Q diag(values) Q` in the orthonormal sine basis.
pub fn fourier_multiplier(grid: &Grid, symbol: &SampledSymbol) -> Result<HermitianMatrix> {
    if symbol.values.len() != grid.n || (symbol.length - grid.length()).abs() > 1e-12 * grid.length() {
        return Err(Error::Precondition(
            "symbol was sampled on a different momentum lattice".into(),
        ));
    }
    let n = grid.n;
    let norm = 2.0 / (n as f64 + 1.0);
    let step = std::f64::consts::PI / (n as f64 + 1.0);
    let s: Vec<Vec<f64>> = (1..=n)
        .map(|j| (1..=n).map(|l| ((j * l) as f64 * step).sin()).collect())
        .collect();
    let m = CMatrix::from_real(n, n, |i, j| {
        norm * (0..n).map(|l| s[i][l] * symbol.values[l] * s[j][l]).sum::<f64>()
    });
    HermitianMatrix::new(m)
}

/// Position cut-off `chi` on the channel nodes.
#[derive(Clone, Debug)]
pub struct CutoffChi {
    pub values: Vec<f64>,
}

impl CutoffChi {
    /// Smooth ramp from 0 at `c + a0` to 1 at `c + a1`.
    pub fn ramp(grid: &Grid, a0: f64, a1: f64) -> Result<Self> {
        if !(a1 > a0 && a0 >= 0.0) {
            return Err(Error::param("cutoff", "need 0 <= a0 < a1"));
        }
        Ok(CutoffChi {
            values: (0..grid.n)
                .map(|j| smooth_step((grid.r(j) - grid.c - a0) / (a1 - a0)))
                .collect(),
        })
    }

    /// Ramp over `[c + 1, c + 3]`.
    pub fn standard(grid: &Grid) -> Self {
        CutoffChi::ramp(grid, 1.0, 3.0).expect("valid ramp")
    }

    pub fn none(grid: &Grid) -> Self {
        CutoffChi {
            values: vec![1.0; grid.n],
        }
    }

    /// First radius from which `chi = 1` to round-off.
    pub fn plateau_start(&self, grid: &Grid) -> f64 {
        (0..grid.n)
            .find(|&j| self.values[j] >= 1.0 - 1e-14)
            .map(|j| grid.r(j))
            .unwrap_or(grid.r_max)
    }
}

/// Matrix-free `S` on the full model space (channel plus `m` levels).
#[derive(Clone, Debug)]
pub struct ConjugateOperator {
    pub grid: Grid,
    pub n_levels: usize,
    pub phi: SymbolPhi,
    pub chi: Vec<f64>,
    r: Vec<f64>,
    envelope: Vec<f64>,
    dst: SineTransform,
}

pub fn assemble_s(grid: &Grid, n_levels: usize, upsilon: f64, cutoff: &CutoffChi) -> Result<ConjugateOperator> {
    let phi = build_phi(upsilon)?;
    if cutoff.values.len() != grid.n {
        return Err(Error::DimensionMismatch {
            expected: grid.n,
            found: cutoff.values.len(),
        });
    }
    Ok(ConjugateOperator {
        grid: *grid,
        n_levels,
        phi,
        chi: cutoff.values.clone(),
        r: grid.nodes(),
        envelope: grid.momenta().iter().map(|&x| phi.envelope(x)).collect(),
        dst: SineTransform::new(grid.n),
    })
}

impl ConjugateOperator {
    pub fn upsilon(&self) -> f64 {
        self.phi.upsilon
    }

    /// Centered difference `D` with zero Dirichlet data.
    pub fn difference(&self, v: &[C64]) -> Vec<C64> {
        let n = v.len();
        let s = 0.5 / self.grid.h;
        (0..n)
            .map(|j| {
                let right = if j + 1 < n { v[j + 1] } else { ZERO };
                let left = if j > 0 { v[j - 1] } else { ZERO };
                (right - left) * s
            })
            .collect()
    }

    /// `p = -i D`.
    pub fn momentum(&self, v: &[C64]) -> Vec<C64> {
        self.difference(v).into_iter().map(|z| C64::new(z.im, -z.re)).collect()
    }

    /// `G = beta(xi/Upsilon)` in the sine basis.
    pub fn envelope_apply(&self, v: &[C64]) -> Vec<C64> {
        let mut w = self.dst.apply(v);
        for (x, b) in w.iter_mut().zip(&self.envelope) {
            *x *= *b;
        }
        self.dst.apply_in_place(&mut w);
        w
    }

    /// `M = (p G + G p)/2` on channel vectors.
    pub fn apply_m(&self, v: &[C64]) -> Vec<C64> {
        let a = self.momentum(&self.envelope_apply(v));
        let b = self.envelope_apply(&self.momentum(v));
        a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
    }

    /// `S` restricted to the channel.
    pub fn apply_channel(&self, x: &[C64]) -> Vec<C64> {
        let u: Vec<C64> = x.iter().zip(&self.chi).map(|(v, c)| v * c).collect();
        let ru: Vec<C64> = u.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let a = self.apply_m(&ru);
        let b = self.apply_m(&u);
        a.iter()
            .zip(&b)
            .zip(&self.r)
            .zip(&self.chi)
            .map(|(((p, q), r), c)| (p + q * r) * c)
            .collect()
    }
}

impl LinearOperator for ConjugateOperator {
    fn dim(&self) -> usize {
        self.grid.n + self.n_levels
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.grid.n;
        assert_eq!(x.len(), n + self.n_levels);
        let mut y = self.apply_channel(&x[..n]);
        y.extend(std::iter::repeat(ZERO).take(self.n_levels));
        y
    }
}

/// Dense `i(A S - S A)`.
pub fn commutator(a: &HermitianMatrix, s: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: s.dim(),
        });
    }
    let am = a.as_matrix();
    let sm = s.as_matrix();
    let c = am.matmul(sm).sub(&sm.matmul(am)).scale(C64::new(0.0, 1.0));
    HermitianMatrix::new(c)
}

/// Finite-rank operator `sum_b (u_b w_b^H - w_b u_b^H)/(2i)`, the imaginary
/// part of `X = sum_b u_b w_b^H`.
#[derive(Clone, Debug, Default)]
pub struct FiniteRank {
    pub u: Vec<Vec<C64>>,
    pub w: Vec<Vec<C64>>,
}

impl FiniteRank {
    pub fn rank_bound(&self) -> usize {
        2 * self.u.len()
    }
}

impl LinearOperator for FiniteRank {
    fn dim(&self) -> usize {
        self.u.first().map(|v| v.len()).unwrap_or(0)
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; x.len()];
        let half_i = C64::new(0.0, -0.5);
        for (u, w) in self.u.iter().zip(&self.w) {
            let a = crate::numerics::dot(w, x) * half_i;
            let b = crate::numerics::dot(u, x) * half_i;
            for ((yi, ui), wi) in y.iter_mut().zip(u).zip(w) {
                *yi += ui * a - wi * b;
            }
        }
        y
    }
}

/// `S_hat = Pbar S Pbar + t B` with `t = lambda theta`.
pub struct SHat<'a> {
    pub s: &'a ConjugateOperator,
    pub p: &'a Projector,
    pub b: &'a FiniteRank,
    pub t: f64,
}

pub fn assemble_s_hat<'a>(s: &'a ConjugateOperator, p: &'a Projector, b: &'a FiniteRank, t: f64) -> SHat<'a> {
    SHat { s, p, b, t }
}

impl LinearOperator for SHat<'_> {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let q = self.p.apply_complement(x);
        let mut y = self.p.apply_complement(&self.s.apply(&q));
        if self.t != 0.0 && !self.b.u.is_empty() {
            for (yi, bi) in y.iter_mut().zip(self.b.apply(x)) {
                *yi += bi * self.t;
            }
        }
        y
    }
}

/// Gaussian wave packets `exp(-(r - r0)^2/(2 w^2)) e^{i xi r}` on the channel.
#[derive(Clone, Debug)]
pub struct PacketSet {
    pub centers: Vec<f64>,
    pub momenta: Vec<f64>,
    pub width: f64,
}

impl PacketSet {
    /// Packets centred where `chi = 1`, at least `6 w` from the plateau
    /// start and from the wall, with momenta spread over `band`.
    pub fn plateau(grid: &Grid, cutoff: &CutoffChi, band: (f64, f64), width: f64) -> Result<Self> {
        let lo = cutoff.plateau_start(grid) + 6.0 * width;
        let hi = grid.r_max - 6.0 * width;
        if hi <= lo {
            return Err(Error::Precondition("box too short for the requested packets".into()));
        }
        let nc = 4;
        let nm = 4;
        Ok(PacketSet {
            centers: (0..nc).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / nc as f64).collect(),
            momenta: (0..nm)
                .map(|i| band.0 + (band.1 - band.0) * i as f64 / (nm - 1) as f64)
                .collect(),
            width,
        })
    }

    pub fn vectors(&self, grid: &Grid) -> Vec<Vec<C64>> {
        let mut out = Vec::new();
        for &r0 in &self.centers {
            for &xi in &self.momenta {
                out.push(
                    (0..grid.n)
                        .map(|j| {
                            let r = grid.r(j);
                            let g = (-(r - r0).powi(2) / (2.0 * self.width * self.width)).exp();
                            C64::from_polar(g, xi * r)
                        })
                        .collect(),
                );
            }
        }
        out
    }
}

/// Relative size of `[d^2, S] - 4 X D M X` on packets,
/// `|Q^H (L - 4XDMX) Q| / |Q^H 4XDMX Q|` in spectral norm.
pub fn leading_term_residual(grid: &Grid, upsilon: f64, cutoff: &CutoffChi, packets: &PacketSet) -> Result<f64> {
    let xi_min = std::f64::consts::PI / grid.length();
    if packets.momenta.iter().any(|&x| x < xi_min || x > 0.5 * upsilon) {
        return Err(Error::Precondition(format!(
            "packet momenta must lie in [{xi_min:.3e}, {:.3e}]",
            0.5 * upsilon
        )));
    }
    let s = assemble_s(grid, 0, upsilon, cutoff)?;
    let q = orthonormalize(packets.vectors(grid), 1e-8);
    if q.is_empty() {
        return Err(Error::Precondition("no independent packets".into()));
    }
    let h2 = grid.h * grid.h;
    let lap = |v: &[C64]| -> Vec<C64> {
        let n = v.len();
        (0..n)
            .map(|j| {
                let l = if j > 0 { v[j - 1] } else { ZERO };
                let r = if j + 1 < n { v[j + 1] } else { ZERO };
                (l + r - v[j] * 2.0) / h2
            })
            .collect()
    };
    let chi = &s.chi;
    let mut lhs = Vec::with_capacity(q.len());
    let mut rhs = Vec::with_capacity(q.len());
    for v in &q {
        let a = lap(&s.apply_channel(v));
        let b = s.apply_channel(&lap(v));
        lhs.push(a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let xv: Vec<C64> = v.iter().zip(chi).map(|(x, c)| x * c).collect();
        let t = s.difference(&s.apply_m(&xv));
        rhs.push(t.iter().zip(chi).map(|(x, c)| x * c * 4.0).collect::<Vec<_>>());
    }
    let qm = CMatrix::from_columns(grid.n, &q)?;
    let a = qm.adjoint_mul(&CMatrix::from_columns(grid.n, &lhs)?);
    let b = qm.adjoint_mul(&CMatrix::from_columns(grid.n, &rhs)?);
    let denom = b.spectral_norm();
    if denom == 0.0 {
        return Err(Error::Precondition("leading term vanishes on the packets".into()));
    }
    Ok(a.sub(&b).spectral_norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_grid;
    use crate::numerics::{dot, hermitian_eig};

    fn grid(n: usize, r_max: f64) -> Grid {
        build_grid(1.0, r_max, n).unwrap()
    }

    #[test]
    fn step_and_bump_shape() {
        assert_eq!(smooth_step(-0.5), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(beta(0.7), 1.0);
        assert_eq!(beta(-1.0), 1.0);
        assert_eq!(beta(4.2), 0.0);
        assert!(beta(2.5) > 0.0 && beta(2.5) < 1.0);
        for i in 0..100 {
            let x = -5.0 + 0.1 * i as f64;
            assert_eq!(beta(x), beta(-x));
        }
    }

    #[test]
    fn phi_is_identity_inside_the_cap() {
        let phi = build_phi(8.0).unwrap();
        for x in [-8.0, -3.0, 0.0, 2.5, 8.0] {
            assert_eq!(phi.eval(x), x);
        }
        assert_eq!(phi.eval(40.0), 0.0);
        assert!(build_phi(0.0).is_err());
    }

    #[test]
    fn multiplier_of_identity_symbol() {
        let g = grid(31, 9.0);
        let one = SampledSymbol {
            length: g.length(),
            values: vec![1.0; 31],
        };
        let m = fourier_multiplier(&g, &one).unwrap();
        assert!(m.as_matrix().sub(&CMatrix::identity(31)).max_abs() < 1e-13);
        let other = grid(31, 10.0);
        assert!(fourier_multiplier(&other, &one).is_err());
    }

    #[test]
    fn multiplier_eigenvalues_are_symbol_values() {
        let g = grid(40, 11.0);
        let sym = build_phi(2.0).unwrap().sample(&g);
        let m = fourier_multiplier(&g, &sym).unwrap();
        let mut want = sym.values.clone();
        want.sort_by(f64::total_cmp);
        let got = hermitian_eig(&m).unwrap().values;
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn s_is_hermitian_and_annihilates_the_discrete_sector() {
        let g = grid(127, 21.0);
        let s = assemble_s(&g, 2, 8.0, &CutoffChi::standard(&g)).unwrap();
        let dense = s.to_matrix();
        assert!(dense.hermitian_deviation() < 1e-12 * dense.max_abs());
        // purely imaginary
        assert!(dense.as_slice().iter().all(|z| z.re.abs() < 1e-12 * dense.max_abs()));
        let mut e = vec![ZERO; 129];
        e[128] = C64::new(1.0, 0.0);
        assert!(s.apply(&e).iter().all(|z| *z == ZERO));
        let u: Vec<C64> = (0..129).map(|j| C64::new((j as f64).sin(), (j as f64 * 0.3).cos())).collect();
        assert!(dot(&u, &s.apply(&u)).im.abs() < 1e-10);
    }

    #[test]
    fn zero_cutoff_gives_zero_operator() {
        let g = grid(63, 11.0);
        let s = assemble_s(&g, 0, 8.0, &CutoffChi { values: vec![0.0; 63] }).unwrap();
        let u: Vec<C64> = (0..63).map(|j| C64::new(j as f64, 0.0)).collect();
        assert!(s.apply(&u).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn difference_acts_exactly_on_dirichlet_modes() {
        let g = grid(255, 11.0);
        let s = assemble_s(&g, 0, 8.0, &CutoffChi::none(&g)).unwrap();
        let xi = 3.0 * std::f64::consts::PI / g.length();
        let mode: Vec<C64> = (0..g.n).map(|j| C64::new((xi * (g.r(j) - g.c)).sin(), 0.0)).collect();
        let d = s.difference(&mode);
        let f = (xi * g.h).sin() / g.h;
        for j in 0..g.n {
            assert!((d[j].re - f * (xi * (g.r(j) - g.c)).cos()).abs() < 1e-10);
        }
        // the envelope is the identity on modes below the cap
        let e = s.envelope_apply(&mode);
        assert!(e.iter().zip(&mode).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn leading_term_on_plateau_and_on_ramp() {
        let g = grid(3999, 201.0);
        let chi = CutoffChi::standard(&g);
        let good = PacketSet::plateau(&g, &chi, (0.25, 2.0), 4.0).unwrap();
        let r = leading_term_residual(&g, 8.0, &chi, &good).unwrap();
        assert!(r < g.h, "plateau residual {r}");
        let ramp = PacketSet {
            centers: vec![g.c + 2.0],
            momenta: vec![0.5, 1.0],
            width: 0.4,
        };
        let r2 = leading_term_residual(&g, 8.0, &chi, &ramp).unwrap();
        assert!(r2 > 0.1, "ramp residual {r2}");
        let bad = PacketSet {
            momenta: vec![5.0],
            ..good
        };
        assert!(leading_term_residual(&g, 8.0, &chi, &bad).is_err());
    }

    #[test]
    fn finite_rank_is_hermitian() {
        let u = vec![vec![C64::new(1.0, 0.5), C64::new(0.0, 1.0), C64::new(2.0, 0.0)]];
        let w = vec![vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.5, -0.5)]];
        let b = FiniteRank { u, w };
        let m = b.to_matrix();
        assert!(m.hermitian_deviation() < 1e-15);
    }
}
