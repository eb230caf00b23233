//! Discretized model: a Dirichlet channel `-d^2/dr^2 + 1/4` on `[c, R_max]`
//! (three-point stencil, `N` interior nodes) direct-summed with a discrete
//! sector `diag(mu)`, coupled through rank-one blocks `h^{1/2} w(r_j)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BorderedMatrix, BorderedTridiagonal, Projector, C64};

/// Uniform grid of interior nodes `r_j = c + j h`, `j = 1..N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub c: f64,
    pub r_max: f64,
    pub n: usize,
    pub h: f64,
}

pub fn build_grid(c: f64, r_max: f64, n: usize) -> Result<Grid> {
    if !(c.is_finite() && r_max.is_finite()) || r_max <= c {
        return Err(Error::param("r_max", format!("need c < r_max, got c = {c}, r_max = {r_max}")));
    }
    if n < 3 {
        return Err(Error::param("n", "need at least 3 interior nodes"));
    }
    Ok(Grid {
        c,
        r_max,
        n,
        h: (r_max - c) / (n as f64 + 1.0),
    })
}

impl Grid {
    /// Channel length `L = R_max - c`.
    pub fn length(&self) -> f64 {
        self.r_max - self.c
    }

    /// Node `r_j` for zero-based index `j` (the `(j+1)`-th interior node).
    pub fn r(&self, j: usize) -> f64 {
        self.c + (j as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.r(j)).collect()
    }

    /// Dirichlet lattice momenta `xi_l = l pi / L`, `l = 1..N`.
    pub fn momenta(&self) -> Vec<f64> {
        let step = std::f64::consts::PI / self.length();
        (1..=self.n).map(|l| l as f64 * step).collect()
    }

    /// Channel eigenvalues of the discrete operator, ascending.
    pub fn channel_levels(&self) -> Vec<f64> {
        let h2 = self.h * self.h;
        (1..=self.n)
            .map(|l| 0.25 + (2.0 - 2.0 * (l as f64 * std::f64::consts::PI / (self.n as f64 + 1.0)).cos()) / h2)
            .collect()
    }

    /// Same spacing, different right end; `n` is rounded to keep `h`.
    pub fn with_r_max(&self, r_max: f64) -> Result<Grid> {
        let n = ((r_max - self.c) / self.h).round() as usize;
        build_grid(self.c, r_max, n.saturating_sub(1))
    }

    /// Discrete momentum solving `(2 - 2 cos(xi h))/h^2 = e - 1/4`.
    pub fn lattice_momentum(&self, e: f64) -> Option<f64> {
        let x = self.h * (e - 0.25).max(0.0).sqrt() / 2.0;
        if e <= 0.25 || x > 1.0 {
            return None;
        }
        Some(2.0 / self.h * x.asin())
    }
}

/// Named radial profiles for potentials and couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Zero,
    /// `exp(-a (r - c))`
    Exp { rate: f64 },
    /// `(1 + r)^(-p)`
    Power { exponent: f64 },
    Constant { value: f64 },
    /// `exp(-((r - r0)/s)^2)`
    Gaussian { center: f64, width: f64 },
    /// `exp(-a s)(1 - alpha s)`, `s = r - c`; `alpha = None` is tuned at
    /// assembly so the lattice overlap with the channel mode at `k` vanishes.
    Node { rate: f64, alpha: Option<f64> },
    /// Smooth compactly supported bump around `center` (not analytic).
    Bump { center: f64, radius: f64 },
}

impl Profile {
    /// Parse `name[:a[,b]]`. A bare `power` takes exponent `1 + delta`.
    pub fn parse(s: &str, delta: f64) -> Result<Profile> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (s, ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::param("profile", format!("`{s}`: {e}")))?
        };
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if nums.len() < lo || nums.len() > hi {
                Err(Error::param("profile", format!("`{s}`: expected {lo}..={hi} arguments")))
            } else {
                Ok(())
            }
        };
        let p = match name {
            "zero" => {
                arity(0, 0)?;
                Profile::Zero
            }
            "exp" => {
                arity(0, 1)?;
                Profile::Exp {
                    rate: nums.first().copied().unwrap_or(1.0),
                }
            }
            "power" => {
                arity(0, 1)?;
                Profile::Power {
                    exponent: nums.first().copied().unwrap_or(1.0 + delta),
                }
            }
            "const" => {
                arity(0, 1)?;
                Profile::Constant {
                    value: nums.first().copied().unwrap_or(1.0),
                }
            }
            "gaussian" => {
                arity(2, 2)?;
                Profile::Gaussian {
                    center: nums[0],
                    width: nums[1],
                }
            }
            "node" => {
                arity(0, 1)?;
                Profile::Node {
                    rate: 1.0,
                    alpha: nums.first().copied(),
                }
            }
            "bump" => {
                arity(2, 2)?;
                Profile::Bump {
                    center: nums[0],
                    radius: nums[1],
                }
            }
            _ => return Err(Error::param("profile", format!("unknown profile `{name}`"))),
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let bad = match *self {
            Profile::Exp { rate } => !(rate.is_finite() && rate > 0.0),
            Profile::Power { exponent } => !(exponent.is_finite() && exponent > 0.0),
            Profile::Constant { value } => !value.is_finite(),
            Profile::Gaussian { center, width } => !(center.is_finite() && width.is_finite() && width > 0.0),
            Profile::Node { rate, alpha } => !(rate > 0.0 && alpha.map_or(true, f64::is_finite)),
            Profile::Bump { center, radius } => !(center.is_finite() && radius.is_finite() && radius > 0.0),
            Profile::Zero => false,
        };
        if bad {
            return Err(Error::param("profile", format!("invalid parameters in {self}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero) || matches!(self, Profile::Constant { value } if *value == 0.0)
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Profile::Bump { .. })
    }

    pub fn eval(&self, r: f64, c: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Exp { rate } => (-rate * (r - c)).exp(),
            Profile::Power { exponent } => (1.0 + r).powf(-exponent),
            Profile::Constant { value } => value,
            Profile::Gaussian { center, width } => (-((r - center) / width).powi(2)).exp(),
            Profile::Node { rate, alpha } => {
                let s = r - c;
                (-rate * s).exp() * (1.0 - alpha.unwrap_or(0.0) * s)
            }
            Profile::Bump { center, radius } => {
                let x = (r - center) / radius;
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                }
            }
        }
    }

    /// Analytic continuation at complex `z`.
    pub fn eval_complex(&self, z: C64, c: f64) -> Result<C64> {
        let one = C64::new(1.0, 0.0);
        Ok(match *self {
            Profile::Zero => C64::new(0.0, 0.0),
            Profile::Exp { rate } => (-(z - c) * rate).exp(),
            Profile::Power { exponent } => (one + z).powf(-exponent),
            Profile::Constant { value } => C64::new(value, 0.0),
            Profile::Gaussian { center, width } => (-((z - center) / width).powi(2)).exp(),
            Profile::Node { rate, alpha } => {
                let s = z - c;
                (-s * rate).exp() * (one - s * alpha.unwrap_or(0.0))
            }
            Profile::Bump { .. } => {
                if z.im == 0.0 {
                    C64::new(self.eval(z.re, c), 0.0)
                } else {
                    return Err(Error::Precondition(format!(
                        "profile {self} has no analytic continuation off the real axis"
                    )));
                }
            }
        })
    }

    /// Fix the free parameter of a `node` profile on `grid` at energy `k`.
    pub fn resolved(&self, grid: &Grid, k: f64) -> Result<Profile> {
        match *self {
            Profile::Node { rate, alpha: None } => {
                let xi = grid.lattice_momentum(k).ok_or_else(|| {
                    Error::Precondition(format!("energy {k} is not inside the channel band"))
                })?;
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..grid.n {
                    let s = grid.r(j) - grid.c;
                    let f = (-rate * s).exp() * (xi * s).sin();
                    a += f;
                    b += s * f;
                }
                Ok(Profile::Node {
                    rate,
                    alpha: Some(a / b),
                })
            }
            ref p => Ok(p.clone()),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Exp { rate } => write!(f, "exp:{rate}"),
            Profile::Power { exponent } => write!(f, "power:{exponent}"),
            Profile::Constant { value } => write!(f, "const:{value}"),
            Profile::Gaussian { center, width } => write!(f, "gaussian:{center},{width}"),
            Profile::Node { alpha: None, .. } => write!(f, "node"),
            Profile::Node { alpha: Some(a), .. } => write!(f, "node:{a}"),
            Profile::Bump { center, radius } => write!(f, "bump:{center},{radius}"),
        }
    }
}

/// Physical parameters of a model instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: Grid,
    /// Embedded energy, `k > 1/4`.
    pub k: f64,
    /// Discrete levels `mu_1..mu_m`; empty for the free channel.
    pub levels: Vec<f64>,
    /// Coupling profile per discrete level; missing entries are uncoupled.
    pub couplings: Vec<Profile>,
    /// Channel-diagonal potential `v`.
    pub potential: Profile,
    /// Symmetric perturbation of the discrete block, row-major `m x m`.
    pub discrete_block: Vec<f64>,
    pub delta: f64,
    pub lambda: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            grid: build_grid(1.0, 201.0, 3999).expect("default grid is valid"),
            k: 1.0,
            levels: vec![1.0, 5.0],
            couplings: vec![Profile::Exp { rate: 1.0 }],
            potential: Profile::Zero,
            discrete_block: vec![0.0; 4],
            delta: 0.5,
            lambda: 0.0,
        }
    }
}

impl ModelConfig {
    /// The channel alone, no discrete sector.
    pub fn free_channel(grid: Grid) -> Self {
        ModelConfig {
            grid,
            levels: vec![],
            couplings: vec![],
            discrete_block: vec![],
            ..ModelConfig::default()
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.n + self.n_levels()
    }

    pub fn validate(&self) -> Result<()> {
        build_grid(self.grid.c, self.grid.r_max, self.grid.n)?;
        if !(self.k.is_finite() && self.k > 0.25) {
            return Err(Error::param("k", "embedded energy must exceed the threshold 1/4"));
        }
        let m = self.n_levels();
        if m > 0 && !self.levels.iter().any(|&mu| mu == self.k) {
            return Err(Error::param("levels", "some discrete level must equal k"));
        }
        if self.couplings.len() > m {
            return Err(Error::param("coupling", format!("{} profiles for {m} levels", self.couplings.len())));
        }
        if self.discrete_block.len() != m * m {
            return Err(Error::param("discrete_block", format!("expected {} entries", m * m)));
        }
        for i in 0..m {
            for j in 0..i {
                if self.discrete_block[i * m + j] != self.discrete_block[j * m + i] {
                    return Err(Error::param("discrete_block", "must be symmetric"));
                }
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param("delta", "must be finite and >= 0"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> ModelConfig {
        ModelConfig {
            lambda,
            ..self.clone()
        }
    }

    /// Same model on a longer (or shorter) box with the same spacing.
    pub fn with_r_max(&self, r_max: f64) -> Result<ModelConfig> {
        Ok(ModelConfig {
            grid: self.grid.with_r_max(r_max)?,
            ..self.clone()
        })
    }

    /// Coupling profiles, one per level, with node parameters fixed.
    pub fn resolved_couplings(&self) -> Result<Vec<Profile>> {
        (0..self.n_levels())
            .map(|a| self.couplings.get(a).unwrap_or(&Profile::Zero).resolved(&self.grid, self.k))
            .collect()
    }

    /// Indices (in the full space) of the discrete levels equal to `k`.
    pub fn embedded_indices(&self) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &mu)| mu == self.k)
            .map(|(a, _)| self.grid.n + a)
            .collect()
    }
}

/// Unperturbed operator with its bookkeeping.
#[derive(Clone, Debug)]
pub struct ModelOperator {
    pub config: ModelConfig,
    pub h0: BorderedTridiagonal,
    /// Eigenprojector of `H_0` at `k` (the discrete levels equal to `k`).
    pub p: Projector,
}

impl ModelOperator {
    pub fn grid(&self) -> &Grid {
        &self.config.grid
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// The channel block as a bordered matrix with empty border.
    pub fn channel(&self) -> BorderedTridiagonal {
        BorderedTridiagonal {
            diag: self.h0.diag.clone(),
            off: self.h0.off.clone(),
            border: vec![],
            corner: vec![],
        }
    }

    /// Gap between the two channel levels bracketing `k`, by bisection.
    pub fn level_spacing(&self) -> f64 {
        let t = self.channel();
        let idx = t.sturm_count(self.config.k);
        if idx == 0 || idx >= t.dim() {
            return f64::INFINITY;
        }
        let below = t.eigenvalue_by_index(idx - 1).unwrap_or(f64::NEG_INFINITY);
        let above = t.eigenvalue_by_index(idx).unwrap_or(f64::INFINITY);
        above - below
    }

    /// Smallest regularization the box resolves: twice the level spacing at `k`.
    pub fn spacing_floor(&self) -> f64 {
        2.0 * self.level_spacing()
    }
}

fn kinetic(grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let h2 = grid.h * grid.h;
    (vec![2.0 / h2 + 0.25; grid.n], vec![-1.0 / h2; grid.n - 1])
}

/// `H_0 = (-d^2 + 1/4)_Dirichlet (+) diag(mu)`.
pub fn assemble_h0(config: &ModelConfig) -> Result<ModelOperator> {
    config.validate()?;
    let (diag, off) = kinetic(&config.grid);
    let m = config.n_levels();
    let mut corner = vec![0.0; m * m];
    for (a, &mu) in config.levels.iter().enumerate() {
        corner[a * m + a] = mu;
    }
    let h0 = BorderedTridiagonal::new(diag, off, vec![vec![0.0; config.grid.n]; m], corner)?;
    let p = Projector::coordinate(h0.dim(), &config.embedded_indices());
    Ok(ModelOperator {
        config: config.clone(),
        h0,
        p,
    })
}

/// `V = v (+) coupling (+) discrete block`, with coupling columns
/// `h^{1/2} w_a(r_j)` so that grid inner products approximate `L^2` ones.
pub fn assemble_potential(config: &ModelConfig) -> Result<BorderedTridiagonal> {
    config.validate()?;
    let g = &config.grid;
    let diag: Vec<f64> = (0..g.n).map(|j| config.potential.eval(g.r(j), g.c)).collect();
    let sh = g.h.sqrt();
    let border: Vec<Vec<f64>> = config
        .resolved_couplings()?
        .iter()
        .map(|w| (0..g.n).map(|j| sh * w.eval(g.r(j), g.c)).collect())
        .collect();
    BorderedTridiagonal::new(diag, vec![0.0; g.n - 1], border, config.discrete_block.clone())
}

/// `H_lambda = H_0 + lambda V` with `lambda` from the config.
pub fn assemble_h(config: &ModelConfig) -> Result<BorderedTridiagonal> {
    let h0 = assemble_h0(config)?;
    h0.h0.add_scaled(&assemble_potential(config)?, config.lambda)
}

/// Weight `L = 1 + r` on the channel and `1` on the discrete sector.
#[derive(Clone, Debug)]
pub struct WeightL {
    pub values: Vec<f64>,
}

pub fn assemble_weight(config: &ModelConfig) -> WeightL {
    let g = &config.grid;
    let mut values: Vec<f64> = (0..g.n).map(|j| 1.0 + g.r(j)).collect();
    values.extend(std::iter::repeat(1.0).take(config.n_levels()));
    WeightL { values }
}

/// `max_j |v(r_j)| L(r_j)` over the channel nodes.
pub fn weighted_sup(config: &ModelConfig) -> f64 {
    let g = &config.grid;
    (0..g.n)
        .map(|j| config.potential.eval(g.r(j), g.c).abs() * (1.0 + g.r(j)))
        .fold(0.0, f64::max)
}

/// Complex-dilated `H_lambda` about `r = c`: kinetic part `e^{-2i theta} T + 1/4`,
/// profiles evaluated at `c + e^{i theta}(r - c)`, and the coupling carrying the
/// half-density factor `e^{i theta/2}`. The result is complex symmetric.
pub fn complex_scale(config: &ModelConfig, theta: f64) -> Result<BorderedMatrix> {
    config.validate()?;
    if !(theta.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&theta)) {
        return Err(Error::param("theta", "scaling angle must lie in [0, pi/2)"));
    }
    let g = &config.grid;
    let lam = config.lambda;
    let rot = C64::from_polar(1.0, theta);
    let kin = C64::from_polar(1.0, -2.0 * theta);
    let h2 = g.h * g.h;
    let z = |j: usize| C64::new(g.c, 0.0) + rot * (g.r(j) - g.c);
    let mut diag = Vec::with_capacity(g.n);
    for j in 0..g.n {
        let v = config.potential.eval_complex(z(j), g.c)?;
        diag.push(kin * (2.0 / h2) + 0.25 + v * lam);
    }
    let off = vec![kin * (-1.0 / h2); g.n - 1];
    let jac = C64::from_polar(g.h.sqrt(), 0.5 * theta);
    let mut cols = Vec::with_capacity(config.n_levels());
    for w in config.resolved_couplings()? {
        let col = (0..g.n)
            .map(|j| w.eval_complex(z(j), g.c).map(|x| x * jac * lam))
            .collect::<Result<Vec<C64>>>()?;
        cols.push(col);
    }
    let m = config.n_levels();
    let mut corner = vec![C64::new(0.0, 0.0); m * m];
    for a in 0..m {
        for b in 0..m {
            let mu = if a == b { config.levels[a] } else { 0.0 };
            corner[a * m + b] = C64::new(mu + lam * config.discrete_block[a * m + b], 0.0);
        }
    }
    Ok(BorderedMatrix {
        sub: off.clone(),
        diag,
        sup: off,
        rows: cols.clone(),
        cols,
        corner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, LinearOperator};

    #[test]
    fn grid_geometry() {
        let g = build_grid(1.0, 201.0, 3999).unwrap();
        assert!((g.h - 0.05).abs() < 1e-15);
        assert!((g.r(0) - 1.05).abs() < 1e-12);
        assert!((g.r(3998) - 200.95).abs() < 1e-9);
        assert!(build_grid(2.0, 1.0, 10).is_err());
        assert!(build_grid(0.0, 1.0, 2).is_err());
        let g2 = g.with_r_max(2001.0).unwrap();
        assert_eq!(g2.n, 39999);
        assert!((g2.h - g.h).abs() < 1e-15);
    }

    #[test]
    fn profiles_parse_and_evaluate() {
        let p = Profile::parse("power", 0.5).unwrap();
        assert_eq!(p, Profile::Power { exponent: 1.5 });
        assert!((p.eval(3.0, 1.0) - 4f64.powf(-1.5)).abs() < 1e-15);
        let e = Profile::parse("exp:2", 0.5).unwrap();
        assert!((e.eval(2.0, 1.0) - (-2f64).exp()).abs() < 1e-15);
        assert!(Profile::parse("gaussian:1", 0.5).is_err());
        assert!(Profile::parse("wobble", 0.5).is_err());
        assert!(Profile::parse("exp:-1", 0.5).is_err());
        let b = Profile::parse("bump:5,2", 0.5).unwrap();
        assert_eq!(b.eval(7.5, 1.0), 0.0);
        assert!(!b.is_analytic());
        for s in ["zero", "exp:1", "const:2", "gaussian:3,1", "node", "bump:5,2"] {
            let p = Profile::parse(s, 0.5).unwrap();
            assert_eq!(Profile::parse(&p.to_string(), 0.5).unwrap(), p);
        }
    }

    #[test]
    fn complex_profiles_agree_on_real_axis() {
        for s in ["exp:1.3", "power:1.5", "gaussian:4,2", "node:0.8", "const:0.3"] {
            let p = Profile::parse(s, 0.5).unwrap();
            for r in [1.0, 2.5, 10.0] {
                let z = p.eval_complex(C64::new(r, 0.0), 1.0).unwrap();
                assert!((z.re - p.eval(r, 1.0)).abs() < 1e-14 && z.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn h0_structure() {
        let cfg = ModelConfig::default();
        let m = assemble_h0(&cfg).unwrap();
        assert_eq!(m.dim(), 4001);
        assert_eq!(m.p.rank(), 1);
        assert_eq!(m.h0.corner, vec![1.0, 0.0, 0.0, 5.0]);
        // the floor at the default box is far above 1e-2
        let f = m.spacing_floor();
        assert!(f > 0.04 && f < 0.07, "floor {f}");
    }

    #[test]
    fn coupling_norm_approximates_l2() {
        let cfg = ModelConfig {
            grid: build_grid(1.0, 31.0, 29999).unwrap(),
            ..ModelConfig::default()
        };
        let v = assemble_potential(&cfg).unwrap();
        let w = &v.border[0];
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((nrm - 0.5f64.sqrt()).abs() < 1e-3);
        // ||V||_2 equals ||w|| for a pure rank-one coupling
        let top = v.eigenvalues_in(0.1, 2.0)[0];
        assert!((top - nrm).abs() < 1e-10);
    }

    #[test]
    fn grid_inner_products_converge_at_second_order() {
        // f(r) = sin(pi (r - c)/L) vanishes at both ends
        let err = |n: usize| {
            let cfg = ModelConfig {
                grid: build_grid(1.0, 11.0, n).unwrap(),
                ..ModelConfig::default()
            };
            let g = cfg.grid;
            let w = &assemble_potential(&cfg).unwrap().border[0];
            let f: Vec<f64> = (0..g.n).map(|j| (std::f64::consts::PI * (g.r(j) - g.c) / 10.0).sin()).collect();
            let ip: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() * g.h.sqrt();
            // exact: int_0^10 e^{-s} sin(pi s/10) ds
            let a = std::f64::consts::PI / 10.0;
            let exact = a * (1.0 + (-10f64).exp()) / (1.0 + a * a);
            (ip - exact).abs()
        };
        let (e1, e2, e3) = (err(99), err(199), err(399));
        let r1 = (e1 / e2).log2();
        let r2 = (e2 / e3).log2();
        assert!((r1 - 2.0).abs() < 0.1 && (r2 - 2.0).abs() < 0.1, "rates {r1} {r2}");
    }

    #[test]
    fn weighted_sup_of_decaying_potential() {
        let cfg = ModelConfig {
            potential: Profile::parse("power", 0.5).unwrap(),
            ..ModelConfig::default()
        };
        let want = (0..cfg.grid.n)
            .map(|j| (1.0 + cfg.grid.r(j)).powf(-0.5))
            .fold(0.0, f64::max);
        assert!((weighted_sup(&cfg) - want).abs() < 1e-15);
    }

    #[test]
    fn node_profile_is_orthogonal_to_the_channel_mode() {
        let cfg = ModelConfig {
            couplings: vec![Profile::parse("node", 0.5).unwrap()],
            ..ModelConfig::default()
        };
        let g = cfg.grid;
        let xi = g.lattice_momentum(cfg.k).unwrap();
        let w = &assemble_potential(&cfg).unwrap().border[0];
        let overlap: f64 = (0..g.n).map(|j| w[j] * (xi * (g.r(j) - g.c)).sin()).sum();
        assert!(overlap.abs() < 1e-12);
        match &cfg.resolved_couplings().unwrap()[0] {
            Profile::Node { alpha: Some(a), .. } => assert!((a - 0.875).abs() < 1e-2),
            p => panic!("unexpected {p}"),
        }
    }

    #[test]
    fn zero_angle_scaling_is_the_hermitian_operator() {
        let cfg = ModelConfig::default().with_lambda(0.3);
        let h = assemble_h(&cfg).unwrap().to_complex();
        let hs = complex_scale(&cfg, 0.0).unwrap();
        assert_eq!(h.diag, hs.diag);
        assert_eq!(h.sup, hs.sup);
        assert_eq!(h.cols, hs.cols);
        assert_eq!(h.corner, hs.corner);
    }

    #[test]
    fn scaled_operator_is_complex_symmetric() {
        let cfg = ModelConfig {
            grid: build_grid(1.0, 21.0, 99).unwrap(),
            ..ModelConfig::default().with_lambda(0.2)
        };
        let a = complex_scale(&cfg, 0.3).unwrap().to_dense();
        let m = a.as_matrix();
        assert!(m.sub(&m.transpose()).max_abs() < 1e-14);
        let x: Vec<C64> = (0..m.rows()).map(|i| C64::new(1.0, i as f64)).collect();
        let y = complex_scale(&cfg, 0.3).unwrap().apply(&x);
        let y2 = m.mul_vec(&x);
        assert!(y.iter().zip(&y2).all(|(p, q)| (p - q).norm() < 1e-10));
        let bump = ModelConfig {
            couplings: vec![Profile::parse("bump:5,2", 0.5).unwrap()],
            ..cfg
        };
        assert!(complex_scale(&bump, 0.3).is_err());
        assert_eq!(dot(&x[..1], &x[..1]).re, 1.0);
    }

    #[test]
    fn validation() {
        let mut cfg = ModelConfig::default();
        cfg.k = 0.2;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.levels = vec![2.0, 5.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.discrete_block = vec![0.0, 1.0, 0.0, 0.0];
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::free_channel(ModelConfig::default().grid).validate().is_ok());
    }
}
