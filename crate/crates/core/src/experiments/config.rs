//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExperimentKind;
use crate::error::{Error, Result};
use crate::fgr::geometric_grid;
use crate::model::{build_grid, Grid, ModelConfig, Profile};
use crate::mourre::{ScalingRegime, I_HALF_WIDTH, J_HALF_WIDTH};

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "experiment",
    "c",
    "r_max",
    "n",
    "k",
    "levels",
    "coupling",
    "potential",
    "discrete_block",
    "delta",
    "lambda",
    "upsilon",
    "upsilons",
    "theta_scaling",
    "eps_grid",
    "lambda_grid",
    "a",
    "b",
    "j",
    "i",
    "j0",
    "eps",
    "theta",
    "profiles",
    "control",
    "fgr_r_max",
    "seed",
    "out",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    /// Momentum cap of the conjugate operator.
    pub upsilon: f64,
    /// Sweep of `upsilon` where an experiment compares caps.
    pub upsilons: Vec<f64>,
    /// Complex-scaling angle.
    pub theta_scaling: f64,
    pub eps_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// `eps = lambda^a`, `theta = lambda^b`.
    pub a: f64,
    pub b: f64,
    pub j: (f64, f64),
    pub i: (f64, f64),
    /// Starting interval of the shrinking loop.
    pub j0: (f64, f64),
    /// Fixed `eps`, `theta` of the virial check.
    pub eps: f64,
    pub theta: f64,
    /// Coupling profiles compared by the decay experiment.
    pub profiles: Vec<Profile>,
    /// Coupling of the negative control, where the experiment has one.
    pub control: Profile,
    /// Box length for the reference width of the resonance experiment.
    pub fgr_r_max: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn grid_default(kind: ExperimentKind) -> Grid {
    let (r_max, n) = match kind {
        ExperimentKind::FgrSweep => (2001.0, 39999),
        ExperimentKind::ReducedGap | ExperimentKind::FinalGap => (2001.0, 19999),
        ExperimentKind::BlockOrders => (3001.0, 29999),
        _ => (201.0, 3999),
    };
    build_grid(1.0, r_max, n).expect("default grids are valid")
}

impl ExperimentConfig {
    /// Defaults for `kind`, before any file overrides.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ModelConfig::default();
        let grid = grid_default(kind);
        let k = base.k;
        let mut model = ModelConfig { grid, ..base };
        if kind == ExperimentKind::MourreGap || kind == ExperimentKind::CommutatorLeading {
            model = ModelConfig::free_channel(grid);
        }
        if kind == ExperimentKind::Virial {
            model.lambda = 0.05;
        }
        let lambda_grid = match kind {
            ExperimentKind::FgrSweep => vec![1e-1, 1e-3],
            ExperimentKind::BlockOrders => geometric_grid(3e-4, 3e-3, 4),
            ExperimentKind::FinalGap => vec![1e-2, 3e-3, 1e-3],
            ExperimentKind::ResonanceWidth => geometric_grid(0.005, 0.05, 6),
            _ => vec![model.lambda],
        };
        let j = if kind == ExperimentKind::MourreGap {
            (0.8, 1.2)
        } else {
            (k - J_HALF_WIDTH, k + J_HALF_WIDTH)
        };
        ExperimentConfig {
            experiment: kind,
            model,
            upsilon: 8.0,
            upsilons: vec![4.0, 8.0, 16.0],
            theta_scaling: 0.3,
            eps_grid: geometric_grid(1e-2, 1e-1, 8),
            lambda_grid,
            a: 2.0 / 3.0,
            b: 1.0 / 3.0,
            j,
            i: (k - I_HALF_WIDTH, k + I_HALF_WIDTH),
            j0: (k - 0.7, k + 0.7),
            eps: 0.1,
            theta: 0.3,
            profiles: vec![
                Profile::Power { exponent: 1.5 },
                Profile::Power { exponent: 1.0 },
                Profile::Constant { value: 1.0 },
            ],
            control: if kind == ExperimentKind::FinalGap {
                Profile::Node { rate: 1.0, alpha: None }
            } else {
                Profile::Zero
            },
            fgr_r_max: 2001.0,
            seed: 0,
            out: None,
        }
    }

    pub fn regime(&self) -> Result<ScalingRegime> {
        ScalingRegime::new(self.a, self.b).map_err(|_| {
            Error::param("b", format!("need 0 < b < a < 1, got a = {}, b = {}", self.a, self.b))
        })
    }

    /// Checks that do not need any assembly.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let kind = self.experiment;
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.is_empty() {
                return Err(Error::param(name, "grid must be nonempty"));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::param(name, "values must be positive and finite"));
            }
            Ok(())
        };
        positive("eps_grid", &self.eps_grid)?;
        positive("upsilons", &self.upsilons)?;
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("lambda_grid", "grid must be nonempty and finite"));
        }
        if !(self.upsilon.is_finite() && self.upsilon > 0.0) {
            return Err(Error::param("upsilon", "must be positive"));
        }
        if !(self.theta_scaling > 0.1 && self.theta_scaling < 0.6) {
            return Err(Error::param("theta_scaling", "must lie in (0.1, 0.6)"));
        }
        for (name, iv) in [("j", self.j), ("i", self.i), ("j0", self.j0)] {
            if !(iv.0.is_finite() && iv.1.is_finite() && iv.0 < iv.1) {
                return Err(Error::param(name, "interval needs lo < hi"));
            }
        }
        if !(self.eps > 0.0 && self.theta > 0.0 && self.eps.is_finite() && self.theta.is_finite()) {
            return Err(Error::param("eps", "eps and theta must be positive"));
        }
        if !(self.fgr_r_max.is_finite() && self.fgr_r_max > self.model.grid.c) {
            return Err(Error::param("fgr_r_max", "must exceed c"));
        }
        match kind {
            ExperimentKind::FinalGap | ExperimentKind::BlockOrders => {
                self.regime()?;
                if self.lambda_grid.len() < 2 {
                    return Err(Error::param("lambda_grid", "need at least two couplings"));
                }
                if self.lambda_grid.iter().any(|&l| l == 0.0 || l.abs() >= 1.0) {
                    return Err(Error::param("lambda_grid", "need 0 < |lambda| < 1"));
                }
            }
            ExperimentKind::ResonanceWidth => {
                if self.lambda_grid.iter().any(|&l| !(l > 0.0 && l <= 0.1)) {
                    return Err(Error::param("lambda_grid", "values must lie in (0, 0.1]"));
                }
            }
            ExperimentKind::DecayThreshold => {
                if self.profiles.is_empty() {
                    return Err(Error::param("profiles", "need at least one profile"));
                }
                if self.model.n_levels() == 0 {
                    return Err(Error::param("levels", "the decay proxy needs a coupled level"));
                }
            }
            _ => {}
        }
        if kind == ExperimentKind::FinalGap && !(self.j.0 <= self.i.0 && self.i.1 <= self.j.1) {
            return Err(Error::param("i", "I must lie inside J"));
        }
        Ok(())
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64> {
    e.value.trim().parse::<f64>().map_err(|err| Error::ConfigParse {
        line: e.line,
        reason: format!("`{key}`: {err}"),
    })
}

fn parse_list(key: &str, e: &Entry) -> Result<Vec<f64>> {
    let v = e.value.trim();
    if let Some(args) = v.strip_prefix("geom:") {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let bad = |reason: String| Error::ConfigParse { line: e.line, reason: format!("`{key}`: {reason}") };
        if parts.len() != 3 {
            return Err(bad("expected geom:lo,hi,count".into()));
        }
        let lo: f64 = parts[0].parse().map_err(|err| bad(format!("{err}")))?;
        let hi: f64 = parts[1].parse().map_err(|err| bad(format!("{err}")))?;
        let count: usize = parts[2].parse().map_err(|err| bad(format!("{err}")))?;
        if !(lo > 0.0 && hi > 0.0 && count > 0) {
            return Err(Error::param(key, "geometric grid needs positive bounds and count"));
        }
        return Ok(geometric_grid(lo, hi, count));
    }
    if v.is_empty() {
        return Ok(vec![]);
    }
    v.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|err| Error::ConfigParse {
                line: e.line,
                reason: format!("`{key}`: {err}"),
            })
        })
        .collect()
}

fn parse_interval(key: &str, e: &Entry) -> Result<(f64, f64)> {
    let v = parse_list(key, e)?;
    if v.len() != 2 {
        return Err(Error::ConfigParse {
            line: e.line,
            reason: format!("`{key}`: expected `lo, hi`"),
        });
    }
    Ok((v[0], v[1]))
}

fn parse_profiles(key: &str, e: &Entry, delta: f64) -> Result<Vec<Profile>> {
    let v = e.value.trim();
    if v.is_empty() {
        return Ok(vec![]);
    }
    v.split(';')
        .map(|t| {
            Profile::parse(t, delta).map_err(|err| Error::ConfigParse {
                line: e.line,
                reason: format!("`{key}`: {err}"),
            })
        })
        .collect()
}

/// Parse config text. Absent keys take the experiment's defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            reason: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::ConfigParse {
                line,
                reason: format!("unknown key `{key}`"),
            });
        }
        if entries.contains_key(key) {
            return Err(Error::ConfigParse {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    let name = entries
        .get("experiment")
        .ok_or_else(|| Error::param("experiment", "missing"))?;
    let kind = ExperimentKind::from_name(&name.value).ok_or_else(|| Error::ConfigParse {
        line: name.line,
        reason: format!("unknown experiment `{}`", name.value),
    })?;
    let mut cfg = ExperimentConfig::defaults(kind);
    let get = |k: &str| entries.get(k);

    let h = cfg.model.grid.h;
    let c = get("c").map(|e| parse_f64("c", e)).transpose()?.unwrap_or(cfg.model.grid.c);
    let r_max = get("r_max").map(|e| parse_f64("r_max", e)).transpose()?.unwrap_or(cfg.model.grid.r_max);
    let n = match get("n") {
        Some(e) => e.value.parse::<usize>().map_err(|err| Error::ConfigParse {
            line: e.line,
            reason: format!("`n`: {err}"),
        })?,
        None => (((r_max - c) / h).round() as usize).saturating_sub(1),
    };
    cfg.model.grid = build_grid(c, r_max, n)?;

    if let Some(e) = get("delta") {
        cfg.model.delta = parse_f64("delta", e)?;
    }
    let delta = cfg.model.delta;
    if let Some(e) = get("k") {
        cfg.model.k = parse_f64("k", e)?;
    }
    if let Some(e) = get("levels") {
        cfg.model.levels = parse_list("levels", e)?;
        let m = cfg.model.levels.len();
        if get("coupling").is_none() {
            cfg.model.couplings.truncate(m);
            if m > 0 && cfg.model.couplings.is_empty() {
                cfg.model.couplings = ModelConfig::default().couplings;
                cfg.model.couplings.truncate(m);
            }
        }
        if get("discrete_block").is_none() {
            cfg.model.discrete_block = vec![0.0; m * m];
        }
    }
    if let Some(e) = get("coupling") {
        cfg.model.couplings = parse_profiles("coupling", e, delta)?;
    }
    if let Some(e) = get("potential") {
        let mut p = parse_profiles("potential", e, delta)?;
        if p.len() != 1 {
            return Err(Error::ConfigParse {
                line: e.line,
                reason: "`potential`: expected one profile".into(),
            });
        }
        cfg.model.potential = p.remove(0);
    }
    if let Some(e) = get("discrete_block") {
        cfg.model.discrete_block = parse_list("discrete_block", e)?;
    }
    if let Some(e) = get("lambda") {
        cfg.model.lambda = parse_f64("lambda", e)?;
        if get("lambda_grid").is_none() && kind == ExperimentKind::Virial {
            cfg.lambda_grid = vec![cfg.model.lambda];
        }
    }
    // Intervals centered on k follow an overridden k.
    if get("k").is_some() {
        let k = cfg.model.k;
        if kind != ExperimentKind::MourreGap {
            cfg.j = (k - J_HALF_WIDTH, k + J_HALF_WIDTH);
        }
        cfg.i = (k - I_HALF_WIDTH, k + I_HALF_WIDTH);
        cfg.j0 = (k - 0.7, k + 0.7);
    }
    for (key, slot) in [
        ("upsilon", &mut cfg.upsilon),
        ("theta_scaling", &mut cfg.theta_scaling),
        ("a", &mut cfg.a),
        ("b", &mut cfg.b),
        ("eps", &mut cfg.eps),
        ("theta", &mut cfg.theta),
        ("fgr_r_max", &mut cfg.fgr_r_max),
    ] {
        if let Some(e) = get(key) {
            *slot = parse_f64(key, e)?;
        }
    }
    for (key, slot) in [
        ("upsilons", &mut cfg.upsilons),
        ("eps_grid", &mut cfg.eps_grid),
        ("lambda_grid", &mut cfg.lambda_grid),
    ] {
        if let Some(e) = get(key) {
            *slot = parse_list(key, e)?;
        }
    }
    for (key, slot) in [("j", &mut cfg.j), ("i", &mut cfg.i), ("j0", &mut cfg.j0)] {
        if let Some(e) = get(key) {
            *slot = parse_interval(key, e)?;
        }
    }
    if let Some(e) = get("profiles") {
        cfg.profiles = parse_profiles("profiles", e, delta)?;
    }
    if let Some(e) = get("control") {
        let mut p = parse_profiles("control", e, delta)?;
        if p.len() != 1 {
            return Err(Error::ConfigParse {
                line: e.line,
                reason: "`control`: expected one profile".into(),
            });
        }
        cfg.control = p.remove(0);
    }
    if let Some(e) = get("seed") {
        cfg.seed = e.value.parse::<u64>().map_err(|err| Error::ConfigParse {
            line: e.line,
            reason: format!("`seed`: {err}"),
        })?;
    }
    if let Some(e) = get("out") {
        cfg.out = Some(PathBuf::from(&e.value));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_model_defaults() {
        let cfg = parse_config("experiment = fgr-sweep\n").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FgrSweep);
        let d = ModelConfig::default();
        assert_eq!(cfg.model.k, d.k);
        assert_eq!(cfg.model.levels, d.levels);
        assert_eq!(cfg.model.couplings, d.couplings);
        assert_eq!(cfg.eps_grid.len(), 8);
    }

    #[test]
    fn inverted_exponents_are_rejected_for_scaled_experiments() {
        for name in ["final-gap", "block-orders"] {
            let err = parse_config(&format!("experiment = {name}\na = 0.9\nb = 0.95\n")).unwrap_err();
            match err {
                Error::InvalidParameter { name, .. } => assert_eq!(name, "b"),
                other => panic!("unexpected {other}"),
            }
        }
        assert!(parse_config("experiment = virial\na = 0.9\nb = 0.95\n").is_ok());
    }

    #[test]
    fn unknown_keys_and_bad_lines_carry_line_numbers() {
        match parse_config("experiment = virial\n# note\nfoo = 1\n").unwrap_err() {
            Error::ConfigParse { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("foo"));
            }
            other => panic!("unexpected {other}"),
        }
        match parse_config("experiment = virial\nupsilon 8\n").unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        match parse_config("experiment = virial\nupsilon = x\n").unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            parse_config("experiment = nope\n").unwrap_err(),
            Error::ConfigParse { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("experiment = virial\nseed = 1\nseed = 2\n").unwrap_err(),
            Error::ConfigParse { line: 3, .. }
        ));
    }

    #[test]
    fn overrides_lists_and_profiles() {
        let text = "experiment = decay-threshold # trailing\n\
                    r_max = 101\n\
                    profiles = power:2; const:0.5\n\
                    lambda_grid = geom:0.01,0.04,3\n\
                    j = 0.9, 1.1\n\
                    seed = 7\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.grid.r_max, 101.0);
        assert!((cfg.model.grid.h - 0.05).abs() < 1e-12);
        assert_eq!(cfg.profiles, vec![Profile::Power { exponent: 2.0 }, Profile::Constant { value: 0.5 }]);
        assert_eq!(cfg.lambda_grid.len(), 3);
        assert!((cfg.lambda_grid[2] - 0.04).abs() < 1e-15);
        assert_eq!(cfg.j, (0.9, 1.1));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn validation_names_the_key() {
        let cases = [
            ("experiment = virial\neps_grid = \n", "eps_grid"),
            ("experiment = virial\nj = 1.2, 0.8\n", "j"),
            ("experiment = resonance-width\nlambda_grid = 0.5\n", "lambda_grid"),
            ("experiment = virial\ntheta_scaling = 0.9\n", "theta_scaling"),
            ("experiment = final-gap\ni = 0.5, 1.5\n", "i"),
            ("experiment = virial\nk = 0.1\n", "k"),
        ];
        for (text, key) in cases {
            match parse_config(text).unwrap_err() {
                Error::InvalidParameter { name, .. } => assert_eq!(name, key, "{text}"),
                other => panic!("{text}: unexpected {other}"),
            }
        }
    }

    #[test]
    fn levels_resize_the_discrete_block() {
        let cfg = parse_config("experiment = virial\nlevels = 1\n").unwrap();
        assert_eq!(cfg.model.discrete_block, vec![0.0]);
        assert_eq!(cfg.model.couplings.len(), 1);
        let free = parse_config("experiment = mourre-gap\n").unwrap();
        assert_eq!(free.model.n_levels(), 0);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_config(Path::new("/nonexistent/dir/cfg.txt")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
