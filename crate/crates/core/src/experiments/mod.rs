//! Experiment registry, config files, runners and reports.

mod config;
mod report;
mod runners;

use serde::{Deserialize, Serialize};

pub use config::{load_config, parse_config, ExperimentConfig, KEYS};
pub use report::{write_report, Check, Fitted, RunReport};
pub use runners::expected_verdict;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FgrSweep,
    MourreGap,
    ReducedGap,
    BlockOrders,
    FinalGap,
    Virial,
    ResonanceWidth,
    DecayThreshold,
    CommutatorLeading,
}

/// Every registered experiment.
pub const REGISTRY: [ExperimentKind; 9] = [
    ExperimentKind::FgrSweep,
    ExperimentKind::MourreGap,
    ExperimentKind::ReducedGap,
    ExperimentKind::BlockOrders,
    ExperimentKind::FinalGap,
    ExperimentKind::Virial,
    ExperimentKind::ResonanceWidth,
    ExperimentKind::DecayThreshold,
    ExperimentKind::CommutatorLeading,
];

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FgrSweep => "fgr-sweep",
            ExperimentKind::MourreGap => "mourre-gap",
            ExperimentKind::ReducedGap => "reduced-gap",
            ExperimentKind::BlockOrders => "block-orders",
            ExperimentKind::FinalGap => "final-gap",
            ExperimentKind::Virial => "virial",
            ExperimentKind::ResonanceWidth => "resonance-width",
            ExperimentKind::DecayThreshold => "decay-threshold",
            ExperimentKind::CommutatorLeading => "commutator-leading",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        REGISTRY.into_iter().find(|k| k.name() == name.trim())
    }

    /// The relation the experiment checks, stated in the notation of the
    /// model.
    pub fn statement(self) -> &'static str {
        match self {
            ExperimentKind::FgrSweep => {
                "eps P V F_eps V P -> Gamma P as eps -> 0 with Gamma = xi/(1+xi^2)^2 for the exponential coupling, \
                 and P [H_lambda, i lambda B_eps] P = lambda^2 P V F_eps V P"
            }
            ExperimentKind::MourreGap => {
                "E_J [H_0, i S] E_J >= 4(inf J - 1/4) E_J + compact on the free channel, with eps_Upsilon -> 0"
            }
            ExperimentKind::ReducedGap => {
                "E_J [H_0, i Pbar S Pbar] E_J >= c E_J on ran Pbar after shrinking J around k"
            }
            ExperimentKind::BlockOrders => {
                "[H_lambda, i S_hat] split over Pbar and P: pieces of order lambda, lambda theta eps^(-1/2), \
                 lambda^2 theta eps^(-3/2) with eps = lambda^a, theta = lambda^b"
            }
            ExperimentKind::FinalGap => {
                "E_I [H_lambda, i S_hat] E_I >= c lambda^2 theta eps^(-1) E_I for |lambda| << eps << theta << 1, \
                 lost when the coupling misses the channel mode at k"
            }
            ExperimentKind::Virial => "<f, [H_lambda, i S_hat] f> = 0 for every eigenpair (kappa, f) of H_lambda",
            ExperimentKind::ResonanceWidth => {
                "the embedded eigenvalue becomes a resonance with Im zeta = -lambda^2 Gamma + o(lambda^2), \
                 independent of the scaling angle"
            }
            ExperimentKind::DecayThreshold => {
                "compactness of [V, i S_hat](H_0 + 1)^(-1) needs decay of the coupling faster than (1+r)^(-1)"
            }
            ExperimentKind::CommutatorLeading => {
                "[d^2/dr^2, chi (M R + R M) chi] = 4 chi D M chi + remainder, with the remainder small \
                 where chi = 1 and momenta are below Upsilon/2"
            }
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Name and statement of every registered experiment.
pub fn coverage_table() -> Vec<(&'static str, &'static str)> {
    REGISTRY.iter().map(|k| (k.name(), k.statement())).collect()
}

/// Run the configured experiment. Module errors are captured in the
/// report rather than returned.
pub fn run_experiment(config: &ExperimentConfig) -> RunReport {
    let start = std::time::Instant::now();
    let mut report = RunReport::new(
        config.experiment.name(),
        config.experiment.statement(),
        serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        runners::columns(config.experiment),
    );
    let outcome = config.validate().and_then(|_| runners::run(config, &mut report));
    if let Err(e) = outcome {
        report.fail(&e);
    }
    report.wall_clock_s = start.elapsed().as_secs_f64();
    report.finalize();
    report
}

/// Cap the global thread pool from `MOURRE_LAB_THREADS`, if set.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("MOURRE_LAB_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::param("MOURRE_LAB_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_round_trip_and_cover_statements() {
        for k in REGISTRY {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(k));
            assert!(!k.statement().is_empty());
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!(coverage_table().len(), REGISTRY.len());
        assert_eq!(ExperimentKind::from_name("foo"), None);
    }

    #[test]
    fn invalid_config_becomes_a_failed_report() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Virial);
        cfg.eps_grid.clear();
        let r = run_experiment(&cfg);
        assert!(!r.passed);
        assert!(r.error.as_deref().unwrap().contains("eps_grid"));
    }
}
