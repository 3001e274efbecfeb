//! Run configuration: a flat JSON file overlaid by command-line values,
//! resolved into validated [`Settings`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::experiments::{COMPARISON_TUPLES, DEFAULT_SEED, DEFAULT_T_GRID};
use crate::functional::{BetaVariant, FunctionalConfig};

/// Every option is optional; missing values fall back to per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub l: Option<Vec<usize>>,
    pub lambda: Option<f64>,
    /// `sphere`, `product` or `both`.
    pub model: Option<String>,
    pub quad_order: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub beta_variant: Option<String>,
    pub out: Option<PathBuf>,
    pub cases: Option<usize>,
    pub strict_paper: Option<bool>,
    pub tolerances: Option<BTreeMap<String, f64>>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        let base = &mut self;
        overlay_fields!(
            base, top, command, n, k, l, lambda, model, quad_order, t_grid, trials, epsilon, seed, beta_variant, out,
            cases, strict_paper
        );
        if let Some(t) = top.tolerances {
            base.tolerances.get_or_insert_with(BTreeMap::new).extend(t);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Sphere,
    Product,
    Both,
}

/// Tolerances used by the suites; each can be overridden by name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub lemmas: f64,
    pub integrated: f64,
    pub critical: f64,
    pub second_sphere: f64,
    pub second_product: f64,
    pub scaling: f64,
    pub sign: f64,
    pub obata: f64,
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lemmas: 1e-8,
            integrated: 1e-6,
            critical: 1e-7,
            second_sphere: 1e-4,
            second_product: 1e-6,
            scaling: 1e-10,
            sign: 1e-8,
            obata: 1e-7,
            quadrature: 1e-8,
        }
    }
}

impl Tolerances {
    fn apply(&mut self, overrides: &BTreeMap<String, f64>) -> Result<()> {
        for (key, &v) in overrides {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::Config(format!("tolerance `{key}` must be positive")));
            }
            let slot = match key.as_str() {
                "lemmas" => &mut self.lemmas,
                "integrated" => &mut self.integrated,
                "critical" => &mut self.critical,
                "second_sphere" => &mut self.second_sphere,
                "second_product" => &mut self.second_product,
                "scaling" => &mut self.scaling,
                "sign" => &mut self.sign,
                "obata" => &mut self.obata,
                "quadrature" => &mut self.quadrature,
                other => return Err(LabError::Config(format!("unknown tolerance `{other}`"))),
            };
            *slot = v;
        }
        Ok(())
    }
}

/// Fully resolved options for one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub command: String,
    /// Functional exponents `(n, k, l)` for the functional and comparison suites.
    pub tuples: Vec<(usize, usize, usize)>,
    /// Dimensions, and `k`/`l` ranges, for the counterexample scan.
    pub dims: Vec<usize>,
    pub k_range: Option<Vec<usize>>,
    pub l_range: Option<Vec<usize>>,
    pub lambda: f64,
    pub model: ModelChoice,
    pub quad_order: Option<usize>,
    pub t_grid: Vec<f64>,
    pub trials: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub beta_variant: BetaVariant,
    pub out: PathBuf,
    pub cases: usize,
    pub strict_paper: bool,
    pub tolerances: Tolerances,
}

pub const MIN_COMPARISON_TRIALS: usize = 100;

impl Settings {
    pub fn resolve(cfg: RunConfig) -> Result<Self> {
        let command = cfg
            .command
            .clone()
            .ok_or_else(|| LabError::Config("no command given".into()))?;
        let lambda = cfg.lambda.unwrap_or(1.0);
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(LabError::Config("lambda must be finite and non-zero".into()));
        }
        let beta_variant = BetaVariant::parse(cfg.beta_variant.as_deref().unwrap_or("n-2l"))?;
        let model = match cfg.model.as_deref().unwrap_or("both") {
            "sphere" => ModelChoice::Sphere,
            "product" => ModelChoice::Product,
            "both" => ModelChoice::Both,
            other => return Err(LabError::Config(format!("unknown model `{other}` (sphere, product, both)"))),
        };
        let mut tolerances = Tolerances::default();
        if let Some(t) = &cfg.tolerances {
            tolerances.apply(t)?;
        }
        let tuples = match (&cfg.n, &cfg.k, &cfg.l) {
            (None, None, None) => default_tuples(&command),
            (Some(ns), Some(ks), Some(ls)) => {
                let mut out = Vec::new();
                for &n in ns {
                    for &k in ks {
                        for &l in ls {
                            out.push((n, k, l));
                        }
                    }
                }
                out
            }
            _ if command == "counterexample" => Vec::new(),
            (Some(ns), None, None) => default_tuples(&command)
                .into_iter()
                .filter(|(n, _, _)| ns.contains(n))
                .collect(),
            _ => return Err(LabError::Config("give n, k and l together (or n alone)".into())),
        };
        if matches!(command.as_str(), "verify-functional" | "compare-sphere") {
            if tuples.is_empty() {
                return Err(LabError::Config("no (n, k, l) tuples selected".into()));
            }
            for &(n, k, l) in &tuples {
                FunctionalConfig::new(n, k, l, lambda, beta_variant, 1.0)
                    .map_err(|e| LabError::Config(format!("(n={n}, k={k}, l={l}): {e}")))?;
            }
        }
        let dims = cfg.n.clone().unwrap_or_else(|| match command.as_str() {
            "counterexample" => vec![4],
            _ => vec![3, 4],
        });
        if command == "counterexample" {
            for &n in &dims {
                if n < 4 || n % 2 == 1 {
                    return Err(LabError::Config(format!("counterexample needs even n >= 4 (got {n})")));
                }
            }
            if !(lambda > 0.0) {
                return Err(LabError::Config("counterexample needs lambda > 0".into()));
            }
        }
        let t_grid = cfg.t_grid.clone().unwrap_or_else(|| DEFAULT_T_GRID.to_vec());
        if t_grid.iter().any(|t| !t.is_finite() || t.abs() >= 0.5) {
            return Err(LabError::Config("t-grid values must satisfy |t| < 0.5".into()));
        }
        let trials = cfg.trials.unwrap_or(MIN_COMPARISON_TRIALS);
        if command == "compare-sphere" && trials < MIN_COMPARISON_TRIALS {
            return Err(LabError::Config(format!("compare-sphere needs at least {MIN_COMPARISON_TRIALS} trials")));
        }
        let epsilon = cfg.epsilon.unwrap_or(1e-2);
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(LabError::Config("epsilon must lie in (0, 0.1]".into()));
        }
        if let Some(q) = cfg.quad_order {
            if !(8..=40).contains(&q) {
                return Err(LabError::Config("quad-order must lie in 8..=40".into()));
            }
        }
        let cases = cfg.cases.unwrap_or(20);
        if cases == 0 {
            return Err(LabError::Config("cases must be positive".into()));
        }
        Ok(Self {
            command,
            tuples,
            dims,
            k_range: cfg.k.clone(),
            l_range: cfg.l.clone(),
            lambda,
            model,
            quad_order: cfg.quad_order,
            t_grid,
            trials,
            epsilon,
            seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            beta_variant,
            out: cfg.out.clone().unwrap_or_else(|| PathBuf::from("sigmalab-out")),
            cases,
            strict_paper: cfg.strict_paper.unwrap_or(false),
            tolerances,
        })
    }

    /// Command defaults with no overrides.
    pub fn for_command(command: &str) -> Result<Self> {
        Self::resolve(RunConfig {
            command: Some(command.into()),
            ..Default::default()
        })
    }
}

fn default_tuples(command: &str) -> Vec<(usize, usize, usize)> {
    let mut t = COMPARISON_TUPLES.to_vec();
    if command == "verify-functional" {
        t.extend([(3, 1, 0), (4, 1, 0), (4, 3, 0), (4, 4, 1), (6, 2, 1), (6, 3, 2)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json_str(r#"{"command": "selftest", "bogus": 1}"#).is_err());
        let cfg = RunConfig::from_json_str(r#"{"command": "selftest", "seed": 7, "t_grid": [0.1]}"#).unwrap();
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn flags_win_and_tuples_validate() {
        let file = RunConfig::from_json_str(r#"{"command": "verify-functional", "seed": 7, "lambda": 2.0}"#).unwrap();
        let flags = RunConfig {
            seed: Some(9),
            n: Some(vec![4]),
            k: Some(vec![2]),
            l: Some(vec![0, 1]),
            ..Default::default()
        };
        let s = Settings::resolve(file.clone().overlay(flags)).unwrap();
        assert_eq!((s.seed, s.lambda), (9, 2.0));
        assert_eq!(s.tuples, vec![(4, 2, 0), (4, 2, 1)]);
        let bad = RunConfig {
            n: Some(vec![4]),
            k: Some(vec![3]),
            l: Some(vec![2]),
            ..Default::default()
        };
        assert!(matches!(Settings::resolve(file.overlay(bad)), Err(LabError::Config(_))));
    }

    #[test]
    fn tolerance_overrides() {
        let cfg = RunConfig::from_json_str(r#"{"command": "selftest", "tolerances": {"lemmas": 1e-9}}"#).unwrap();
        assert_eq!(Settings::resolve(cfg).unwrap().tolerances.lemmas, 1e-9);
        let cfg = RunConfig::from_json_str(r#"{"command": "selftest", "tolerances": {"nope": 1e-9}}"#).unwrap();
        assert!(Settings::resolve(cfg).is_err());
    }
}
