//! JSON run configuration: model, contract, named bases with role flags,
//! numerics, simulation and output settings. Parsing validates the schema
//! and reports every violation with its field path; `build` resolves the
//! named bases into engine objects and prices the contract.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{pure_premium, AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumPattern, PremiumRates};
use crate::error::{EngineError, Result};
use crate::grid::TimeGrid;
use crate::intensity::{IntensityFamily, IntensityFunction};
use crate::timefn::TimeFunction;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub contract: ContractConfig,
    pub bases: Vec<BasisConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub states: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractConfig {
    pub term: f64,
    #[serde(default)]
    pub transition_benefits: Vec<TransitionBenefitConfig>,
    #[serde(default)]
    pub maturity_benefits: Vec<MaturityBenefitConfig>,
    /// Premium shapes per payer state; states absent here pay nothing.
    pub premium_shapes: Vec<PremiumShapeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionBenefitConfig {
    /// 1-based state labels, matching the human-facing 1..m convention.
    pub from: usize,
    pub to: usize,
    pub benefit: TimeFunction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaturityBenefitConfig {
    pub state: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PremiumShapeConfig {
    pub state: usize,
    pub shape: TimeFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Premium,
    Valuation,
    Accumulation,
    Experience,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisConfig {
    pub name: String,
    pub roles: Vec<Role>,
    pub delta: f64,
    pub intensities: Vec<IntensityEntryConfig>,
    /// Required when the basis carries the valuation role.
    #[serde(default)]
    pub valuation_premium: Option<ValuationPremiumRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityEntryConfig {
    pub from: usize,
    pub to: usize,
    pub function: IntensityFunction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ValuationPremiumRule {
    /// `π^L = π*(B^L)`: net premium valuation.
    Net,
    /// `π^L = P`: gross premium valuation.
    Gross,
    /// Explicit scale on the contract's premium pattern.
    Explicit { value: f64 },
    /// `π^L = π*(B')` for a named declared basis.
    PureOf { basis: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericsConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub classification_tol: f64,
}

fn default_step() -> f64 {
    TimeGrid::DEFAULT_STEP
}

fn default_tol() -> f64 {
    1e-6
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            step: default_step(),
            classification_tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
}

fn default_paths() -> usize {
    10_000
}

fn default_seed() -> u64 {
    1
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            paths: default_paths(),
            master_seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_digits")]
    pub significant_digits: usize,
}

fn default_dir() -> String {
    "out".to_string()
}

fn default_digits() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_dir(),
            significant_digits: default_digits(),
        }
    }
}

/// Engine objects resolved from a validated configuration.
pub struct ModelSet {
    pub states: usize,
    pub contract: Contract,
    pub grid: TimeGrid,
    pub premium_basis_name: String,
    pub premium_basis: TechnicalBasis,
    pub experience_name: String,
    pub experience: TechnicalBasis,
    pub accumulations: Vec<(String, TechnicalBasis)>,
    pub valuations: Vec<(String, AugmentedValuationBasis)>,
    /// Contractual premium rates `P = π*(B^P)·shape`.
    pub contractual: PremiumRates,
    pub contractual_scale: f64,
    pub classification_tol: f64,
    pub simulation: SimulationConfig,
    pub output: OutputConfig,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| EngineError::Config(format!("{e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Schema validation; collects every violation with its field path.
fn validate(cfg: &RunConfig) -> Result<()> {
    let mut violations: Vec<String> = Vec::new();
    let m = cfg.model.states;
    if m < 2 {
        violations.push(format!("model.states: need at least 2 states, got {m}"));
    }
    if !(cfg.contract.term > 0.0) {
        violations.push(format!(
            "contract.term: must be positive, got {}",
            cfg.contract.term
        ));
    }
    let state_ok = |s: usize| (1..=m).contains(&s);
    for (i, b) in cfg.contract.transition_benefits.iter().enumerate() {
        if !state_ok(b.from) || !state_ok(b.to) || b.from == b.to {
            violations.push(format!(
                "contract.transition_benefits[{i}]: invalid pair ({}, {})",
                b.from, b.to
            ));
        }
    }
    for (i, b) in cfg.contract.maturity_benefits.iter().enumerate() {
        if !state_ok(b.state) {
            violations.push(format!(
                "contract.maturity_benefits[{i}].state: {} out of 1..={m}",
                b.state
            ));
        }
    }
    if cfg.contract.premium_shapes.is_empty() {
        violations.push("contract.premium_shapes: at least one payer state required".into());
    }
    for (i, p) in cfg.contract.premium_shapes.iter().enumerate() {
        if !state_ok(p.state) {
            violations.push(format!(
                "contract.premium_shapes[{i}].state: {} out of 1..={m}",
                p.state
            ));
        }
    }

    let mut names = BTreeMap::new();
    for (i, b) in cfg.bases.iter().enumerate() {
        if let Some(prev) = names.insert(b.name.clone(), i) {
            violations.push(format!(
                "bases[{i}].name: duplicate name {:?} (also bases[{prev}])",
                b.name
            ));
        }
        for (j, e) in b.intensities.iter().enumerate() {
            if !state_ok(e.from) || !state_ok(e.to) || e.from == e.to {
                violations.push(format!(
                    "bases[{i}].intensities[{j}]: invalid pair ({}, {})",
                    e.from, e.to
                ));
            }
            if let Err(err) = e.function.validate() {
                violations.push(format!("bases[{i}].intensities[{j}].function: {err}"));
            }
        }
        if b.roles.contains(&Role::Valuation) && b.valuation_premium.is_none() {
            violations.push(format!(
                "bases[{i}] ({:?}): valuation role requires a valuation_premium rule",
                b.name
            ));
        }
        if let Some(ValuationPremiumRule::PureOf { basis }) = &b.valuation_premium {
            if !cfg.bases.iter().any(|other| &other.name == basis) {
                violations.push(format!(
                    "bases[{i}].valuation_premium.basis: unknown basis {basis:?}"
                ));
            }
        }
    }
    let premium_flagged: Vec<&str> = cfg
        .bases
        .iter()
        .filter(|b| b.roles.contains(&Role::Premium))
        .map(|b| b.name.as_str())
        .collect();
    if premium_flagged.len() != 1 {
        violations.push(format!(
            "bases: exactly one premium-flagged basis required, found {:?}",
            premium_flagged
        ));
    }
    let experience_flagged: Vec<&str> = cfg
        .bases
        .iter()
        .filter(|b| b.roles.contains(&Role::Experience))
        .map(|b| b.name.as_str())
        .collect();
    if experience_flagged.len() != 1 {
        violations.push(format!(
            "bases: exactly one experience-flagged basis required, found {:?}",
            experience_flagged
        ));
    }
    if !(cfg.numerics.step > 0.0) {
        violations.push(format!(
            "numerics.step: must be positive, got {}",
            cfg.numerics.step
        ));
    }
    if cfg.simulation.paths == 0 {
        violations.push("simulation.paths: must be at least 1".into());
    }
    if cfg.output.significant_digits == 0 || cfg.output.significant_digits > 17 {
        violations.push(format!(
            "output.significant_digits: expected 1..=17, got {}",
            cfg.output.significant_digits
        ));
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(EngineError::Config(violations.join("; ")))
    }
}

fn build_family(entries: &[IntensityEntryConfig]) -> IntensityFamily {
    let mut fam = IntensityFamily::new();
    for e in entries {
        fam.insert(e.from - 1, e.to - 1, e.function.clone());
    }
    fam
}

impl RunConfig {
    /// Builds one named technical basis from the configuration.
    pub fn build_basis(&self, name: &str) -> Result<TechnicalBasis> {
        let b = self
            .bases
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| EngineError::Config(format!("unknown basis {name:?}")))?;
        Ok(TechnicalBasis::new(b.delta, build_family(&b.intensities)))
    }

    /// Resolves the configuration into engine objects: grid, contract,
    /// priced contractual premium, and every flagged basis.
    pub fn build(&self) -> Result<ModelSet> {
        let m = self.model.states;
        let grid = TimeGrid::new(self.contract.term, self.numerics.step)?;

        let mut benefits = BTreeMap::new();
        for b in &self.contract.transition_benefits {
            benefits.insert((b.from - 1, b.to - 1), b.benefit.clone());
        }
        let mut maturity = vec![0.0; m];
        for b in &self.contract.maturity_benefits {
            maturity[b.state - 1] = b.value;
        }
        let mut shapes = vec![TimeFunction::zero(); m];
        for p in &self.contract.premium_shapes {
            shapes[p.state - 1] = p.shape.clone();
        }
        let pattern = PremiumPattern::new(shapes)?;
        let contract = Contract::new(self.contract.term, m, benefits, maturity, pattern)?;

        let mut technical: BTreeMap<String, TechnicalBasis> = BTreeMap::new();
        for b in &self.bases {
            technical.insert(
                b.name.clone(),
                TechnicalBasis::new(b.delta, build_family(&b.intensities)),
            );
        }
        for basis in technical.values() {
            basis.intensities.validate(m)?;
        }

        let premium_cfg = self
            .bases
            .iter()
            .find(|b| b.roles.contains(&Role::Premium))
            .expect("validated");
        let premium_basis = technical[&premium_cfg.name].clone();
        let contractual_scale = pure_premium(&premium_basis, &contract, &grid)?.scale;
        let contractual = PremiumRates::from_pattern(contract.premium_pattern(), contractual_scale);

        let experience_cfg = self
            .bases
            .iter()
            .find(|b| b.roles.contains(&Role::Experience))
            .expect("validated");
        let experience = technical[&experience_cfg.name].clone();

        let mut accumulations = Vec::new();
        let mut valuations = Vec::new();
        for b in &self.bases {
            if b.roles.contains(&Role::Accumulation) {
                accumulations.push((b.name.clone(), technical[&b.name].clone()));
            }
            if b.roles.contains(&Role::Valuation) {
                let basis = technical[&b.name].clone();
                let scale = match b.valuation_premium.as_ref().expect("validated") {
                    ValuationPremiumRule::Net => pure_premium(&basis, &contract, &grid)?.scale,
                    ValuationPremiumRule::Gross => contractual_scale,
                    ValuationPremiumRule::Explicit { value } => *value,
                    ValuationPremiumRule::PureOf { basis: name } => {
                        pure_premium(&technical[name], &contract, &grid)?.scale
                    }
                };
                valuations.push((
                    b.name.clone(),
                    AugmentedValuationBasis::new(
                        basis,
                        PremiumRates::from_pattern(contract.premium_pattern(), scale),
                    ),
                ));
            }
        }

        Ok(ModelSet {
            states: m,
            contract,
            grid,
            premium_basis_name: premium_cfg.name.clone(),
            premium_basis,
            experience_name: experience_cfg.name.clone(),
            experience,
            accumulations,
            valuations,
            contractual,
            contractual_scale,
            classification_tol: self.numerics.classification_tol,
            simulation: self.simulation.clone(),
            output: self.output.clone(),
        })
    }
}
