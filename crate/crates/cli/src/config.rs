use std::fmt;

use serde::{Deserialize, Serialize};
use sofic_pressure::measure::{MarkovMeasure, ProductMeasure, SignedCylinderMeasure};
use sofic_pressure::pressure::{CellMethod, CellSettings, Schedule, SoficFamily, TailRule, DEFAULT_NODE_BUDGET};
use sofic_pressure::{
    FiniteGroupTable, FiniteSubset, GroupElement, GroupSpec, Mode, Observable, Pattern, PseudometricSpec, Subshift,
};

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Pressure,
    Entropy,
    Classical,
    Variational,
    Properties,
    Tile,
    SoficCheck,
    Membership,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Pressure => "pressure",
            Kind::Entropy => "entropy",
            Kind::Classical => "classical",
            Kind::Variational => "variational",
            Kind::Properties => "properties",
            Kind::Tile => "tile",
            Kind::SoficCheck => "sofic-check",
            Kind::Membership => "membership",
        }
    }
}

/// A group element as written in the config: an integer on the line or
/// the canonical text form (`"1,0"`, `"aB"`, `"e"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Offset {
    Int(i64),
    Text(String),
}

impl Offset {
    fn parse(&self, group: &GroupSpec, field: &str) -> Result<GroupElement, ConfigError> {
        let text = match self {
            Offset::Int(n) => n.to_string(),
            Offset::Text(t) => t.clone(),
        };
        group.parse_element(&text).map_err(|e| ConfigError::new(field, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    /// 0 lets the pool pick.
    #[serde(default)]
    pub workers: usize,
    pub group: GroupConfig,
    pub sofic: SoficConfig,
    pub subshift: SubshiftConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableConfig>,
    #[serde(default)]
    pub metric: MetricConfig,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub properties: Option<PropertiesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiling: Option<TilingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// `integers`, `lattice`, `free` or `finite`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoficConfig {
    /// `cyclic`, `torus`, `random` or `regular`.
    pub family: String,
    pub d: Vec<usize>,
    #[serde(default = "one")]
    pub domain_radius: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubshiftConfig {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<PatternConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub offsets: Vec<Offset>,
    pub symbols: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    /// Window in canonical order; the table is row-major over its patterns.
    pub offsets: Vec<Offset>,
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// `coordinate` or `weighted`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: "coordinate".into(),
            depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub f_radius: Vec<usize>,
    pub delta: Vec<f64>,
    pub eps: Vec<f64>,
    /// `half` or `last:N`.
    #[serde(default = "half")]
    pub tail: String,
    /// `delta2` ties the allowance to `δ²`, otherwise a number in `[0, 1]`.
    #[serde(default = "delta2")]
    pub sft_tolerance: String,
    #[serde(default = "model")]
    pub mode: String,
    #[serde(default = "auto")]
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

fn half() -> String {
    "half".into()
}
fn delta2() -> String {
    "delta2".into()
}
fn model() -> String {
    "model".into()
}
fn auto() -> String {
    "auto".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markov: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cylinder: Vec<CylinderConfig>,
    /// Families searched by `variational`: `product`, `markov`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<String>,
    /// Random members per family drawn by `variational`.
    #[serde(default)]
    pub samples: usize,
    #[serde(default = "search_budget")]
    pub search_budget: usize,
    #[serde(default = "variational_tolerance")]
    pub tolerance: f64,
    /// Radius of the cylinder window for `membership`.
    #[serde(default = "one")]
    pub window_radius: usize,
    #[serde(default = "scales")]
    pub scales: Vec<u32>,
    /// Add `f` to the single-site indicators in the test family.
    #[serde(default = "yes")]
    pub include_potential: bool,
}

fn search_budget() -> usize {
    200
}
fn variational_tolerance() -> f64 {
    5e-3
}
fn scales() -> Vec<u32> {
    vec![1, 2, 4, 8]
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderConfig {
    pub offsets: Vec<Offset>,
    pub weights: Vec<f64>,
    /// Whether the domination check is expected to pass.
    #[serde(default = "yes")]
    pub expect_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesConfig {
    pub g: ObservableConfig,
    /// Element `s` of the cocycle comparison; defaults to the first generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<Offset>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilingConfig {
    pub shapes: Vec<Vec<Offset>>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Random transpositions applied to the first generator before tiling.
    #[serde(default)]
    pub corrupt: usize,
}

fn default_eta() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "two")]
    pub radius: usize,
    #[serde(default = "default_bound")]
    pub bound: f64,
    /// Seeds `seed, seed + 1, …` for the random family.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_required")]
    pub required_fraction: f64,
}

fn two() -> usize {
    2
}
fn default_bound() -> f64 {
    0.05
}
fn default_seeds() -> u64 {
    100
}
fn default_required() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub n_max: usize,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let field = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "(document)".into(),
        };
        ConfigError::new(field, e.message())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn to_text(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

fn nonempty<T>(v: &[T], field: &str) -> Result<(), ConfigError> {
    if v.is_empty() {
        Err(ConfigError::new(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn positive(v: &[f64], field: &str) -> Result<(), ConfigError> {
    nonempty(v, field)?;
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(ConfigError::new(format!("{field}[{i}]"), format!("must be positive and finite (got {x})")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let group = self.group()?;
        nonempty(&self.sofic.d, "sofic.d")?;
        if let Some(i) = self.sofic.d.iter().position(|&d| d == 0) {
            return Err(ConfigError::new(format!("sofic.d[{i}]"), "must be at least 1"));
        }
        self.family()?;
        nonempty(&self.schedule.f_radius, "schedule.f_radius")?;
        positive(&self.schedule.delta, "schedule.delta")?;
        positive(&self.schedule.eps, "schedule.eps")?;
        self.tail()?;
        self.settings()?;
        let x = self.subshift(&group)?;
        self.observable(&group, x.k())?;
        let needs = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::new(section, format!("section required for kind `{}`", self.kind.as_str())))
            }
        };
        match self.kind {
            Kind::Classical => {
                needs(self.classical.is_some(), "classical")?;
                if !group.is_amenable() {
                    return Err(ConfigError::new("group.kind", "classical pressure needs an amenable group"));
                }
                if self.classical.as_ref().unwrap().n_max == 0 {
                    return Err(ConfigError::new("classical.n_max", "must be at least 1"));
                }
            }
            Kind::Entropy => {
                needs(self.measure.is_some(), "measure")?;
                self.entropy_measure(&group, x.k())?;
            }
            Kind::Variational => {
                needs(self.measure.is_some(), "measure")?;
                let m = self.measure.as_ref().unwrap();
                nonempty(&m.families, "measure.families")?;
                for (i, f) in m.families.iter().enumerate() {
                    if !matches!(f.as_str(), "product" | "markov") {
                        return Err(ConfigError::new(format!("measure.families[{i}]"), format!("unknown family `{f}`")));
                    }
                    if f == "markov" && group != GroupSpec::IntegerLine {
                        return Err(ConfigError::new(format!("measure.families[{i}]"), "Markov measures need the integers"));
                    }
                }
                if m.search_budget == 0 {
                    return Err(ConfigError::new("measure.search_budget", "must be at least 1"));
                }
                if !(m.tolerance >= 0.0) {
                    return Err(ConfigError::new("measure.tolerance", "must be nonnegative"));
                }
            }
            Kind::Membership => {
                needs(self.measure.is_some(), "measure")?;
                let m = self.measure.as_ref().unwrap();
                nonempty(&m.scales, "measure.scales")?;
                self.membership_measures(&group, x.k())?;
            }
            Kind::Properties => {
                needs(self.properties.is_some(), "properties")?;
                let p = self.properties.as_ref().unwrap();
                self.observable_from(&group, x.k(), &p.g, "properties.g")?;
                self.cocycle_element(&group)?;
            }
            Kind::Tile => {
                needs(self.tiling.is_some(), "tiling")?;
                let t = self.tiling.as_ref().unwrap();
                self.shapes(&group)?;
                if !(0.0..1.0).contains(&t.tau) {
                    return Err(ConfigError::new("tiling.tau", "must lie in [0, 1)"));
                }
                if !(t.eta >= 0.0 && t.eta < 1.0) {
                    return Err(ConfigError::new("tiling.eta", "must lie in [0, 1)"));
                }
            }
            Kind::SoficCheck => {
                needs(self.check.is_some(), "check")?;
                let c = self.check.as_ref().unwrap();
                if !(c.bound >= 0.0) {
                    return Err(ConfigError::new("check.bound", "must be nonnegative"));
                }
                if c.seeds == 0 {
                    return Err(ConfigError::new("check.seeds", "must be at least 1"));
                }
                if !(0.0..=1.0).contains(&c.required_fraction) {
                    return Err(ConfigError::new("check.required_fraction", "must lie in [0, 1]"));
                }
            }
            Kind::Pressure => {}
        }
        Ok(())
    }

    pub fn group(&self) -> Result<GroupSpec, ConfigError> {
        let rank = || self.group.rank.ok_or_else(|| ConfigError::new("group.rank", "required for this group kind"));
        match self.group.kind.as_str() {
            "integers" => Ok(GroupSpec::IntegerLine),
            "lattice" => GroupSpec::lattice(rank()?).map_err(|e| ConfigError::new("group.rank", e)),
            "free" => GroupSpec::free(rank()?).map_err(|e| ConfigError::new("group.rank", e)),
            "finite" => {
                let table = self.group.table.clone().ok_or_else(|| ConfigError::new("group.table", "required for finite groups"))?;
                Ok(GroupSpec::FiniteGroup(FiniteGroupTable::new(table).map_err(|e| ConfigError::new("group.table", e))?))
            }
            other => Err(ConfigError::new("group.kind", format!("unknown group kind `{other}`"))),
        }
    }

    pub fn family(&self) -> Result<SoficFamily, ConfigError> {
        match self.sofic.family.as_str() {
            "cyclic" => Ok(SoficFamily::Cyclic),
            "torus" => match self.group()? {
                GroupSpec::IntegerLattice { rank } => Ok(SoficFamily::Torus { rank }),
                _ => Err(ConfigError::new("sofic.family", "torus approximations need a lattice group")),
            },
            "random" => Ok(SoficFamily::Random { seed: self.seed }),
            "regular" => Ok(SoficFamily::Regular),
            other => Err(ConfigError::new("sofic.family", format!("unknown family `{other}`"))),
        }
    }

    pub fn tail(&self) -> Result<TailRule, ConfigError> {
        let t = self.schedule.tail.as_str();
        if t == "half" {
            return Ok(TailRule::Half);
        }
        match t.strip_prefix("last:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(TailRule::Last(n)),
            _ => Err(ConfigError::new("schedule.tail", format!("expected `half` or `last:N` (got `{t}`)"))),
        }
    }

    pub fn metric(&self) -> Result<PseudometricSpec, ConfigError> {
        match self.metric.kind.as_str() {
            "coordinate" => Ok(PseudometricSpec::CoordinateE),
            "weighted" => match self.metric.depth {
                Some(m) if m > 0 => Ok(PseudometricSpec::WeightedWord(m)),
                _ => Err(ConfigError::new("metric.depth", "weighted metrics need a depth of at least 1")),
            },
            other => Err(ConfigError::new("metric.kind", format!("unknown metric `{other}`"))),
        }
    }

    pub fn settings(&self) -> Result<CellSettings, ConfigError> {
        let s = &self.schedule;
        let mode = match s.mode.as_str() {
            "model" => Mode::Model,
            "generic" => Mode::Generic,
            other => return Err(ConfigError::new("schedule.mode", format!("unknown mode `{other}`"))),
        };
        let method = match s.method.as_str() {
            "auto" => CellMethod::Auto,
            "enumerate" => CellMethod::Enumerate,
            "trace" => CellMethod::TransferTrace,
            other => return Err(ConfigError::new("schedule.method", format!("unknown method `{other}`"))),
        };
        let sft_tolerance = match s.sft_tolerance.as_str() {
            "delta2" => None,
            t => match t.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
                _ => {
                    return Err(ConfigError::new(
                        "schedule.sft_tolerance",
                        format!("expected `delta2` or a number in [0, 1] (got `{t}`)"),
                    ))
                }
            },
        };
        if s.budget == Some(0) {
            return Err(ConfigError::new("schedule.budget", "must be at least 1"));
        }
        Ok(CellSettings {
            mode,
            metric: self.metric()?,
            sft_tolerance,
            method,
            budget: s.budget.unwrap_or(DEFAULT_NODE_BUDGET),
        })
    }

    pub fn schedule(&self) -> Result<Schedule, ConfigError> {
        let mut ds = self.sofic.d.clone();
        ds.sort_unstable();
        ds.dedup();
        let mut s = Schedule::grid(&ds, self.sofic.domain_radius, &self.schedule.f_radius, &self.schedule.delta, &self.schedule.eps);
        s.tail = self.tail()?;
        Ok(s)
    }

    pub fn subshift(&self, group: &GroupSpec) -> Result<Subshift, ConfigError> {
        let mut patterns = Vec::new();
        for (i, p) in self.subshift.forbidden.iter().enumerate() {
            let field = format!("subshift.forbidden[{i}]");
            if p.offsets.len() != p.symbols.len() {
                return Err(ConfigError::new(field, "offsets and symbols differ in length"));
            }
            let mut pairs = Vec::new();
            for o in &p.offsets {
                pairs.push(o.parse(group, &format!("{field}.offsets"))?);
            }
            let mut zipped: Vec<(GroupElement, u8)> = pairs.into_iter().zip(p.symbols.iter().copied()).collect();
            zipped.sort();
            if zipped.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(ConfigError::new(format!("{field}.offsets"), "repeated offset"));
            }
            let shape = FiniteSubset::new(zipped.iter().map(|(g, _)| g.clone()));
            let symbols = zipped.iter().map(|(_, a)| *a).collect();
            patterns.push(Pattern::new(shape, symbols).map_err(|e| ConfigError::new(&field, e))?);
        }
        Subshift::new(self.subshift.k, patterns).map_err(|e| ConfigError::new("subshift", e))
    }

    fn window(&self, group: &GroupSpec, offsets: &[Offset], field: &str) -> Result<FiniteSubset, ConfigError> {
        let elems: Vec<GroupElement> = offsets
            .iter()
            .map(|o| o.parse(group, field))
            .collect::<Result<_, _>>()?;
        let window = FiniteSubset::new(elems.clone());
        if window.as_slice() != elems.as_slice() {
            let canon: Vec<String> = window.iter().map(|g| g.to_string()).collect();
            return Err(ConfigError::new(field, format!("must be distinct and in canonical order [{}]", canon.join(", "))));
        }
        Ok(window)
    }

    fn observable_from(&self, group: &GroupSpec, k: usize, o: &ObservableConfig, field: &str) -> Result<Observable<f64>, ConfigError> {
        let window = self.window(group, &o.offsets, &format!("{field}.offsets"))?;
        if let Some(i) = o.table.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::new(format!("{field}.table[{i}]"), "must be finite"));
        }
        Observable::new(k, window, o.table.clone()).map_err(|e| ConfigError::new(format!("{field}.table"), e))
    }

    /// The potential; zero when the section is absent.
    pub fn observable(&self, group: &GroupSpec, k: usize) -> Result<Observable<f64>, ConfigError> {
        match &self.observable {
            Some(o) => self.observable_from(group, k, o, "observable"),
            None => Observable::zero(group, k).map_err(|e| ConfigError::new("subshift.k", e)),
        }
    }

    pub fn properties_g(&self, group: &GroupSpec, k: usize) -> Result<Observable<f64>, ConfigError> {
        let p = self.properties.as_ref().ok_or_else(|| ConfigError::new("properties", "section missing"))?;
        self.observable_from(group, k, &p.g, "properties.g")
    }

    pub fn cocycle_element(&self, group: &GroupSpec) -> Result<GroupElement, ConfigError> {
        match self.properties.as_ref().and_then(|p| p.cocycle.as_ref()) {
            Some(o) => o.parse(group, "properties.cocycle"),
            None => group
                .generators()
                .into_iter()
                .next()
                .ok_or_else(|| ConfigError::new("properties.cocycle", "the group has no generators")),
        }
    }

    pub fn shapes(&self, group: &GroupSpec) -> Result<Vec<FiniteSubset>, ConfigError> {
        let t = self.tiling.as_ref().ok_or_else(|| ConfigError::new("tiling", "section missing"))?;
        nonempty(&t.shapes, "tiling.shapes")?;
        t.shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let field = format!("tiling.shapes[{i}]");
                nonempty(s, &field)?;
                let elems: Vec<GroupElement> = s.iter().map(|o| o.parse(group, &field)).collect::<Result<_, _>>()?;
                Ok(FiniteSubset::new(elems))
            })
            .collect()
    }

    /// The single measure an `entropy` run conditions on.
    pub fn entropy_measure(&self, group: &GroupSpec, k: usize) -> Result<sofic_pressure::Measure<f64>, ConfigError> {
        let m = self.measure.as_ref().ok_or_else(|| ConfigError::new("measure", "section missing"))?;
        match (m.product.as_slice(), m.markov.as_slice()) {
            ([p], []) => Ok(sofic_pressure::Measure::Product(self.product(p, k, "measure.product[0]")?)),
            ([], [p]) => {
                if *group != GroupSpec::IntegerLine {
                    return Err(ConfigError::new("measure.markov", "Markov measures need the integers"));
                }
                Ok(sofic_pressure::Measure::Markov(self.markov(p, k, "measure.markov[0]")?))
            }
            _ => Err(ConfigError::new("measure", "entropy needs exactly one product or Markov measure")),
        }
    }

    fn product(&self, p: &[f64], k: usize, field: &str) -> Result<ProductMeasure<f64>, ConfigError> {
        if p.len() != k {
            return Err(ConfigError::new(field, format!("needs {k} probabilities")));
        }
        ProductMeasure::new(p.to_vec()).map_err(|e| ConfigError::new(field, e))
    }

    fn markov(&self, p: &[Vec<f64>], k: usize, field: &str) -> Result<MarkovMeasure<f64>, ConfigError> {
        if p.len() != k || p.iter().any(|r| r.len() != k) {
            return Err(ConfigError::new(field, format!("needs a {k}x{k} matrix")));
        }
        MarkovMeasure::new(p.to_vec()).map_err(|e| ConfigError::new(field, e))
    }

    /// `(id, measure, expected to pass)` for every measure in the section.
    pub fn membership_measures(
        &self,
        group: &GroupSpec,
        k: usize,
    ) -> Result<Vec<(String, SignedCylinderMeasure<f64>, bool)>, ConfigError> {
        let m = self.measure.as_ref().ok_or_else(|| ConfigError::new("measure", "section missing"))?;
        let window = group.ball(m.window_radius);
        let mut out = Vec::new();
        for (i, p) in m.product.iter().enumerate() {
            let field = format!("measure.product[{i}]");
            let mu = SignedCylinderMeasure::from_product(&self.product(p, k, &field)?, window.clone())
                .map_err(|e| ConfigError::new(&field, e))?;
            out.push((format!("product{i}"), mu, true));
        }
        for (i, p) in m.markov.iter().enumerate() {
            let field = format!("measure.markov[{i}]");
            if *group != GroupSpec::IntegerLine {
                return Err(ConfigError::new(field, "Markov measures need the integers"));
            }
            let mu = SignedCylinderMeasure::from_markov(&self.markov(p, k, &field)?, window.clone())
                .map_err(|e| ConfigError::new(&field, e))?;
            out.push((format!("markov{i}"), mu, true));
        }
        for (i, c) in m.cylinder.iter().enumerate() {
            let field = format!("measure.cylinder[{i}]");
            let w = self.window(group, &c.offsets, &format!("{field}.offsets"))?;
            let mu = SignedCylinderMeasure::new(k, w, c.weights.clone()).map_err(|e| ConfigError::new(format!("{field}.weights"), e))?;
            out.push((format!("cylinder{i}"), mu, c.expect_pass));
        }
        if out.is_empty() {
            return Err(ConfigError::new("measure", "no measures given"));
        }
        Ok(out)
    }
}
