use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use gibbslab::diagnostics::{box_around, Thresholds};
use gibbslab::disorder::{parse_probability, ProductLaw, SingleSiteLaw};
use gibbslab::gibbs::BoundaryCondition;
use gibbslab::identities::Battery;
use gibbslab::lattice::closure;
use gibbslab::mc::{LocalObservable, McConfig};
use gibbslab::{Bond, DisorderConfig, DisorderedPotential, Site, Symbol, Volume};

use crate::error::CliError;

/// Parses a TOML spec, or JSON when the file ends in `.json` or the text
/// starts with `{`.
pub fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("spec file {} is empty", path.display())));
    }
    let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Spec {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
            CliError::Spec { path: path.display().to_string(), line, column, message: e.message().to_string() }
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Invalid(message.into())
}

pub fn need<'a, T>(value: &'a Option<T>, key: &str, probe: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| invalid(format!("probe `{probe}` needs the key `{key}`")))
}

/// A probability as a number or a string such as `"1/3"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Number(f64),
    Text(String),
}

impl Prob {
    fn value(&self) -> Result<f64, CliError> {
        match self {
            Prob::Number(p) => Ok(*p),
            Prob::Text(t) => Ok(parse_probability(t)?),
        }
    }
}

fn probs(ps: &[Prob]) -> Result<Vec<f64>, CliError> {
    ps.iter().map(Prob::value).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Rfim { dim: usize, coupling: f64, field: f64 },
    RandomCoupling { dim: usize, couplings: Vec<f64> },
    Grising { dim: usize, coupling: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<DisorderedPotential, CliError> {
        Ok(match self {
            ModelSpec::Rfim { dim, coupling, field } => DisorderedPotential::rfim(*dim, *coupling, *field)?,
            ModelSpec::RandomCoupling { dim, couplings } => DisorderedPotential::random_coupling(*dim, couplings)?,
            ModelSpec::Grising { dim, coupling } => DisorderedPotential::grising(*dim, *coupling)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Rfim { dim, .. } | ModelSpec::RandomCoupling { dim, .. } | ModelSpec::Grising { dim, .. } => *dim,
        }
    }

    /// Fair coin fields, fair occupation, or uniform couplings per bond.
    fn default_law(&self) -> Result<SingleSiteLaw, CliError> {
        Ok(match self {
            ModelSpec::Rfim { .. } => SingleSiteLaw::bernoulli_pm(0.5)?,
            ModelSpec::Grising { .. } => SingleSiteLaw::occupation(0.5)?,
            ModelSpec::RandomCoupling { dim, couplings } => {
                let p = 1.0 / couplings.len() as f64;
                let per_bond = SingleSiteLaw::new(couplings.iter().map(|c| Symbol::scalar(*c)).collect(), vec![p; couplings.len()])?;
                SingleSiteLaw::tuple_product(&per_bond, *dim)?
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    BernoulliPm { p: Prob },
    Occupation { p: Prob },
    ThreeValued { p0: Prob },
    Symbols { values: Vec<Symbol>, probs: Vec<Prob> },
    /// Independent couplings on the `dim` bonds owned by a site.
    PerBond { values: Vec<f64>, probs: Vec<Prob> },
}

pub fn build_law(model: &ModelSpec, law: &Option<LawSpec>) -> Result<SingleSiteLaw, CliError> {
    let Some(law) = law else { return model.default_law() };
    Ok(match law {
        LawSpec::BernoulliPm { p } => SingleSiteLaw::bernoulli_pm(p.value()?)?,
        LawSpec::Occupation { p } => SingleSiteLaw::occupation(p.value()?)?,
        LawSpec::ThreeValued { p0 } => SingleSiteLaw::three_valued_symmetric(p0.value()?)?,
        LawSpec::Symbols { values, probs: ps } => SingleSiteLaw::new(values.clone(), probs(ps)?)?,
        LawSpec::PerBond { values, probs: ps } => {
            let per_bond = SingleSiteLaw::new(values.iter().map(|v| Symbol::scalar(*v)).collect(), probs(ps)?)?;
            SingleSiteLaw::tuple_product(&per_bond, model.dim())?
        }
    })
}

/// Base disorder: one symbol everywhere, or draw `sample` of the product law
/// under the run seed.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DisorderSpec {
    Constant(Symbol),
    Sample(u64),
}

impl DisorderSpec {
    pub fn build(&self, region: &Volume, law: &SingleSiteLaw, seed: u64) -> DisorderConfig {
        match self {
            DisorderSpec::Constant(s) => DisorderConfig::constant(region, s.clone()),
            DisorderSpec::Sample(index) => ProductLaw::new(region.clone(), law.clone()).sample_one(seed, *index),
        }
    }
}

pub fn base_disorder(
    spec: &Option<DisorderSpec>,
    extent: &Volume,
    law: &SingleSiteLaw,
    seed: u64,
) -> Result<DisorderConfig, CliError> {
    let region = closure(extent, 1)?;
    Ok(match spec {
        Some(d) => d.build(&region, law, seed),
        None => DisorderConfig::constant(&region, law.alphabet()[0].clone()),
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum VolumeSpec {
    Literal(String),
    Sites(Vec<Vec<i64>>),
}

impl VolumeSpec {
    pub fn build(&self, dim: usize) -> Result<Volume, CliError> {
        let v = match self {
            VolumeSpec::Literal(t) => Volume::parse_literal(t)?,
            VolumeSpec::Sites(cs) => Volume::new(dim, cs.iter().map(|c| Site::new(c.clone())))?,
        };
        if v.dim() != dim {
            return Err(invalid(format!("volume has dimension {}, the model {dim}", v.dim())));
        }
        Ok(v)
    }
}

/// Radii of cubes around the site of interest, or explicit volumes.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    Radii(Vec<i64>),
    Volumes(Vec<VolumeSpec>),
}

impl LadderSpec {
    pub fn build(&self, centre: &Site, dim: usize) -> Result<Vec<Volume>, CliError> {
        let out = match self {
            LadderSpec::Radii(rs) => {
                if let Some(r) = rs.iter().find(|r| **r < 0) {
                    return Err(invalid(format!("negative ladder radius {r}")));
                }
                rs.iter().map(|r| box_around(centre, *r)).collect()
            }
            LadderSpec::Volumes(vs) => vs.iter().map(|v| v.build(dim)).collect::<Result<Vec<_>, _>>()?,
        };
        if out.is_empty() {
            return Err(invalid("empty ladder"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub delta: f64,
    pub good: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        let th = Thresholds::default();
        ThresholdSpec { delta: th.delta, good: th.good }
    }
}

impl ThresholdSpec {
    pub fn build(&self) -> Thresholds {
        Thresholds { delta: self.delta, good: self.good }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default = "default_family_samples")]
    pub samples: usize,
    pub seed: Option<u64>,
}

fn default_family_samples() -> usize {
    16
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    #[serde(rename = "rfim_theorem1")]
    RfimTheorem1,
    #[serde(rename = "r_vx")]
    RVx,
    BadnessGap,
    Grising,
    Randombond,
    #[serde(rename = "theorem2")]
    Theorem2,
    #[serde(rename = "prop4")]
    Prop4,
}

impl Probe {
    pub fn name(self) -> &'static str {
        match self {
            Probe::RfimTheorem1 => "rfim_theorem1",
            Probe::RVx => "r_vx",
            Probe::BadnessGap => "badness_gap",
            Probe::Grising => "grising",
            Probe::Randombond => "randombond",
            Probe::Theorem2 => "theorem2",
            Probe::Prop4 => "prop4",
        }
    }
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::Plus
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub probe: Probe,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub law: Option<LawSpec>,
    /// Site of interest; the origin when omitted.
    pub site: Option<Site>,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition,
    pub eta: Option<DisorderSpec>,
    pub ladder: Option<LadderSpec>,
    /// `(eta1, eta2)` at the site of interest.
    pub symbols: Option<(Symbol, Symbol)>,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    /// Required verdict; a mismatch is a verdict failure.
    pub expect: Option<String>,
    /// Outer volumes for `r_vx`.
    pub outer: Option<LadderSpec>,
    pub family: Option<FamilySpec>,
    pub annulus_width: Option<u32>,
    pub outer_width: Option<u32>,
    pub tail_width: Option<u32>,
    pub tails: Option<usize>,
    /// Annulus symbols: `(plus, minus)` for `badness_gap`, `(plain, bar)` for `prop4`.
    pub annuli: Option<(Symbol, Symbol)>,
    pub bridge_site: Option<Site>,
    pub bridge_bond: Option<Bond>,
    pub bond: Option<Bond>,
    pub window: Option<VolumeSpec>,
    pub probed: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    pub battery: Battery,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    pub site: Site,
    #[serde(default = "default_bc")]
    pub upper: BoundaryCondition,
    #[serde(default = "minus_bc")]
    pub lower: BoundaryCondition,
}

fn minus_bc() -> BoundaryCondition {
    BoundaryCondition::Minus
}

fn default_sigmas() -> f64 {
    4.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub model: ModelSpec,
    pub law: Option<LawSpec>,
    pub volume: VolumeSpec,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition,
    pub eta: Option<DisorderSpec>,
    #[serde(default)]
    pub observables: Vec<LocalObservable>,
    pub gap: Option<GapSpec>,
    #[serde(default)]
    pub mc: McConfig,
    /// Compare every estimate with exact enumeration.
    #[serde(default)]
    pub cross_check: bool,
    #[serde(default = "default_sigmas")]
    pub tolerance_sigmas: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_errors_carry_positions() {
        let text = "probe = \"r_vx\"\nseed = \"x\"\n";
        match parse::<ScanSpec>(Path::new("s.toml"), text) {
            Err(CliError::Spec { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_is_accepted() {
        let text = r#"{"battery": {"instances": 3}}"#;
        let s: IdentitySpec = parse(Path::new("s.json"), text).unwrap();
        assert_eq!(s.battery.instances, 3);
        assert!(matches!(parse::<IdentitySpec>(Path::new("s.json"), "{\n \"battery\": 3}"), Err(CliError::Spec { line: 2, .. })));
    }

    #[test]
    fn ladders_from_radii() {
        let l = LadderSpec::Radii(vec![0, 1]).build(&Site::origin(2), 2).unwrap();
        assert_eq!(l[1], Volume::cube(2, -1, 1));
        assert!(LadderSpec::Radii(vec![]).build(&Site::origin(2), 2).is_err());
    }

    #[test]
    fn fractional_probabilities() {
        let m = ModelSpec::Rfim { dim: 1, coupling: 1.0, field: 1.0 };
        let law = build_law(&m, &Some(LawSpec::BernoulliPm { p: Prob::Text("1/4".into()) })).unwrap();
        assert_eq!(law.probs(), &[0.75, 0.25]);
    }
}
