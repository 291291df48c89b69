//! TOML run configuration and its resolution into a [`Scenario`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nhstab_core::jets::{Field, Monomial, PolynomialField};
use nhstab_core::liealg::IndexSets;
use nhstab_core::resonance::search_kappa;
use nhstab_core::simulator::{AxisBound, ControlSystem, DomainGuard, DriftModel};
use nhstab_core::systems::{self, SCENARIO_NAMES};
use nhstab_core::{AmplitudeRule, Scenario};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Largest multiplier tried when an inline system omits its kappas.
pub const KAPPA_SEARCH_BOUND: i64 = 64;

/// A real number, also accepted as a string multiple of pi (`"3pi/2"`,
/// `"-pi"`, `"pi/4"`, `"0.5*pi"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

/// Parses a finite real or a `[coef][*]pi[/den]` expression.
pub fn parse_real(text: &str) -> Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase().replace('π', "pi");
    let bad = || format!("`{text}` is not a number or a multiple of pi");
    if let Ok(v) = s.parse::<f64>() {
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (s.as_str(), None),
    };
    let coef = num.strip_suffix("pi").ok_or_else(bad)?;
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let den = match den {
        None => 1.0,
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
    };
    let value = coef * PI / den;
    if den == 0.0 || !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string such as \"3pi/2\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                parse_real(v).map(Real).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

fn reals(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

fn wrap(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Practical,
    Exponential,
}

/// Polynomial system given directly in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    #[serde(default = "inline_name")]
    pub name: String,
    pub n: usize,
    /// One list of monomials per control field.
    pub fields: Vec<Vec<Monomial>>,
    pub s1: Vec<usize>,
    #[serde(default)]
    pub s2: Vec<(usize, usize)>,
    #[serde(default)]
    pub s3: Vec<(usize, usize, usize)>,
    #[serde(default)]
    pub drift: DriftModel,
    #[serde(default)]
    pub domain: Vec<AxisBound>,
    /// Rank check points; defaults to `x0` and `x_star`.
    #[serde(default)]
    pub rank_samples: Vec<Vec<Real>>,
}

fn inline_name() -> String {
    "inline".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trajectory: String,
    pub report: String,
    /// Empty disables the plot.
    pub svg: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { trajectory: "trajectory.csv".into(), report: "report.csv".into(), svg: "trajectory.svg".into() }
    }
}

/// Grid for `sweep`; an empty axis falls back to the run value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilon: Vec<Real>,
    pub gamma: Vec<Real>,
}

/// Contents of a config file. Every parameter is optional and overrides the
/// named scenario's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa3: Option<Vec<(i64, i64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_rule: Option<AmplitudeRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acknowledge_resonance: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<Certification>,
    /// Target ball radius for the practical certificate; defaults to the
    /// measured tail radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDef>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// A config resolved against its scenario and checked for consistency.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub substeps: Option<usize>,
    pub certify: Certification,
    pub rho: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses config text and applies `key=value` overrides (dotted keys address
/// nested tables).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| config_err(e.message().to_string()))
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key is present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut current = table;
    for p in parents {
        let entry = current.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| config_err(format!("`{p}` in `{key}` is not a table")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Config listing every parameter of a built-in scenario.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            scenario: Some(s.name.clone()),
            epsilon: Some(Real(s.epsilon)),
            gamma: Some(Real(s.gamma)),
            horizon: Some(Real(s.horizon)),
            substeps: None,
            x0: Some(wrap(&s.x0)),
            x_star: Some(wrap(&s.x_star)),
            kappa2: Some(s.kappa2.clone()),
            kappa3: Some(s.kappa3.clone()),
            amplitude_rule: Some(s.amplitude_rule),
            acknowledge_resonance: Some(s.acknowledge_resonance),
            certify: Some(default_certification(&s.name)),
            rho: None,
            system: None,
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mut s = match (&self.scenario, &self.system) {
            (Some(_), Some(_)) => return Err(config_err("give either `scenario` or `[system]`, not both")),
            (None, None) => {
                return Err(config_err(format!(
                    "no scenario given; set `scenario` to one of {} or describe a `[system]`",
                    SCENARIO_NAMES.join(", ")
                )))
            }
            (Some(name), None) => systems::by_name(name).ok_or_else(|| {
                config_err(format!("unknown scenario `{name}`; expected one of {}", SCENARIO_NAMES.join(", ")))
            })?,
            (None, Some(def)) => self.inline_scenario(def)?,
        };

        if let Some(v) = self.epsilon {
            s.epsilon = v.0;
        }
        if let Some(v) = self.gamma {
            s.gamma = v.0;
        }
        if let Some(v) = self.horizon {
            s.horizon = v.0;
        }
        if let Some(v) = &self.x0 {
            s.x0 = reals(v);
        }
        if let Some(v) = &self.x_star {
            s.x_star = reals(v);
        }
        if let Some(v) = &self.kappa2 {
            s.kappa2 = v.clone();
        }
        if let Some(v) = &self.kappa3 {
            s.kappa3 = v.clone();
        }
        if let Some(v) = self.amplitude_rule {
            s.amplitude_rule = v;
        }
        if let Some(v) = self.acknowledge_resonance {
            s.acknowledge_resonance = v;
        }
        check_scenario(&s)?;

        if self.substeps == Some(0) {
            return Err(config_err("substeps must be at least 1"));
        }
        let rho = self.rho.map(|r| r.0);
        if rho.is_some_and(|r| r < 0.0) {
            return Err(config_err("rho must be non-negative"));
        }
        Ok(Resolved {
            certify: self.certify.unwrap_or_else(|| default_certification(&s.name)),
            scenario: s,
            substeps: self.substeps,
            rho,
        })
    }

    fn inline_scenario(&self, def: &SystemDef) -> Result<Scenario, CliError> {
        let fields = def
            .fields
            .iter()
            .map(|terms| PolynomialField::new(def.n, terms.clone()).map(|f| Arc::new(f) as Field))
            .collect::<Result<Vec<_>, _>>()?;
        let m = fields.len();
        let system = ControlSystem::new(fields, def.drift.clone(), DomainGuard { bounds: def.domain.clone() })?;
        let sets = IndexSets::new(def.s1.clone(), def.s2.clone(), def.s3.clone());
        sets.validate(def.n, m)?;

        let required = |v: Option<Real>, key: &str| {
            v.map(|r| r.0).ok_or_else(|| config_err(format!("inline system needs `{key}`")))
        };
        let x0 = reals(self.x0.as_deref().ok_or_else(|| config_err("inline system needs `x0`"))?);
        let x_star = self.x_star.as_deref().map_or_else(|| vec![0.0; def.n], reals);
        let (kappa2, kappa3) = match (&self.kappa2, &self.kappa3) {
            (Some(k2), Some(k3)) => (k2.clone(), k3.clone()),
            _ => {
                let found = search_kappa(&sets, KAPPA_SEARCH_BOUND)?;
                (
                    self.kappa2.clone().unwrap_or_else(|| found.second_values()),
                    self.kappa3.clone().unwrap_or_else(|| found.third_values()),
                )
            }
        };
        let rank_samples = if def.rank_samples.is_empty() {
            vec![x0.clone(), x_star.clone()]
        } else {
            def.rank_samples.iter().map(|p| reals(p)).collect()
        };
        Ok(Scenario {
            name: def.name.clone(),
            description: "polynomial system from config".into(),
            system,
            sets,
            kappa2,
            kappa3,
            epsilon: required(self.epsilon, "epsilon")?,
            gamma: required(self.gamma, "gamma")?,
            x_star,
            x0,
            horizon: required(self.horizon, "horizon")?,
            amplitude_rule: AmplitudeRule::default(),
            acknowledge_resonance: false,
            rank_samples,
        })
    }
}

pub fn default_certification(name: &str) -> Certification {
    match name {
        "underwater_vehicle_cubic_drift" | "exponential_baseline" => Certification::Exponential,
        _ => Certification::Practical,
    }
}

/// Dimension and range checks that must pass before anything is simulated.
fn check_scenario(s: &Scenario) -> Result<(), CliError> {
    let n = s.system.n;
    let positive = |v: f64, key: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(config_err(format!("`{key}` must be a positive number, got {v}")))
        }
    };
    positive(s.epsilon, "epsilon")?;
    positive(s.gamma, "gamma")?;
    positive(s.horizon, "horizon")?;
    for (key, v) in [("x0", &s.x0), ("x_star", &s.x_star)] {
        if v.len() != n {
            return Err(config_err(format!("`{key}` has {} entries but the system has dimension {n}", v.len())));
        }
    }
    s.kappa()?;
    if !s.system.guard.contains(&s.x0) {
        return Err(config_err(format!("x0 = {:?} lies outside the admissible domain", s.x0)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_real("3pi/2").unwrap(), 3.0 * PI / 2.0);
        assert_eq!(parse_real("-pi").unwrap(), -PI);
        assert_eq!(parse_real("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_real(" 0.5 * pi ").unwrap(), 0.5 * PI);
        assert_eq!(parse_real("2π").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("1.25").unwrap(), 1.25);
        for bad in ["", "pie", "pi/0", "3pi/x", "inf", "nan", "pi/2/2"] {
            assert!(parse_real(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides_create_nested_tables() {
        let cfg =
            parse_config("scenario = \"front_wheel_car\"", &["output.svg=".into(), "x0=[1, 2, \"pi\", 0]".into()])
                .unwrap();
        assert_eq!(cfg.output.svg, "");
        assert_eq!(cfg.x0.unwrap()[2], Real(PI));
    }

    #[test]
    fn overrides_are_type_checked() {
        assert!(parse_config("scenario = \"front_wheel_car\"", &["epsilon=fast".into()]).is_err());
        assert!(parse_config("scenario = \"front_wheel_car\"", &["substeps=-3".into()]).is_err());
        assert!(parse_config("", &["no_equals".into()]).is_err());
        assert!(parse_config("", &["colour=3".into()]).is_err());
        assert!(parse_config("x0 = 3\n", &["x0.a=1".into()]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = parse_config("scenario = \"front_wheel_car\"\nx0 = [1, 2, 3]", &[]).unwrap();
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn pitch_at_singularity_is_rejected() {
        let cfg =
            parse_config("scenario = \"underwater_vehicle\"\nx0 = [5, 10, 10, \"3pi/2\", \"pi/2\", \"-pi\"]", &[])
                .unwrap();
        let err = cfg.resolve().unwrap_err();
        assert!(err.to_string().contains("domain"), "{err}");
    }

    #[test]
    fn missing_scenario_is_a_config_error() {
        assert_eq!(parse_config("epsilon = 0.1", &[]).unwrap().resolve().unwrap_err().exit_code(), 2);
        assert!(parse_config("scenario = \"boat\"", &[]).unwrap().resolve().is_err());
    }

    #[test]
    fn builtin_config_resolves_to_same_scenario() {
        for name in SCENARIO_NAMES {
            let s = systems::by_name(name).unwrap();
            let text = RunConfig::from_scenario(&s).to_toml();
            let r = parse_config(&text, &[]).unwrap().resolve().unwrap();
            assert_eq!(r.scenario.x0, s.x0);
            assert_eq!(r.scenario.epsilon, s.epsilon);
            assert_eq!(r.scenario.kappa3, s.kappa3);
        }
    }

    #[test]
    fn inline_system_searches_kappa() {
        let text = r#"
            epsilon = 0.1
            gamma = 2
            horizon = 1
            x0 = [1, 1, 1]

            [system]
            n = 3
            fields = [
                [{ row = 0, coef = 1, powers = [0, 0, 0] }, { row = 2, coef = -0.5, powers = [0, 1, 0] }],
                [{ row = 1, coef = 1, powers = [0, 0, 0] }, { row = 2, coef = 0.5, powers = [1, 0, 0] }],
            ]
            s1 = [1, 2]
            s2 = [[1, 2]]
        "#;
        let r = parse_config(text, &[]).unwrap().resolve().unwrap();
        assert_eq!(r.scenario.kappa2, vec![1]);
        assert_eq!(r.scenario.x_star, vec![0.0; 3]);
        assert!(r.scenario.check_rank().unwrap().pass);
    }
}
