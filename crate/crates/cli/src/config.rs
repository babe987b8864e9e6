use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wavewell::ode::{Forcing, OdeProblem};
use wavewell::scenarios::{build_base_pair, build_separating_pair, build_positive_pair, build_signed_pair, DataPair};
use wavewell::solver::SolverConfig;
use wavewell::well::DepthOptions;
use wavewell::{Domain, Expr, Form, Nonlinearity, PowerTerm, SpectralField};

use crate::CliError;

/// Experiment description read from a TOML file. Every field except the
/// domain has a default, and the resolved values are echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub well: WellSpec,
    #[serde(default)]
    pub ode: Option<OdeSpec>,
    #[serde(default)]
    pub sweep: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub length: f64,
    pub modes: usize,
    /// Quadrature nodes, `8 · modes` when absent.
    pub quad: Option<usize>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { length: PI, modes: Domain::DEFAULT_MODES, quad: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub form: Form,
    pub a: Vec<TermSpec>,
    pub b: Vec<TermSpec>,
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        Self { form: Form::Odd, a: Vec::new(), b: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Coefficient as an expression in `x`.
    pub coeff: String,
    pub exponent: f64,
    pub bound: Option<f64>,
}

/// A field given by its sine coefficients or by an expression in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Coeffs(Vec<f64>),
    Expr(String),
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Coeffs(Vec::new())
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Manual {
        #[serde(default)]
        u0: FieldSpec,
        #[serde(default)]
        u1: FieldSpec,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Positive {
        k_target: f64,
    },
    Signed {
        k_target: f64,
        sigma: f64,
    },
    Separating {
        k_target: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellSpec {
    pub n_directions: usize,
    pub seed: u64,
    pub refine: bool,
}

impl Default for WellSpec {
    fn default() -> Self {
        let d = DepthOptions::default();
        Self { n_directions: d.n_directions, seed: d.seed, refine: d.refine }
    }
}

impl WellSpec {
    pub fn options(&self) -> DepthOptions {
        DepthOptions { n_directions: self.n_directions, seed: self.seed, refine: self.refine, ..Default::default() }
    }
}

fn zero_str() -> String {
    "0".into()
}

fn ode_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSpec {
    pub gamma: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    /// Forcing as an expression in `t`.
    #[serde(default = "zero_str")]
    pub forcing: String,
    pub psi0: f64,
    pub dpsi0: f64,
    pub t_max: f64,
    #[serde(default = "ode_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub amplitude: Option<Vec<f64>>,
    pub k_target: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub amplitude: Option<f64>,
    pub k_target: Option<f64>,
    pub sigma: Option<f64>,
}

impl SweepSpec {
    /// Cartesian product of the declared axes in row-major order. No axes
    /// or an empty axis give an empty grid.
    pub fn points(&self) -> Vec<SweepPoint> {
        let axes = [&self.amplitude, &self.k_target, &self.sigma];
        if axes.iter().all(|a| a.is_none()) {
            return Vec::new();
        }
        let mut pts = vec![SweepPoint::default()];
        for (k, axis) in axes.iter().enumerate() {
            let Some(vals) = axis else { continue };
            pts = pts
                .iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = *p;
                        match k {
                            0 => q.amplitude = Some(v),
                            1 => q.k_target = Some(v),
                            _ => q.sigma = Some(v),
                        }
                        q
                    })
                })
                .collect();
        }
        pts
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build_domain(&self) -> Result<Domain, CliError> {
        let d = &self.domain;
        let quad = d.quad.unwrap_or(8 * d.modes);
        Domain::new(d.length, d.modes, quad).map_err(|e| CliError::Validation(format!("domain: {e}")))
    }

    pub fn build_nonlinearity(&self, domain: &Domain) -> Result<Nonlinearity, CliError> {
        let term = |t: &TermSpec, field: String| -> Result<PowerTerm, CliError> {
            let expr = Expr::parse(&t.coeff, "x").map_err(|e| CliError::Config(format!("{field}.coeff: {e}")))?;
            let term = PowerTerm::from_expr(domain, t.exponent, &expr).map_err(|e| CliError::Validation(format!("{field}: {e}")))?;
            match t.bound {
                Some(b) => term.with_bound(b).map_err(|e| CliError::Validation(format!("{field}.bound: {e}"))),
                None => Ok(term),
            }
        };
        let nl = &self.nonlinearity;
        let a = nl.a.iter().enumerate().map(|(i, t)| term(t, format!("nonlinearity.a[{i}]"))).collect::<Result<_, _>>()?;
        let b = nl.b.iter().enumerate().map(|(i, t)| term(t, format!("nonlinearity.b[{i}]"))).collect::<Result<_, _>>()?;
        Ok(Nonlinearity::new(nl.form, a, b))
    }

    /// The configured data with the sweep overrides of `point` applied.
    pub fn build_data(&self, domain: &Domain, nl: &Nonlinearity, point: &SweepPoint) -> Result<DataPair, CliError> {
        let spec = self.data.as_ref().ok_or_else(|| CliError::Validation("data: no initial data configured".into()))?;
        let field = |f: &FieldSpec, name: &str| -> Result<SpectralField, CliError> {
            match f {
                FieldSpec::Coeffs(c) => {
                    if c.len() > domain.n_modes() {
                        return Err(CliError::Validation(format!(
                            "data.{name}: {} coefficients for {} modes",
                            c.len(),
                            domain.n_modes()
                        )));
                    }
                    let mut v = c.clone();
                    v.resize(domain.n_modes(), 0.0);
                    SpectralField::new(v).map_err(|e| CliError::Validation(format!("data.{name}: {e}")))
                }
                FieldSpec::Expr(s) => {
                    let e = Expr::parse(s, "x").map_err(|e| CliError::Config(format!("data.{name}: {e}")))?;
                    Ok(domain.project(|x| e.eval(x)))
                }
            }
        };
        let reject = |axis: &str| CliError::Validation(format!("sweep.{axis} does not apply to this kind of data"));
        let construction = |e: wavewell::Error| CliError::from_core("data", e);
        match spec {
            DataSpec::Manual { u0, u1, amplitude } => {
                if point.k_target.is_some() {
                    return Err(reject("k_target"));
                }
                if point.sigma.is_some() {
                    return Err(reject("sigma"));
                }
                let a = point.amplitude.unwrap_or(*amplitude);
                Ok(DataPair::manual(field(u0, "u0")?.scaled(a), field(u1, "u1")?.scaled(a)))
            }
            DataSpec::Positive { k_target } | DataSpec::Separating { k_target } => {
                if point.amplitude.is_some() {
                    return Err(reject("amplitude"));
                }
                if point.sigma.is_some() {
                    return Err(reject("sigma"));
                }
                let k = point.k_target.unwrap_or(*k_target);
                let (w, v) = build_base_pair(domain, nl).map_err(construction)?;
                if matches!(spec, DataSpec::Positive { .. }) {
                    build_positive_pair(domain, nl, &w, &v, k).map_err(construction)
                } else {
                    build_separating_pair(domain, nl, &w, &v, k).map_err(construction)
                }
            }
            DataSpec::Signed { k_target, sigma } => {
                if point.amplitude.is_some() {
                    return Err(reject("amplitude"));
                }
                let (w, v) = build_base_pair(domain, nl).map_err(construction)?;
                build_signed_pair(
                    domain,
                    nl,
                    &w,
                    &v,
                    point.sigma.unwrap_or(*sigma),
                    point.k_target.unwrap_or(*k_target),
                )
                .map_err(construction)
            }
        }
    }

    pub fn build_ode(&self) -> Result<(OdeProblem, f64, f64), CliError> {
        let o = self.ode.as_ref().ok_or_else(|| CliError::Validation("ode: section missing".into()))?;
        let e = Expr::parse(&o.forcing, "t").map_err(|e| CliError::Config(format!("ode.forcing: {e}")))?;
        let forcing = if e.is_constant() { Forcing::Constant(e.eval(0.0)) } else { Forcing::Expression(e) };
        let p = OdeProblem { gamma: o.gamma, alpha: o.alpha, beta: o.beta, forcing, psi0: o.psi0, dpsi0: o.dpsi0 };
        p.validate().map_err(|e| CliError::from_core("ode", e))?;
        Ok((p, o.t_max, o.dt))
    }
}
