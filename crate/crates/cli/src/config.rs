//! Experiment configuration and construction of the core objects it names.

use std::fmt;
use std::str::FromStr;

use dppc_core::kernels::{self, OpeData};
use dppc_core::{Configuration, DomainTag, GroundSpace, Kernel, Marking, Scheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Rigidity,
    GueDeform,
    Scaling,
    Jacobi,
    Condition,
    Fredholm,
    Sample,
    IntegrableCheck,
    OracleCheck,
    Palm,
}

impl Verb {
    pub const ALL: [Verb; 10] = [
        Verb::Rigidity,
        Verb::GueDeform,
        Verb::Scaling,
        Verb::Jacobi,
        Verb::Condition,
        Verb::Fredholm,
        Verb::Sample,
        Verb::IntegrableCheck,
        Verb::OracleCheck,
        Verb::Palm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Rigidity => "rigidity",
            Verb::GueDeform => "gue-deform",
            Verb::Scaling => "scaling",
            Verb::Jacobi => "jacobi",
            Verb::Condition => "condition",
            Verb::Fredholm => "fredholm",
            Verb::Sample => "sample",
            Verb::IntegrableCheck => "integrable-check",
            Verb::OracleCheck => "oracle-check",
            Verb::Palm => "palm",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum GroundSpec {
    /// Gauss–Legendre with `nodes` points, or explicit `points` and `weights`.
    Interval {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Equispaced angles with weights `2π/nodes`.
    Circle { nodes: usize },
    Finite {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl GroundSpec {
    pub fn build(&self) -> Result<GroundSpace> {
        let explicit = |points: &Option<Vec<f64>>, weights: &Option<Vec<f64>>| match (points, weights) {
            (Some(p), Some(w)) => Ok(Some((p.clone(), w.clone()))),
            (None, None) => Ok(None),
            _ => Err(CliError::config("`points` and `weights` go together")),
        };
        let space = match self {
            GroundSpec::Interval {
                a,
                b,
                nodes,
                points,
                weights,
            } => {
                let domain = DomainTag::RealInterval { a: *a, b: *b };
                match (explicit(points, weights)?, nodes) {
                    (Some((p, w)), None) => GroundSpace::new(domain, p, w)?,
                    (None, Some(n)) => GroundSpace::discretize(domain, *n, Scheme::GaussLegendre)?,
                    _ => return Err(CliError::config("interval needs either `nodes` or `points`/`weights`")),
                }
            }
            GroundSpec::Circle { nodes } => {
                GroundSpace::discretize(DomainTag::UnitCircle, *nodes, Scheme::TrapezoidCircle)?
            }
            GroundSpec::Finite { nodes, points, weights } => match (explicit(points, weights)?, nodes) {
                (Some((p, w)), None) => GroundSpace::finite(p, w)?,
                (None, Some(n)) => GroundSpace::discretize(DomainTag::FiniteSet, *n, Scheme::UniformFinite)?,
                _ => return Err(CliError::config("finite set needs either `nodes` or `points`/`weights`")),
            },
        };
        Ok(space)
    }

    /// The same interval with `n` Gauss–Legendre nodes.
    pub fn with_nodes(&self, n: usize) -> Result<GroundSpec> {
        match self {
            GroundSpec::Interval { a, b, .. } => Ok(GroundSpec::Interval {
                a: *a,
                b: *b,
                nodes: Some(n),
                points: None,
                weights: None,
            }),
            GroundSpec::Circle { .. } => Ok(GroundSpec::Circle { nodes: n }),
            GroundSpec::Finite { .. } => Err(CliError::config("a finite ground set has no refinement")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum KernelSpec {
    Sine,
    Airy,
    Cue {
        n: usize,
    },
    /// Orthogonal polynomial ensemble with weight `weight(x)` on the line.
    Ope {
        n: usize,
        weight: String,
    },
    /// Orthogonal polynomial ensemble with weight `weight(x)` in the angle `x`.
    CircleOpe {
        n: usize,
        weight: String,
    },
    /// Entries `K(x_i, x_j)` given directly.
    Matrix {
        real: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        imag: Option<Vec<Vec<f64>>>,
    },
}

/// `sine`, `airy`, `cue:N`, `ope:N:<weight>`, `circle-ope:N:<weight>`.
impl FromStr for KernelSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let head = parts.next().unwrap_or_default();
        let size = |p: Option<&str>| -> Result<usize> {
            p.and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::config(format!("`{s}`: expected a positive size after `{head}:`")))
        };
        let spec = match head {
            "sine" => KernelSpec::Sine,
            "airy" => KernelSpec::Airy,
            "cue" => KernelSpec::Cue { n: size(parts.next())? },
            "ope" | "circle-ope" => {
                let n = size(parts.next())?;
                let weight = parts
                    .next()
                    .ok_or_else(|| CliError::config(format!("`{s}`: missing weight expression")))?
                    .to_string();
                if head == "ope" {
                    KernelSpec::Ope { n, weight }
                } else {
                    KernelSpec::CircleOpe { n, weight }
                }
            }
            _ => return Err(CliError::config(format!("unknown kernel `{s}`"))),
        };
        Ok(spec)
    }
}

/// A kernel together with the polynomial data it came from, if any.
#[derive(Debug, Clone)]
pub struct BuiltKernel {
    pub kernel: Kernel,
    pub ope: Option<OpeData>,
}

impl KernelSpec {
    pub fn build(&self, space: &GroundSpace) -> Result<BuiltKernel> {
        let plain = |kernel: Kernel| BuiltKernel { kernel, ope: None };
        Ok(match self {
            KernelSpec::Sine => plain(kernels::sine_kernel(space)?),
            KernelSpec::Airy => plain(kernels::airy_kernel(space)?),
            KernelSpec::Cue { n } => plain(kernels::cue_kernel(*n, space)?),
            KernelSpec::Ope { n, weight } => {
                let ope = kernels::ope_kernel(weight_fn(weight, space)?, *n, space)?;
                BuiltKernel {
                    kernel: ope.kernel.clone(),
                    ope: Some(ope),
                }
            }
            KernelSpec::CircleOpe { n, weight } => {
                let ope = kernels::circle_ope_kernel(weight_fn(weight, space)?, *n, space)?;
                BuiltKernel {
                    kernel: ope.kernel.clone(),
                    ope: Some(ope),
                }
            }
            KernelSpec::Matrix { real, imag } => {
                let n = space.len();
                let shape_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
                if !shape_ok(real) || imag.as_ref().is_some_and(|m| !shape_ok(m)) {
                    return Err(CliError::config(format!("kernel matrix must be {n}×{n}")));
                }
                let m = dppc_core::CMat::from_fn(n, n, |i, j| {
                    dppc_core::C64::new(real[i][j], imag.as_ref().map_or(0.0, |m| m[i][j]))
                });
                plain(Kernel::new(space.clone(), m)?)
            }
        })
    }
}

/// Checks the expression on every node first so evaluation errors surface
/// as such rather than as a NaN weight.
fn weight_fn(src: &str, space: &GroundSpace) -> Result<impl Fn(f64) -> f64> {
    let e = Expr::parse(src)?;
    e.eval_nodes(space.nodes(), 0.0)?;
    Ok(move |x| e.eval(x, 0.0).unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MarkingSpec {
    Constant { value: f64 },
    /// First piece with `from ≤ x ≤ to` wins; `default` elsewhere.
    Piecewise { default: f64, pieces: Vec<Piece> },
    /// Expression in `x` and, for time sweeps, `t`.
    Expression { expr: String },
}

/// A marking evaluated at arbitrary `(x, t)`.
#[derive(Debug, Clone)]
pub enum MarkingFn {
    Constant(f64),
    Piecewise(f64, Vec<Piece>),
    Expression(Expr),
}

impl MarkingSpec {
    pub fn compile(&self) -> Result<MarkingFn> {
        Ok(match self {
            MarkingSpec::Constant { value } => MarkingFn::Constant(*value),
            MarkingSpec::Piecewise { default, pieces } => MarkingFn::Piecewise(*default, pieces.clone()),
            MarkingSpec::Expression { expr } => MarkingFn::Expression(Expr::parse(expr)?),
        })
    }
}

impl MarkingFn {
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            MarkingFn::Constant(v) => Ok(*v),
            MarkingFn::Piecewise(d, pieces) => Ok(pieces
                .iter()
                .find(|p| p.from <= x && x <= p.to)
                .map_or(*d, |p| p.value)),
            MarkingFn::Expression(e) => e.eval(x, t),
        }
    }

    pub fn on(&self, space: &GroundSpace, t: f64) -> Result<Marking> {
        let values = space.nodes().iter().map(|&x| self.eval(x, t)).collect::<Result<Vec<_>>>()?;
        Ok(Marking::new(values)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationSpec {
    Indices(Vec<usize>),
    /// Positions, each snapped to the nearest node.
    Points(Vec<f64>),
    /// Draw this many observations from the marked process.
    Sampled(usize),
}

impl ObservationSpec {
    /// The fixed observation; `None` when observations are to be sampled.
    pub fn fixed(&self, space: &GroundSpace) -> Result<Option<Configuration>> {
        let idx = match self {
            ObservationSpec::Indices(v) => v.clone(),
            ObservationSpec::Points(p) => p
                .iter()
                .map(|&x| space.nearest(x).ok_or_else(|| CliError::config("empty ground space")))
                .collect::<Result<_>>()?,
            ObservationSpec::Sampled(_) => return Ok(None),
        };
        let cfg = Configuration::from_unsorted(idx)?;
        cfg.check_within(space.len())?;
        Ok(Some(cfg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    /// Summary file name inside the output directory.
    pub summary: String,
    /// Prepended to every data file name.
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            summary: "summary.json".into(),
            prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marking: Option<MarkingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub output: OutputSpec,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    /// Schema validation followed by typed parsing.
    pub fn from_json(value: &Value) -> Result<Self> {
        crate::schema::validate(value)?;
        Ok(serde_json::from_value(value.clone())?)
    }

    pub fn ground(&self) -> Result<GroundSpace> {
        self.ground
            .as_ref()
            .ok_or_else(|| CliError::config(format!("`{}` needs a `ground`", self.experiment)))?
            .build()
    }

    pub fn kernel_on(&self, space: &GroundSpace) -> Result<BuiltKernel> {
        self.kernel
            .as_ref()
            .ok_or_else(|| CliError::config(format!("`{}` needs a `kernel`", self.experiment)))?
            .build(space)
    }

    /// The configured marking, or `default` when absent.
    pub fn marking_or(&self, default: f64) -> Result<MarkingFn> {
        match &self.marking {
            Some(m) => m.compile(),
            None => Ok(MarkingFn::Constant(default)),
        }
    }

    /// Typed parameters with defaults filled in.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::config(format!("params for `{}`: {e}", self.experiment)))
    }

    /// This config with `params` replaced by its resolved form.
    pub fn resolved<P: Serialize>(&self, params: &P) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        v["params"] = serde_json::to_value(params)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn kernel_shorthand() {
        assert_eq!("sine".parse::<KernelSpec>().unwrap(), KernelSpec::Sine);
        assert_eq!("cue:12".parse::<KernelSpec>().unwrap(), KernelSpec::Cue { n: 12 });
        assert_eq!(
            "ope:4:exp(-(x^2))".parse::<KernelSpec>().unwrap(),
            KernelSpec::Ope {
                n: 4,
                weight: "exp(-(x^2))".into()
            }
        );
        assert!("cue".parse::<KernelSpec>().is_err());
        assert!("bessel".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn builds_spaces_and_markings() {
        let g: GroundSpec = serde_json::from_value(json!({"domain": "interval", "a": -1, "b": 1, "nodes": 8})).unwrap();
        let s = g.build().unwrap();
        assert_eq!(s.len(), 8);
        let m: MarkingSpec = serde_json::from_value(json!({
            "type": "piecewise", "default": 1.0, "pieces": [{"from": -0.5, "to": 0.5, "value": 0.25}]
        }))
        .unwrap();
        let th = m.compile().unwrap().on(&s, 0.0).unwrap();
        for (x, t) in s.nodes().iter().zip(th.values()) {
            assert_eq!(*t, if x.abs() <= 0.5 { 0.25 } else { 1.0 });
        }
        let bad: MarkingSpec = serde_json::from_value(json!({"type": "constant", "value": 1.5})).unwrap();
        assert!(bad.compile().unwrap().on(&s, 0.0).is_err());
    }

    #[test]
    fn observation_snapping() {
        let s = GroundSpec::Finite {
            nodes: Some(5),
            points: None,
            weights: None,
        }
        .build()
        .unwrap();
        let o = ObservationSpec::Points(vec![3.2, 0.9]);
        assert_eq!(o.fixed(&s).unwrap().unwrap().indices(), &[1, 3]);
        assert!(ObservationSpec::Indices(vec![7]).fixed(&s).is_err());
        assert!(ObservationSpec::Sampled(3).fixed(&s).unwrap().is_none());
    }

    #[test]
    fn ope_kernel_from_expression() {
        let s = GroundSpec::Interval {
            a: -4.0,
            b: 4.0,
            nodes: Some(40),
            points: None,
            weights: None,
        }
        .build()
        .unwrap();
        let b = KernelSpec::Ope {
            n: 3,
            weight: "exp(-(x^2))".into(),
        }
        .build(&s)
        .unwrap();
        assert!((b.kernel.trace().re - 3.0).abs() < 1e-10);
        assert!(b.ope.is_some());
    }
}
