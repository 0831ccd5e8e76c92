//! Scalar expressions in `x` (and `t`) for weights, potentials and markings.
//!
//! Available: `+ - * / ^`, comparisons, `if(c, a, b)`, the evalexpr builtins,
//! and the shorthands `exp ln sqrt sin cos tanh abs` plus `ind(x, a, b)`,
//! the indicator of `[a, b]`. `pi` is predefined.

use std::f64::consts::PI;

use evalexpr::{Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};

use crate::error::{CliError, Result};

type V = Value<DefaultNumericTypes>;

#[derive(Debug, Clone)]
pub struct Expr {
    src: String,
    tree: Node<DefaultNumericTypes>,
}

struct Vars {
    x: V,
    t: V,
    pi: V,
}

impl Context for Vars {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, id: &str) -> Option<&V> {
        match id {
            "x" => Some(&self.x),
            "t" => Some(&self.t),
            "pi" => Some(&self.pi),
            _ => None,
        }
    }

    fn call_function(&self, id: &str, arg: &V) -> EvalexprResult<V, DefaultNumericTypes> {
        let unary = |f: fn(f64) -> f64| arg.as_number().map(|v| Value::Float(f(v)));
        match id {
            "exp" => unary(f64::exp),
            "ln" => unary(f64::ln),
            "sqrt" => unary(f64::sqrt),
            "sin" => unary(f64::sin),
            "cos" => unary(f64::cos),
            "tanh" => unary(f64::tanh),
            "abs" => unary(f64::abs),
            "ind" => {
                let args = arg.as_fixed_len_tuple(3)?;
                let (x, a, b) = (args[0].as_number()?, args[1].as_number()?, args[2].as_number()?);
                Ok(Value::Float(if a <= x && x <= b { 1.0 } else { 0.0 }))
            }
            _ => Err(EvalexprError::FunctionIdentifierNotFound(id.to_string())),
        }
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::ContextNotMutable)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tree = evalexpr::build_operator_tree::<DefaultNumericTypes>(src).map_err(|e| CliError::Expression {
            expr: src.to_string(),
            msg: e.to_string(),
        })?;
        Ok(Self {
            src: src.to_string(),
            tree,
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let vars = Vars {
            x: Value::Float(x),
            t: Value::Float(t),
            pi: Value::Float(PI),
        };
        let v = self.tree.eval_number_with_context(&vars).map_err(|e| CliError::Expression {
            expr: self.src.clone(),
            msg: e.to_string(),
        })?;
        if !v.is_finite() {
            return Err(CliError::Expression {
                expr: self.src.clone(),
                msg: format!("non-finite value {v} at x = {x}, t = {t}"),
            });
        }
        Ok(v)
    }

    pub fn eval_nodes(&self, nodes: &[f64], t: f64) -> Result<Vec<f64>> {
        nodes.iter().map(|&x| self.eval(x, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_functions() {
        let e = Expr::parse("exp(-(x^2)) + ind(x, 0, 1) * t").unwrap();
        assert_eq!(e.eval(0.0, 2.0).unwrap(), 3.0);
        assert!((e.eval(2.0, 5.0).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert_eq!(Expr::parse("1").unwrap().eval(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(Expr::parse("if(x > 0, 1, 0.5)").unwrap().eval(-1.0, 0.0).unwrap(), 0.5);
        assert!((Expr::parse("cos(pi)").unwrap().eval(0.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x +").and_then(|e| e.eval(1.0, 0.0)).is_err());
        assert!(Expr::parse("y").unwrap().eval(0.0, 0.0).is_err());
        assert!(Expr::parse("ln(x)").unwrap().eval(0.0, 0.0).is_err());
    }
}
