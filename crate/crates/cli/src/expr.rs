//! User formulas for generators, obstacles and terminal values.
//!
//! Generators see `t`, `y`, `z` (first component), `z0`, `z1`, .. and
//! `znorm`. Obstacles and terminal values see `t`, `x` (first component)
//! and `x0`, `x1`, ... Builtins such as `math::sqrt`, `math::abs`, `min`
//! and `max` are available.

use std::sync::Arc;

use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};

type V = Value<DefaultNumericTypes>;

#[derive(Debug, Clone)]
pub struct Formula {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

struct Vars<'a> {
    names: &'a [&'static str],
    values: Vec<V>,
    indexed: &'static str,
    vector: Vec<V>,
}

impl Context for Vars<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, id: &str) -> Option<&V> {
        if let Some(k) = self.names.iter().position(|n| *n == id) {
            return self.values.get(k);
        }
        let rest = id.strip_prefix(self.indexed)?;
        if rest.is_empty() {
            return self.vector.first();
        }
        self.vector.get(rest.parse::<usize>().ok()?)
    }

    fn call_function(&self, id: &str, _argument: &V) -> EvalexprResult<V, DefaultNumericTypes> {
        Err(EvalexprError::FunctionIdentifierNotFound(id.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::CustomMessage("builtins cannot be toggled".into()))
    }
}

impl Formula {
    pub fn parse(source: &str) -> Result<Self, String> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| format!("cannot parse `{source}`: {e}"))?;
        Ok(Self {
            source: source.to_string(),
            tree: Arc::new(tree),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the formula mentions an identifier starting with `prefix`.
    pub fn mentions(&self, prefix: &str) -> bool {
        self.tree.iter_variable_identifiers().any(|id| id.starts_with(prefix))
    }

    fn eval(&self, ctx: &Vars<'_>) -> Result<f64, String> {
        self.tree
            .eval_number_with_context(ctx)
            .map_err(|e| format!("evaluating `{}`: {e}", self.source))
    }

    /// `g(t, y, z)`.
    pub fn driver(&self, t: f64, y: f64, z: &[f64]) -> Result<f64, String> {
        let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ctx = Vars {
            names: &["t", "y", "znorm"],
            values: vec![V::Float(t), V::Float(y), V::Float(znorm)],
            indexed: "z",
            vector: z.iter().map(|v| V::Float(*v)).collect(),
        };
        self.eval(&ctx)
    }

    /// `f(t, x)`.
    pub fn field(&self, t: f64, x: &[f64]) -> Result<f64, String> {
        let ctx = Vars {
            names: &["t"],
            values: vec![V::Float(t)],
            indexed: "x",
            vector: x.iter().map(|v| V::Float(*v)).collect(),
        };
        self.eval(&ctx)
    }

    /// Evaluate once at a few sample points so unknown identifiers and type
    /// errors surface before a run starts.
    pub fn probe_driver(&self, d: usize) -> Result<(), String> {
        self.driver(0.5, 0.3, &vec![0.2; d]).map(|_| ())
    }

    pub fn probe_field(&self, n: usize) -> Result<(), String> {
        self.field(0.5, &vec![0.2; n]).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_variables() {
        let f = Formula::parse("y + 2 * z1 + znorm - t").unwrap();
        let v = f.driver(1.0, 3.0, &[3.0, 4.0]).unwrap();
        assert_eq!(v, 3.0 + 8.0 + 5.0 - 1.0);
        let g = Formula::parse("math::abs(z)").unwrap();
        assert_eq!(g.driver(0.0, 0.0, &[-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn integer_results_are_numbers() {
        let f = Formula::parse("1").unwrap();
        assert_eq!(f.field(0.0, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let f = Formula::parse("w + 1").unwrap();
        assert!(f.probe_driver(1).is_err());
        assert!(f.mentions("w"));
        assert!(!f.mentions("x"));
    }
}
