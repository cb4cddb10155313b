//! Formula fields for custom problems.
//!
//! Expressions use `evalexpr` syntax with the variables `x`, `y`, `r`
//! (distance to the origin), `theta` and `pi`; functions live under `math::`,
//! e.g. `math::sin(pi * x) * math::sin(pi * y)`.

use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

use crate::error::{Error, Result};
use crate::operators::Field;

#[derive(Clone, Debug)]
pub struct Expression {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

impl Expression {
    /// Parse and test-evaluate at the origin; `field` names the config key
    /// in error messages.
    pub fn parse(field: &str, source: &str) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::config(field, format!("cannot parse `{source}`: {e}")))?;
        let e = Expression {
            source: source.to_string(),
            tree: Arc::new(tree),
        };
        e.try_eval(0.5, 0.25)
            .map_err(|m| Error::config(field, format!("cannot evaluate `{source}`: {m}")))?;
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, x: f64, y: f64) -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let vars = [
            ("x", x),
            ("y", y),
            ("r", x.hypot(y)),
            ("theta", y.atan2(x)),
            ("pi", std::f64::consts::PI),
        ];
        for (k, v) in vars {
            ctx.set_value(k.into(), Value::Float(v)).map_err(|e| e.to_string())?;
        }
        self.tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    }

    /// Value at `(x, y)`; evaluation failures give NaN, which operator
    /// instantiation reports as invalid data.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.try_eval(x, y).unwrap_or(f64::NAN)
    }

    pub fn to_field(&self) -> Field {
        let e = self.clone();
        Arc::new(move |x, y| e.eval(x, y))
    }
}
