//! Coefficient expressions in `x1`, `x2`.

use std::fmt;

use dnlab_core::{BoundaryTrace, NodalField, TriangleMesh};

pub struct Expr {
    text: String,
    eval: Box<dyn Fn(f64, f64) -> f64>,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, String> {
        let parsed: meval::Expr = text.parse().map_err(|e| format!("cannot parse `{text}`: {e}"))?;
        let eval = parsed
            .bind2("x1", "x2")
            .map_err(|e| format!("`{text}`: {e} (available variables: x1, x2)"))?;
        Ok(Self { text: text.to_string(), eval: Box::new(eval) })
    }

    pub fn constant(value: f64) -> Self {
        Self { text: format!("{value}"), eval: Box::new(move |_, _| value) }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn at(&self, x1: f64, x2: f64) -> f64 {
        (self.eval)(x1, x2)
    }

    pub fn nodal(&self, mesh: &TriangleMesh) -> NodalField {
        NodalField::from_fn(mesh, |x, y| self.at(x, y))
    }

    pub fn trace(&self, mesh: &TriangleMesh) -> BoundaryTrace {
        BoundaryTrace::from_fn(mesh, |x, y| self.at(x, y))
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero_literal(&self) -> bool {
        self.text.trim().parse::<f64>().is_ok_and(|v| v == 0.0)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_the_supported_grammar() {
        let e = Expr::parse("1 + 2*x1 - x2^2 + exp(0) + sin(0) + cos(0)").unwrap();
        assert_eq!(e.at(0.5, 2.0), 1.0 + 1.0 - 4.0 + 1.0 + 0.0 + 1.0);
    }

    #[test]
    fn rejects_unknown_variables_and_syntax() {
        assert!(Expr::parse("x3 + 1").unwrap_err().contains("x1, x2"));
        assert!(Expr::parse("1 +* x1").is_err());
    }

    #[test]
    fn zero_literal() {
        assert!(Expr::parse("0").unwrap().is_zero_literal());
        assert!(Expr::parse(" 0.0 ").unwrap().is_zero_literal());
        assert!(!Expr::parse("x1 - x1").unwrap().is_zero_literal());
    }
}
