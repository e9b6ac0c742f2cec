//! Immersion component expressions: a small closed grammar over variables
//! `u1..ud`, parsed by recursive descent and evaluated as second-order jets
//! (value, gradient, Hessian) by forward-mode propagation.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' int)?
//! base   := number | 'u'int | func '(' expr ')' | '(' expr ')' | '-' base
//! func   := sin | cos | exp | sqrt
//! ```
//!
//! Whitespace is insignificant; numbers are decimals with an optional
//! exponent; `^` takes a (signed) integer exponent and binds tighter than
//! unary minus, so `-u1^2` is `-(u1^2)`.

mod jet;
mod parse;

pub use jet::{eval_jet2, Jet2};
pub use parse::{parse, ParseError};

use std::fmt;
use std::sync::Arc;

/// Built-in unary functions of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree. Variables are 0-based internally; the surface syntax
/// `u1..ud` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Literal(f64),
    /// 0-based parameter index.
    Variable(usize),
    Add(Arc<ExprAst>, Arc<ExprAst>),
    Sub(Arc<ExprAst>, Arc<ExprAst>),
    Mul(Arc<ExprAst>, Arc<ExprAst>),
    Div(Arc<ExprAst>, Arc<ExprAst>),
    Pow(Arc<ExprAst>, i32),
    Neg(Arc<ExprAst>),
    Call(Func, Arc<ExprAst>),
}

// Constructor names mirror the node names; they build shared subtrees, not
// arithmetic on self.
#[allow(clippy::should_implement_trait)]
impl ExprAst {
    pub fn literal(v: f64) -> Arc<ExprAst> {
        Arc::new(ExprAst::Literal(v))
    }

    pub fn variable(index: usize) -> Arc<ExprAst> {
        Arc::new(ExprAst::Variable(index))
    }

    pub fn add(a: Arc<ExprAst>, b: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Add(a, b))
    }

    pub fn sub(a: Arc<ExprAst>, b: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Sub(a, b))
    }

    pub fn mul(a: Arc<ExprAst>, b: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Mul(a, b))
    }

    pub fn div(a: Arc<ExprAst>, b: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Div(a, b))
    }

    pub fn pow(a: Arc<ExprAst>, n: i32) -> Arc<ExprAst> {
        Arc::new(ExprAst::Pow(a, n))
    }

    pub fn neg(a: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Neg(a))
    }

    pub fn call(f: Func, a: Arc<ExprAst>) -> Arc<ExprAst> {
        Arc::new(ExprAst::Call(f, a))
    }

    /// Largest variable index used, plus one (0 for constant expressions).
    pub fn max_var(&self) -> usize {
        match self {
            ExprAst::Literal(_) => 0,
            ExprAst::Variable(i) => i + 1,
            ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) | ExprAst::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            ExprAst::Pow(a, _) | ExprAst::Neg(a) | ExprAst::Call(_, a) => a.max_var(),
        }
    }

    /// Renders the tree back to grammar-conformant text. Literals print in
    /// Rust's shortest round-trip form, so parse(unparse(e)) evaluates
    /// identically to e.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out
    }

    // Precedence levels: 0 additive, 1 multiplicative, 2 unary minus,
    // 3 power, 4 atom.
    fn write(&self, out: &mut String, parent_level: u8) {
        let level = match self {
            ExprAst::Add(..) | ExprAst::Sub(..) => 0,
            ExprAst::Mul(..) | ExprAst::Div(..) => 1,
            ExprAst::Neg(..) => 2,
            ExprAst::Pow(..) => 3,
            ExprAst::Literal(v) if *v < 0.0 => 2,
            _ => 4,
        };
        let need_paren = level < parent_level;
        if need_paren {
            out.push('(');
        }
        match self {
            ExprAst::Literal(v) => {
                out.push_str(&format_literal(*v));
            }
            ExprAst::Variable(i) => {
                out.push('u');
                out.push_str(&(i + 1).to_string());
            }
            ExprAst::Add(a, b) => {
                a.write(out, 0);
                out.push_str(" + ");
                // Right operand of '-'-free '+' still needs level 1 to keep
                // "a + (b - c)" unambiguous? No: '+' is associative at level
                // 0; re-parse groups left, which evaluates identically.
                b.write(out, 0);
            }
            ExprAst::Sub(a, b) => {
                a.write(out, 0);
                out.push_str(" - ");
                // Force parens on additive right operands: a - (b + c).
                b.write(out, 1);
            }
            ExprAst::Mul(a, b) => {
                a.write(out, 1);
                out.push('*');
                b.write(out, 1);
            }
            ExprAst::Div(a, b) => {
                a.write(out, 1);
                out.push('/');
                // Force parens on multiplicative right operands: a/(b*c).
                b.write(out, 2);
            }
            ExprAst::Pow(a, n) => {
                a.write(out, 4);
                out.push('^');
                out.push_str(&n.to_string());
            }
            ExprAst::Neg(a) => {
                out.push('-');
                a.write(out, 2);
            }
            ExprAst::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out, 0);
                out.push(')');
            }
        }
        if need_paren {
            out.push(')');
        }
    }
}

fn format_literal(v: f64) -> String {
    if v < 0.0 {
        // The grammar has no negative literals; emit unary minus.
        format!("-{}", format_positive(-v))
    } else {
        format_positive(v)
    }
}

fn format_positive(v: f64) -> String {
    let s = format!("{v}");
    // Rust prints integral floats without a dot ("2"); that is already a
    // valid number token. Exponents never appear in `{}` formatting.
    s
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    const DIM: usize = 3;

    fn arb_expr() -> impl Strategy<Value = Arc<ExprAst>> {
        let leaf = prop_oneof![
            (-4.0..4.0f64).prop_map(ExprAst::literal),
            (0..DIM).prop_map(ExprAst::variable),
        ];
        leaf.prop_recursive(5, 64, 8, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprAst::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprAst::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprAst::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprAst::div(a, b)),
                (inner.clone(), 0..4i32).prop_map(|(a, n)| ExprAst::pow(a, n)),
                inner.clone().prop_map(ExprAst::neg),
                inner.clone().prop_map(|a| ExprAst::call(Func::Sin, a)),
                inner.clone().prop_map(|a| ExprAst::call(Func::Cos, a)),
                inner.prop_map(|a| ExprAst::call(Func::Exp, a)),
            ]
        })
    }

    proptest! {
        // Printing stays inside the grammar and evaluates identically.
        #[test]
        fn unparse_round_trips(
            ast in arb_expr(),
            coords in prop::collection::vec(
                prop::collection::vec(-1.0..1.0f64, DIM), 20),
        ) {
            let text = ast.unparse();
            let reparsed = parse(&text, DIM)
                .unwrap_or_else(|e| panic!("`{text}` failed to re-parse: {e}"));
            for point in &coords {
                let u = DVector::from_row_slice(point);
                let original = eval_jet2(&ast, &u);
                let round_tripped = eval_jet2(&reparsed, &u);
                match (original, round_tripped) {
                    (Ok(a), Ok(b)) => {
                        if a.value.is_finite() && b.value.is_finite() {
                            let scale = a.value.abs().max(1.0);
                            prop_assert!(
                                (a.value - b.value).abs() <= 1e-12 * scale,
                                "`{}` evaluates differently after round trip", text
                            );
                        }
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(
                        false,
                        "`{}`: one side errored: {a:?} vs {b:?}", text
                    ),
                }
            }
        }
    }
}
