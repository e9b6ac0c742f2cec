//! Second-order forward-mode jets: value, gradient, and full Hessian.
//!
//! All chain rules are symmetric by construction, so the Hessian stays
//! exactly symmetric entrywise.

use nalgebra::{DMatrix, DVector};

use super::{ExprAst, Func};
use crate::error::GeometryError;

/// Value, gradient, and Hessian of a scalar function of d parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, d: usize) -> Self {
        Jet2 {
            value,
            grad: DVector::zeros(d),
            hess: DMatrix::zeros(d, d),
        }
    }

    pub fn variable(value: f64, index: usize, d: usize) -> Self {
        let mut grad = DVector::zeros(d);
        grad[index] = 1.0;
        Jet2 {
            value,
            grad,
            hess: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    fn add(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + rhs.value,
            grad: &self.grad + &rhs.grad,
            hess: &self.hess + &rhs.hess,
        }
    }

    fn sub(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: &self.grad - &rhs.grad,
            hess: &self.hess - &rhs.hess,
        }
    }

    fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: -&self.grad,
            hess: -&self.hess,
        }
    }

    fn mul(&self, rhs: &Jet2) -> Jet2 {
        let cross = &self.grad * rhs.grad.transpose();
        Jet2 {
            value: self.value * rhs.value,
            grad: &self.grad * rhs.value + &rhs.grad * self.value,
            hess: &self.hess * rhs.value + &rhs.hess * self.value + &cross + cross.transpose(),
        }
    }

    fn div(&self, rhs: &Jet2) -> Result<Jet2, GeometryError> {
        if rhs.value == 0.0 {
            return Err(GeometryError::DomainError("division by zero".into()));
        }
        let value = self.value / rhs.value;
        let grad = (&self.grad - &rhs.grad * value) / rhs.value;
        let cross = &grad * rhs.grad.transpose();
        let hess = (&self.hess - &rhs.hess * value - &cross - cross.transpose()) / rhs.value;
        Ok(Jet2 { value, grad, hess })
    }

    /// Chain rule for a scalar map applied to this jet, given f(x), f'(x),
    /// f''(x) at x = self.value.
    fn map(&self, f: f64, df: f64, ddf: f64) -> Jet2 {
        let outer = &self.grad * self.grad.transpose();
        Jet2 {
            value: f,
            grad: &self.grad * df,
            hess: &self.hess * df + outer * ddf,
        }
    }

    fn powi(&self, n: i32) -> Result<Jet2, GeometryError> {
        if n < 0 && self.value == 0.0 {
            return Err(GeometryError::DomainError(
                "zero raised to a negative power".into(),
            ));
        }
        let f = self.value.powi(n);
        let df = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.value.powi(n - 1)
        };
        let ddf = if n == 0 || n == 1 {
            0.0
        } else {
            f64::from(n) * f64::from(n - 1) * self.value.powi(n - 2)
        };
        Ok(self.map(f, df, ddf))
    }

    fn call(&self, func: Func) -> Result<Jet2, GeometryError> {
        match func {
            Func::Sin => Ok(self.map(self.value.sin(), self.value.cos(), -self.value.sin())),
            Func::Cos => Ok(self.map(self.value.cos(), -self.value.sin(), -self.value.cos())),
            Func::Exp => {
                let e = self.value.exp();
                Ok(self.map(e, e, e))
            }
            Func::Sqrt => {
                if self.value <= 0.0 {
                    return Err(GeometryError::DomainError(format!(
                        "sqrt of non-positive value {}",
                        self.value
                    )));
                }
                let s = self.value.sqrt();
                Ok(self.map(s, 0.5 / s, -0.25 / (s * self.value)))
            }
        }
    }
}

/// Evaluates the exact 2-jet of `ast` at the parameter point `u`.
pub fn eval_jet2(ast: &ExprAst, u: &DVector<f64>) -> Result<Jet2, GeometryError> {
    let d = u.len();
    match ast {
        ExprAst::Literal(v) => Ok(Jet2::constant(*v, d)),
        ExprAst::Variable(i) => {
            if *i >= d {
                return Err(GeometryError::dim_mismatch(*i + 1, d, "eval_jet2 variable"));
            }
            Ok(Jet2::variable(u[*i], *i, d))
        }
        ExprAst::Add(a, b) => Ok(eval_jet2(a, u)?.add(&eval_jet2(b, u)?)),
        ExprAst::Sub(a, b) => Ok(eval_jet2(a, u)?.sub(&eval_jet2(b, u)?)),
        ExprAst::Mul(a, b) => Ok(eval_jet2(a, u)?.mul(&eval_jet2(b, u)?)),
        ExprAst::Div(a, b) => eval_jet2(a, u)?.div(&eval_jet2(b, u)?),
        ExprAst::Pow(a, n) => eval_jet2(a, u)?.powi(*n),
        ExprAst::Neg(a) => Ok(eval_jet2(a, u)?.neg()),
        ExprAst::Call(f, a) => eval_jet2(a, u)?.call(*f),
    }
}
