//! Scalar component expressions: parsing, compilation, and evaluation with
//! exact first and second derivatives.

mod ast;
mod jet;
mod parser;

pub use ast::{BinOp, Expr, Func, NamedConst, Var, VarFamily};
pub use jet::{sum_jets, Jet2};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable index {index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("`{function}` evaluated outside its domain at argument {argument}")]
    Domain { function: &'static str, argument: f64 },
}

/// The variables an expression may reference.
///
/// A chart space of dimension `n` admits `x1..xn`; a phase space additionally
/// admits `v1..vn`, laid out after the positions in evaluation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSpace {
    dim: usize,
    velocities: bool,
}

impl VarSpace {
    pub fn chart(dim: usize) -> Self {
        VarSpace { dim, velocities: false }
    }

    pub fn phase(dim: usize) -> Self {
        VarSpace { dim, velocities: true }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_velocities(&self) -> bool {
        self.velocities
    }

    /// Number of coordinates of an evaluation point.
    pub fn slots(&self) -> usize {
        if self.velocities {
            2 * self.dim
        } else {
            self.dim
        }
    }

    fn slot(&self, var: Var) -> usize {
        match var.family {
            VarFamily::X => var.index - 1,
            VarFamily::V => self.dim + var.index - 1,
        }
    }
}

/// Parses `text` over the chart variables `x1..x{dim}`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ExprError> {
    parser::parse_in(text, &VarSpace::chart(dim))
}

pub fn parse_in(text: &str, space: &VarSpace) -> Result<Expr, ExprError> {
    parser::parse_in(text, space)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Num(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowConst(f64),
    Pow,
    Call(Func),
}

/// An expression lowered to a postfix tape. Immutable and `Sync`; evaluation
/// is a pure function of the point.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    tape: Vec<Op>,
    slots: usize,
    source: Expr,
}

fn const_eval(e: &Expr) -> f64 {
    match e {
        Expr::Num(v) => *v,
        Expr::Const(c) => c.value(),
        Expr::Var(_) => unreachable!("constant subtree"),
        Expr::Neg(a) => -const_eval(a),
        Expr::Call(f, a) => apply_value(*f, const_eval(a)),
        Expr::Binary(op, a, b) => {
            let (a, b) = (const_eval(a), const_eval(b));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
    }
}

fn apply_value(f: Func, u: f64) -> f64 {
    match f {
        Func::Sin => u.sin(),
        Func::Cos => u.cos(),
        Func::Tan => u.tan(),
        Func::Exp => u.exp(),
        Func::Log => u.ln(),
        Func::Sqrt => u.sqrt(),
        Func::Sinh => u.sinh(),
        Func::Cosh => u.cosh(),
        Func::Tanh => u.tanh(),
        Func::Atan => u.atan(),
    }
}

fn check_domain(f: Func, u: f64) -> Result<(), ExprError> {
    let ok = match f {
        Func::Log | Func::Sqrt => u > 0.0,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(ExprError::Domain {
            function: f.name(),
            argument: u,
        })
    }
}

fn check_pow(base: f64, exponent: Option<f64>) -> Result<(), ExprError> {
    let integral = matches!(exponent, Some(c) if c.fract() == 0.0);
    if base > 0.0 || (integral && (base != 0.0 || exponent.unwrap() >= 0.0)) {
        Ok(())
    } else {
        Err(ExprError::Domain {
            function: "^",
            argument: base,
        })
    }
}

fn finite(function: &'static str, argument: f64, value: f64) -> Result<(), ExprError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ExprError::Domain { function, argument })
    }
}

impl CompiledExpr {
    pub fn new(expr: Expr, space: &VarSpace) -> Self {
        let mut tape = Vec::new();
        lower(&expr, space, &mut tape);
        CompiledExpr {
            tape,
            slots: space.slots(),
            source: expr,
        }
    }

    /// Parses and compiles over the chart variables `x1..x{dim}`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        Self::parse_in(text, &VarSpace::chart(dim))
    }

    pub fn parse_in(text: &str, space: &VarSpace) -> Result<Self, ExprError> {
        Ok(Self::new(parse_in(text, space)?, space))
    }

    pub fn constant(value: f64, space: &VarSpace) -> Self {
        Self::new(Expr::Num(value), space)
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn is_constant(&self) -> bool {
        self.source.is_constant()
    }

    /// Value only.
    pub fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        debug_assert_eq!(p.len(), self.slots);
        let mut stack: Vec<f64> = Vec::with_capacity(8);
        for op in &self.tape {
            let v = match *op {
                Op::Num(v) => v,
                Op::Var(i) => p[i],
                Op::Neg => -stack.pop().unwrap(),
                Op::Call(f) => {
                    let u = stack.pop().unwrap();
                    check_domain(f, u)?;
                    let r = apply_value(f, u);
                    finite(f.name(), u, r)?;
                    r
                }
                Op::PowConst(c) => {
                    let u = stack.pop().unwrap();
                    check_pow(u, Some(c))?;
                    if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                        u.powi(c as i32)
                    } else {
                        u.powf(c)
                    }
                }
                _ => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => {
                            if b == 0.0 {
                                return Err(ExprError::Domain {
                                    function: "/",
                                    argument: b,
                                });
                            }
                            a / b
                        }
                        Op::Pow => {
                            check_pow(a, None)?;
                            a.powf(b)
                        }
                        _ => unreachable!(),
                    }
                }
            };
            stack.push(v);
        }
        Ok(stack.pop().unwrap())
    }

    /// Value, gradient and Hessian with respect to all point slots.
    pub fn eval_jet2(&self, p: &[f64]) -> Result<Jet2, ExprError> {
        debug_assert_eq!(p.len(), self.slots);
        let n = self.slots;
        let mut stack: Vec<Jet2> = Vec::with_capacity(8);
        for op in &self.tape {
            let v = match *op {
                Op::Num(v) => Jet2::constant(n, v),
                Op::Var(i) => Jet2::variable(n, i, p[i]),
                Op::Neg => -stack.pop().unwrap(),
                Op::Call(f) => {
                    let u = stack.pop().unwrap();
                    check_domain(f, u.value())?;
                    let r = match f {
                        Func::Sin => u.sin(),
                        Func::Cos => u.cos(),
                        Func::Tan => u.tan(),
                        Func::Exp => u.exp(),
                        Func::Log => u.ln(),
                        Func::Sqrt => u.sqrt(),
                        Func::Sinh => u.sinh(),
                        Func::Cosh => u.cosh(),
                        Func::Tanh => u.tanh(),
                        Func::Atan => u.atan(),
                    };
                    finite(f.name(), u.value(), r.value())?;
                    r
                }
                Op::PowConst(c) => {
                    let u = stack.pop().unwrap();
                    check_pow(u.value(), Some(c))?;
                    u.powf(c)
                }
                _ => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match *op {
                        Op::Add => &a + &b,
                        Op::Sub => &a - &b,
                        Op::Mul => &a * &b,
                        Op::Div => {
                            if b.value() == 0.0 {
                                return Err(ExprError::Domain {
                                    function: "/",
                                    argument: 0.0,
                                });
                            }
                            &a / &b
                        }
                        Op::Pow => {
                            check_pow(a.value(), None)?;
                            a.pow(&b)
                        }
                        _ => unreachable!(),
                    }
                }
            };
            stack.push(v);
        }
        Ok(stack.pop().unwrap())
    }
}

fn lower(e: &Expr, space: &VarSpace, tape: &mut Vec<Op>) {
    if e.is_constant() {
        tape.push(Op::Num(const_eval(e)));
        return;
    }
    match e {
        Expr::Num(_) | Expr::Const(_) => unreachable!(),
        Expr::Var(v) => tape.push(Op::Var(space.slot(*v))),
        Expr::Neg(a) => {
            lower(a, space, tape);
            tape.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            lower(a, space, tape);
            tape.push(Op::Call(*f));
        }
        Expr::Binary(BinOp::Pow, a, b) if b.is_constant() => {
            lower(a, space, tape);
            tape.push(Op::PowConst(const_eval(b)));
        }
        Expr::Binary(op, a, b) => {
            lower(a, space, tape);
            lower(b, space, tape);
            tape.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
                BinOp::Pow => Op::Pow,
            });
        }
    }
}
