//! Tokenizer and recursive-descent parser for component expressions.
//!
//! Grammar (see `docs/expr-grammar.md`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | constant | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than a leading unary minus,
//! so `-x1^2` is `-(x1^2)` while `x1^-2` is `x1^(-2)`.

use super::ast::{BinOp, Expr, Func, NamedConst, Var, VarFamily};
use super::{ExprError, VarSpace};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // Exponent part only if followed by digits, so `2*e` style input
            // keeps `e` as the named constant.
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                expected: "a numeric literal".into(),
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        return Err(ExprError::Syntax {
            offset: start,
            expected: "an operator, number, identifier or parenthesis".into(),
        });
    }
    out.push(Token {
        tok: Tok::End,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    space: &'a VarSpace,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        let t = self.peek();
        if t.tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset: t.offset,
                expected: what.into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(NamedConst::Pi)),
                    "e" => return Ok(Expr::Const(NamedConst::E)),
                    _ => {}
                }
                self.variable(&name).map(Expr::Var)
            }
            _ => Err(ExprError::Syntax {
                offset: t.offset,
                expected: "an expression".into(),
            }),
        }
    }

    fn variable(&self, name: &str) -> Result<Var, ExprError> {
        let (family, digits) = match name.split_at(1) {
            ("x", rest) => (VarFamily::X, rest),
            ("v", rest) if self.space.has_velocities() => (VarFamily::V, rest),
            _ => return Err(ExprError::UnknownIdentifier(name.to_string())),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ExprError::UnknownIdentifier(name.to_string()));
        }
        let index: usize = digits
            .parse()
            .map_err(|_| ExprError::UnknownIdentifier(name.to_string()))?;
        if index == 0 || index > self.space.dim() {
            return Err(ExprError::VariableOutOfRange {
                index,
                dim: self.space.dim(),
            });
        }
        Ok(Var { family, index })
    }
}

pub(super) fn parse_in(text: &str, space: &VarSpace) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            expected: "an expression".into(),
        });
    }
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        space,
    };
    let e = parser.expr()?;
    let t = parser.peek();
    if t.tok != Tok::End {
        return Err(ExprError::Syntax {
            offset: t.offset,
            expected: "an operator or end of input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<Expr, ExprError> {
        parse_in(text, &VarSpace::chart(2))
    }

    #[test]
    fn smoke_tree() {
        let e = p("x1^2 + sin(x2)").unwrap();
        let x1 = Expr::Var(Var {
            family: VarFamily::X,
            index: 1,
        });
        let x2 = Expr::Var(Var {
            family: VarFamily::X,
            index: 2,
        });
        let expected = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Binary(BinOp::Pow, Box::new(x1), Box::new(Expr::Num(2.0)))),
            Box::new(Expr::Call(Func::Sin, Box::new(x2))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn out_of_range_variable() {
        assert_eq!(p("x3"), Err(ExprError::VariableOutOfRange { index: 3, dim: 2 }));
        assert!(matches!(p("x0"), Err(ExprError::VariableOutOfRange { index: 0, .. })));
    }

    #[test]
    fn truncated_input_offset() {
        match p("2*") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_velocity_gating() {
        assert_eq!(p("y"), Err(ExprError::UnknownIdentifier("y".into())));
        assert_eq!(p("v1"), Err(ExprError::UnknownIdentifier("v1".into())));
        assert!(parse_in("v1 * x2", &VarSpace::phase(2)).is_ok());
    }

    #[test]
    fn power_is_right_associative_and_unary_minus_is_looser() {
        let e = p("2^3^2").unwrap();
        match e {
            Expr::Binary(BinOp::Pow, base, exp) => {
                assert_eq!(*base, Expr::Num(2.0));
                assert!(matches!(*exp, Expr::Binary(BinOp::Pow, _, _)));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p("-x1^2").unwrap(), Expr::Neg(_)));
        assert!(p("x1^-2").is_ok());
    }

    #[test]
    fn exponent_literals_and_named_e() {
        assert_eq!(p("1.5e-3").unwrap(), Expr::Num(1.5e-3));
        assert!(matches!(p("2*e").unwrap(), Expr::Binary(BinOp::Mul, _, _)));
        assert!(p("2e").is_err());
    }

    #[test]
    fn empty_and_trailing_garbage() {
        assert!(matches!(p("   "), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(p("x1 x2"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(p("(x1"), Err(ExprError::Syntax { offset: 3, .. })));
        assert!(matches!(p("x1 $"), Err(ExprError::Syntax { offset: 3, .. })));
    }
}
