//! Expressions in `t` and `x`.
//!
//! ```text
//! expr   := term { ("+" | "-") term }
//! term   := factor { ("*" | "/") factor }
//! factor := base [ "^" factor ]
//! base   := NUMBER | "t" | "x" | FUNC "(" expr ")" | "(" expr ")" | "-" base
//! FUNC   := "sin" | "cos" | "exp" | "sqrt" | "tanh"
//! ```
//!
//! Unary minus binds tighter than `^` (it is part of `base`), so `-x^2` is `(-x)^2`.

use std::fmt;

use super::dual::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    T,
    X,
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
}

impl ExprAst {
    pub fn constant(c: f64) -> Self {
        ExprAst::Const(c)
    }

    pub fn unary(op: UnaryOp, a: ExprAst) -> Self {
        ExprAst::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: ExprAst, b: ExprAst) -> Self {
        ExprAst::Binary(op, Box::new(a), Box::new(b))
    }

    /// Replace every occurrence of `t` by `with`.
    pub fn substitute_t(&self, with: &ExprAst) -> ExprAst {
        match self {
            ExprAst::T => with.clone(),
            ExprAst::Const(_) | ExprAst::X => self.clone(),
            ExprAst::Unary(op, a) => ExprAst::unary(*op, a.substitute_t(with)),
            ExprAst::Binary(op, a, b) => ExprAst::binary(*op, a.substitute_t(with), b.substitute_t(with)),
        }
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            ExprAst::T => true,
            ExprAst::Const(_) | ExprAst::X => false,
            ExprAst::Unary(_, a) => a.depends_on_t(),
            ExprAst::Binary(_, a, b) => a.depends_on_t() || b.depends_on_t(),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            ExprAst::X => true,
            ExprAst::Const(_) | ExprAst::T => false,
            ExprAst::Unary(_, a) => a.depends_on_x(),
            ExprAst::Binary(_, a, b) => a.depends_on_x() || b.depends_on_x(),
        }
    }

    /// Evaluate with guarded division, square root and powers.
    pub fn eval<S: Scalar>(&self, t: S, x: S) -> std::result::Result<S, String> {
        let v = match self {
            ExprAst::Const(c) => S::cst(*c),
            ExprAst::T => t,
            ExprAst::X => x,
            ExprAst::Unary(op, a) => {
                let a = a.eval(t, x)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Tanh => a.tanh(),
                    UnaryOp::Sqrt => {
                        if a.value() < 0.0 {
                            return Err(format!("sqrt of negative value {}", a.value()));
                        }
                        a.sqrt()
                    }
                }
            }
            ExprAst::Binary(op, a, b) => {
                let a = a.eval(t, x)?;
                let b = b.eval(t, x)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b.value() == 0.0 {
                            return Err("division by zero".into());
                        }
                        a / b
                    }
                    BinaryOp::Pow => pow(a, b)?,
                }
            }
        };
        if !v.is_finite() {
            return Err("non-finite result".into());
        }
        Ok(v)
    }
}

fn pow<S: Scalar>(a: S, b: S) -> std::result::Result<S, String> {
    let p = b.value();
    if !b.has_derivative() {
        if p == p.round() && p.abs() <= i32::MAX as f64 {
            if a.value() == 0.0 && p < 0.0 {
                return Err("zero raised to a negative power".into());
            }
            return Ok(a.powi(p as i32));
        }
        if a.value() < 0.0 {
            return Err(format!("negative base {} with non-integer exponent {p}", a.value()));
        }
        if a.value() == 0.0 && a.has_derivative() && p < 1.0 {
            return Err("derivative of zero to a fractional power".into());
        }
        return Ok(a.powf(p));
    }
    if a.value() <= 0.0 {
        return Err(format!("non-positive base {} with variable exponent", a.value()));
    }
    Ok((b * a.ln()).exp())
}

impl fmt::Display for ExprAst {
    /// Fully parenthesized; re-parses to a structurally equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Const(c) => write!(f, "{c:?}"),
            ExprAst::T => write!(f, "t"),
            ExprAst::X => write!(f, "x"),
            ExprAst::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            ExprAst::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Tanh => "tanh",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            ExprAst::Binary(op, a, b) => {
                let s = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(u8),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if !c.is_ascii() {
            return Err(Error::Syntax { offset: start, message: "non-ASCII input".into() });
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii").to_string();
            return Ok((Tok::Ident(name), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c), start));
        }
        Err(Error::Syntax { offset: start, message: format!("unexpected character `{}`", c as char) })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = 0;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if int + frac == 0 {
            return Err(Error::Syntax { offset: start, message: "malformed number".into() });
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) == 0 {
                return Err(Error::Syntax { offset: p, message: "malformed exponent".into() });
            }
            p = q;
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| Error::Syntax { offset: start, message: format!("malformed number `{text}`") })?;
        self.pos = p;
        Ok((Tok::Num(v), start))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, at) = self.lex.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.tok == Tok::Sym(c) {
            self.bump()
        } else {
            Err(Error::Syntax { offset: self.at, message: format!("expected `{}`", c as char) })
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'+') => BinaryOp::Add,
                Tok::Sym(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = ExprAst::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'*') => BinaryOp::Mul,
                Tok::Sym(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.factor()?;
            lhs = ExprAst::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<ExprAst> {
        let base = self.base()?;
        if self.tok == Tok::Sym(b'^') {
            self.bump()?;
            let exp = self.factor()?;
            return Ok(ExprAst::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprAst> {
        let at = self.at;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(ExprAst::Const(v))
            }
            Tok::Sym(b'-') => {
                self.bump()?;
                Ok(ExprAst::unary(UnaryOp::Neg, self.base()?))
            }
            Tok::Sym(b'(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let op = match name.as_str() {
                    "t" => {
                        self.bump()?;
                        return Ok(ExprAst::T);
                    }
                    "x" => {
                        self.bump()?;
                        return Ok(ExprAst::X);
                    }
                    "sin" => UnaryOp::Sin,
                    "cos" => UnaryOp::Cos,
                    "exp" => UnaryOp::Exp,
                    "sqrt" => UnaryOp::Sqrt,
                    "tanh" => UnaryOp::Tanh,
                    _ => return Err(Error::UnknownIdentifier { offset: at, name }),
                };
                self.bump()?;
                if self.tok != Tok::Sym(b'(') {
                    return Err(Error::Syntax { offset: self.at, message: format!("expected `(` after `{name}`") });
                }
                self.bump()?;
                if self.tok == Tok::Sym(b')') {
                    return Err(Error::Arity { offset: at, name });
                }
                let arg = self.expr()?;
                if self.tok == Tok::Sym(b',') {
                    return Err(Error::Arity { offset: at, name });
                }
                self.expect(b')')?;
                Ok(ExprAst::unary(op, arg))
            }
            Tok::End => Err(Error::Syntax { offset: at, message: "unexpected end of input".into() }),
            Tok::Sym(c) => Err(Error::Syntax { offset: at, message: format!("unexpected `{}`", c as char) }),
        }
    }
}

pub fn parse_expr(source: &str) -> Result<ExprAst> {
    if source.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { lex: Lexer { src: source.as_bytes(), pos: 0 }, tok: Tok::End, at: 0 };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(Error::Syntax { offset: p.at, message: "unexpected trailing input".into() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspec::dual::Dual;

    fn c(v: f64) -> ExprAst {
        ExprAst::Const(v)
    }

    #[test]
    fn grammar_shape() {
        let e = parse_expr("1 + 0.2*cos(x)").unwrap();
        let want = ExprAst::binary(
            BinaryOp::Add,
            c(1.0),
            ExprAst::binary(BinaryOp::Mul, c(0.2), ExprAst::unary(UnaryOp::Cos, ExprAst::X)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn associativity_and_precedence() {
        assert_eq!(
            parse_expr("1-2-3").unwrap(),
            ExprAst::binary(BinaryOp::Sub, ExprAst::binary(BinaryOp::Sub, c(1.0), c(2.0)), c(3.0))
        );
        assert_eq!(
            parse_expr("2^3^2").unwrap(),
            ExprAst::binary(BinaryOp::Pow, c(2.0), ExprAst::binary(BinaryOp::Pow, c(3.0), c(2.0)))
        );
        assert_eq!(parse_expr("2^3^2").unwrap().eval(0.0, 0.0).unwrap(), 512.0);
        assert_eq!(parse_expr("-x^2").unwrap().eval(0.0, 3.0).unwrap(), 9.0);
        assert_eq!(parse_expr("1+2*3").unwrap().eval(0.0, 0.0).unwrap(), 7.0);
        assert_eq!(parse_expr("8/4/2").unwrap().eval(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn unknown_identifier() {
        let e = parse_expr("exp(2*u)").unwrap_err();
        assert_eq!(e, Error::UnknownIdentifier { offset: 6, name: "u".into() });
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(parse_expr("sin(x, t)"), Err(Error::Arity { offset: 0, .. })));
        assert!(matches!(parse_expr("1 + cos()"), Err(Error::Arity { offset: 4, .. })));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(parse_expr("1 + * 2").unwrap_err(), Error::Syntax { offset: 4, message: "unexpected `*`".into() });
        assert!(matches!(parse_expr("(1 + x"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse_expr("1 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_expr("1 $ 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("sin x"), Err(Error::Syntax { offset: 4, .. })));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_expr(".5").unwrap(), c(0.5));
        assert_eq!(parse_expr("1e-3").unwrap(), c(1e-3));
        assert_eq!(parse_expr("2.5E+2").unwrap(), c(250.0));
        assert!(parse_expr("1e").is_err());
    }

    #[test]
    fn evaluation_examples() {
        let e = parse_expr("(1+0.1*sin(t))^2").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 1.0);
        let h = parse_expr("(1+0.2*cos(x))^2").unwrap();
        let d = h.eval(Dual::cst(0.0), Dual::var_x(0.0)).unwrap();
        assert!((d.v - 1.44).abs() < 1e-15);
        assert_eq!(d.dx, 0.0);
        let g = parse_expr("(1+0.3*sin(t))^2").unwrap();
        let d = g.eval(Dual::var_t(0.0), Dual::cst(0.0)).unwrap();
        assert!((d.dt - 0.6).abs() < 1e-15);
    }

    #[test]
    fn guarded_operations() {
        assert!(parse_expr("1/x").unwrap().eval(0.0, 0.0).is_err());
        assert!(parse_expr("sqrt(x-1)").unwrap().eval(0.0, 0.0).is_err());
        assert!(parse_expr("(x-1)^0.5").unwrap().eval(0.0, 0.0).is_err());
        assert_eq!(parse_expr("(x-1)^3").unwrap().eval(0.0, 0.0).unwrap(), -1.0);
        assert!(parse_expr("x^t").unwrap().eval(Dual::var_t(1.0), Dual::var_x(-1.0)).is_err());
    }

    #[test]
    fn print_reparses() {
        for s in ["1 + 0.2*cos(x)", "-(t+x)^2/3", "exp(-t)*sqrt(2+sin(x))", "1e-7*tanh(t)"] {
            let e = parse_expr(s).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn substitution() {
        let e = parse_expr("tanh(t)*cos(x)").unwrap();
        let r = e.substitute_t(&ExprAst::unary(UnaryOp::Neg, ExprAst::T));
        assert_eq!(r.eval(0.5, 0.0).unwrap(), -(0.5f64.tanh()));
    }
}
