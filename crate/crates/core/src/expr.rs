//! Single-variable expressions in `x`: parsing, printing, symbolic
//! differentiation and evaluation.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right associative, constant exponent
//! atom    := number | 'x' | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | log
//! ```

use std::fmt;

use crate::error::{Result, ZooError};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent.
    Pow(Box<Expr>, f64),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

// Folding constructors. They never reorder operands, so a folded tree
// still prints the way a human would write it.

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(v) => c(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => c(x + y),
        (Expr::Const(z), other) | (other, Expr::Const(z)) if z == 0.0 => other,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => c(x - y),
        (other, Expr::Const(0.0)) => other,
        (Expr::Const(0.0), other) => neg(other),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => c(x * y),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => c(0.0),
        (Expr::Const(o), other) | (other, Expr::Const(o)) if o == 1.0 => other,
        (Expr::Const(m), other) | (other, Expr::Const(m)) if m == -1.0 => neg(other),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 => c(x / y),
        (Expr::Const(0.0), _) => c(0.0),
        (other, Expr::Const(1.0)) => other,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, e: f64) -> Expr {
    match a {
        _ if e == 0.0 => c(1.0),
        other if e == 1.0 => other,
        Expr::Const(v) => c(v.powf(e)),
        other => Expr::Pow(Box::new(other), e),
    }
}

fn unary_fn(name: &str, arg: Expr) -> Expr {
    if let Expr::Const(v) = arg {
        let folded = match name {
            "sin" => Some(v.sin()),
            "cos" => Some(v.cos()),
            "exp" => Some(v.exp()),
            "log" if v > 0.0 => Some(v.ln()),
            _ => None,
        };
        if let Some(f) = folded {
            return c(f);
        }
    }
    let b = Box::new(arg);
    match name {
        "sin" => Expr::Sin(b),
        "cos" => Expr::Cos(b),
        "exp" => Expr::Exp(b),
        _ => Expr::Log(b),
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Exact derivative with respect to `x`, constant-folded.
    pub fn differentiate(&self) -> Expr {
        use Expr::*;
        match self {
            Const(_) => c(0.0),
            X => c(1.0),
            Neg(a) => neg(a.differentiate()),
            Add(a, b) => add(a.differentiate(), b.differentiate()),
            Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.differentiate(), (**b).clone()),
                    mul((**a).clone(), b.differentiate()),
                ),
                pow((**b).clone(), 2.0),
            ),
            Pow(a, e) => mul(mul(c(*e), pow((**a).clone(), e - 1.0)), a.differentiate()),
            Sin(a) => mul(unary_fn("cos", (**a).clone()), a.differentiate()),
            Cos(a) => mul(neg(unary_fn("sin", (**a).clone())), a.differentiate()),
            Exp(a) => mul(unary_fn("exp", (**a).clone()), a.differentiate()),
            Log(a) => div(a.differentiate(), (**a).clone()),
        }
    }

    /// Evaluates at `x`. Poles, logs of non-positive arguments and any
    /// non-finite intermediate are reported as [`ZooError::Domain`].
    pub fn eval(&self, x: f64) -> Result<f64> {
        use Expr::*;
        let v = match self {
            Const(v) => *v,
            X => x,
            Neg(a) => -a.eval(x)?,
            Add(a, b) => a.eval(x)? + b.eval(x)?,
            Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(ZooError::Domain(format!("division by zero at x = {x}")));
                }
                a.eval(x)? / den
            }
            Pow(a, e) => {
                let base = a.eval(x)?;
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    if base == 0.0 && *e < 0.0 {
                        return Err(ZooError::Domain(format!("0 raised to {e} at x = {x}")));
                    }
                    base.powi(*e as i32)
                } else {
                    base.powf(*e)
                }
            }
            Sin(a) => a.eval(x)?.sin(),
            Cos(a) => a.eval(x)?.cos(),
            Exp(a) => a.eval(x)?.exp(),
            Log(a) => {
                let arg = a.eval(x)?;
                if arg <= 0.0 {
                    return Err(ZooError::Domain(format!("log({arg}) at x = {x}")));
                }
                arg.ln()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ZooError::Domain(format!("non-finite value {v} at x = {x}")))
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(v) if *v < 0.0 => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, 3)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, e) => {
                // base binds tighter than `^`, exponent is a bare constant
                wrap(f, a, 5)?;
                write!(f, "^{e}")
            }
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ZooError {
        ZooError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", ch as char)))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            // literal negatives normalize to a negative constant
            return Ok(match self.unary()? {
                Expr::Const(v) => Expr::Const(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let at = self.pos;
        let exponent = self.unary()?;
        match exponent.eval(0.0) {
            Ok(e) if is_constant(&exponent) => Ok(Expr::Pow(Box::new(base), e)),
            _ => Err(ZooError::Parse {
                pos: at,
                msg: "exponent must be a constant".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() || ch == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "x" => Ok(Expr::X),
                    "sin" | "cos" | "exp" | "log" => {
                        let name = name.to_string();
                        self.expect(b'(')?;
                        let arg = self.sum()?;
                        self.expect(b')')?;
                        let b = Box::new(arg);
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(b),
                            "cos" => Expr::Cos(b),
                            "exp" => Expr::Exp(b),
                            _ => Expr::Log(b),
                        })
                    }
                    other => Err(ZooError::UnknownSymbol {
                        pos: start,
                        name: other.to_string(),
                    }),
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                // `2exp(x)` style input: leave the `e` for the caller to reject
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Const(v)),
            Ok(_) => Err(ZooError::Parse {
                pos: start,
                msg: format!("literal `{text}` is not finite"),
            }),
            Err(_) => Err(ZooError::Parse {
                pos: start,
                msg: format!("malformed number `{text}`"),
            }),
        }
    }
}

fn is_constant(e: &Expr) -> bool {
    use Expr::*;
    match e {
        Const(_) => true,
        X => false,
        Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) | Log(a) => is_constant(a),
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => is_constant(a) && is_constant(b),
    }
}

/// A potential energy `V(x)` together with its force-unit derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    source: String,
    v: Expr,
    dv: Expr,
}

impl Potential {
    pub fn parse(source: &str) -> Result<Self> {
        let v = Expr::parse(source)?;
        let dv = v.differentiate();
        Ok(Potential {
            source: source.trim().to_string(),
            v,
            dv,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.v
    }

    pub fn derivative_expr(&self) -> &Expr {
        &self.dv
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.v.eval(x)
    }

    pub fn force_gradient(&self, x: f64) -> Result<f64> {
        self.dv.eval(x)
    }
}

/// Parses `source` as `V(x)` and derives `V'(x)` symbolically.
pub fn parse_potential(source: &str) -> Result<Potential> {
    Potential::parse(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(src: &str) -> Expr {
        Expr::parse(src).unwrap().differentiate()
    }

    #[test]
    fn potential_examples() {
        let p = parse_potential("0.5*x^2").unwrap();
        assert_eq!(p.value(2.0).unwrap(), 2.0);
        assert_eq!(p.force_gradient(2.0).unwrap(), 2.0);

        let q = parse_potential("0.25*x^4").unwrap();
        assert_eq!(q.force_gradient(1.5).unwrap(), 3.375);

        let pend = parse_potential("-cos(x)").unwrap();
        assert_eq!(pend.force_gradient(0.0).unwrap(), 0.0);
        assert!((pend.force_gradient(0.7).unwrap() - 0.7f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn derivative_shapes() {
        assert_eq!(d("x^2").to_string(), "2*x");
        assert_eq!(d("sin(x)*x").to_string(), "cos(x)*x + sin(x)");
        assert_eq!(d("7"), Expr::Const(0.0));
        assert_eq!(d("0.25*x^4").to_string(), "0.25*(4*x^3)");
    }

    #[test]
    fn eval_examples() {
        let e = Expr::parse("0.5*x^2").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), 4.5);
        assert_eq!(Expr::parse("exp(x)").unwrap().eval(0.0).unwrap(), 1.0);
        assert!(matches!(
            Expr::parse("1/x").unwrap().eval(0.0),
            Err(ZooError::Domain(_))
        ));
        assert!(matches!(
            Expr::parse("log(x)").unwrap().eval(-1.0),
            Err(ZooError::Domain(_))
        ));
        assert!(matches!(
            Expr::parse("x^0.5").unwrap().eval(-1.0),
            Err(ZooError::Domain(_))
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("-x^2").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), -9.0);
        let r = Expr::parse("2^3^2").unwrap();
        assert_eq!(r.eval(0.0).unwrap(), 512.0);
        let s = Expr::parse("1 - 2 - 3").unwrap();
        assert_eq!(s.eval(0.0).unwrap(), -4.0);
        let t = Expr::parse("8/4/2").unwrap();
        assert_eq!(t.eval(0.0).unwrap(), 1.0);
        let u = Expr::parse("x^-2").unwrap();
        assert_eq!(u.eval(2.0).unwrap(), 0.25);
        let v = Expr::parse("2*-x").unwrap();
        assert_eq!(v.eval(3.0).unwrap(), -6.0);
        assert_eq!(Expr::parse("1.5e2*x").unwrap().eval(1.0).unwrap(), 150.0);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Expr::parse("y^2"),
            Err(ZooError::UnknownSymbol { pos: 0, .. })
        ));
        assert!(matches!(
            Expr::parse("0.5*x^2 + tan(x)"),
            Err(ZooError::UnknownSymbol { pos: 10, .. })
        ));
        for bad in ["", "x +", "(x", "x)", "x^x", "2 ** x", "sin x", "1e999", "x # 2"] {
            assert!(
                matches!(Expr::parse(bad), Err(ZooError::Parse { .. })),
                "{bad:?} should fail to parse"
            );
        }
    }

    #[test]
    fn printed_form_reparses_identically() {
        for src in [
            "-cos(x)",
            "0.5*x^2 - 3*x + 1",
            "(x - 1)^3",
            "x/(1 + x^2)",
            "-(x + 1)*exp(-x)",
            "2^3^2",
            "log(1 + x^2)/2",
            "x - (1 - x)",
            "-x^-2",
        ] {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(Expr::parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }
}
