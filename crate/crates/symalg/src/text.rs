//! Text form of pseudo-rational functions:
//! `+ - * /`, integer powers `^n`, the parameter `eps`, and `exp(linear)`.

use num_traits::{Signed, ToPrimitive, Zero};

use crate::ratfn::PseudoRational;
use crate::{SymError, Q};

/// `f(ε) · e^{k}` — a pseudo-rational function times an exact constant
/// `e^k`. Constant factors like `exp(-2)` only occur in δ bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Val {
    pub f: PseudoRational,
    pub k: Q,
}

impl Val {
    fn plain(f: PseudoRational) -> Self {
        Val { f, k: Q::zero() }
    }
}

/// Parse a general value, allowing constant factors `exp(c)`.
pub fn parse_value(s: &str) -> Result<Val, SymError> {
    let mut p = Parser { src: s.as_bytes(), pos: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(v)
}

/// Parse a pseudo-rational function of `eps`.
pub fn parse_pseudo_rational(s: &str) -> Result<PseudoRational, SymError> {
    let v = parse_value(s)?;
    if !v.k.is_zero() && !v.f.is_zero() {
        return Err(SymError::Parse {
            offset: 0,
            msg: "constant exponential factor not allowed here".into(),
        });
    }
    Ok(v.f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> SymError {
        SymError::Parse { offset: self.pos, msg: msg.into() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Val, SymError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let r = self.term()?;
                acc = self.add(acc, r, false)?;
            } else if self.eat(b'-') {
                let r = self.term()?;
                acc = self.add(acc, r, true)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn add(&self, a: Val, b: Val, sub: bool) -> Result<Val, SymError> {
        let b = if sub { Val { f: b.f.neg(), k: b.k } } else { b };
        if a.f.is_zero() {
            return Ok(b);
        }
        if b.f.is_zero() {
            return Ok(a);
        }
        if a.k != b.k {
            return Err(self.err("sum of different constant exponential factors"));
        }
        Ok(Val { f: a.f.add(&b.f), k: a.k })
    }

    fn term(&mut self) -> Result<Val, SymError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                let r = self.unary()?;
                acc = Val { f: acc.f.mul(&r.f), k: acc.k + r.k };
            } else if self.eat(b'/') {
                let at = self.pos;
                let r = self.unary()?;
                let f = acc.f.div(&r.f).map_err(|_| SymError::Parse {
                    offset: at,
                    msg: "division by zero".into(),
                })?;
                acc = Val { f, k: acc.k - r.k };
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Val, SymError> {
        if self.eat(b'-') {
            let v = self.unary()?;
            return Ok(Val { f: v.f.neg(), k: v.k });
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Val, SymError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let neg = self.eat(b'-');
        let n = self.integer()?;
        let n = n
            .to_i64()
            .filter(|n| *n <= 4096)
            .ok_or_else(|| self.err("exponent too large"))?;
        let f = base.f.pow(n as u32);
        let k = &base.k * Q::from_integer(n.into());
        if neg {
            let f = f.recip().map_err(|_| self.err("zero to a negative power"))?;
            Ok(Val { f, k: -k })
        } else {
            Ok(Val { f, k })
        }
    }

    fn integer(&mut self) -> Result<num_bigint::BigInt, SymError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            return Err(self.err("decimal literals are not allowed; use p/q"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(s.parse().expect("digits"))
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Val, SymError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(Val::plain(PseudoRational::constant(Q::from_integer(n))))
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let at = self.pos;
                let id = self.ident();
                match id.as_str() {
                    "eps" => Ok(Val::plain(PseudoRational::eps())),
                    "exp" => {
                        if !self.eat(b'(') {
                            return Err(self.err("expected '(' after exp"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        let (rate, c) = linear_parts(&arg).ok_or(SymError::Parse {
                            offset: at,
                            msg: "exp argument must be linear in eps".into(),
                        })?;
                        Ok(Val { f: PseudoRational::exp(rate), k: c })
                    }
                    _ => Err(SymError::Parse { offset: at, msg: format!("unknown identifier {id:?}") }),
                }
            }
            _ => Err(self.err("expected a number, eps, exp(...) or '('")),
        }
    }
}

/// `a·ε + b` ↦ `(a, b)`.
fn linear_parts(v: &Val) -> Option<(Q, Q)> {
    if !v.k.is_zero() || !v.f.den().is_one() {
        return None;
    }
    let mut a = Q::zero();
    let mut b = Q::zero();
    for (k, c) in v.f.num().iter() {
        if !k.expo.is_zero() {
            return None;
        }
        match k.pow {
            0 => b = c.clone(),
            1 => a = c.clone(),
            _ => return None,
        }
    }
    Some((a, b))
}

/// True when `s` parses to a value that is a non-negative constant times
/// `e^k` — helper for callers validating δ literals.
pub fn is_nonneg_constant(v: &Val) -> bool {
    match v.f.as_constant() {
        Some(c) => !c.is_negative(),
        None => false,
    }
}
