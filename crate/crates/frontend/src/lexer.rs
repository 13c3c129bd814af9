//! Tokens with source positions. Newlines are significant (they end
//! statements); `#` starts a comment that runs to the end of the line.

use num_bigint::BigInt;

use crate::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(BigInt),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Arrow,
    MapsTo,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Assign,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Arrow => "<-",
            Tok::MapsTo => "->",
            Tok::DotDot => "..",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Assign => "=",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Byte offset of the token in the source.
    pub start: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, FrontendError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let col = src[line_start..i].chars().count() + 1;
        let start = i;
        let push = |tok: Tok, len: usize, out: &mut Vec<Token>| {
            out.push(Token { tok, line, col, start });
            len
        };
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        if c == b'\n' {
            push(Tok::Newline, 1, &mut out);
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'.' && bytes.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                return Err(FrontendError::Syntax {
                    line,
                    col,
                    msg: "decimal literals are not allowed; write a rational p/q".into(),
                });
            }
            if bytes.get(j) == Some(&b'_') {
                // `1_2`: a numeric label suffixed by loop iterations
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                i += push(Tok::Ident(src[i..j].to_string()), j - i, &mut out);
                continue;
            }
            let n: BigInt = src[i..j].parse().expect("digits");
            i += push(Tok::Int(n), j - i, &mut out);
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            i += push(Tok::Ident(src[i..j].to_string()), j - i, &mut out);
            continue;
        }
        let (tok, len) = if two(b'<', b'-') {
            (Tok::Arrow, 2)
        } else if two(b'-', b'>') {
            (Tok::MapsTo, 2)
        } else if two(b'.', b'.') {
            (Tok::DotDot, 2)
        } else if two(b'<', b'=') {
            (Tok::Le, 2)
        } else if two(b'>', b'=') {
            (Tok::Ge, 2)
        } else if two(b'=', b'=') {
            (Tok::EqEq, 2)
        } else if two(b'!', b'=') {
            (Tok::Ne, 2)
        } else {
            let t = match c {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b',' => Tok::Comma,
                b';' => Tok::Semi,
                b':' => Tok::Colon,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'<' => Tok::Lt,
                b'>' => Tok::Gt,
                b'=' => Tok::Assign,
                _ => {
                    let ch = src[i..].chars().next().expect("in range");
                    return Err(FrontendError::Syntax { line, col, msg: format!("unexpected character {ch:?}") });
                }
            };
            (t, 1)
        };
        i += push(tok, len, &mut out);
    }
    let col = src[line_start..].chars().count() + 1;
    out.push(Token { tok: Tok::Eof, line, col, start: src.len() });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let t = lex("r1 <- Lap(eps/4, q1) # noise\nb <- r1 >= rT").unwrap();
        let kinds: Vec<&Tok> = t.iter().map(|t| &t.tok).collect();
        assert_eq!(kinds[1], &Tok::Arrow);
        assert_eq!(kinds[5], &Tok::Slash);
        let nl = t.iter().position(|t| t.tok == Tok::Newline).unwrap();
        assert_eq!((t[nl + 1].line, t[nl + 1].col), (2, 1));
        assert_eq!(t[nl + 4].tok, Tok::Ge);
        assert!(matches!(lex("x <- 0.5"), Err(FrontendError::Syntax { line: 1, col: 6, .. })));
    }
}
