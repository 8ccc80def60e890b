use super::expr::ExprTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Comma,
    Colon,
    Less,
    GreaterEq,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn unsupported(offset: usize, message: impl Into<String>) -> Error {
    Error::Unsupported {
        offset,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
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
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b':' => Some(Tok::Colon),
            b'<' => Some(Tok::Less),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if c == b'>' {
            if bytes.get(i + 1) == Some(&b'=') {
                out.push(Token {
                    tok: Tok::GreaterEq,
                    offset: start,
                });
                i += 2;
                continue;
            }
            return Err(unsupported(start, "only '<' and '>=' conditions are supported"));
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let value: f64 = lit
                .parse()
                .map_err(|_| syntax(start, format!("malformed number '{lit}'")))?;
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
        return Err(syntax(start, format!("unexpected character '{}'", c as char)));
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}")))
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<ExprTree> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    terms.push(negate(t));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            ExprTree::Sum(terms)
        })
    }

    // term := unary ('*' unary)*
    fn term(&mut self) -> Result<ExprTree> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Star {
            let at = self.offset();
            self.bump();
            let rhs = self.unary()?;
            acc = if acc.is_constant() {
                ExprTree::Scale(acc.eval(&[]), Box::new(rhs))
            } else if rhs.is_constant() {
                ExprTree::Scale(rhs.eval(&[]), Box::new(acc))
            } else {
                return Err(unsupported(at, "product of two non-constant expressions"));
            };
        }
        Ok(acc)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<ExprTree> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(negate(inner));
        }
        self.power()
    }

    // power := atom ('^' integer)?
    fn power(&mut self) -> Result<ExprTree> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        match self.bump().tok {
            Tok::Num(k) if k.fract() == 0.0 && k >= 1.0 && k <= i32::MAX as f64 => {
                Ok(ExprTree::Pow(Box::new(base), k as u32))
            }
            Tok::Num(_) | Tok::Minus => Err(unsupported(at, "exponent must be an integer >= 1")),
            _ => Err(syntax(at, "expected integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<ExprTree> {
        let at = self.offset();
        match self.bump().tok {
            Tok::Num(v) => Ok(ExprTree::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, at),
            Tok::Eof => Err(syntax(at, "unexpected end of input")),
            _ => Err(syntax(at, "expected a number, variable, function or '('")),
        }
    }

    fn variable(&self, name: &str, at: usize) -> Result<Option<usize>> {
        if name == "x" {
            if self.dimension == 1 {
                return Ok(Some(0));
            }
            return Err(unsupported(at, "bare 'x' is only allowed in dimension 1; use x1..xn"));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let k: usize = digits
                    .parse()
                    .map_err(|_| syntax(at, "variable index too large"))?;
                if k == 0 || k > self.dimension {
                    return Err(Error::VariableOutOfRange {
                        index: k,
                        dimension: self.dimension,
                    });
                }
                return Ok(Some(k - 1));
            }
        }
        Ok(None)
    }

    fn ident(&mut self, name: &str, at: usize) -> Result<ExprTree> {
        if let Some(i) = self.variable(name, at)? {
            return Ok(ExprTree::Var(i));
        }
        match name {
            "exp" | "abs" => {
                self.expect(Tok::LParen, "'('")?;
                let e = Box::new(self.expr()?);
                self.expect(Tok::RParen, "')'")?;
                Ok(if name == "exp" {
                    ExprTree::Exp(e)
                } else {
                    ExprTree::Abs(e)
                })
            }
            "max" => {
                self.expect(Tok::LParen, "'('")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "')'")?;
                Ok(ExprTree::Max(args))
            }
            "piecewise" => self.piecewise(at),
            _ => Err(unsupported(at, format!("unknown identifier '{name}'"))),
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let at = self.offset();
        match self.bump().tok {
            Tok::Num(v) => Ok(if negative { -v } else { v }),
            _ => Err(syntax(at, "expected a number")),
        }
    }

    // piecewise := 'piecewise' '(' arm (',' arm)* ')'
    // arm := ('x' '<' number | 'x' '>=' number | 'else') ':' expr
    fn piecewise(&mut self, at: usize) -> Result<ExprTree> {
        if self.dimension != 1 {
            return Err(unsupported(at, "piecewise is only available in dimension 1"));
        }
        self.expect(Tok::LParen, "'('")?;
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut pieces = Vec::new();
        let mut closed = false;
        loop {
            let arm_at = self.offset();
            if closed {
                return Err(unsupported(arm_at, "no arm may follow the final '>=' or 'else' arm"));
            }
            match self.bump().tok {
                Tok::Ident(ref v) if v == "else" => closed = true,
                Tok::Ident(ref v) if v == "x" || v == "x1" => match self.bump().tok {
                    Tok::Less => {
                        let c = self.signed_number()?;
                        if breakpoints.last().is_some_and(|&prev| c <= prev) {
                            return Err(unsupported(arm_at, "breakpoints must be strictly increasing"));
                        }
                        breakpoints.push(c);
                    }
                    Tok::GreaterEq => {
                        let c = self.signed_number()?;
                        if breakpoints.last() != Some(&c) {
                            return Err(unsupported(
                                arm_at,
                                "a '>=' arm must repeat the previous breakpoint",
                            ));
                        }
                        closed = true;
                    }
                    _ => return Err(syntax(arm_at, "expected '<' or '>=' after x")),
                },
                _ => return Err(syntax(arm_at, "expected a condition 'x<c', 'x>=c' or 'else'")),
            }
            self.expect(Tok::Colon, "':'")?;
            pieces.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return Err(syntax(self.offset(), "expected ',' or ')'")),
            }
        }
        if !closed {
            return Err(unsupported(at, "piecewise must end with an 'x>=c' or 'else' arm"));
        }
        if breakpoints.is_empty() {
            return Err(unsupported(at, "piecewise needs at least one breakpoint"));
        }
        Ok(ExprTree::Piecewise { breakpoints, pieces })
    }
}

fn negate(e: ExprTree) -> ExprTree {
    match e {
        ExprTree::Const(c) => ExprTree::Const(-c),
        ExprTree::Scale(c, inner) => ExprTree::Scale(-c, inner),
        other => ExprTree::Scale(-1.0, Box::new(other)),
    }
}

/// Parses an expression over `dimension` variables.
pub fn parse(text: &str, dimension: usize) -> Result<ExprTree> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        dimension,
    };
    let tree = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power() {
        let t = parse("x^4", 1).unwrap();
        assert_eq!(t.eval(&[2.0]), 16.0);
    }

    #[test]
    fn trailing_operator_reports_end_offset() {
        match parse("exp(x)+", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn piecewise_matches_its_branches() {
        let t = parse("piecewise(x<0: x^2, x>=0: x^4)", 1).unwrap();
        for (x, want) in [(-3.0, 9.0), (-1.0, 1.0), (0.0, 0.0), (1.0, 1.0), (2.0, 16.0)] {
            assert_eq!(t.eval(&[x]), want);
        }
    }

    #[test]
    fn rejects_nonlinear_products_and_bad_exponents() {
        assert!(matches!(parse("x*x", 1), Err(Error::Unsupported { offset: 1, .. })));
        assert!(matches!(parse("x^0", 1), Err(Error::Unsupported { .. })));
        assert!(matches!(parse("x^1.5", 1), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn variable_range_is_checked() {
        assert!(matches!(
            parse("x3", 2),
            Err(Error::VariableOutOfRange { index: 3, dimension: 2 })
        ));
        assert!(parse("x", 2).is_err());
        assert_eq!(parse("x1 + 2*x2", 2).unwrap().eval(&[1.0, 3.0]), 7.0);
    }

    #[test]
    fn piecewise_rules() {
        assert!(parse("piecewise(x<1: x, x<0: x, else: x)", 1).is_err());
        assert!(parse("piecewise(x<1: x, x>=2: x)", 1).is_err());
        assert!(parse("piecewise(x<1: x)", 1).is_err());
        assert!(parse("piecewise(x<-1: -x, else: 1)", 1).is_ok());
        assert!(parse("piecewise(x1<0: x1, else: 0)", 2).is_err());
    }

    #[test]
    fn whitespace_is_ignored_and_constants_fold_into_scale() {
        let a = parse(" 2 * 3 *x - 1 ", 1).unwrap();
        let b = parse("6*x+-1", 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_form_is_a_fixpoint() {
        for src in [
            "x^4",
            "piecewise(x<0: x^2, x>=0: x^4)",
            "max(x, -x, 2*x - 3)",
            "exp(x^2) + abs(x - 1) - 0.5*x",
            "(x + 1)^2 + (2*(x - 3))^4",
            "-(x)^2",
            "2*(-1) + x",
        ] {
            let t = parse(src, 1).unwrap();
            let printed = t.to_canonical(1);
            assert_eq!(parse(&printed, 1).unwrap(), t, "{src} -> {printed}");
        }
    }
}
