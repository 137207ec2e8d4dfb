//! S-expression syntax for functions and family files.
//!
//! ```text
//! (sum (abs 0) (indicator-box (0 1)))
//! (recip 0 +)
//! (scale (pow 2 (neg k)) (abs 0))     ; k is the index in countable templates
//! ```

use std::fmt::{self, Write as _};

use super::expr::{Constraint, ExtFunction};
use crate::error::{Error, Result};
use crate::geometry::Region;

/// A parsed s-expression with the position of its first character.
#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Atom { text: String, line: usize, column: usize },
    List { items: Vec<SExpr>, line: usize, column: usize },
}

impl SExpr {
    pub fn position(&self) -> (usize, usize) {
        match self {
            SExpr::Atom { line, column, .. } | SExpr::List { line, column, .. } => (*line, *column),
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.position();
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            _ => None,
        }
    }

    fn items(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom { text, .. } => write!(f, "{text}"),
            SExpr::List { items, .. } => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses exactly one s-expression. `line` and `column` give the position
/// of the first character of `src` in its file.
pub fn parse_sexpr_at(src: &str, line: usize, column: usize) -> Result<SExpr> {
    let mut p = Parser {
        chars: src.chars().collect(),
        pos: 0,
        line,
        column,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

pub fn parse_sexpr(src: &str) -> Result<SExpr> {
    parse_sexpr_at(src, 1, 1)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Parser {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<SExpr> {
        let (line, column) = (self.line, self.column);
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(')') => Err(self.error("unexpected ')'")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => {
                            return Err(Error::Parse {
                                line,
                                column,
                                message: "unclosed '('".into(),
                            })
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::List {
                                items,
                                line,
                                column,
                            });
                        }
                        _ => items.push(self.expr()?),
                    }
                }
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(SExpr::Atom { text, line, column })
            }
        }
    }
}

/// Evaluates a numeric slot. `k` is bound inside countable templates.
pub fn scalar(e: &SExpr, k: Option<f64>) -> Result<f64> {
    let v = match e {
        SExpr::Atom { text, .. } => {
            if text == "k" {
                match k {
                    Some(v) => v,
                    None => return e.err("'k' is only bound in countable templates"),
                }
            } else {
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => return e.err(format!("expected a number, found '{text}'")),
                }
            }
        }
        SExpr::List { items, .. } => {
            let Some(head) = items.first().and_then(|h| h.atom()) else {
                return e.err("expected a number or arithmetic form");
            };
            let args = items[1..]
                .iter()
                .map(|a| scalar(a, k))
                .collect::<Result<Vec<f64>>>()?;
            let arity = |n: usize| -> Result<()> {
                if args.len() == n {
                    Ok(())
                } else {
                    e.err(format!("'{head}' takes {n} arguments"))
                }
            };
            match head {
                "+" => args.iter().sum(),
                "*" => args.iter().product(),
                "-" => {
                    arity(2)?;
                    args[0] - args[1]
                }
                "/" => {
                    arity(2)?;
                    args[0] / args[1]
                }
                "neg" => {
                    arity(1)?;
                    -args[0]
                }
                "pow" => {
                    arity(2)?;
                    args[0].powf(args[1])
                }
                other => return e.err(format!("unknown arithmetic operator '{other}'")),
            }
        }
    };
    if !v.is_finite() {
        return e.err("numeric expression is not finite");
    }
    Ok(v)
}

fn index(e: &SExpr, k: Option<f64>) -> Result<usize> {
    let v = scalar(e, k)?;
    if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
        return e.err("expected a nonnegative integer coordinate index");
    }
    Ok(v as usize)
}

fn vector(e: &SExpr, k: Option<f64>) -> Result<Vec<f64>> {
    match e.items() {
        Some(items) if !items.is_empty() => items.iter().map(|i| scalar(i, k)).collect(),
        _ => e.err("expected a vector like (1 2 3)"),
    }
}

fn intervals(args: &[SExpr], k: Option<f64>, whole: &SExpr) -> Result<(Vec<f64>, Vec<f64>)> {
    if args.is_empty() {
        return whole.err("expected one (lo hi) pair per axis");
    }
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for a in args {
        let v = vector(a, k)?;
        if v.len() != 2 || v[0] > v[1] {
            return a.err("expected (lo hi) with lo <= hi");
        }
        lo.push(v[0]);
        hi.push(v[1]);
    }
    Ok((lo, hi))
}

/// Builds a function from its s-expression.
pub fn build_function(e: &SExpr, k: Option<f64>) -> Result<ExtFunction> {
    let Some(items) = e.items() else {
        return e.err("expected a function form like (abs 0)");
    };
    let Some(head) = items.first().and_then(|h| h.atom()) else {
        return e.err("expected a function name");
    };
    let args = &items[1..];
    let arity = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            e.err(format!("'{head}' takes {n} arguments"))
        }
    };
    Ok(match head {
        "const" => {
            arity(1)?;
            ExtFunction::Const(scalar(&args[0], k)?)
        }
        "affine" => {
            arity(2)?;
            ExtFunction::Affine {
                a: vector(&args[0], k)?,
                b: scalar(&args[1], k)?,
            }
        }
        "quad" => {
            arity(3)?;
            let rows = args[0]
                .items()
                .ok_or(())
                .or_else(|_| args[0].err("expected a matrix ((..) ..)"))?;
            let q = rows.iter().map(|r| vector(r, k)).collect::<Result<Vec<_>>>()?;
            ExtFunction::Quad {
                q,
                a: vector(&args[1], k)?,
                b: scalar(&args[2], k)?,
            }
        }
        "abs" => {
            arity(1)?;
            ExtFunction::Abs(index(&args[0], k)?)
        }
        "norm2" => {
            arity(0)?;
            ExtFunction::Norm2
        }
        "norminf" => {
            arity(0)?;
            ExtFunction::NormInf
        }
        "max" | "sum" => {
            if args.is_empty() {
                return e.err(format!("'{head}' needs at least one term"));
            }
            let ch = args
                .iter()
                .map(|a| build_function(a, k))
                .collect::<Result<Vec<_>>>()?;
            if head == "max" {
                ExtFunction::Max(ch)
            } else {
                ExtFunction::Sum(ch)
            }
        }
        "scale" => {
            arity(2)?;
            let l = scalar(&args[0], k)?;
            if l < 0.0 {
                return args[0].err("scale factor must be >= 0");
            }
            ExtFunction::Scale(l, Box::new(build_function(&args[1], k)?))
        }
        "indicator-box" => {
            let (lo, hi) = intervals(args, k, e)?;
            ExtFunction::Indicator(Region::new_box(lo, hi)?)
        }
        "indicator-whole" => {
            let (lo, hi) = intervals(args, k, e)?;
            ExtFunction::Indicator(Region::new_whole(lo, hi)?)
        }
        "indicator-ball" => {
            arity(2)?;
            let r = scalar(&args[1], k)?;
            ExtFunction::Indicator(
                Region::new_ball(vector(&args[0], k)?, r).or_else(|_| args[1].err("bad ball"))?,
            )
        }
        "indicator-sublevel" => {
            if args.is_empty() {
                return e.err("expected at least one (con ...) constraint");
            }
            let mut cs = Vec::new();
            for a in args {
                let parts = a.items().unwrap_or(&[]);
                if parts.len() != 4 || parts[0].atom() != Some("con") {
                    return a.err("expected (con (lin ..) (recip ..) c)");
                }
                let lin = vector(&parts[1], k)?;
                let recip = vector(&parts[2], k)?;
                if lin.len() != recip.len() {
                    return parts[2].err("lin and recip coefficient vectors differ in length");
                }
                cs.push(Constraint {
                    lin,
                    recip,
                    c: scalar(&parts[3], k)?,
                });
            }
            ExtFunction::IndicatorSublevel(cs)
        }
        "recip" => {
            arity(2)?;
            let positive = match args[1].atom() {
                Some("+") => true,
                Some("-") => false,
                _ => return args[1].err("expected '+' or '-'"),
            };
            ExtFunction::Recip {
                index: index(&args[0], k)?,
                positive,
            }
        }
        "dist" => {
            arity(2)?;
            let w = scalar(&args[1], k)?;
            if w < 0.0 {
                return args[1].err("weight must be >= 0");
            }
            ExtFunction::Distance {
                center: vector(&args[0], k)?,
                weight: w,
            }
        }
        other => return items[0].err(format!("unknown function '{other}'")),
    })
}

/// Parses a function written in the s-expression language.
pub fn parse_function(src: &str) -> Result<ExtFunction> {
    build_function(&parse_sexpr(src)?, None)
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v}");
}

fn vec_str(out: &mut String, v: &[f64]) {
    out.push('(');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        num(out, *x);
    }
    out.push(')');
}

fn region_pairs(out: &mut String, lo: &[f64], hi: &[f64]) {
    for (l, h) in lo.iter().zip(hi) {
        out.push(' ');
        vec_str(out, &[*l, *h]);
    }
}

/// Canonical text of a function; parses back to an equal value.
pub fn print_function(f: &ExtFunction) -> String {
    let mut s = String::new();
    write_function(&mut s, f);
    s
}

fn write_function(s: &mut String, f: &ExtFunction) {
    use ExtFunction as F;
    match f {
        F::Const(c) => {
            s.push_str("(const ");
            num(s, *c);
            s.push(')');
        }
        F::Affine { a, b } => {
            s.push_str("(affine ");
            vec_str(s, a);
            s.push(' ');
            num(s, *b);
            s.push(')');
        }
        F::Quad { q, a, b } => {
            s.push_str("(quad (");
            for (i, row) in q.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                vec_str(s, row);
            }
            s.push_str(") ");
            vec_str(s, a);
            s.push(' ');
            num(s, *b);
            s.push(')');
        }
        F::Abs(i) => {
            let _ = write!(s, "(abs {i})");
        }
        F::Norm2 => s.push_str("(norm2)"),
        F::NormInf => s.push_str("(norminf)"),
        F::Max(ch) | F::Sum(ch) => {
            s.push_str(if matches!(f, F::Max(_)) { "(max" } else { "(sum" });
            for c in ch {
                s.push(' ');
                write_function(s, c);
            }
            s.push(')');
        }
        F::Scale(l, c) => {
            s.push_str("(scale ");
            num(s, *l);
            s.push(' ');
            write_function(s, c);
            s.push(')');
        }
        F::Indicator(r) => match r {
            Region::Box { lo, hi } => {
                s.push_str("(indicator-box");
                region_pairs(s, lo, hi);
                s.push(')');
            }
            Region::WholeSpace { lo, hi } => {
                s.push_str("(indicator-whole");
                region_pairs(s, lo, hi);
                s.push(')');
            }
            Region::Ball { center, radius } => {
                s.push_str("(indicator-ball ");
                vec_str(s, center);
                s.push(' ');
                num(s, *radius);
                s.push(')');
            }
        },
        F::IndicatorSublevel(cs) => {
            s.push_str("(indicator-sublevel");
            for c in cs {
                s.push_str(" (con ");
                vec_str(s, &c.lin);
                s.push(' ');
                vec_str(s, &c.recip);
                s.push(' ');
                num(s, c.c);
                s.push(')');
            }
            s.push(')');
        }
        F::Recip { index, positive } => {
            let _ = write!(s, "(recip {index} {})", if *positive { "+" } else { "-" });
        }
        F::Distance { center, weight } => {
            s.push_str("(dist ");
            vec_str(s, center);
            s.push(' ');
            num(s, *weight);
            s.push(')');
        }
        F::Blackbox(b) => {
            let _ = write!(s, "(blackbox {})", b.name);
        }
    }
}

/// Region syntax: `(box (lo hi) ..)`, `(ball (c ..) r)`, `(whole (lo hi) ..)`,
/// or the bracket form `[lo,hi]x[lo,hi]`.
pub fn parse_region(src: &str) -> Result<Region> {
    let t = src.trim();
    if t.starts_with('[') {
        return parse_bracket_region(t);
    }
    let e = parse_sexpr(t)?;
    region_from_sexpr(&e)
}

pub(crate) fn region_from_sexpr(e: &SExpr) -> Result<Region> {
    let Some(items) = e.items() else {
        return e.err("expected (box ..), (ball ..) or (whole ..)");
    };
    let head = items.first().and_then(|h| h.atom()).unwrap_or("");
    let args = &items[1..];
    match head {
        "box" => {
            let (lo, hi) = intervals(args, None, e)?;
            Region::new_box(lo, hi)
        }
        "whole" => {
            let (lo, hi) = intervals(args, None, e)?;
            Region::new_whole(lo, hi)
        }
        "ball" if args.len() == 2 => Region::new_ball(vector(&args[0], None)?, scalar(&args[1], None)?),
        _ => e.err("expected (box ..), (ball (c ..) r) or (whole ..)"),
    }
}

fn parse_bracket_region(t: &str) -> Result<Region> {
    let bad = |m: &str| Error::Parse {
        line: 1,
        column: 1,
        message: m.into(),
    };
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in t.split(['x', '×']) {
        let p = part.trim();
        let inner = p
            .strip_prefix('[')
            .and_then(|p| p.strip_suffix(']'))
            .ok_or_else(|| bad("expected [lo,hi]"))?;
        let mut nums = inner.split(',').map(|v| v.trim().parse::<f64>());
        match (nums.next(), nums.next(), nums.next()) {
            (Some(Ok(l)), Some(Ok(h)), None) => {
                lo.push(l);
                hi.push(h);
            }
            _ => return Err(bad("expected [lo,hi] with two numbers")),
        }
    }
    Region::new_box(lo, hi)
}

pub fn print_region(r: &Region) -> String {
    let mut s = String::new();
    match r {
        Region::Box { lo, hi } => {
            s.push_str("(box");
            region_pairs(&mut s, lo, hi);
        }
        Region::WholeSpace { lo, hi } => {
            s.push_str("(whole");
            region_pairs(&mut s, lo, hi);
        }
        Region::Ball { center, radius } => {
            s.push_str("(ball ");
            vec_str(&mut s, center);
            s.push(' ');
            num(&mut s, *radius);
        }
    }
    s.push(')');
    s
}

/// Witness tuple `(tuple (pt ..) (pt ..) ..)`.
pub(crate) fn build_tuple(e: &SExpr, k: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let items = e.items().unwrap_or(&[]);
    if items.first().and_then(|h| h.atom()) != Some("tuple") || items.len() < 2 {
        return e.err("expected (tuple (pt ..) ..)");
    }
    items[1..]
        .iter()
        .map(|p| {
            let parts = p.items().unwrap_or(&[]);
            if parts.first().and_then(|h| h.atom()) != Some("pt") || parts.len() < 2 {
                return p.err("expected (pt x1 x2 ..)");
            }
            parts[1..].iter().map(|v| scalar(v, k)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_spec_examples() {
        let f = parse_function("(sum (abs 0) (indicator-box (0 1)))").unwrap();
        assert_eq!(f.eval(&[0.5]).value(), 0.5);
        assert!(f.eval(&[2.0]).is_infinite());
        let r = parse_function("(recip 0 +)").unwrap();
        assert_eq!(r.eval(&[0.5]).value(), 2.0);
    }

    #[test]
    fn template_uses_k() {
        let e = parse_sexpr("(scale (pow 2 (neg k)) (abs 0))").unwrap();
        let f = build_function(&e, Some(3.0)).unwrap();
        assert_eq!(f.eval(&[2.0]).value(), 0.25);
        assert!(build_function(&e, None).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        match parse_function("(sum (abs 0)\n  (bogus 1))") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 4)),
            other => panic!("{other:?}"),
        }
        match parse_function("(abs 0") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 1)),
            other => panic!("{other:?}"),
        }
        assert!(parse_function("(abs -1)").is_err());
        assert!(parse_function("(scale -1 (abs 0))").is_err());
    }

    #[test]
    fn bracket_regions() {
        assert_eq!(parse_region("[-2,2]").unwrap(), Region::interval(-2.0, 2.0));
        let r = parse_region("[0,1]x[-1,1]").unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(parse_region(&print_region(&r)).unwrap(), r);
        assert!(parse_region("[1,0]").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![(-1e3f64..1e3), (-10i32..10).prop_map(|v| v as f64), Just(0.1), Just(1e-7)]
    }

    fn leaf(n: usize) -> impl Strategy<Value = ExtFunction> {
        let vecn = move || proptest::collection::vec(finite(), n);
        prop_oneof![
            finite().prop_map(ExtFunction::Const),
            (vecn(), finite()).prop_map(|(a, b)| ExtFunction::Affine { a, b }),
            (0..n).prop_map(ExtFunction::Abs),
            Just(ExtFunction::Norm2),
            Just(ExtFunction::NormInf),
            (0..n, any::<bool>()).prop_map(|(index, positive)| ExtFunction::Recip { index, positive }),
            (vecn(), 0.0f64..5.0).prop_map(|(center, weight)| ExtFunction::Distance { center, weight }),
            (vecn(), 0.1f64..3.0).prop_map(|(c, r)| ExtFunction::Indicator(Region::new_ball(c, r).unwrap())),
            vecn().prop_map(|lo| {
                let hi = lo.iter().map(|v| v + 1.0).collect();
                ExtFunction::Indicator(Region::new_box(lo, hi).unwrap())
            }),
            (vecn(), vecn(), finite()).prop_map(|(lin, recip, c)| {
                ExtFunction::IndicatorSublevel(vec![Constraint { lin, recip, c }])
            }),
        ]
    }

    fn tree(n: usize) -> impl Strategy<Value = ExtFunction> {
        leaf(n).prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..3).prop_map(ExtFunction::Max),
                proptest::collection::vec(inner.clone(), 1..3).prop_map(ExtFunction::Sum),
                (0.0f64..10.0, inner).prop_map(|(l, c)| ExtFunction::Scale(l, Box::new(c))),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonical_printer_round_trips(f in tree(2)) {
            let text = print_function(&f);
            let back = parse_function(&text).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(print_function(&back), text);
        }
    }
}
