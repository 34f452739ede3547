//! Parsers for the command-line jet format `r,(p_1,..,p_n),A` and for cone
//! family strings such as `D,P` or `gamma=2,R=1`.
//!
//! `A` is a number `s` (meaning `s I`) or a row list `((a,b),(c,d))`. A bare
//! number `r` is the jet `(r, 0, 0)`.

use jetcone::cones::{Generator, MonotonicityCone};
use jetcone::jet::unit;
use jetcone::{DirectionalCone, Jet, SymMatrix};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
enum Item {
    Num(f64),
    List(Vec<Item>),
}

struct Lexer<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn list(&mut self, close: Option<u8>) -> Result<Vec<Item>, String> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Some(b'(') | Some(b'[') => {
                    let end = if self.s[self.pos] == b'(' { b')' } else { b']' };
                    self.pos += 1;
                    out.push(Item::List(self.list(Some(end))?));
                }
                Some(c) if c == b'-' || c == b'+' || c == b'.' || c.is_ascii_digit() || c.is_ascii_alphabetic() => {
                    let start = self.pos;
                    while self.pos < self.s.len() && !matches!(self.s[self.pos], b',' | b')' | b']' | b'(' | b'[') {
                        self.pos += 1;
                    }
                    let tok = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice").trim();
                    let v: f64 = tok.parse().map_err(|_| format!("bad number {tok:?}"))?;
                    if !v.is_finite() {
                        return Err(format!("non-finite number {tok:?}"));
                    }
                    out.push(Item::Num(v));
                }
                other => return Err(format!("unexpected {:?} at offset {}", other.map(char::from), self.pos)),
            }
            match (self.peek(), close) {
                (Some(b','), _) => self.pos += 1,
                (Some(c), Some(end)) if c == end => {
                    self.pos += 1;
                    return Ok(out);
                }
                (None, None) => return Ok(out),
                (other, _) => return Err(format!("unexpected {:?} at offset {}", other.map(char::from), self.pos)),
            }
        }
    }
}

fn items(s: &str) -> Result<Vec<Item>, String> {
    Lexer { s: s.as_bytes(), pos: 0 }.list(None)
}

fn numbers(items: &[Item]) -> Result<Vec<f64>, String> {
    items
        .iter()
        .map(|i| match i {
            Item::Num(v) => Ok(*v),
            Item::List(_) => Err("expected a number, found a list".to_string()),
        })
        .collect()
}

/// Comma-separated vector, optionally wrapped in parentheses.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, CliError> {
    let it = items(s).map_err(CliError::Usage)?;
    let flat = match it.as_slice() {
        [Item::List(inner)] => inner.clone(),
        _ => it,
    };
    numbers(&flat).map_err(CliError::Usage)
}

/// Jet from `r,(p...),A`; `dim` fixes the dimension of a bare `r`.
pub fn parse_jet(s: &str, dim: usize) -> Result<Jet, CliError> {
    let bad = |m: String| CliError::Usage(format!("jet {s:?}: {m}"));
    let it = items(s).map_err(bad)?;
    match it.as_slice() {
        [Item::Num(r)] => Ok(Jet::new(*r, vec![0.0; dim], SymMatrix::zeros(dim)?)?),
        [Item::Num(r), Item::List(p), a] => {
            let p = numbers(p).map_err(bad)?;
            let n = p.len();
            let a = match a {
                Item::Num(v) => SymMatrix::scalar(n, *v)?,
                Item::List(rows) => {
                    let rows: Vec<Vec<f64>> = rows
                        .iter()
                        .map(|r| match r {
                            Item::List(row) => numbers(row),
                            Item::Num(_) => Err("matrix rows must be lists".to_string()),
                        })
                        .collect::<Result<_, _>>()
                        .map_err(bad)?;
                    if rows.len() != n {
                        return Err(bad(format!("matrix has {} rows for a gradient of length {n}", rows.len())));
                    }
                    SymMatrix::from_rows_strict(&rows)?
                }
            };
            Ok(Jet::new(*r, p, a)?)
        }
        _ => Err(bad("expected r, (p_1, .., p_n), A".into())),
    }
}

/// Cone from a family string. Labels: `P`, `N`, `D` (orthant), `Q` (= `N,P`),
/// `Dn` (`p_n <= 0`), `Pn` (convexity in the first `n - 1` variables),
/// `gamma=<g>`, `R=<radius>`.
pub fn parse_family(s: &str, n: usize) -> Result<MonotonicityCone, CliError> {
    let mut gens = Vec::new();
    for raw in s.split(',') {
        let label = raw.trim();
        let g = match label {
            "P" => vec![Generator::Convexity],
            "N" => vec![Generator::Negativity],
            "Q" => vec![Generator::Negativity, Generator::Convexity],
            "D" => vec![Generator::Directional { cone: DirectionalCone::orthant(n)? }],
            "Dn" => {
                let nu: Vec<f64> = unit(n, n - 1).iter().map(|v| -v).collect();
                vec![Generator::Directional { cone: DirectionalCone::halfspace(&nu)? }]
            }
            "Pn" if n >= 2 => vec![Generator::PartialConvexity { k: n - 1 }],
            _ => match label.split_once('=') {
                Some(("gamma", v)) => vec![Generator::Gamma { gamma: number(v)? }],
                Some(("R", v)) => vec![Generator::Radius { radius: number(v)? }],
                _ => {
                    return Err(CliError::Usage(format!(
                        "unknown cone label {label:?}; use P, N, Q, D, Dn, Pn, gamma=<g> or R=<radius>"
                    )))
                }
            },
        };
        gens.extend(g);
    }
    Ok(MonotonicityCone::from_generators(n, gens)?)
}

fn number(s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("bad number {s:?}")))
}
