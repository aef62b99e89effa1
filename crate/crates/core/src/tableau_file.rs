//! Line-oriented text format for double tableaux.
//!
//! ```text
//! # comment
//! name IMKG232a
//! r 4
//! A
//! <r rows of r decimals>
//! b
//! <one row>
//! Ahat
//! <r rows>
//! bhat
//! <one row>
//! ```
//!
//! Optional `c` and `chat` sections (one row each) may follow; they are
//! checked against the row sums to `1e-12` and otherwise ignored.

use crate::tableau::{ButcherTableau, DoubleTableau, TableauError};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

const NODE_FILE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TableauFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> TableauFileError {
    TableauFileError::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next(&mut self, expecting: &str) -> Result<(usize, &'a str), TableauFileError> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(parse_err(
                self.last + 1,
                format!("unexpected end of file, expected {expecting}"),
            )),
        }
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, &'a str), TableauFileError> {
        let (n, l) = self.next(key)?;
        let mut parts = l.splitn(2, char::is_whitespace);
        if parts.next() != Some(key) {
            return Err(parse_err(n, format!("expected '{key}', found '{l}'")));
        }
        Ok((n, parts.next().unwrap_or("").trim()))
    }

    fn row(&mut self, r: usize, what: &str) -> Result<(usize, Vec<f64>), TableauFileError> {
        let (n, l) = self.next(what)?;
        let values = l
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(n, format!("'{tok}' is not a number in {what}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != r {
            return Err(parse_err(
                n,
                format!("{what} row has {} entries, expected {r}", values.len()),
            ));
        }
        Ok((n, values))
    }

    fn matrix(&mut self, r: usize, what: &str) -> Result<(Vec<usize>, DMatrix<f64>), TableauFileError> {
        let mut m = DMatrix::zeros(r, r);
        let mut lines = Vec::with_capacity(r);
        for i in 0..r {
            let (n, row) = self.row(r, what)?;
            lines.push(n);
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok((lines, m))
    }
}

fn check_triangular(
    m: &DMatrix<f64>,
    lines: &[usize],
    strict: bool,
    part: &str,
) -> Result<(), TableauFileError> {
    let r = m.nrows();
    for i in 0..r {
        let start = if strict { i } else { i + 1 };
        for j in start..r {
            if m[(i, j)] != 0.0 {
                let kind = if strict {
                    "strictly lower triangular"
                } else {
                    "lower triangular"
                };
                return Err(parse_err(
                    lines[i],
                    format!("{part} part not {kind} (entry [{}][{}] = {})", i + 1, j + 1, m[(i, j)]),
                ));
            }
        }
    }
    Ok(())
}

fn check_nodes(
    t: &ButcherTableau,
    nodes: &[f64],
    line: usize,
    what: &str,
) -> Result<(), TableauFileError> {
    for (i, (given, sum)) in nodes.iter().zip(t.c().iter()).enumerate() {
        if (given - sum).abs() > NODE_FILE_TOLERANCE {
            return Err(parse_err(
                line,
                format!("{what}[{}] = {given} differs from the row sum {sum}", i + 1),
            ));
        }
    }
    Ok(())
}

pub fn parse_tableau(text: &str) -> Result<DoubleTableau, TableauFileError> {
    let mut lines = Lines::new(text);
    let (n, name) = lines.keyword("name")?;
    if name.is_empty() {
        return Err(parse_err(n, "missing method name"));
    }
    let name = name.to_string();
    let (n, r) = lines.keyword("r")?;
    let r: usize = r
        .parse()
        .ok()
        .filter(|r| *r > 0)
        .ok_or_else(|| parse_err(n, format!("stage count '{r}' is not a positive integer")))?;

    lines.keyword("A")?;
    let (a_lines, a) = lines.matrix(r, "A")?;
    check_triangular(&a, &a_lines, true, "explicit")?;
    lines.keyword("b")?;
    let (_, b) = lines.row(r, "b")?;
    lines.keyword("Ahat")?;
    let (ah_lines, ah) = lines.matrix(r, "Ahat")?;
    check_triangular(&ah, &ah_lines, false, "implicit")?;
    lines.keyword("bhat")?;
    let (_, bh) = lines.row(r, "bhat")?;

    let explicit = ButcherTableau::new(a, DVector::from_vec(b))?;
    let implicit = ButcherTableau::new(ah, DVector::from_vec(bh))?;

    while let Some(&(n, l)) = lines.inner.peek() {
        match l {
            "c" | "chat" => {
                lines.next(l)?;
                let (rn, nodes) = lines.row(r, l)?;
                let part = if l == "c" { &explicit } else { &implicit };
                check_nodes(part, &nodes, rn, l)?;
            }
            other => return Err(parse_err(n, format!("unexpected content '{other}'"))),
        }
    }
    Ok(DoubleTableau::new(name, explicit, implicit)?)
}

fn write_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let row: Vec<String> = values.map(|v| format!("{v:.16e}")).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

/// Text form with 17 significant digits, so that parsing it back is exact.
pub fn format_tableau(t: &DoubleTableau) -> String {
    let r = t.stages();
    let mut out = String::new();
    let _ = writeln!(out, "name {}", t.name());
    let _ = writeln!(out, "r {r}");
    for (label, part) in [("A", t.explicit_part()), ("Ahat", t.implicit_part())] {
        out.push_str(label);
        out.push('\n');
        for i in 0..r {
            write_row(&mut out, (0..r).map(|j| part.a()[(i, j)]));
        }
        out.push_str(if label == "A" { "b\n" } else { "bhat\n" });
        write_row(&mut out, part.b().iter().copied());
    }
    out
}

pub fn read_tableau_file(path: impl AsRef<Path>) -> Result<DoubleTableau, TableauFileError> {
    parse_tableau(&std::fs::read_to_string(path)?)
}

pub fn write_tableau_file(t: &DoubleTableau, path: impl AsRef<Path>) -> Result<(), TableauFileError> {
    std::fs::write(path, format_tableau(t))?;
    Ok(())
}
