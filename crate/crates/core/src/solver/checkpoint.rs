//! Flat text checkpoint of a [`SolverState`].
//!
//! ```text
//! cluster-game-checkpoint 1
//! k <iteration>
//! clusters <H>
//! matrix x <rows> <cols>
//! <row-major values, one matrix row per line>
//! matrix y0 <rows> <cols>
//! ...
//! matrix g0 <rows> <cols>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so a parsed checkpoint
//! reproduces the state bit for bit.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::SolverState;

const MAGIC: &str = "cluster-game-checkpoint 1";
/// Upper bound on the entries of one matrix, to reject absurd headers.
const MAX_ENTRIES: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint ended early: {0}")]
    Truncated(String),
    #[error("checkpoint shapes are inconsistent: {0}")]
    Shape(String),
}

pub fn write_checkpoint(state: &SolverState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "k {}", state.k);
    let _ = writeln!(out, "clusters {}", state.y.len());
    write_matrix(&mut out, "x", &state.x);
    for (h, y) in state.y.iter().enumerate() {
        write_matrix(&mut out, &format!("y{h}"), y);
    }
    for (h, g) in state.g_prev.iter().enumerate() {
        write_matrix(&mut out, &format!("g{h}"), g);
    }
    out
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expecting: &str) -> Result<(usize, &'a str), CheckpointError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| CheckpointError::Truncated(format!("expected {expecting}")))
    }

    fn keyword_usize(&mut self, key: &str) -> Result<usize, CheckpointError> {
        let (line, text) = self.next(key)?;
        let mut words = text.split_whitespace();
        let parse_err = |message: String| CheckpointError::Parse { line, message };
        if words.next() != Some(key) {
            return Err(parse_err(format!("expected `{key} <value>`")));
        }
        let value = words
            .next()
            .ok_or_else(|| parse_err(format!("missing value for `{key}`")))?;
        if words.next().is_some() {
            return Err(parse_err("trailing tokens".into()));
        }
        value
            .parse()
            .map_err(|_| parse_err(format!("bad value `{value}` for `{key}`")))
    }

    fn matrix(&mut self, name: &str) -> Result<DMatrix<f64>, CheckpointError> {
        let (line, text) = self.next(&format!("matrix {name}"))?;
        let parse_err = |message: String| CheckpointError::Parse { line, message };
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() != 4 || words[0] != "matrix" || words[1] != name {
            return Err(parse_err(format!("expected `matrix {name} <rows> <cols>`")));
        }
        let rows: usize = words[2]
            .parse()
            .map_err(|_| parse_err(format!("bad row count `{}`", words[2])))?;
        let cols: usize = words[3]
            .parse()
            .map_err(|_| parse_err(format!("bad column count `{}`", words[3])))?;
        if rows.checked_mul(cols).is_none_or(|e| e > MAX_ENTRIES) {
            return Err(parse_err(format!("matrix {name} is too large")));
        }
        let mut values = Vec::new();
        for _ in 0..rows {
            let (line, text) = self.next(&format!("row of matrix {name}"))?;
            let start = values.len();
            for tok in text.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| CheckpointError::Parse {
                    line,
                    message: format!("bad number `{tok}`"),
                })?;
                if !v.is_finite() {
                    return Err(CheckpointError::Parse {
                        line,
                        message: format!("non-finite value `{tok}`"),
                    });
                }
                values.push(v);
            }
            if values.len() - start != cols {
                return Err(CheckpointError::Parse {
                    line,
                    message: format!("expected {cols} values, found {}", values.len() - start),
                });
            }
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }
}

pub fn parse_checkpoint(text: &str) -> Result<SolverState, CheckpointError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, magic) = lines.next("checkpoint header")?;
    if magic != MAGIC {
        return Err(CheckpointError::Parse {
            line,
            message: format!("expected header `{MAGIC}`"),
        });
    }
    let k = lines.keyword_usize("k")?;
    let clusters = lines.keyword_usize("clusters")?;
    let x = lines.matrix("x")?;
    if clusters == 0 || clusters > x.nrows() {
        return Err(CheckpointError::Shape(format!(
            "{clusters} clusters for {} agents",
            x.nrows()
        )));
    }
    let mut y = Vec::with_capacity(clusters);
    for h in 0..clusters {
        y.push(lines.matrix(&format!("y{h}"))?);
    }
    let mut g_prev = Vec::with_capacity(clusters);
    for h in 0..clusters {
        g_prev.push(lines.matrix(&format!("g{h}"))?);
    }
    let rows: usize = y.iter().map(DMatrix::nrows).sum();
    let cols: usize = y.iter().map(DMatrix::ncols).sum();
    if rows != x.nrows() || cols != x.ncols() {
        return Err(CheckpointError::Shape(format!(
            "tracker blocks cover {rows}x{cols}, estimates are {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if y.iter().zip(&g_prev).any(|(a, b)| a.shape() != b.shape()) {
        return Err(CheckpointError::Shape(
            "gradient and tracker blocks differ".into(),
        ));
    }
    if y.iter().any(|m| m.nrows() == 0 || m.ncols() == 0) {
        return Err(CheckpointError::Shape("empty cluster block".into()));
    }
    for (line, rest) in lines.inner {
        if !rest.trim().is_empty() {
            return Err(CheckpointError::Parse {
                line: line + 1,
                message: "unexpected trailing content".into(),
            });
        }
    }
    Ok(SolverState { x, y, g_prev, k })
}
