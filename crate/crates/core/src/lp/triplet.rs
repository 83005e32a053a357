//! Plain-text sparse triplet export of an assembled LP.
//!
//! ```text
//! vmot-lp 1
//! direction min
//! mode exact
//! dims 1 2
//! size <rows> <cols> <nnz>
//! deltas <v...>
//! objective
//! <one value per column>
//! constraints
//! <E|L|G> <rhs> <kind> <t> <i|k> <node|cell>
//! entries
//! <row> <col> <value>
//! ```

use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use super::{IndexMap, LinearProgram, Mode, RowTag, Sense};
use crate::payoff::Direction;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum TripletError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn write_triplet<T: Scalar, W: Write>(lp: &LinearProgram<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "vmot-lp 1")?;
    writeln!(w, "direction {}", lp.direction.as_str())?;
    writeln!(
        w,
        "mode {}",
        match lp.mode {
            Mode::Exact => "exact",
            Mode::Relaxed => "relaxed",
        }
    )?;
    let dims: Vec<String> = lp.index_map.dims().iter().map(usize::to_string).collect();
    writeln!(w, "dims {}", dims.join(" "))?;
    writeln!(w, "size {} {} {}", lp.n_rows(), lp.n_vars(), lp.matrix.nnz())?;
    let deltas: Vec<String> = lp.deltas.iter().map(|v| format!("{v:e}")).collect();
    writeln!(w, "deltas {}", deltas.join(" "))?;
    writeln!(w, "objective")?;
    for c in &lp.objective {
        writeln!(w, "{c:e}")?;
    }
    writeln!(w, "constraints")?;
    for ((s, b), tag) in lp.senses.iter().zip(&lp.rhs).zip(&lp.row_meta) {
        let (a, bb, c) = match *tag {
            RowTag::Marginal { t, i, node } => (t, i, node),
            RowTag::MartingaleEq { t, k, cell }
            | RowTag::MartingaleUb { t, k, cell }
            | RowTag::MartingaleLb { t, k, cell } => (t, k, cell),
            RowTag::Other => (0, 0, 0),
        };
        writeln!(w, "{} {b:e} {} {a} {bb} {c}", s.symbol(), tag.kind())?;
    }
    writeln!(w, "entries")?;
    for r in 0..lp.n_rows() {
        let (cols, vals) = lp.matrix.row(r);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(w, "{r} {c} {v:e}")?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, TripletError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> TripletError {
        TripletError::Parse { line: self.line, msg: msg.into() }
    }

    fn keyword(&mut self, key: &str) -> Result<Vec<String>, TripletError> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn parse<V: FromStr>(&self, s: &str) -> Result<V, TripletError> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}

pub fn read_triplet<T: Scalar, R: BufRead>(r: R) -> Result<LinearProgram<T>, TripletError> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    let version = lines.keyword("vmot-lp")?;
    if version.first().map(String::as_str) != Some("1") {
        return Err(lines.err("unsupported version"));
    }
    let direction = match lines.keyword("direction")?.first().map(String::as_str) {
        Some("min") => Direction::Min,
        Some("max") => Direction::Max,
        _ => return Err(lines.err("direction must be min or max")),
    };
    let mode = match lines.keyword("mode")?.first().map(String::as_str) {
        Some("exact") => Mode::Exact,
        Some("relaxed") => Mode::Relaxed,
        _ => return Err(lines.err("mode must be exact or relaxed")),
    };
    let dims = lines.keyword("dims")?.iter().map(|s| lines.parse::<usize>(s)).collect::<Result<Vec<_>, _>>()?;
    let size = lines.keyword("size")?;
    if size.len() != 3 {
        return Err(lines.err("size needs rows cols nnz"));
    }
    let (m, n, nnz): (usize, usize, usize) = (lines.parse(&size[0])?, lines.parse(&size[1])?, lines.parse(&size[2])?);
    let deltas = lines.keyword("deltas")?.iter().map(|s| lines.parse::<T>(s)).collect::<Result<Vec<_>, _>>()?;
    lines.keyword("objective")?;
    let mut objective = Vec::with_capacity(n);
    for _ in 0..n {
        let l = lines.next()?;
        objective.push(lines.parse::<T>(l.trim())?);
    }
    lines.keyword("constraints")?;
    let (mut senses, mut rhs, mut row_meta) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    for _ in 0..m {
        let l = lines.next()?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 6 {
            return Err(lines.err("constraint line needs 6 fields"));
        }
        senses.push(match f[0] {
            "E" => Sense::Eq,
            "L" => Sense::Le,
            "G" => Sense::Ge,
            _ => return Err(lines.err("sense must be E, L or G")),
        });
        rhs.push(lines.parse::<T>(f[1])?);
        let (a, b, c): (usize, usize, usize) = (lines.parse(f[3])?, lines.parse(f[4])?, lines.parse(f[5])?);
        row_meta.push(match f[2] {
            "marginal" => RowTag::Marginal { t: a, i: b, node: c },
            "martingale_eq" => RowTag::MartingaleEq { t: a, k: b, cell: c },
            "martingale_ub" => RowTag::MartingaleUb { t: a, k: b, cell: c },
            "martingale_lb" => RowTag::MartingaleLb { t: a, k: b, cell: c },
            "other" => RowTag::Other,
            _ => return Err(lines.err("unknown row kind")),
        });
    }
    lines.keyword("entries")?;
    let mut offsets = vec![0usize; m + 1];
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    let mut last_row = 0;
    for _ in 0..nnz {
        let l = lines.next()?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(lines.err("entry line needs row col value"));
        }
        let (row, col): (usize, usize) = (lines.parse(f[0])?, lines.parse(f[1])?);
        if row < last_row || row >= m {
            return Err(lines.err("entries must be sorted by row"));
        }
        last_row = row;
        offsets[row + 1] += 1;
        indices.push(col);
        values.push(lines.parse::<T>(f[2])?);
    }
    for r in 0..m {
        offsets[r + 1] += offsets[r];
    }
    let matrix = CsrMatrix::new(m, n, offsets, indices, values).map_err(|e| lines.err(e.to_string()))?;
    let index_map = IndexMap::new(dims);
    if index_map.len() != n {
        return Err(lines.err("dims do not match column count"));
    }
    Ok(LinearProgram { objective, matrix, senses, rhs, row_meta, index_map, direction, deltas, mode })
}
