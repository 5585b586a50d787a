//! Matrix Market coordinate format (`real`, `general` or `symmetric`).
//!
//! Values are written with 17 significant digits so that a write/read cycle
//! reproduces every `f64` bit for bit. Explicitly stored zeros are kept.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CsrMatrix, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtxSymmetry {
    General,
    Symmetric,
}

/// Writes `a`; in symmetric mode only the lower triangle is emitted.
pub fn write_mtx<W: Write>(out: &mut W, a: &CsrMatrix, symmetry: MtxSymmetry) -> std::io::Result<()> {
    let keep = |i: usize, j: usize| symmetry == MtxSymmetry::General || j <= i;
    let count = (0..a.rows())
        .map(|i| a.row_entries(i).filter(|&(j, _)| keep(i, j)).count())
        .sum::<usize>();
    let sym = match symmetry {
        MtxSymmetry::General => "general",
        MtxSymmetry::Symmetric => "symmetric",
    };
    writeln!(out, "%%MatrixMarket matrix coordinate real {sym}")?;
    writeln!(out, "{} {} {}", a.rows(), a.cols(), count)?;
    for i in 0..a.rows() {
        for (j, v) in a.row_entries(i) {
            if keep(i, j) {
                writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}

pub fn read_mtx<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header.map_err(|e| parse_err(1, &e.to_string()))?;
    let lower = header.to_ascii_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" || tokens[3] != "real" {
        return Err(parse_err(1, "only coordinate real matrices are supported"));
    }
    let symmetry = match tokens[4] {
        "general" => MtxSymmetry::General,
        "symmetric" => MtxSymmetry::Symmetric,
        other => return Err(parse_err(1, &format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line.map_err(|e| parse_err(lineno, &e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'rows cols entries'"));
                }
                size = Some((
                    parse_usize(fields[0], lineno)?,
                    parse_usize(fields[1], lineno)?,
                    parse_usize(fields[2], lineno)?,
                ));
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'row col value'"));
                }
                let i = parse_usize(fields[0], lineno)?;
                let j = parse_usize(fields[1], lineno)?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(lineno, "entry index out of range"));
                }
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad value"))?;
                triplets.push((i - 1, j - 1, v));
                if symmetry == MtxSymmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (rows, cols, declared) = size.ok_or_else(|| parse_err(0, "missing size line"))?;
    let stored = match symmetry {
        MtxSymmetry::General => triplets.len(),
        MtxSymmetry::Symmetric => triplets.iter().filter(|t| t.0 >= t.1).count(),
    };
    if stored != declared {
        return Err(parse_err(
            0,
            &format!("declared {declared} entries, found {stored}"),
        ));
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

pub fn save_mtx(path: &Path, a: &CsrMatrix, symmetry: MtxSymmetry) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mtx(&mut w, a, symmetry)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_mtx(path: &Path) -> Result<CsrMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mtx(BufReader::new(file))
}

/// Dense matrices are exported with every entry stored.
pub fn save_dense_mtx(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut t = Vec::with_capacity(a.rows() * a.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            t.push((i, j, a[(i, j)]));
        }
    }
    save_mtx(path, &CsrMatrix::from_triplets(a.rows(), a.cols(), &t)?, MtxSymmetry::General)
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| parse_err(line, "bad integer"))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_read_mirrors() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let a = read_mtx(text.as_bytes()).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn bit_exact_round_trip() {
        let vals = [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23, 0.0];
        let t: Vec<_> = vals.iter().enumerate().map(|(i, &v)| (i, (i + 1) % 5, v)).collect();
        let a = CsrMatrix::from_triplets(5, 5, &t).unwrap();
        let mut buf = Vec::new();
        write_mtx(&mut buf, &a, MtxSymmetry::General).unwrap();
        let b = read_mtx(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entry_count_mismatch_is_error() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 2.0\n";
        assert!(matches!(read_mtx(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_array_format() {
        let text = "%%MatrixMarket matrix array real general\n1 1\n2.0\n";
        assert!(read_mtx(text.as_bytes()).is_err());
    }
}
