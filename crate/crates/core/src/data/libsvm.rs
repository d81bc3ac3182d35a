//! LIBSVM / SVMlight text format.
//!
//! One sample per line: `label idx:val idx:val ...` with 1-based strictly
//! ascending indices. Absent indices are zero. Anything after `#` is a
//! comment, blank lines are skipped, `qid:` tokens are ignored, and both
//! LF and CRLF line endings are accepted.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Dataset, LabeledData};
use crate::error::{Error, ParseError, ParseErrorKind, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Labels must be {−1,+1} or {0,1}; the latter is mapped to {−1,+1}.
    #[default]
    Binary,
    /// Labels are kept as real-valued targets.
    Real,
}

#[derive(Debug, Clone, Default)]
pub struct LibsvmOptions {
    /// Fixes the feature dimension instead of taking the largest index seen.
    pub feature_dim: Option<usize>,
    pub labels: LabelMode,
    pub name: Option<String>,
}

struct SparseRow {
    label: f64,
    entries: Vec<(usize, f64)>,
}

fn err(line: usize, kind: ParseErrorKind) -> Error {
    Error::Parse(ParseError { line, kind })
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, ParseErrorKind::NonNumeric(tok.to_string())))?;
    if !v.is_finite() {
        return Err(err(line, ParseErrorKind::NonFinite(tok.to_string())));
    }
    Ok(v)
}

fn parse_line(text: &str, line: usize, dim_limit: Option<usize>) -> Result<Option<SparseRow>> {
    let content = text.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_number(label_tok, line)?;
    let mut entries = Vec::new();
    let mut previous = 0usize;
    for tok in tokens {
        if tok.starts_with("qid:") {
            continue;
        }
        let (idx_tok, val_tok) = tok
            .split_once(':')
            .ok_or_else(|| err(line, ParseErrorKind::MissingColon(tok.to_string())))?;
        let index: usize = idx_tok
            .parse()
            .map_err(|_| err(line, ParseErrorKind::NonNumeric(idx_tok.to_string())))?;
        if index == 0 {
            return Err(err(line, ParseErrorKind::ZeroIndex));
        }
        if index <= previous {
            return Err(err(
                line,
                ParseErrorKind::NonAscendingIndex {
                    previous,
                    found: index,
                },
            ));
        }
        if let Some(dim) = dim_limit {
            if index > dim {
                return Err(err(line, ParseErrorKind::IndexOutOfRange { index, dim }));
            }
        }
        let value = parse_number(val_tok, line)?;
        entries.push((index, value));
        previous = index;
    }
    Ok(Some(SparseRow { label, entries }))
}

fn normalize_binary(labels: &mut [f64]) -> Result<()> {
    let pm_one = labels.iter().all(|&y| y == 1.0 || y == -1.0);
    if pm_one {
        return Ok(());
    }
    let zero_one = labels.iter().all(|&y| y == 0.0 || y == 1.0);
    if zero_one {
        labels.iter_mut().for_each(|y| *y = 2.0 * *y - 1.0);
        return Ok(());
    }
    let mut distinct: Vec<f64> = labels.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let shown = distinct.iter().take(6).map(|v| v.to_string()).collect();
    Err(err(0, ParseErrorKind::Multiclass(shown)))
}

/// Parses a LIBSVM stream into a dense dataset.
pub fn parse_libsvm<R: BufRead>(mut reader: R, opts: &LibsvmOptions) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = std::str::from_utf8(&buf).map_err(|_| err(line_no, ParseErrorKind::Utf8))?;
        if let Some(row) = parse_line(text, line_no, opts.feature_dim)? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(err(0, ParseErrorKind::EmptyFile));
    }

    let dim = opts.feature_dim.unwrap_or_else(|| {
        rows.iter()
            .filter_map(|r| r.entries.last().map(|&(i, _)| i))
            .max()
            .unwrap_or(0)
    });
    let mut x = DMatrix::zeros(rows.len(), dim);
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        for &(index, value) in &row.entries {
            x[(r, index - 1)] = value;
        }
        labels.push(row.label);
    }
    if opts.labels == LabelMode::Binary {
        normalize_binary(&mut labels)?;
    }
    let name = opts.name.clone().unwrap_or_else(|| "libsvm".to_string());
    Dataset::new(name, x, DVector::from_vec(labels))
}

pub fn read_libsvm_file(path: impl AsRef<Path>, opts: &LibsvmOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut opts = opts.clone();
    if opts.name.is_none() {
        opts.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
    }
    parse_libsvm(BufReader::new(file), &opts)
}

/// Writes non-zero entries in shortest round-trip float form.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let x = data.features();
    for (r, y) in data.labels().iter().enumerate() {
        write!(out, "{y}")?;
        for c in 0..x.ncols() {
            let v = x[(r, c)];
            if v != 0.0 {
                write!(out, " {}:{v}", c + 1)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_libsvm(text.as_bytes(), &LibsvmOptions::default())
    }

    fn kind_of(e: Error) -> (usize, ParseErrorKind) {
        match e {
            Error::Parse(p) => (p.line, p.kind),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn two_line_example() {
        let d = parse("+1 1:0.5 3:2.0\n-1 2:1.0").unwrap();
        assert_eq!(
            d.features(),
            &DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 2.0, 0.0, 1.0, 0.0])
        );
        assert_eq!(d.labels().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn empty_stream() {
        assert_eq!(kind_of(parse("").unwrap_err()).1, ParseErrorKind::EmptyFile);
        assert_eq!(
            kind_of(parse("\n# only a comment\n\n").unwrap_err()).1,
            ParseErrorKind::EmptyFile
        );
        assert_eq!(ParseError { line: 0, kind: ParseErrorKind::EmptyFile }.to_string(), "empty file");
    }

    #[test]
    fn zero_one_labels_are_mapped() {
        let d = parse("0 1:1\n1 1:2\n").unwrap();
        assert_eq!(d.labels().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn multiclass_rejected_unless_real_mode() {
        let text = "1 1:1\n2 1:2\n3 1:3\n";
        assert!(matches!(kind_of(parse(text).unwrap_err()).1, ParseErrorKind::Multiclass(_)));
        let opts = LibsvmOptions {
            labels: LabelMode::Real,
            ..Default::default()
        };
        let d = parse_libsvm(text.as_bytes(), &opts).unwrap();
        assert_eq!(d.labels().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn located_errors() {
        assert_eq!(
            kind_of(parse("+1 1:0.5\n-1 2:abc\n").unwrap_err()),
            (2, ParseErrorKind::NonNumeric("abc".into()))
        );
        assert_eq!(
            kind_of(parse("+1 3:1 2:1\n").unwrap_err()),
            (1, ParseErrorKind::NonAscendingIndex { previous: 3, found: 2 })
        );
        assert_eq!(
            kind_of(parse("+1 1:1\n\n-1 0:1\n").unwrap_err()),
            (3, ParseErrorKind::ZeroIndex)
        );
        assert_eq!(
            kind_of(parse("x 1:1\n").unwrap_err()),
            (1, ParseErrorKind::NonNumeric("x".into()))
        );
        assert_eq!(
            kind_of(parse("1 1:1 oops\n").unwrap_err()),
            (1, ParseErrorKind::MissingColon("oops".into()))
        );
        assert_eq!(
            kind_of(parse("1 1:nan\n").unwrap_err()),
            (1, ParseErrorKind::NonFinite("nan".into()))
        );
    }

    #[test]
    fn comments_crlf_and_qid() {
        let d = parse("+1 qid:3 1:1 2:2 # trailing\r\n# whole line\r\n-1 2:4\r\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.features()[(1, 1)], 4.0);
        assert_eq!(d.features()[(0, 0)], 1.0);
    }

    #[test]
    fn feature_dim_override() {
        let opts = LibsvmOptions {
            feature_dim: Some(5),
            ..Default::default()
        };
        let d = parse_libsvm("1 2:1\n-1 1:1\n".as_bytes(), &opts).unwrap();
        assert_eq!(d.feature_dim(), 5);
        let opts = LibsvmOptions {
            feature_dim: Some(1),
            ..Default::default()
        };
        assert_eq!(
            kind_of(parse_libsvm("1 2:1\n".as_bytes(), &opts).unwrap_err()),
            (1, ParseErrorKind::IndexOutOfRange { index: 2, dim: 1 })
        );
    }

    #[test]
    fn invalid_utf8_is_located() {
        let bytes: &[u8] = b"1 1:1\n-1 1:\xff\n";
        assert_eq!(
            kind_of(parse_libsvm(bytes, &LibsvmOptions::default()).unwrap_err()),
            (2, ParseErrorKind::Utf8)
        );
    }
}
