//! Dataset readers and writers: LIBSVM text and numeric CSV.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::objectives::{Dataset, Rows};
use crate::optimizers::trace::write_atomic;

/// How raw labels were mapped onto `{−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMapping {
    /// Labels were left as read.
    Identity,
    ZeroOne,
    OneTwo,
}

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Ok(parse_libsvm_reader(file, path, None)?.0)
}

/// Parses `label idx:val idx:val …` lines with 1-based indices. The feature
/// count is the largest index seen unless `n_features` is given.
pub fn parse_libsvm_reader<R: Read>(
    input: R,
    origin: &Path,
    n_features: Option<usize>,
) -> Result<(Dataset, LabelMapping)> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let label_text = fields.next().unwrap_or_default();
        let label: f64 = label_text
            .parse()
            .map_err(|_| err(lineno, format!("label {label_text:?} is not a number")))?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for field in fields {
            let (i, v) = field
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, found {field:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| err(lineno, format!("index {i:?} is not a positive integer")))?;
            if i == 0 {
                return Err(err(lineno, "indices are 1-based".into()));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| err(lineno, format!("value {v:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("value {v} is not finite")));
            }
            if let Some(&(last, _)) = row.last() {
                if i - 1 <= last {
                    return Err(err(lineno, "indices must be strictly increasing".into()));
                }
            }
            max_index = max_index.max(i);
            row.push((i - 1, v));
        }
        rows.push(row);
        labels.push(label);
    }
    let n = match n_features {
        Some(n) if n < max_index => {
            return Err(err(
                0,
                format!("feature index {max_index} exceeds the declared {n} features"),
            ));
        }
        Some(n) => n,
        None => max_index.max(1),
    };
    let mapping = map_labels(&mut labels);
    if mapping != LabelMapping::Identity {
        log::info!("{}: labels mapped to {{-1, +1}} ({mapping:?})", origin.display());
    }
    Ok((Dataset::sparse(n, rows, labels)?, mapping))
}

fn map_labels(labels: &mut [f64]) -> LabelMapping {
    let distinct: BTreeSet<i64> = labels
        .iter()
        .map(|&y| if y.fract() == 0.0 { y as i64 } else { i64::MIN })
        .collect();
    let subset = |allowed: &[i64]| distinct.iter().all(|d| allowed.contains(d));
    if subset(&[-1, 1]) {
        LabelMapping::Identity
    } else if subset(&[0, 1]) {
        labels.iter_mut().for_each(|y| *y = if *y == 0.0 { -1.0 } else { 1.0 });
        LabelMapping::ZeroOne
    } else if subset(&[1, 2]) {
        labels.iter_mut().for_each(|y| *y = if *y == 1.0 { -1.0 } else { 1.0 });
        LabelMapping::OneTwo
    } else {
        LabelMapping::Identity
    }
}

pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for i in 0..data.m() {
        write!(out, "{}", data.labels()[i])?;
        match data.rows() {
            Rows::Sparse(rows) => {
                for &(j, v) in &rows[i] {
                    write!(out, " {}:{}", j + 1, v)?;
                }
            }
            Rows::Dense(rows) => {
                for (j, &v) in rows[i].iter().enumerate() {
                    if v != 0.0 {
                        write!(out, " {}:{}", j + 1, v)?;
                    }
                }
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_libsvm_file(data: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_libsvm(data, &mut buf)?;
    write_atomic(path, &buf)
}

/// Numeric table without header; `label_column` holds the targets.
pub fn parse_dense_csv(path: &Path, label_column: usize) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dense_csv_reader(file, path, label_column)
}

pub fn parse_dense_csv_reader<R: Read>(input: R, origin: &Path, label_column: usize) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(idx + 1, e.to_string()))?;
        let lineno = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(err(lineno, format!("expected {w} columns, found {}", record.len())));
        }
        if label_column >= w {
            return Err(err(
                lineno,
                format!("label column {label_column} out of range for {w} columns"),
            ));
        }
        let mut row = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(lineno, format!("column {}: {cell:?} is not a number", j + 1)))?;
            if j == label_column {
                labels.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    Dataset::dense(rows, labels)
}

/// Writes the label as column `label_column`, features around it.
pub fn write_dense_csv<W: Write>(data: &Dataset, label_column: usize, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for i in 0..data.m() {
        let mut cells: Vec<String> = data.row_dense(i).iter().map(f64::to_string).collect();
        let at = label_column.min(cells.len());
        cells.insert(at, data.labels()[i].to_string());
        writer.write_record(&cells).map_err(|e| Error::Io(e.into()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(Dataset, LabelMapping)> {
        parse_libsvm_reader(text.as_bytes(), Path::new("mem.svm"), None)
    }

    #[test]
    fn libsvm_line() {
        let (d, _) = parse("1 5:0.5 7:1.0\n").unwrap();
        assert_eq!(d.labels(), &[1.0]);
        assert_eq!(d.n(), 7);
        match d.rows() {
            Rows::Sparse(rows) => assert_eq!(rows[0], vec![(4, 0.5), (6, 1.0)]),
            _ => panic!("expected sparse rows"),
        }
    }

    #[test]
    fn libsvm_empty_features_and_mapping() {
        let (d, mapping) = parse("0\n1 2:3\n").unwrap();
        assert_eq!(mapping, LabelMapping::ZeroOne);
        assert_eq!(d.labels(), &[-1.0, 1.0]);
        assert_eq!(d.row_dense(0), vec![0.0, 0.0]);
        let (d, mapping) = parse("2 1:1\n1 1:2\n").unwrap();
        assert_eq!(mapping, LabelMapping::OneTwo);
        assert_eq!(d.labels(), &[1.0, -1.0]);
        let (d, mapping) = parse("2001.5 1:1\n1990 1:2\n").unwrap();
        assert_eq!(mapping, LabelMapping::Identity);
        assert_eq!(d.labels(), &[2001.5, 1990.0]);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        for (text, bad_line) in [
            ("1 1:2\n1 x:2\n", 2),
            ("1 1:2\n\n+1 3\n", 3),
            ("a 1:1\n", 1),
            ("1 0:1\n", 1),
        ] {
            match parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, bad_line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn csv_label_column() {
        let d = parse_dense_csv_reader("1,2,3\n4,5,6\n".as_bytes(), Path::new("t.csv"), 0).unwrap();
        assert_eq!(d.labels(), &[1.0, 4.0]);
        assert_eq!(d.row_dense(1), vec![5.0, 6.0]);
        let single = parse_dense_csv_reader("7,8\n".as_bytes(), Path::new("t.csv"), 1).unwrap();
        assert_eq!(single.m(), 1);
        assert_eq!(single.labels(), &[8.0]);
    }

    #[test]
    fn csv_rejects_ragged_and_text() {
        assert!(matches!(
            parse_dense_csv_reader("1,2,3\n4,5\n".as_bytes(), Path::new("t.csv"), 0),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_dense_csv_reader("1,2\n4,x\n".as_bytes(), Path::new("t.csv"), 0),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
