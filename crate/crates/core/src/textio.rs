//! Small helpers shared by the plain-text file formats.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Round-trippable float formatting (17 significant digits).
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn fmt_row<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    values.into_iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid number '{}'", s.trim())))
}

pub(crate) fn parse_row(s: &str, path: &Path, line: usize) -> Result<Vec<f64>> {
    s.split(',').map(|f| parse_f64(f, path, line)).collect()
}

/// Write through a temporary file in the same directory and rename, so a
/// reader never sees a half-written file.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Append `rows` lines of a matrix to `out`.
pub(crate) fn push_matrix(out: &mut String, m: &Array2<f64>) {
    for row in m.rows() {
        out.push_str(&fmt_row(row.iter()));
        out.push('\n');
    }
}

/// Numbered, non-empty lines of a text file.
pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    pub path: &'a Path,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str, path: &'a Path) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Lines { inner: it.peekable(), path }
    }

    pub fn peek(&mut self) -> Option<&(usize, &'a str)> {
        self.inner.peek()
    }

    pub fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .ok_or_else(|| Error::parse(self.path, 0, format!("unexpected end of file, expected {what}")))
    }

    /// Read a `rows x cols` block of comma-separated values.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((rows, cols));
        for r in 0..rows {
            let (no, line) = self.next_line("matrix row")?;
            let vals = parse_row(line, self.path, no)?;
            if vals.len() != cols {
                return Err(Error::parse(
                    self.path,
                    no,
                    format!("expected {cols} values, found {}", vals.len()),
                ));
            }
            for (c, v) in vals.into_iter().enumerate() {
                m[[r, c]] = v;
            }
        }
        Ok(m)
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}
