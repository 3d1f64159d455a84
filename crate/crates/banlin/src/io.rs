//! CSV formats: point sets and loss sequences in, per-round trajectories out.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::json::float;

pub const TRAJECTORY_HEADER: [&str; 6] = ["seed", "t", "exploration_flag", "realized_loss", "cum_loss", "cum_pseudo_regret"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}, row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },
    #[error("{path}: no rows")]
    Empty { path: PathBuf },
}

/// Reads one vector per row. Lines starting with `#` are skipped, and so is a
/// first row that does not parse as numbers (a header).
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_owned(), source })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| IoError::Csv { path: path.to_owned(), source })?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(IoError::Row { path: path.to_owned(), row: i + 1, message: e.to_string() }),
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(IoError::Row { path: path.to_owned(), row: i + 1, message: "non-finite value".into() });
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(IoError::Row {
                    path: path.to_owned(),
                    row: i + 1,
                    message: format!("{} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Empty { path: path.to_owned() });
    }
    Ok(rows)
}

pub fn write_points<W: Write>(out: W, points: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for p in points {
        w.write_record(p.iter().map(|v| float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// One CSV row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: usize,
    pub exploration: bool,
    pub loss: f64,
    pub cum_loss: f64,
    pub cum_regret: f64,
}

pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl TrajectoryWriter<File> {
    pub fn create(path: &Path) -> csv::Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(TRAJECTORY_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, seed: usize, row: &Row) -> csv::Result<()> {
        self.inner.write_record([
            seed.to_string(),
            row.t.to_string(),
            u8::from(row.exploration).to_string(),
            float(row.loss),
            float(row.cum_loss),
            float(row.cum_regret),
        ])
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_with_header_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "x,y\n# comment\n1, 0\n-1,0.5\n").unwrap();
        assert_eq!(read_points(&p).unwrap(), vec![vec![1.0, 0.0], vec![-1.0, 0.5]]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "1,0\n1\n").unwrap();
        assert!(read_points(&p).is_err());
        std::fs::write(&p, "").unwrap();
        assert!(matches!(read_points(&p), Err(IoError::Empty { .. })));
        std::fs::write(&p, "1,0\n1,x\n").unwrap();
        assert!(matches!(read_points(&p), Err(IoError::Row { row: 2, .. })));
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, &buf).unwrap();
        assert_eq!(read_points(&p).unwrap(), pts);
    }

    #[test]
    fn trajectory_rows() {
        let mut w = TrajectoryWriter::new(Vec::new()).unwrap();
        w.write(1, &Row { t: 2, exploration: true, loss: 0.5, cum_loss: -1.0, cum_regret: 0.0 }).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            text,
            "seed,t,exploration_flag,realized_loss,cum_loss,cum_pseudo_regret\n\
             1,2,1,5.0000000000000000e-1,-1.0000000000000000e0,0.0000000000000000e0\n"
        );
    }
}
