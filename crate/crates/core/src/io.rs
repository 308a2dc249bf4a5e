//! Plain-text dumps of codec matrices and problem instances.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::codec::CodingScheme;
use crate::problem::{Layout, PartitionedProblem};
use crate::trace::fmt_f64;
use crate::{Error, Result};

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn parse_matrix_csv(text: &str, location: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                location: format!("{location}:{}", i + 1),
                message: e.to_string(),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    location: format!("{location}:{}", i + 1),
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write(path, &matrix_to_csv(m))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read(path)?, &path.display().to_string())
}

fn vector_csv(v: &DVector<f64>) -> String {
    v.iter().map(|x| fmt_f64(*x) + "\n").collect()
}

/// Writes `<prefix>_B.csv` and `<prefix>_A.csv` into `dir`.
pub fn dump_codec(dir: &Path, prefix: &str, scheme: &CodingScheme<f64>) -> Result<()> {
    write_matrix_csv(&dir.join(format!("{prefix}_B.csv")), &scheme.b)?;
    write_matrix_csv(&dir.join(format!("{prefix}_A.csv")), &scheme.a)
}

/// Writes `G.csv`, `y.csv`, `x_o.csv` and `layout.csv` into `dir`.
/// `layout.csv` has one `partition,replica,sub,start,end` line per block.
pub fn dump_problem(dir: &Path, problem: &PartitionedProblem<f64>) -> Result<()> {
    write_matrix_csv(&dir.join("G.csv"), &problem.g)?;
    write(&dir.join("y.csv"), &vector_csv(&problem.y))?;
    write(&dir.join("x_o.csv"), &vector_csv(&problem.x_o))?;
    let mut layout = String::from("partition,replica,sub,start,end\n");
    for (i, reps) in problem.layout.iter().enumerate() {
        for (r, blocks) in reps.iter().enumerate() {
            for (l, b) in blocks.iter().enumerate() {
                let _ = writeln!(layout, "{i},{r},{l},{},{}", b.start, b.end);
            }
        }
    }
    write(&dir.join("layout.csv"), &layout)
}

pub fn load_problem(dir: &Path) -> Result<PartitionedProblem<f64>> {
    let g = read_matrix_csv(&dir.join("G.csv"))?;
    let column = |name: &str| -> Result<DVector<f64>> {
        let m = read_matrix_csv(&dir.join(name))?;
        if m.ncols() != 1 {
            return Err(Error::Parse {
                location: dir.join(name).display().to_string(),
                message: format!("expected one column, found {}", m.ncols()),
            });
        }
        Ok(m.column(0).into_owned())
    };
    let y = column("y.csv")?;
    let x_o = column("x_o.csv")?;
    let lpath = dir.join("layout.csv");
    let text = read(&lpath)?;
    let mut layout: Layout = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<usize> = line
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseIntError| Error::Parse {
                location: format!("{}:{}", lpath.display(), n + 1),
                message: e.to_string(),
            })?;
        let [i, r, l, start, end] = f[..] else {
            return Err(Error::Parse {
                location: format!("{}:{}", lpath.display(), n + 1),
                message: format!("expected 5 fields, found {}", f.len()),
            });
        };
        if layout.len() == i {
            layout.push(Vec::new());
        }
        let in_order = i + 1 == layout.len() && {
            let reps = &mut layout[i];
            if reps.len() == r {
                reps.push(Vec::new());
            }
            r + 1 == reps.len() && reps[r].len() == l
        };
        if !in_order {
            return Err(Error::Parse {
                location: format!("{}:{}", lpath.display(), n + 1),
                message: "blocks must be listed in partition, replica, sub order".into(),
            });
        }
        layout[i][r].push(start..end);
    }
    PartitionedProblem::from_parts(g, y, x_o, layout)
}
