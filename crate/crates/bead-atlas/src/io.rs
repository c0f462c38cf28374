//! File formats and atomic output: JSON profiles and solve reports, CSV
//! height fields, newline-delimited sample streams, and small SVG renderings.
//!
//! Writers are deterministic (fixed field order, shortest round-trip float
//! formatting), so repeated runs with the same seed produce byte-identical
//! files.  [`write_atomic`] stages output in a temporary file in the target
//! directory and renames it into place, so readers never observe a partial
//! file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shapes::{DiagramProfile, ShapeError};
use crate::solver::GridHeightField;
use crate::tableaux::{BeadConfiguration, Tableau, TableauError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error("csv line {line}: {msg}")]
    BadCsv { line: usize, msg: String },
}

/// Writes `bytes` to `path` atomically: stage in a temporary sibling file,
/// flush, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Diagram profiles.
// ---------------------------------------------------------------------------

/// On-disk form of a diagram profile.  Lattice profiles are stored as their
/// partition pair; anything else falls back to the raw piecewise data.
#[derive(Debug, Serialize, Deserialize)]
enum ProfileDoc {
    #[serde(rename = "partitions")]
    Partitions { outer: Vec<u64>, inner: Vec<u64> },
    #[serde(rename = "piecewise")]
    Piecewise {
        x_knots: Vec<f64>,
        f_low: Vec<f64>,
        f_up: Vec<f64>,
        n_threads: usize,
    },
}

pub fn profile_to_json(p: &DiagramProfile) -> Result<String, IoError> {
    let doc = match p.to_partitions() {
        Ok((outer, inner)) => ProfileDoc::Partitions { outer, inner },
        Err(_) => ProfileDoc::Piecewise {
            x_knots: p.x_knots().to_vec(),
            f_low: p.f_low().to_vec(),
            f_up: p.f_up().to_vec(),
            n_threads: p.n_threads(),
        },
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn profile_from_json(s: &str) -> Result<DiagramProfile, IoError> {
    let doc: ProfileDoc = serde_json::from_str(s)?;
    let p = match doc {
        ProfileDoc::Partitions { outer, inner } => {
            crate::shapes::profile_from_partitions(&outer, &inner, 1)?
        }
        ProfileDoc::Piecewise {
            x_knots,
            f_low,
            f_up,
            n_threads,
        } => DiagramProfile::from_raw(x_knots, f_low, f_up, n_threads)?,
    };
    Ok(p)
}

// ---------------------------------------------------------------------------
// Height fields as CSV.
// ---------------------------------------------------------------------------

/// Serializes a height field as `i,j,x,y,h` rows in row-major node order.
pub fn field_to_csv(f: &GridHeightField) -> String {
    let (nx, ny) = (f.nx(), f.ny());
    let mut out = String::with_capacity((nx + 1) * (ny + 1) * 32);
    out.push_str("i,j,x,y,h\n");
    for j in 0..=ny {
        for i in 0..=nx {
            let x = i as f64 / nx as f64;
            let y = j as f64 / ny as f64;
            writeln!(out, "{i},{j},{x},{y},{}", f.get(i, j)).expect("string write");
        }
    }
    out
}

/// Parses the output of [`field_to_csv`].  Grid dimensions are inferred from
/// the largest indices; every node must appear exactly once.
pub fn field_from_csv(s: &str) -> Result<GridHeightField, IoError> {
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    let mut lines = s.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "i,j,x,y,h" => {}
        other => {
            return Err(IoError::BadCsv {
                line: 1,
                msg: format!("expected header 'i,j,x,y,h', got {:?}", other.map(|o| o.1)),
            })
        }
    }
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(IoError::BadCsv {
                line: ln + 1,
                msg: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        let bad = |msg: String| IoError::BadCsv { line: ln + 1, msg };
        let i: usize = parts[0]
            .parse()
            .map_err(|e| bad(format!("bad i: {e}")))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|e| bad(format!("bad j: {e}")))?;
        let h: f64 = parts[4]
            .parse()
            .map_err(|e| bad(format!("bad h: {e}")))?;
        rows.push((i, j, h));
    }
    let nx = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r.1).max().unwrap_or(0);
    let expect = (nx + 1) * (ny + 1);
    if nx < 1 || ny < 1 || rows.len() != expect {
        return Err(IoError::BadCsv {
            line: 0,
            msg: format!("grid {nx}x{ny} needs {expect} nodes, file has {}", rows.len()),
        });
    }
    let mut seen = vec![false; expect];
    let mut values = vec![0.0f64; expect];
    for (i, j, h) in rows {
        let idx = j * (nx + 1) + i;
        if seen[idx] {
            return Err(IoError::BadCsv {
                line: 0,
                msg: format!("duplicate node ({i},{j})"),
            });
        }
        seen[idx] = true;
        values[idx] = h;
    }
    GridHeightField::new(nx, ny, values).map_err(|e| IoError::BadCsv {
        line: 0,
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Sample streams (one JSON object per line).
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BeadLine {
    threads: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableauLine {
    entries: Vec<Vec<u32>>,
}

/// One bead configuration as a compact JSON line.
pub fn beads_to_line(b: &BeadConfiguration) -> String {
    serde_json::to_string(&BeadLine {
        threads: b.threads().to_vec(),
    })
    .expect("bead serialization cannot fail")
}

/// Parses a [`beads_to_line`] record and revalidates it against `shape`.
pub fn beads_from_line(shape: &DiagramProfile, line: &str) -> Result<BeadConfiguration, IoError> {
    let doc: BeadLine = serde_json::from_str(line)?;
    Ok(BeadConfiguration::new(shape.clone(), doc.threads)?)
}

/// One tableau as a compact JSON line.
pub fn tableau_to_line(t: &Tableau) -> String {
    serde_json::to_string(&TableauLine {
        entries: t.entries().to_vec(),
    })
    .expect("tableau serialization cannot fail")
}

/// Parses a [`tableau_to_line`] record and revalidates it against `shape`.
pub fn tableau_from_line(shape: &DiagramProfile, line: &str) -> Result<Tableau, IoError> {
    let doc: TableauLine = serde_json::from_str(line)?;
    Ok(Tableau::new(shape.clone(), doc.entries)?)
}

// ---------------------------------------------------------------------------
// SVG renderings.
// ---------------------------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN: f64 = 40.0;

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>"
    );
}

/// Maps unit-square coordinates to SVG pixels (y axis flipped).
fn to_px(x: f64, y: f64) -> (f64, f64) {
    (
        MARGIN + x * (SVG_W - 2.0 * MARGIN),
        SVG_H - MARGIN - y * (SVG_H - 2.0 * MARGIN),
    )
}

/// Three-stop color ramp for values in [0, 1].
fn ramp(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let (lo, hi, u) = if t < 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    (
        (lo.0 + (hi.0 - lo.0) * u).round() as u8,
        (lo.1 + (hi.1 - lo.1) * u).round() as u8,
        (lo.2 + (hi.2 - lo.2) * u).round() as u8,
    )
}

/// Scatter plot of bead configurations: thread index across, height up.
/// Several configurations overlay with translucent dots.
pub fn beads_scatter_svg(cfgs: &[BeadConfiguration]) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    let n = cfgs.first().map(|b| b.threads().len()).unwrap_or(0);
    let opacity = if cfgs.len() > 1 { 0.25 } else { 1.0 };
    for i in 0..n {
        let x = if n == 1 {
            0.5
        } else {
            i as f64 / (n - 1) as f64
        };
        let (px_top, py_top) = to_px(x, 1.0);
        let (_, py_bot) = to_px(x, 0.0);
        let _ = writeln!(
            out,
            "<line x1=\"{px_top:.2}\" y1=\"{py_top:.2}\" x2=\"{px_top:.2}\" y2=\"{py_bot:.2}\" \
             stroke=\"#ccc\" stroke-width=\"1\"/>"
        );
    }
    for b in cfgs {
        for (i, thread) in b.threads().iter().enumerate() {
            let x = if n == 1 {
                0.5
            } else {
                i as f64 / (n - 1) as f64
            };
            for &y in thread {
                let (px, py) = to_px(x, y);
                let _ = writeln!(
                    out,
                    "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#1f4e8c\" \
                     fill-opacity=\"{opacity}\"/>"
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of a height field with evenly spaced contour lines.
pub fn field_svg(f: &GridHeightField, n_contours: usize) -> String {
    let (nx, ny) = (f.nx(), f.ny());
    let (lo, hi) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let range = (hi - lo).max(1e-300);
    let mut out = String::new();
    svg_open(&mut out);
    for j in 0..ny {
        for i in 0..nx {
            let avg = 0.25
                * (f.get(i, j) + f.get(i + 1, j) + f.get(i, j + 1) + f.get(i + 1, j + 1));
            let (r, g, b) = ramp((avg - lo) / range);
            let (x0, y1) = to_px(i as f64 / nx as f64, (j + 1) as f64 / ny as f64);
            let (x1, y0) = to_px((i + 1) as f64 / nx as f64, j as f64 / ny as f64);
            let _ = writeln!(
                out,
                "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"rgb({r},{g},{b})\"/>",
                x1 - x0,
                y0 - y1
            );
        }
    }
    for k in 1..=n_contours {
        let level = lo + range * k as f64 / (n_contours + 1) as f64;
        for seg in contour_segments(f, level) {
            let (x0, y0) = to_px(seg.0, seg.1);
            let (x1, y1) = to_px(seg.2, seg.3);
            let _ = writeln!(
                out,
                "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" \
                 stroke=\"black\" stroke-width=\"0.8\"/>"
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Marching-squares segments of the bilinear field at `level`, in unit-square
/// coordinates `(x0, y0, x1, y1)`.
fn contour_segments(f: &GridHeightField, level: f64) -> Vec<(f64, f64, f64, f64)> {
    let (nx, ny) = (f.nx(), f.ny());
    let mut segs = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let corners = [
                (i, j, f.get(i, j)),
                (i + 1, j, f.get(i + 1, j)),
                (i + 1, j + 1, f.get(i + 1, j + 1)),
                (i, j + 1, f.get(i, j + 1)),
            ];
            // Edge crossings by linear interpolation along the cell border.
            let mut pts = Vec::new();
            for e in 0..4 {
                let (i0, j0, v0) = corners[e];
                let (i1, j1, v1) = corners[(e + 1) % 4];
                if (v0 < level) != (v1 < level) && v0 != v1 {
                    let t = (level - v0) / (v1 - v0);
                    let x = (i0 as f64 + (i1 as f64 - i0 as f64) * t) / nx as f64;
                    let y = (j0 as f64 + (j1 as f64 - j0 as f64) * t) / ny as f64;
                    pts.push((x, y));
                }
            }
            match pts.len() {
                2 => segs.push((pts[0].0, pts[0].1, pts[1].0, pts[1].1)),
                4 => {
                    // Saddle: resolve by the cell-center value.
                    let center = 0.25 * (corners[0].2 + corners[1].2 + corners[2].2 + corners[3].2);
                    if (center < level) == (corners[0].2 < level) {
                        segs.push((pts[0].0, pts[0].1, pts[1].0, pts[1].1));
                        segs.push((pts[2].0, pts[2].1, pts[3].0, pts[3].1));
                    } else {
                        segs.push((pts[0].0, pts[0].1, pts[3].0, pts[3].1));
                        segs.push((pts[1].0, pts[1].1, pts[2].0, pts[2].1));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}
