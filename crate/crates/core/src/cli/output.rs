//! File formats written by the runner.
//!
//! Floats are written with Rust's `Display`, the shortest decimal that
//! round-trips, so re-reading a file reproduces the exact doubles.

use crate::error::{Error, Result};
use crate::phasespace::{GridKind, GridSpec, PhaseSpaceGrid};
use crate::schemes::PhotocurrentSample;
use crate::c64;
use std::fmt::Write as _;
use std::path::Path;

/// Samples as CSV: header `i1,..,iK,z1,z2`, one row per sample.
pub fn samples_csv(samples: &[PhotocurrentSample]) -> String {
    let k = samples.first().map_or(0, |s| s.counts.len());
    let mut out = String::with_capacity(samples.len() * (12 * k + 40));
    for i in 1..=k {
        let _ = write!(out, "i{i},");
    }
    out.push_str("z1,z2\n");
    for s in samples {
        for c in &s.counts {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{},{}", s.z1, s.z2);
    }
    out
}

pub fn samples_json(samples: &[PhotocurrentSample]) -> Result<String> {
    serde_json::to_string(samples).map_err(|e| Error::Parse(e.to_string()))
}

/// Grid as CSV with `#` header lines recording the convention and geometry.
pub fn grid_csv(grid: &PhaseSpaceGrid, eta: f64) -> String {
    let spec = grid.spec;
    let n = spec.points;
    let mut out = String::with_capacity(n * n * 48);
    out.push_str("# normalization: integral of K over d^2 alpha = 1, alpha = alpha_re + i alpha_im\n");
    let _ = writeln!(out, "# eta={eta}");
    let _ = writeln!(out, "# half_extent={}", spec.half_extent);
    let _ = writeln!(out, "# points={n}");
    out.push_str("alpha_re,alpha_im,K\n");
    for j in 0..n {
        let x = spec.coord(j);
        for l in 0..n {
            let _ = writeln!(out, "{x},{},{}", spec.coord(l), grid.real(j, l));
        }
    }
    out
}

/// Inverse of [`grid_csv`]: the grid and its recorded η.
pub fn parse_grid_csv(text: &str) -> Result<(PhaseSpaceGrid, f64)> {
    let bad = |m: String| Error::Parse(m);
    let mut eta = None;
    let mut half = None;
    let mut points = None;
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (no, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.trim().split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "eta" => eta = Some(v.parse::<f64>().map_err(|e| bad(format!("eta: {e}")))?),
                    "half_extent" => {
                        half = Some(v.parse::<f64>().map_err(|e| bad(format!("half_extent: {e}")))?)
                    }
                    "points" => {
                        points = Some(v.parse::<usize>().map_err(|e| bad(format!("points: {e}")))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !seen_header {
            if line.trim() != "alpha_re,alpha_im,K" {
                return Err(bad(format!("line {}: expected column header", no + 1)));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", no + 1)))?;
        if f.len() != 3 {
            return Err(bad(format!("line {}: expected 3 columns", no + 1)));
        }
        rows.push((f[0], f[1], f[2]));
    }
    let (Some(half), Some(points)) = (half, points) else {
        return Err(bad("missing half_extent or points header".into()));
    };
    let spec = GridSpec::new(half, points)?;
    if rows.len() != points * points {
        return Err(bad(format!("expected {} rows, found {}", points * points, rows.len())));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (i, &(x, y, k)) in rows.iter().enumerate() {
        let tol = 1e-9 * half;
        if (x - spec.coord(i / points)).abs() > tol || (y - spec.coord(i % points)).abs() > tol {
            return Err(bad(format!("row {i}: coordinates off the grid")));
        }
        values.push(c64(k, 0.0));
    }
    let grid = PhaseSpaceGrid {
        spec,
        kind: GridKind::Propensity,
        values,
        outside_fraction: 0.0,
    };
    Ok((grid, eta.unwrap_or(1.0)))
}

pub fn read_grid_csv(path: &Path) -> Result<(PhaseSpaceGrid, f64)> {
    parse_grid_csv(&std::fs::read_to_string(path)?)
}
