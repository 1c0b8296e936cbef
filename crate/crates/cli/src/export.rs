//! Solution CSV, OBJ mesh and JSON report formats.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;

use serde_json::{json, Value};
use thiserror::Error;
use weingarten::continuation::{HypothesisCheck, SolveStep};
use weingarten::{HypothesisReport, RadialField, SolveReport, SphereGrid};

pub const CSV_HEADER: &str = "theta,phi,rho";

/// Grid nodes may differ from the config grid by this much and still match.
const NODE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("solution has {found} rows, grid {ntheta}x{nphi} needs {expected}")]
    RowCount {
        found: usize,
        expected: usize,
        ntheta: usize,
        nphi: usize,
    },
    #[error("row {row}: node ({theta}, {phi}) does not match grid node ({grid_theta}, {grid_phi})")]
    NodeMismatch {
        row: usize,
        theta: f64,
        phi: f64,
        grid_theta: f64,
        grid_phi: f64,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `theta,phi,rho` rows in θ-major order, 17 significant digits.
pub fn solution_csv(grid: &SphereGrid, rho: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(72 * (rho.len() + 1)));
    w.write_record(CSV_HEADER.split(',')).expect("writing to memory");
    for (p, r) in rho.iter().enumerate() {
        let (i, j) = grid.ring_and_column(p);
        let rec = [grid.theta(i), grid.phi(j), *r].map(|v| format!("{v:.16e}"));
        w.write_record(&rec).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

fn format_error(err: &csv::Error, fallback_line: u64) -> CsvError {
    let line = err.position().map_or(fallback_line, |p| p.line()) as usize;
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { len, .. } => format!("expected 3 fields, found {len}"),
        _ => err.to_string(),
    };
    CsvError::Format { line, message }
}

/// Parses a solution CSV into raw (θ, φ, ρ) rows.
pub fn parse_csv(text: &str) -> Result<Vec<[f64; 3]>, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| format_error(&e, 1))?;
    if header.is_empty() {
        return Err(CsvError::Format {
            line: 1,
            message: "empty file".into(),
        });
    }
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(CsvError::Format {
            line: 1,
            message: format!(
                "expected header `{CSV_HEADER}`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_error(&e, rows.len() as u64 + 2))?;
        let line = record.position().map_or(rows.len() + 2, |p| p.line() as usize);
        let mut row = [0.0; 3];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| CsvError::Format {
                line,
                message: format!("`{field}` is not a number"),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Checks that the rows lie on `grid` in θ-major order and returns the ρ column.
pub fn rows_on_grid(grid: &SphereGrid, rows: &[[f64; 3]]) -> Result<Vec<f64>, CsvError> {
    if rows.len() != grid.len() {
        return Err(CsvError::RowCount {
            found: rows.len(),
            expected: grid.len(),
            ntheta: grid.ntheta(),
            nphi: grid.nphi(),
        });
    }
    for (p, row) in rows.iter().enumerate() {
        let (i, j) = grid.ring_and_column(p);
        let (gt, gp) = (grid.theta(i), grid.phi(j));
        if (row[0] - gt).abs() > NODE_MATCH_TOL || (row[1] - gp).abs() > NODE_MATCH_TOL {
            return Err(CsvError::NodeMismatch {
                row: p + 1,
                theta: row[0],
                phi: row[1],
                grid_theta: gt,
                grid_phi: gp,
            });
        }
    }
    Ok(rows.iter().map(|r| r[2]).collect())
}

/// Triangle mesh of X = ρx: the node grid plus one vertex per pole placed on
/// the axis at the ring-averaged radius of the adjacent ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// Zero-based, counter-clockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn from_field(grid: &SphereGrid, rho: &RadialField) -> Self {
        let (nt, np) = (grid.ntheta(), grid.nphi());
        let values = rho.values();
        let mut vertices: Vec<[f64; 3]> = (0..grid.len())
            .map(|p| grid.direction(p).map(|x| x * values[p]))
            .collect();
        let ring_mean = |i: usize| values[i * np..(i + 1) * np].iter().sum::<f64>() / np as f64;
        let north = vertices.len();
        vertices.push([0.0, 0.0, ring_mean(0)]);
        let south = vertices.len();
        vertices.push([0.0, 0.0, -ring_mean(nt - 1)]);

        let mut triangles = Vec::with_capacity(2 * grid.len());
        for j in 0..np {
            let j1 = (j + 1) % np;
            triangles.push([north, grid.index(0, j), grid.index(0, j1)]);
            for i in 0..nt - 1 {
                let (a, b) = (grid.index(i, j), grid.index(i, j1));
                let (c, d) = (grid.index(i + 1, j), grid.index(i + 1, j1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
            triangles.push([south, grid.index(nt - 1, j1), grid.index(nt - 1, j)]);
        }
        Self { vertices, triangles }
    }

    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(48 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            writeln!(out, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
        }
        out
    }
}

/// Reads vertex and face records back from OBJ text.
pub fn parse_obj(text: &str) -> Result<Mesh, String> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let bad = |what: &str| format!("line {}: bad {what}", n + 1);
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .map(|s| s.parse().map_err(|_| bad("vertex")))
                    .collect::<Result<_, _>>()?;
                let c: [f64; 3] = c.try_into().map_err(|_| bad("vertex"))?;
                vertices.push(c);
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|s| match s.parse::<usize>() {
                        Ok(i) if i >= 1 => Ok(i - 1),
                        _ => Err(bad("face")),
                    })
                    .collect::<Result<_, _>>()?;
                triangles.push(idx.try_into().map_err(|_| bad("face"))?);
            }
            _ => {}
        }
    }
    Ok(Mesh { vertices, triangles })
}

fn step_json(s: &SolveStep) -> Value {
    let m = &s.monitors;
    json!({
        "t": s.t,
        "newton_iters": s.newton_iters,
        "residual_inf": s.residual_inf,
        "rho_min": m.rho_min,
        "rho_max": m.rho_max,
        "support_min": m.support_min,
        "sigma1_min": m.sigma_min[0],
        "sigma2_min": m.sigma_min.get(1).copied().unwrap_or(f64::NAN),
        "H_max": m.h_max,
        "wall_ms": s.wall_ms,
    })
}

/// Continuation report. `steps` carries exactly the fixed per-step keys.
pub fn solve_report_json(report: &SolveReport, status: &str, seed: u64) -> Value {
    let last = report.steps.last();
    json!({
        "status": status,
        "final_t": report.final_t(),
        "seed": seed,
        "monitors_green": report.monitors_green(),
        "final_in_gamma_k": last.map(|s| s.monitors.in_gamma_k),
        "steps": report.steps.iter().map(step_json).collect::<Vec<_>>(),
        "rejected_steps": report
            .rejected
            .iter()
            .map(|(t, reason)| json!({"t": t, "reason": reason}))
            .collect::<Vec<_>>(),
        "warnings": report.warnings,
    })
}

fn check_json(c: &HypothesisCheck) -> Value {
    json!({
        "name": c.kind.to_string(),
        "passed": c.passed,
        "margin": c.margin,
        "boundary_margin": c.boundary_margin,
        "boundary_ratio": c.boundary_ratio,
        "rho": c.location.rho,
        "x": c.location.x,
        "warnings": c.warnings,
    })
}

pub fn hypothesis_report_json(report: &HypothesisReport) -> Value {
    json!({
        "passed": report.passed(),
        "checks": report.checks.iter().map(check_json).collect::<Vec<_>>(),
    })
}

/// Fixed-width margin table for terminals.
pub fn hypothesis_table(report: &HypothesisReport) -> String {
    let mut out = format!(
        "{:<18} {:<18} {:>14} {:>14}\n",
        "hypothesis", "status", "margin", "boundary"
    );
    for c in &report.checks {
        let status = if c.passed {
            "pass".to_string()
        } else {
            format!("fail at rho={}", c.location.rho)
        };
        let boundary = c
            .boundary_margin
            .map_or_else(|| "-".to_string(), |b| format!("{:.6e}", b + 0.0));
        // `+ 0.0` prints an exact zero without its sign
        writeln!(
            out,
            "{:<18} {:<18} {:>14.6e} {:>14}",
            c.kind.to_string(),
            status,
            c.margin + 0.0,
            boundary
        )
        .unwrap();
        for w in &c.warnings {
            writeln!(out, "  warning: {w}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = SphereGrid::new(4, 8).unwrap();
        let rho: Vec<f64> = (0..grid.len())
            .map(|p| 2.0 + (p as f64).sqrt() * 1e-3 + 1.0 / 3.0)
            .collect();
        let text = solution_csv(&grid, &rho);
        assert!(text.starts_with("theta,phi,rho\n"));
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows_on_grid(&grid, &rows).unwrap(), rho);
        assert!(matches!(
            rows_on_grid(&SphereGrid::new(4, 16).unwrap(), &rows),
            Err(CsvError::RowCount { .. })
        ));
        let mut swapped = rows.clone();
        swapped.swap(0, 1);
        assert!(matches!(
            rows_on_grid(&grid, &swapped),
            Err(CsvError::NodeMismatch { row: 1, .. })
        ));
    }

    #[test]
    fn csv_format_errors() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("rho,theta,phi\n").is_err());
        let err = parse_csv("theta,phi,rho\n1,2\n").unwrap_err();
        assert!(matches!(err, CsvError::Format { line: 2, .. }));
        assert!(parse_csv("theta,phi,rho\n1,2,x\n").is_err());
    }

    #[test]
    fn mesh_is_closed_and_outward() {
        for (nt, np) in [(4, 8), (7, 12), (16, 32)] {
            let grid = SphereGrid::new(nt, np).unwrap();
            let rho = RadialField::new(grid.sample(|t, p| 2.0 + 0.1 * t.cos() + 0.05 * p.sin())).unwrap();
            let mesh = Mesh::from_field(&grid, &rho);
            assert_eq!(mesh.vertices.len(), nt * np + 2);
            assert_eq!(mesh.triangles.len(), 2 * nt * np);
            assert_eq!(mesh.edge_count(), 3 * nt * np);
            assert_eq!(mesh.euler_characteristic(), 2);
            // signed volume via the divergence theorem is positive for outward faces
            let vol: f64 = mesh
                .triangles
                .iter()
                .map(|t| {
                    let [a, b, c] = t.map(|i| mesh.vertices[i]);
                    (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                        + a[2] * (b[0] * c[1] - b[1] * c[0]))
                        / 6.0
                })
                .sum();
            assert!(vol > 0.0);
            let back = parse_obj(&mesh.to_obj()).unwrap();
            assert_eq!(back.triangles, mesh.triangles);
            assert_eq!(back.vertices, mesh.vertices);
        }
    }

    #[test]
    fn pole_vertices_use_ring_average() {
        let grid = SphereGrid::new(4, 8).unwrap();
        let rho = RadialField::new(grid.sample(|_, p| 2.0 + 0.5 * p.cos())).unwrap();
        let mesh = Mesh::from_field(&grid, &rho);
        let north = mesh.vertices[grid.len()];
        assert_eq!(&north[..2], &[0.0, 0.0]);
        assert!((north[2] - 2.0).abs() < 1e-12);
    }
}
