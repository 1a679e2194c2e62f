//! Solve reports as JSON and fields as CSV.

use crate::error::{Error, Result};
use crate::grid::{Field, GridDomain};
use crate::laplace::LaplaceSolveReport;
use crate::zoo::BiharmonicSolveReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

pub const CSV_HEADER: &str = "i,j,x,y,value";

/// One solve, as written by `solve --out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    /// Cells per unit length, `round(1/h)`.
    pub n: usize,
    pub h: f64,
    pub residuals: BTreeMap<String, f64>,
    pub constraints: BTreeMap<String, f64>,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

impl SolveReport {
    fn base(problem: String, domain: &GridDomain, iterations: usize, wall_time_ms: f64) -> SolveReport {
        SolveReport {
            problem,
            n: (1.0 / domain.h()).round() as usize,
            h: domain.h(),
            residuals: BTreeMap::new(),
            constraints: BTreeMap::new(),
            iterations,
            wall_time_ms,
        }
    }

    pub fn from_zoo(r: &BiharmonicSolveReport, domain: &GridDomain, wall_time_ms: f64) -> SolveReport {
        let mut out = SolveReport::base(r.problem.label(), domain, r.iterations, wall_time_ms);
        out.residuals.insert("pde".into(), r.pde_residual);
        out.residuals.insert("compatibility_defect".into(), r.compatibility_defect);
        out.residuals.insert("rhs_norm".into(), r.rhs_norm);
        out.residuals.extend(r.residuals.iter().cloned());
        out.constraints.extend(r.constraint_norms.iter().cloned());
        out
    }

    pub fn from_laplace(r: &LaplaceSolveReport, domain: &GridDomain, wall_time_ms: f64) -> SolveReport {
        let mut out = SolveReport::base(format!("laplace_{}", r.kind.as_str()), domain, r.iterations, wall_time_ms);
        out.residuals.insert("pde".into(), r.pde_residual_norm);
        out.residuals.insert("compatibility_defect".into(), r.compatibility_defect);
        out.residuals.insert("discarded_ring_mass".into(), r.discarded_ring_mass);
        out.constraints.extend(r.constraint_norms.iter().cloned());
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SolveReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Writes `i,j,x,y,value` rows; 17 significant digits so values read back bitwise.
pub fn write_field_csv(domain: &GridDomain, field: &Field, mut out: impl Write) -> Result<()> {
    domain.cell_space().ensure_same(field.space())?;
    writeln!(out, "{CSV_HEADER}")?;
    for (c, v) in field.values().iter().enumerate() {
        let (i, j) = domain.cells()[c];
        let (x, y) = domain.center(c);
        writeln!(out, "{i},{j},{x:.16e},{y:.16e},{v:.16e}")?;
    }
    Ok(())
}

/// Reads a CSV written by [`write_field_csv`]; every cell must appear once.
pub fn read_field_csv(domain: &GridDomain, input: impl BufRead) -> Result<Field> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::Io(format!("expected header '{CSV_HEADER}', found '{header}'")));
    }
    let n = domain.num_cells();
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Io(format!("line {}: {what}", k + 2));
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let i: i64 = parts[0].trim().parse().map_err(|_| bad("bad i"))?;
        let j: i64 = parts[1].trim().parse().map_err(|_| bad("bad j"))?;
        let v: f64 = parts[4].trim().parse().map_err(|_| bad("bad value"))?;
        let c = domain.cell_index(i, j).ok_or_else(|| bad("cell not in domain"))?;
        if std::mem::replace(&mut seen[c], true) {
            return Err(bad("duplicate cell"));
        }
        values[c] = v;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        let (i, j) = domain.cells()[c];
        return Err(Error::Io(format!("cell ({i},{j}) missing")));
    }
    Field::new(domain.cell_space(), values)
}
