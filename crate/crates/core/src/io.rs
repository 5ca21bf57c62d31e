//! CSV output. Floats are written with Rust's shortest round-trip
//! formatting, so identical runs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::discretization::{SurfaceField, ThinField};
use crate::error::Result;
use crate::experiments::{LemmaRow, NamedRate, SweepReport};
use crate::trace::EnergyTrace;

/// Output directory; every path handed out stays inside it.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Plain file name under the root. Separators are replaced.
    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name.replace(['/', '\\'], "_"))
    }
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_thin_field(path: &Path, u: &ThinField) -> Result<()> {
    let mut w = writer(path, &["theta_index", "sigma_index", "component", "value"])?;
    let (nc, m, s) = u.shape();
    for j in 0..m {
        for k in 0..s {
            for c in 0..nc {
                w.write_record([j.to_string(), k.to_string(), c.to_string(), u.values[[c, j, k]].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_surface_field(path: &Path, v: &SurfaceField) -> Result<()> {
    let mut w = writer(path, &["theta_index", "sigma_index", "component", "value"])?;
    let (nc, m) = v.values.dim();
    for j in 0..m {
        for c in 0..nc {
            w.write_record([j.to_string(), "-1".into(), c.to_string(), v.values[[c, j]].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &EnergyTrace) -> Result<()> {
    let mut w = writer(path, &["t", "l2sq", "cum_dirichlet", "cum_l4", "sup"])?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            r.l2sq.to_string(),
            r.cum_dirichlet.to_string(),
            r.cum_l4.to_string(),
            r.sup.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_defects(path: &Path, rows: &[LemmaRow]) -> Result<()> {
    let mut w = writer(path, &["epsilon", "quantity_name", "raw_value", "compensated_ratio"])?;
    for r in rows {
        w.write_record([r.epsilon.to_string(), r.name.clone(), r.raw.to_string(), r.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = writer(path, &["epsilon", "check_name", "error_value"])?;
    for (eps, name, value) in report.sweep_rows() {
        w.write_record([eps.to_string(), name, value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Failed fits are written with NaN columns.
pub fn write_rates(path: &Path, rates: &[NamedRate]) -> Result<()> {
    let mut w = writer(path, &["check_name", "slope", "intercept", "max_residual"])?;
    for r in rates {
        let (s, i, m) = match &r.fit {
            Ok(f) => (f.slope, f.intercept, f.max_residual),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        w.write_record([r.name.clone(), s.to_string(), i.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceRecord;

    #[test]
    fn field_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        let mut v = SurfaceField::zeros(2, 3);
        v.values[[1, 2]] = 0.1;
        write_surface_field(&out.file("v.csv"), &v).unwrap();
        let text = fs::read_to_string(out.file("v.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta_index,sigma_index,component,value");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[6], "2,-1,1,0.1");

        let u = ThinField::zeros(1, 2, 3);
        write_thin_field(&out.file("u.csv"), &u).unwrap();
        let text = fs::read_to_string(out.file("u.csv")).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "0,1,0,0");
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = EnergyTrace::default();
        t.push(TraceRecord {
            t: 0.0,
            l2sq: 1.5,
            cum_dirichlet: 0.0,
            cum_l4: 0.0,
            sup: 1.0,
        });
        let p = dir.path().join("trace.csv");
        write_trace(&p, &t).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "t,l2sq,cum_dirichlet,cum_l4,sup\n0,1.5,0,0,1\n");
    }

    #[test]
    fn names_cannot_escape_the_root() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        assert_eq!(out.file("../x.csv").parent().unwrap(), dir.path());
    }
}
