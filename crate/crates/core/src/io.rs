//! File formats: measures and test functions as JSON with fraction strings,
//! the provenance sidecar of a stage file, and CSV samples of a
//! piecewise-linear function.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::construction::{Provenance, StageMeasure};
use crate::error::Result;
use crate::interval::Interval;
use crate::measure::DiscreteMeasure;
use crate::pwl::PiecewiseLinearFn;
use crate::scalar::{self, Rational};

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    read_json(path)
}

pub fn write_measure(path: &Path, measure: &DiscreteMeasure) -> Result<()> {
    write_json(path, measure)
}

pub fn read_function(path: &Path) -> Result<PiecewiseLinearFn> {
    read_json(path)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceFile {
    pub stage: u32,
    /// Aligned with the atoms of the stage file.
    pub provenance: Vec<Provenance>,
}

/// `out.json` -> `out.prov.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.prov.json"))
}

/// Writes the measure to `path` and its provenance next to it. Returns the
/// sidecar path.
pub fn write_stage(path: &Path, stage: &StageMeasure) -> Result<PathBuf> {
    write_measure(path, &stage.measure)?;
    let side = sidecar_path(path);
    write_json(
        &side,
        &ProvenanceFile {
            stage: stage.s,
            provenance: stage.provenance.clone(),
        },
    )?;
    Ok(side)
}

/// `x,value` rows at both ends of `window` and every knot inside it, which
/// determines `g` on the window. With `decimal = Some(k)` two extra columns
/// carry truncated k-digit approximations.
pub fn write_csv<W: Write>(
    w: &mut W,
    g: &PiecewiseLinearFn,
    window: &Interval,
    decimal: Option<usize>,
) -> Result<()> {
    let closed = window.closure();
    let mut xs: Vec<Rational> = vec![closed.lo.clone()];
    xs.extend(
        g.knots()
            .iter()
            .filter(|k| k.x > closed.lo && k.x < closed.hi)
            .map(|k| k.x.clone()),
    );
    if closed.hi != closed.lo {
        xs.push(closed.hi.clone());
    }
    match decimal {
        Some(_) => writeln!(w, "x,value,x_approx,value_approx")?,
        None => writeln!(w, "x,value")?,
    }
    for x in xs {
        let y = g.eval(&x);
        match decimal {
            Some(d) => writeln!(
                w,
                "{},{},{},{}",
                scalar::fmt(&x),
                scalar::fmt(&y),
                scalar::to_decimal(&x, d),
                scalar::to_decimal(&y, d)
            )?,
            None => writeln!(w, "{},{}", scalar::fmt(&x), scalar::fmt(&y))?,
        }
    }
    Ok(())
}
