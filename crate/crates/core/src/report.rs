//! Plot-ready CSV tables with numbers fixed at six significant digits.

use std::io::{self, Write};

use crate::bounds::BoundRow;
use crate::certification::MemoryRow;
use crate::optimizer::NsitCurveRow;

/// `x` rounded to six significant digits, printed in the shortest form that
/// round-trips the rounded value.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    // avoid "-0"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

pub fn write_bound_csv<W: Write>(mut out: W, rows: &[BoundRow]) -> io::Result<()> {
    writeln!(out, "alpha,bits,mode")?;
    for r in rows {
        writeln!(out, "{},{},{}", sig6(r.alpha), sig6(r.bits), r.mode)?;
    }
    Ok(())
}

pub fn write_nsit_curve_csv<W: Write>(mut out: W, rows: &[NsitCurveRow]) -> io::Result<()> {
    writeln!(out, "alpha,v,bits,converged")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", sig6(r.alpha), sig6(r.v), sig6(r.bits), r.converged)?;
    }
    Ok(())
}

pub fn write_memory_csv<W: Write>(mut out: W, rows: &[MemoryRow]) -> io::Result<()> {
    writeln!(out, "n,total_bits,mode")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.n, r.total_bits, r.mode)?;
    }
    Ok(())
}
