//! CSV artifact writers and readers. Numeric fields print at 17 significant
//! digits so reloading reproduces every f64 bit for bit.

use crate::cell::{EffectiveRow, EffectiveTable};
use crate::dirichlet::BoxField;
use crate::effective::RateReport;
use crate::error::{HjError, Result};
use crate::grid::StateField;
use crate::mc::McEstimate;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit content digest, hex-encoded.
pub fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Snapshot export: `t,x[,y],component,value` per gridpoint and component.
pub fn snapshots_csv(fields: &[StateField]) -> String {
    let dim = fields.first().map(|f| f.grid.dim()).unwrap_or(1);
    let mut out = String::new();
    if dim == 1 {
        out.push_str("t,x,component,value\n");
    } else {
        out.push_str("t,x,y,component,value\n");
    }
    for f in fields {
        for (i, comp) in f.components.iter().enumerate() {
            for (idx, &v) in comp.iter().enumerate() {
                let p = f.grid.point(idx);
                if dim == 1 {
                    out.push_str(&format!("{},{},{},{}\n", fmt17(f.time), fmt17(p[0]), i, fmt17(v)));
                } else {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt17(f.time),
                        fmt17(p[0]),
                        fmt17(p[1]),
                        i,
                        fmt17(v)
                    ));
                }
            }
        }
    }
    out
}

/// Converged steady fields on a box: `x[,y],component,value`.
pub fn box_field_csv(field: &BoxField) -> String {
    let dim = field.domain.dim;
    let mut out = String::new();
    if dim == 1 {
        out.push_str("x,component,value\n");
    } else {
        out.push_str("x,y,component,value\n");
    }
    for (i, comp) in field.components.iter().enumerate() {
        for (idx, &v) in comp.iter().enumerate() {
            let p = field.domain.point(idx);
            if dim == 1 {
                out.push_str(&format!("{},{},{}\n", fmt17(p[0]), i, fmt17(v)));
            } else {
                out.push_str(&format!("{},{},{},{}\n", fmt17(p[0]), fmt17(p[1]), i, fmt17(v)));
            }
        }
    }
    out
}

/// Effective table export with one row per lattice point.
pub fn table_csv(table: &EffectiveTable) -> String {
    let dim = table.dim();
    let mut out = String::new();
    if dim == 1 {
        out.push_str("p0,h_bar,err_bar,lower_cert,upper_cert,delta_min,grid_n,ok\n");
    } else {
        out.push_str("p0,p1,h_bar,err_bar,lower_cert,upper_cert,delta_min,grid_n,ok\n");
    }
    for row in &table.rows {
        let mut cols = Vec::new();
        cols.push(fmt17(row.p[0]));
        if dim == 2 {
            cols.push(fmt17(row.p[1]));
        }
        cols.push(fmt17(row.h_bar));
        cols.push(fmt17(row.err_bar));
        cols.push(fmt17(row.lower_cert));
        cols.push(fmt17(row.upper_cert));
        cols.push(fmt17(table.delta_min));
        cols.push(table.grid_n.to_string());
        cols.push(if row.ok { "1".into() } else { "0".into() });
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Reload a table written by [`table_csv`]; numeric fields round-trip
/// bit-exactly.
pub fn table_from_csv(text: &str) -> Result<EffectiveTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HjError::Config("empty table CSV".into()))?;
    let dim = if header.starts_with("p0,p1,") {
        2
    } else if header.starts_with("p0,") {
        1
    } else {
        return Err(HjError::Config(format!("unrecognized table header: {header}")));
    };
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| HjError::Config(format!("bad float {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    let mut delta_min = 0.0;
    let mut grid_n = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let want = if dim == 1 { 8 } else { 9 };
        if cols.len() != want {
            return Err(HjError::Config(format!("expected {want} columns, got {}", cols.len())));
        }
        let mut k = 0usize;
        let p0 = parse(cols[k])?;
        k += 1;
        let p1 = if dim == 2 {
            let v = parse(cols[k])?;
            k += 1;
            v
        } else {
            0.0
        };
        let h_bar = parse(cols[k])?;
        let err_bar = parse(cols[k + 1])?;
        let lower = parse(cols[k + 2])?;
        let upper = parse(cols[k + 3])?;
        delta_min = parse(cols[k + 4])?;
        grid_n = cols[k + 5]
            .parse::<usize>()
            .map_err(|e| HjError::Config(format!("bad grid_n: {e}")))?;
        let ok = cols[k + 6].trim() == "1";
        rows.push(EffectiveRow {
            p: [p0, p1],
            h_bar,
            err_bar,
            lower_cert: lower,
            upper_cert: upper,
            ok,
            note: String::new(),
        });
    }
    if rows.is_empty() {
        return Err(HjError::Config("table CSV has no rows".into()));
    }
    // reconstruct sorted unique axes
    let mut ax0: Vec<f64> = rows.iter().map(|r| r.p[0]).collect();
    ax0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ax0.dedup();
    let mut axes = vec![ax0];
    if dim == 2 {
        let mut ax1: Vec<f64> = rows.iter().map(|r| r.p[1]).collect();
        ax1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ax1.dedup();
        axes.push(ax1);
    }
    let expected: usize = axes.iter().map(|a| a.len()).product();
    if expected != rows.len() {
        return Err(HjError::Config(format!(
            "table is not a full lattice: {} rows, {expected} lattice points",
            rows.len()
        )));
    }
    Ok(EffectiveTable { axes, rows, delta_min, grid_n })
}

/// Rate report export: one row per epsilon.
pub fn rate_csv(report: &RateReport) -> String {
    let mut out = String::from("epsilon,grid_n,e_total,e_layer,e_bulk,fitted_slope\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt17(row.epsilon),
            row.grid_n,
            fmt17(row.e_total),
            fmt17(row.e_layer),
            fmt17(row.e_bulk),
            fmt17(report.fitted_slope)
        ));
    }
    out
}

/// Monte Carlo estimate export.
pub fn mc_csv(rows: &[(String, McEstimate)]) -> String {
    let mut out = String::from("case,estimate,std_error,paths,discard_rate\n");
    for (name, est) in rows {
        let rate = est.discarded as f64 / (est.paths + est.discarded).max(1) as f64;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            name,
            fmt17(est.estimate),
            fmt17(est.std_error),
            est.paths,
            fmt17(rate)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{EffectiveRow, EffectiveTable};

    fn sample_table() -> EffectiveTable {
        let axes = vec![vec![-1.0, 0.0, 0.7192836451823465]];
        let rows = axes[0]
            .iter()
            .map(|&p| EffectiveRow {
                p: [p, 0.0],
                h_bar: p * std::f64::consts::PI,
                err_bar: 1.234e-5,
                lower_cert: -2.0 * std::f64::consts::PI * std::f64::consts::PI,
                upper_cert: 17.0 / 3.0,
                ok: true,
                note: String::new(),
            })
            .collect();
        EffectiveTable { axes, rows, delta_min: 0.02, grid_n: 512 }
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let t = sample_table();
        let csv = table_csv(&t);
        let back = table_from_csv(&csv).unwrap();
        assert_eq!(back.axes, t.axes);
        assert_eq!(back.delta_min.to_bits(), t.delta_min.to_bits());
        assert_eq!(back.grid_n, t.grid_n);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            assert_eq!(a.p[0].to_bits(), b.p[0].to_bits());
            assert_eq!(a.h_bar.to_bits(), b.h_bar.to_bits());
            assert_eq!(a.err_bar.to_bits(), b.err_bar.to_bits());
            assert_eq!(a.lower_cert.to_bits(), b.lower_cert.to_bits());
            assert_eq!(a.upper_cert.to_bits(), b.upper_cert.to_bits());
        }
        // and the re-serialization is byte identical
        assert_eq!(csv, table_csv(&back));
    }

    #[test]
    fn fmt17_round_trips_awkward_values() {
        for &x in &[
            std::f64::consts::PI,
            -1.0 / 3.0,
            6.02e23,
            5e-324,
            -0.1 + 0.2,
            1.7976931348623157e308,
        ] {
            let s = fmt17(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{s}");
        }
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(b"abc"), digest(b"abc"));
        assert_ne!(digest(b"abc"), digest(b"abd"));
    }
}
