//! CSV and JSON artifacts.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so every value
//! round-trips bit-exactly; CSV quoting follows RFC 4180 via the `csv` crate.

use std::fs;
use std::path::Path;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::ensemble::EnsembleRecord;
use crate::error::Result;
use crate::quantum::DensityMatrix;
use crate::trajectory::TrajectoryRecord;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Row-major real and imaginary parts.
pub fn serialize_density<S: Serializer>(rho: &DensityMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let d = rho.dim();
    let m = rho.matrix();
    let re: Vec<f64> = (0..d * d).map(|k| m[(k / d, k % d)].re).collect();
    let im: Vec<f64> = (0..d * d).map(|k| m[(k / d, k % d)].im).collect();
    let mut st = s.serialize_struct("DensityMatrix", 3)?;
    st.serialize_field("dim", &d)?;
    st.serialize_field("re", &re)?;
    st.serialize_field("im", &im)?;
    st.end()
}

/// Hex SHA-256 of a byte payload.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write a table; `header` and every row must have the same width.
pub fn write_csv<W: std::io::Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_csv(fs::File::create(path)?, header, rows)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Columns: `t`, one per observable, `norm_residual`, `E_mean`, `E_var`, then
/// `sector_k` weights. Observables not sampled at a row's time are left empty.
pub fn trajectory_table(rec: &TrajectoryRecord) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["t".to_string()];
    header.extend(rec.observables.iter().map(|o| o.label.clone()));
    header.extend(["norm_residual", "E_mean", "E_var"].map(String::from));
    let sectors = rec.sector_weights.first().map_or(0, Vec::len);
    header.extend((0..sectors).map(|k| format!("sector_{k}")));
    let stride = rec.sample_stride;
    let rows = rec
        .times
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let step = n * stride;
            let mut row = vec![fmt_f64(t)];
            for o in &rec.observables {
                if step.is_multiple_of(o.stride) {
                    row.push(fmt_f64(o.values[step / o.stride]));
                } else {
                    row.push(String::new());
                }
            }
            row.push(fmt_f64(rec.norm_residual[n]));
            row.push(fmt_f64(rec.energy_mean[n]));
            row.push(fmt_f64(rec.energy_var[n]));
            if let Some(w) = rec.sector_weights.get(n) {
                row.extend(w.iter().map(|&x| fmt_f64(x)));
            }
            row
        })
        .collect();
    (header, rows)
}

/// Columns: `t`, `entropy`, `trace_distance` (if tracked), `energy`, then one
/// column per observable.
pub fn ensemble_table(rec: &EnsembleRecord) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["t".to_string(), "entropy".to_string()];
    if rec.trace_distance.is_some() {
        header.push("trace_distance".into());
    }
    header.push("energy".into());
    header.extend(rec.observables.iter().map(|(l, _)| l.clone()));
    let rows = (0..rec.times.len())
        .map(|n| {
            let mut row = vec![fmt_f64(rec.times[n]), fmt_f64(rec.entropy[n])];
            if let Some(td) = &rec.trace_distance {
                row.push(fmt_f64(td[n]));
            }
            row.push(fmt_f64(rec.energy[n]));
            row.extend(rec.observables.iter().map(|(_, v)| fmt_f64(v[n])));
            row
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_fields() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a,b".into(), "c".into()], &[vec!["1".into(), "x\"y".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "\"a,b\",c\n1,\"x\"\"y\"\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            content_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
