use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::BoundaryLimit;
use crate::scenarios::SeriesRow;

/// Upper bound on the number of rows written per time series.
pub const MAX_ROWS: usize = 2000;

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Stride `k` such that writing every `k`-th of `len` rows stays within [`MAX_ROWS`].
pub fn thinning_stride(len: usize) -> usize {
    len.div_ceil(MAX_ROWS).max(1)
}

/// Indices kept by the thinning; the final row is always included.
pub fn kept_indices(len: usize) -> Vec<usize> {
    let k = thinning_stride(len);
    let mut idx: Vec<usize> = (0..len).step_by(k).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        if idx.len() == MAX_ROWS {
            idx.pop();
        }
        idx.push(len - 1);
    }
    idx
}

pub const SERIES_HEADER: &str = "t,mass,min_f,norm_f_l2_neg_b2,norm_w_l2_beta,norm_w_h1_beta";

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for i in kept_indices(rows.len()) {
        let r = &rows[i];
        let cols = [r.t, r.mass, r.min_f, r.norm_f_l2_neg_b2, r.norm_w_l2, r.norm_w_h1];
        let line: Vec<String> = cols.iter().map(|x| fmt_f64(*x)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn trace_csv(limit: &BoundaryLimit) -> String {
    let mut out = String::from("r,d,trace_norm\n");
    for (r, d, v) in &limit.samples {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*r), fmt_f64(*d), fmt_f64(*v));
    }
    out
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    write_text(dir, name, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_bounds_rows() {
        assert_eq!(kept_indices(5), vec![0, 1, 2, 3, 4]);
        for len in [2000, 2001, 4001, 10_000, 12_345] {
            let idx = kept_indices(len);
            assert!(idx.len() <= MAX_ROWS, "{len}");
            assert_eq!(*idx.last().unwrap(), len - 1);
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }
}
