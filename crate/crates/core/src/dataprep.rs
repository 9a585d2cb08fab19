//! Boundary-data preparation: unwrapped complex logarithm of `g0(k)`, the
//! derivative coefficients `p0(k)`, `p1(k)` feeding the boundary lift, and
//! ingestion of external frequency-domain measurement files.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{incident_field, ScatterData};
use crate::grid::{SpatialGrid, WavenumberGrid};

const MIN_G0: f64 = 1e-12;
const TWO_PI: f64 = std::f64::consts::TAU;

/// Everything the inversion needs from the raw data.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub g0: Vec<Complex64>,
    /// Unwrapped `log g0`: exact modulus/phase with the winding integer fixed
    /// by k-continuity from the top of the band.
    pub log_g0: Vec<Complex64>,
    /// `d/dk (log g0 / k²)`.
    pub p0: Vec<Complex64>,
    /// `d/dk [2i/k (1 - 1/g0)]`.
    pub p1: Vec<Complex64>,
}

/// Finite-difference d/dk with the same stencils as `grid::d_x` order 1.
pub fn d_k(f: &[Complex64], kgrid: &WavenumberGrid) -> Vec<Complex64> {
    assert_eq!(f.len(), kgrid.n_k(), "d_k: length/grid mismatch");
    crate::grid::d_x(f, 1, kgrid.h_k())
}

/// Branch-tracked complex logarithm of the data.
///
/// The anchor is the principal log at `k_hi`; toward lower k the winding
/// integer comes from the trapezoidal integral of `g0'/g0` (with `g0'` by
/// finite differences), after which modulus and phase are snapped back to the
/// exact values so that `exp(log_g0) == g0` to round-off.
pub fn unwrap_log(g0: &[Complex64], kgrid: &WavenumberGrid) -> Result<Vec<Complex64>> {
    assert_eq!(g0.len(), kgrid.n_k(), "unwrap_log: length/grid mismatch");
    for (m, g) in g0.iter().enumerate() {
        if g.norm() < MIN_G0 {
            return Err(Error::DegenerateData {
                k: kgrid.nodes()[m],
                magnitude: g.norm(),
            });
        }
    }
    let n = g0.len();
    let h = kgrid.h_k();
    let dg = d_k(g0, kgrid);
    let ratio: Vec<Complex64> = dg.iter().zip(g0).map(|(d, g)| d / g).collect();

    // psi(k_m) = log g0(k_hi) - ∫_{k_m}^{k_hi} g0'/g0 dτ
    let anchor = Complex64::new(g0[n - 1].norm().ln(), g0[n - 1].arg());
    let mut psi = vec![Complex64::ZERO; n];
    psi[n - 1] = anchor;
    let mut suffix = Complex64::ZERO;
    for m in (0..n - 1).rev() {
        suffix += 0.5 * h * (ratio[m] + ratio[m + 1]);
        psi[m] = anchor - suffix;
    }

    // Snap to the exact branch nearest the integral estimate.
    Ok((0..n)
        .map(|m| {
            let principal = g0[m].arg();
            let winding = ((psi[m].im - principal) / TWO_PI).round();
            Complex64::new(g0[m].norm().ln(), principal + TWO_PI * winding)
        })
        .collect())
}

/// The two boundary coefficient sequences obtained by k-differentiation.
pub fn boundary_coefficients(
    log_g0: &[Complex64],
    g0: &[Complex64],
    kgrid: &WavenumberGrid,
) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(log_g0.len(), kgrid.n_k());
    assert_eq!(g0.len(), kgrid.n_k());
    let i = Complex64::I;
    let f0: Vec<Complex64> = log_g0
        .iter()
        .zip(kgrid.nodes())
        .map(|(lg, &k)| lg / (k * k))
        .collect();
    let f1: Vec<Complex64> = g0
        .iter()
        .zip(kgrid.nodes())
        .map(|(g, &k)| 2.0 * i / k * (Complex64::ONE - 1.0 / g))
        .collect();
    (d_k(&f0, kgrid), d_k(&f1, kgrid))
}

/// One-stop preparation of raw data.
pub fn prepare(data: &ScatterData, kgrid: &WavenumberGrid) -> Result<PreparedData> {
    let log_g0 = unwrap_log(&data.g0, kgrid)?;
    let (p0, p1) = boundary_coefficients(&log_g0, &data.g0, kgrid);
    Ok(PreparedData {
        g0: data.g0.clone(),
        log_g0,
        p0,
        p1,
    })
}

/// Record kind declared in the measurement-file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RecordKind {
    RawField,
    Normalized,
}

/// Read a delimited text file of frequency-domain records and resample onto
/// the wavenumber grid.
///
/// Format: optional `#` comment lines, then a header `k,re,im,kind` whose
/// fourth token picks the record kind (`u` for the raw field at x = 0, which
/// gets divided by the incident field; `g0` for already-normalized data),
/// then one `k re im` record per line, comma- or whitespace-delimited. The
/// calibration factor multiplies the raw values before anything else.
pub fn ingest_external(
    path: &Path,
    calibration: f64,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
) -> Result<ScatterData> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let display = path.display().to_string();
    let mut kind: Option<RecordKind> = None;
    let mut rows: Vec<(f64, Complex64)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if kind.is_none() {
            // header line
            if fields.len() != 4 || fields[0] != "k" || fields[1] != "re" || fields[2] != "im" {
                return Err(Error::Parse {
                    path: display,
                    line: lineno,
                    msg: format!("expected header `k,re,im,kind`, got `{text}`"),
                });
            }
            kind = Some(match fields[3] {
                "u" => RecordKind::RawField,
                "g0" => RecordKind::Normalized,
                other => {
                    return Err(Error::Parse {
                        path: display,
                        line: lineno,
                        msg: format!("kind must be `u` or `g0`, got `{other}`"),
                    })
                }
            });
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut nums = [0.0; 3];
        for (slot, raw) in nums.iter_mut().zip(&fields) {
            *slot = raw.parse::<f64>().map_err(|e| Error::Parse {
                path: display.clone(),
                line: lineno,
                msg: format!("bad number `{raw}`: {e}"),
            })?;
        }
        rows.push((nums[0], Complex64::new(nums[1], nums[2])));
    }

    let kind = kind.ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: "missing header line".into(),
    })?;
    if rows.len() < 2 {
        return Err(Error::Parse {
            path: display,
            line: 0,
            msg: format!("need at least 2 records, got {}", rows.len()),
        });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (have_lo, have_hi) = (rows[0].0, rows[rows.len() - 1].0);
    let slack = 1e-9;
    if have_lo > kgrid.k_lo() + slack || have_hi < kgrid.k_hi() - slack {
        return Err(Error::Coverage {
            have_lo,
            have_hi,
            need_lo: kgrid.k_lo(),
            need_hi: kgrid.k_hi(),
        });
    }

    let g0 = kgrid
        .nodes()
        .iter()
        .map(|&k| {
            let mut value = interp_rows(&rows, k) * calibration;
            if kind == RecordKind::RawField {
                value /= incident_field(0.0, k, grid.x0_source())?;
            }
            Ok(value)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScatterData {
        g0,
        noise_level: 0.0,
        seed: 0,
    })
}

fn interp_rows(rows: &[(f64, Complex64)], k: f64) -> Complex64 {
    // exact hit wins (keeps file round-trips bit-identical)
    let scale = rows[rows.len() - 1].0.abs().max(1.0);
    if let Some(row) = rows.iter().find(|r| (r.0 - k).abs() < 1e-12 * scale) {
        return row.1;
    }
    let hi = rows
        .iter()
        .position(|r| r.0 >= k)
        .unwrap_or(rows.len() - 1)
        .max(1);
    let (k0, v0) = rows[hi - 1];
    let (k1, v1) = rows[hi];
    let t = (k - k0) / (k1 - k0);
    v0 * (1.0 - t) + v1 * t
}

/// Write data in the ingestion format with 17 significant digits (lossless
/// for f64 round-trips). Extra header comments can carry a config echo.
pub fn write_scatter_csv(
    path: &Path,
    ks: &[f64],
    values: &[Complex64],
    comments: &[String],
) -> Result<()> {
    assert_eq!(ks.len(), values.len());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "k,re,im,g0")?;
    for (k, v) in ks.iter().zip(values) {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", k, v.re, v.im)?;
    }
    Ok(())
}
