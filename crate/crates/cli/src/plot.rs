use std::path::Path;

use pat_core::persist::{write_atomic, write_json};
use pat_core::xforms::TimeSeries;
use pat_core::ScalarField;
use serde::Serialize;

use crate::error::CliError;

/// Linear min–max map to 0..=255 recorded next to every image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSidecar {
    pub source: String,
    pub config_hash: String,
    pub width: usize,
    pub height: usize,
    /// Grid axes along image columns and rows; rows run top to bottom
    /// with decreasing coordinate.
    pub axes: [usize; 2],
    /// Fixed index on the remaining axis for slices of 3D fields.
    pub slice: Option<(usize, usize)>,
    pub min: f64,
    pub max: f64,
}

/// 8-bit binary PGM of `values[row * width + col]`, scaled linearly from
/// `[min, max]`; a constant image maps to 0.
pub fn pgm_bytes(width: usize, height: usize, values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| if span > 0.0 { (255.0 * (v - min) / span).round() as u8 } else { 0 }));
    (out, min, max)
}

/// Pixels of the plane spanned by grid axes `(a0, a1)` with the other axis
/// (if any) fixed at `fixed`.
fn plane(field: &ScalarField, a0: usize, a1: usize, fixed: Option<(usize, usize)>) -> (usize, usize, Vec<f64>) {
    let g = &field.grid;
    let (w, h) = (g.shape[a0], g.shape[a1]);
    let mut px = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let mut idx = [0usize; 3];
            idx[a0] = col;
            idx[a1] = h - 1 - row;
            if let Some((ax, i)) = fixed {
                idx[ax] = i;
            }
            px.push(field.values[g.ravel(&idx)]);
        }
    }
    (w, h, px)
}

/// Renders `field` as `out_dir/name.pgm` (2D) or three central axis
/// slices `name_xy.pgm`, `name_xz.pgm`, `name_yz.pgm` (3D), each with a
/// JSON sidecar, plus a central profile along the first axis as CSV.
pub fn emit_field(field: &ScalarField, name: &str, out_dir: &Path, config_hash: &str) -> Result<Vec<String>, CliError> {
    let g = &field.grid;
    let views: Vec<(String, usize, usize, Option<(usize, usize)>)> = if g.dim == 2 {
        vec![(name.to_string(), 0, 1, None)]
    } else {
        vec![
            (format!("{name}_xy"), 0, 1, Some((2, g.shape[2] / 2))),
            (format!("{name}_xz"), 0, 2, Some((1, g.shape[1] / 2))),
            (format!("{name}_yz"), 1, 2, Some((0, g.shape[0] / 2))),
        ]
    };
    let mut written = Vec::new();
    for (stem, a0, a1, fixed) in views {
        let (w, h, px) = plane(field, a0, a1, fixed);
        let (bytes, min, max) = pgm_bytes(w, h, &px);
        write_atomic(&out_dir.join(format!("{stem}.pgm")), &bytes)?;
        let side = ImageSidecar {
            source: name.to_string(),
            config_hash: config_hash.to_string(),
            width: w,
            height: h,
            axes: [a0, a1],
            slice: fixed,
            min,
            max,
        };
        write_json(&out_dir.join(format!("{stem}.pgm.json")), &side)?;
        written.push(format!("{stem}.pgm"));
    }
    let mut mid = [0usize; 3];
    for ax in 1..g.dim {
        mid[ax] = g.shape[ax] / 2;
    }
    let rows: Vec<(f64, f64)> = (0..g.shape[0])
        .map(|i| {
            mid[0] = i;
            (g.origin[0] + i as f64 * g.spacing[0], field.values[g.ravel(&mid)])
        })
        .collect();
    let profile = format!("{name}_profile.csv");
    write_csv(&out_dir.join(&profile), "x", &rows)?;
    written.push(profile);
    Ok(written)
}

pub fn emit_series(series: &TimeSeries, name: &str, out_dir: &Path) -> Result<String, CliError> {
    let rows: Vec<(f64, f64)> =
        series.samples.iter().enumerate().map(|(n, v)| (series.t0 + n as f64 * series.dt, *v)).collect();
    let file = format!("{name}.csv");
    write_csv(&out_dir.join(&file), "t", &rows)?;
    Ok(file)
}

/// RFC-4180 CSV with header `axis,value`.
pub fn write_csv(path: &Path, axis: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record([axis, "value"]).map_err(io)?;
    for (a, v) in rows {
        w.write_record([format!("{a:?}"), format!("{v:?}")]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_scaling() {
        let (b, min, max) = pgm_bytes(2, 1, &[1.0, 3.0]);
        assert_eq!(&b[..11], b"P5\n2 1\n255\n");
        assert_eq!(&b[11..], &[0, 255]);
        assert_eq!((min, max), (1.0, 3.0));
    }

    #[test]
    fn constant_image_is_uniform() {
        let (b, _, _) = pgm_bytes(3, 2, &[0.7; 6]);
        assert!(b[11..].iter().all(|&p| p == 0));
    }

    #[test]
    fn top_row_is_largest_second_coordinate() {
        let g = pat_core::GridSpec::cube(2, 3, 1.0);
        let v = (0..g.len()).map(|i| g.node(i)[1]).collect();
        let f = ScalarField::new(g, v).unwrap();
        let (_, _, px) = plane(&f, 0, 1, None);
        assert_eq!(&px[..3], &[1.0, 1.0, 1.0]);
    }
}
