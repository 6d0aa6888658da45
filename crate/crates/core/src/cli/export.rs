//! Plot-ready CSV output of tube slices.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spp::{plane_grid, project_xy};
use crate::statespace::{ValueField, ValueTube};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    /// `x,y,value` on the position plane.
    XySlice,
    /// Zero-level contour of the position plane as `x0,y0,x1,y1` segments.
    BoundaryPolyline,
    /// Every node of the slice with all coordinates.
    Csv,
}

impl FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy-slice" => Ok(ExportKind::XySlice),
            "boundary-polyline" => Ok(ExportKind::BoundaryPolyline),
            "csv" => Ok(ExportKind::Csv),
            other => Err(Error::InvalidRequest(format!("unknown export kind `{other}`"))),
        }
    }
}

/// Position-plane view of `field`: the minimum over the other dimensions,
/// or the interpolated value at `fixed` values of those dimensions.
pub fn xy_slice(field: &ValueField, fixed: Option<&[f64]>) -> Result<ValueField> {
    let g = field.grid();
    let Some(fixed) = fixed else {
        return project_xy(field);
    };
    if fixed.len() + 2 != g.ndim() {
        return Err(Error::DimensionMismatch(format!("{} fixed values for {} extra dimensions", fixed.len(), g.ndim() - 2)));
    }
    let plane = plane_grid(g)?;
    let mut z = vec![0.0; g.ndim()];
    z[2..].copy_from_slice(fixed);
    let values = (0..plane.len())
        .map(|q| {
            let p = plane.node(q);
            z[0] = p[0];
            z[1] = p[1];
            field.interpolate(&z).map(|v| v as f32)
        })
        .collect::<Result<_>>()?;
    ValueField::new(plane, values)
}

/// Zero-level contour segments of a plane field by marching squares.
pub fn boundary_segments(plane: &ValueField) -> Result<Vec<[f64; 4]>> {
    let g = plane.grid();
    if g.ndim() != 2 {
        return Err(Error::DimensionMismatch("contours need a plane".into()));
    }
    let (nx, ny) = (g.shape()[0], g.shape()[1]);
    let v = |i: usize, j: usize| plane.values()[i * ny + j] as f64;
    let p = |i: usize, j: usize| [g.coord(0, i), g.coord(1, j)];
    let cross = |a: [f64; 2], va: f64, b: [f64; 2], vb: f64| {
        let w = va / (va - vb);
        [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
    };
    let mut out = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals: Vec<f64> = corners.iter().map(|&(a, b)| v(a, b)).collect();
            let inside: Vec<bool> = vals.iter().map(|x| *x <= 0.0).collect();
            // Edges: bottom, right, top, left.
            let mut hits: [Option<[f64; 2]>; 4] = [None; 4];
            for (e, (a, b)) in [(0, 1), (1, 2), (3, 2), (0, 3)].into_iter().enumerate() {
                if inside[a] != inside[b] {
                    let (ca, cb) = (corners[a], corners[b]);
                    hits[e] = Some(cross(p(ca.0, ca.1), vals[a], p(cb.0, cb.1), vals[b]));
                }
            }
            let found: Vec<[f64; 2]> = hits.iter().flatten().copied().collect();
            match found.len() {
                2 => out.push([found[0][0], found[0][1], found[1][0], found[1][1]]),
                4 => {
                    let h: Vec<[f64; 2]> = hits.iter().map(|x| x.unwrap()).collect();
                    let centre_inside = vals.iter().sum::<f64>() / 4.0 <= 0.0;
                    let pairs = if centre_inside == inside[0] { [(0, 1), (2, 3)] } else { [(0, 3), (1, 2)] };
                    for (a, b) in pairs {
                        out.push([h[a][0], h[a][1], h[b][0], h[b][1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

pub(super) fn export(tube: &ValueTube, kind: ExportKind, t: f64, fixed: Option<&[f64]>, out: &mut dyn Write) -> Result<usize> {
    let slice = tube.omega_slice(t)?;
    match kind {
        ExportKind::XySlice => {
            let plane = xy_slice(&slice, fixed)?;
            writeln!(out, "x,y,value")?;
            for q in 0..plane.grid().len() {
                let p = plane.grid().node(q);
                writeln!(out, "{},{},{}", p[0], p[1], plane.values()[q])?;
            }
            Ok(plane.grid().len())
        }
        ExportKind::BoundaryPolyline => {
            let segments = boundary_segments(&xy_slice(&slice, fixed)?)?;
            writeln!(out, "x0,y0,x1,y1")?;
            for s in &segments {
                writeln!(out, "{},{},{},{}", s[0], s[1], s[2], s[3])?;
            }
            Ok(segments.len())
        }
        ExportKind::Csv => {
            let g = slice.grid();
            let names: Vec<String> = (0..g.ndim()).map(|d| format!("z{d}")).collect();
            writeln!(out, "{},value", names.join(","))?;
            for i in 0..g.len() {
                let z: Vec<String> = g.node(i).iter().map(|x| x.to_string()).collect();
                writeln!(out, "{},{}", z.join(","), slice.values()[i])?;
            }
            Ok(g.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{signed_distance_box, Grid};
    use std::sync::Arc;

    #[test]
    fn square_contour_is_closed() {
        let g = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[21, 21], &[false, false]).unwrap());
        let f = signed_distance_box(&g, &[-0.45, -0.45], &[0.45, 0.45]).unwrap();
        let segs = boundary_segments(&f).unwrap();
        // Every endpoint is shared by exactly two segments.
        let key = |x: f64, y: f64| ((x * 1e6).round() as i64, (y * 1e6).round() as i64);
        let mut counts = std::collections::HashMap::new();
        for s in &segs {
            *counts.entry(key(s[0], s[1])).or_insert(0) += 1;
            *counts.entry(key(s[2], s[3])).or_insert(0) += 1;
        }
        assert!(counts.values().all(|c| *c == 2));
        for s in &segs {
            for (x, y) in [(s[0], s[1]), (s[2], s[3])] {
                assert!((x.abs().max(y.abs()) - 0.45).abs() < 1e-9, "({x}, {y})");
            }
        }
    }

    #[test]
    fn empty_slice_has_no_segments() {
        let g = Arc::new(Grid::new(&[-1.0, -1.0], &[1.0, 1.0], &[11, 11], &[false, false]).unwrap());
        assert!(boundary_segments(&ValueField::empty(g)).unwrap().is_empty());
    }

    #[test]
    fn fixed_dims_interpolate() {
        let g = Arc::new(Grid::new(&[-1.0, -1.0, 0.0], &[1.0, 1.0, 1.0], &[5, 5, 3], &[false, false, false]).unwrap());
        let f = ValueField::from_fn(g.clone(), |z| z[0] + z[2]);
        let s = xy_slice(&f, Some(&[0.25])).unwrap();
        assert!((s.values()[0] as f64 - (-1.0 + 0.25)).abs() < 1e-6);
        let m = xy_slice(&f, None).unwrap();
        assert_eq!(m.values()[0], -1.0);
        assert!(xy_slice(&f, Some(&[0.1, 0.2])).is_err());
    }
}
