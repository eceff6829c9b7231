use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Ordered polyline through the vessel lumen with unit tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    points: Vec<Vec3>,
    tangents: Vec<Vec3>,
    arc_length: Vec<f64>,
}

/// Orthonormal cylindrical triad at a point on the vessel wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalTriad {
    pub radial: Vec3,
    pub circumferential: Vec3,
    pub axial: Vec3,
    /// Index of the centerline sample the frame was built from.
    pub sample: usize,
}

impl Centerline {
    /// Tangents are one-sided differences at the ends and central differences
    /// elsewhere.
    pub fn from_points(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Argument("centerline needs at least two points".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::Argument(format!(
                    "centerline points {i} and {} coincide",
                    i + 1
                )));
            }
        }
        let n = points.len();
        let tangents = (0..n)
            .map(|i| {
                let (a, b) = (points[i.saturating_sub(1)], points[(i + 1).min(n - 1)]);
                geom::normalize(geom::sub(b, a))
                    .ok_or_else(|| Error::Argument(format!("zero tangent at centerline point {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut arc_length = Vec::with_capacity(n);
        let mut s = 0.0;
        arc_length.push(0.0);
        for w in points.windows(2) {
            s += geom::norm(geom::sub(w[1], w[0]));
            arc_length.push(s);
        }
        Ok(Self {
            points,
            tangents,
            arc_length,
        })
    }

    /// Uniformly sampled straight segment.
    pub fn straight(start: Vec3, end: Vec3, n_points: usize) -> Result<Self> {
        let n = n_points.max(2);
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                geom::add(start, geom::scale(geom::sub(end, start), t))
            })
            .collect();
        Self::from_points(pts)
    }

    /// Plain text, one `x y z` triple per line. Blank lines and `#` comments
    /// are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| Error::format(path, lineno + 1, format!("bad number: {e}")))?;
            if vals.len() != 3 {
                return Err(Error::format(
                    path,
                    lineno + 1,
                    format!("expected 3 values, found {}", vals.len()),
                ));
            }
            pts.push([vals[0], vals[1], vals[2]]);
        }
        Self::from_points(pts)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn tangents(&self) -> &[Vec3] {
        &self.tangents
    }

    /// Cumulative arc length at each sample.
    pub fn arc_length(&self) -> &[f64] {
        &self.arc_length
    }

    pub fn total_length(&self) -> f64 {
        *self.arc_length.last().unwrap_or(&0.0)
    }

    /// Arc length of the closest point on the polyline, clamped to its ends.
    pub fn project(&self, p: Vec3) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let d = geom::sub(w[1], w[0]);
            let len2 = geom::dot(d, d);
            let t = (geom::dot(geom::sub(p, w[0]), d) / len2).clamp(0.0, 1.0);
            let q = geom::add(w[0], geom::scale(d, t));
            let dist = geom::dot(geom::sub(p, q), geom::sub(p, q));
            if dist < best.0 {
                best = (dist, self.arc_length[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    /// Closest sample to `p`; ties go to the lowest index.
    pub fn closest_sample(&self, p: Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &q) in self.points.iter().enumerate() {
            let d = geom::dot(geom::sub(p, q), geom::sub(p, q));
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Cylindrical triad at a wall point: axial from the closest centerline
/// sample's tangent, radial from the surface normal, and
/// circumferential completing a right-handed `(r, θ, z)` system.
///
/// The axial vector is orthogonalized against the normal once before the
/// cross product, so the triad is orthonormal even when the wall is not
/// exactly parallel to the centerline.
pub fn nearest_centerline_frame(
    centerline: &Centerline,
    point: Vec3,
    surface_normal: Vec3,
) -> Result<CylindricalTriad> {
    let sample = centerline.closest_sample(point);
    let tangent = centerline.tangents[sample];
    let r = geom::normalize(surface_normal)
        .ok_or_else(|| Error::Argument("zero surface normal".into()))?;
    let rz = geom::dot(r, tangent);
    if rz.abs() > 1.0 - 1e-8 {
        return Err(Error::DegenerateFrame(rz.abs()));
    }
    let z = geom::normalize(geom::sub(tangent, geom::scale(r, rz)))
        .ok_or(Error::DegenerateFrame(rz.abs()))?;
    let theta = geom::cross(z, r);
    Ok(CylindricalTriad {
        radial: r,
        circumferential: theta,
        axial: z,
        sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_axis() -> Centerline {
        Centerline::straight([0.0, 0.0, 0.0], [0.0, 0.0, 10.0], 11).unwrap()
    }

    fn assert_vec(a: Vec3, b: Vec3) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-14, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn axis_aligned_frames() {
        let f = nearest_centerline_frame(&z_axis(), [2.0, 0.0, 5.0], [1.0, 0.0, 0.0]).unwrap();
        assert_vec(f.radial, [1.0, 0.0, 0.0]);
        assert_vec(f.axial, [0.0, 0.0, 1.0]);
        assert_vec(f.circumferential, [0.0, 1.0, 0.0]);

        let f = nearest_centerline_frame(&z_axis(), [0.0, 2.0, 5.0], [0.0, 1.0, 0.0]).unwrap();
        assert_vec(f.circumferential, [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_onto_polyline() {
        let c = Centerline::from_points(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 4.0], [3.0, 0.0, 4.0]]).unwrap();
        assert!((c.project([1.0, 0.0, 2.5]) - 2.5).abs() < 1e-15);
        assert!((c.project([2.0, 1.0, 5.0]) - 6.0).abs() < 1e-15);
        assert_eq!(c.project([0.0, 0.0, -3.0]), 0.0);
        assert!((c.project([9.0, 0.0, 4.0]) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let c = z_axis();
        // equidistant from samples at z = 4 and z = 5
        let f = nearest_centerline_frame(&c, [1.0, 0.0, 4.5], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.sample, 4);
    }

    #[test]
    fn degenerate_frame() {
        let err = nearest_centerline_frame(&z_axis(), [0.0, 0.0, 3.0], [0.0, 0.0, 1.0]);
        assert!(matches!(err, Err(Error::DegenerateFrame(_))));
    }

    #[test]
    fn tilted_normal_is_orthonormal_right_handed() {
        let n = geom::normalize([1.0, 0.2, 0.3]).unwrap();
        let f = nearest_centerline_frame(&z_axis(), [2.0, 0.0, 5.0], n).unwrap();
        let m = [f.radial, f.circumferential, f.axial];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((geom::dot(m[i], m[j]) - want).abs() < 1e-10);
            }
        }
        assert!((geom::det3(&m) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tangents_are_unit() {
        let pts = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                [t.cos(), t.sin(), 0.5 * t]
            })
            .collect();
        let c = Centerline::from_points(pts).unwrap();
        for t in c.tangents() {
            assert!((geom::norm(*t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_repeated_points() {
        assert!(Centerline::from_points(vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn loads_text_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cl.txt");
        std::fs::write(&path, "# centerline\n0 0 0\n0 0 1.5\n\n0 0 3\n").unwrap();
        let c = Centerline::load(&path).unwrap();
        assert_eq!(c.points().len(), 3);
        assert_eq!(c.total_length(), 3.0);
        std::fs::write(&path, "0 0 0\n0 0\n").unwrap();
        let err = Centerline::load(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
