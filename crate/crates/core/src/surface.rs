//! Sharp-interface energy of polygonal interfaces under a tabulated
//! surface tension, rational polygonal approximation of curves, and the
//! convexity test of the one-homogeneous extension of `sigma`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{rationalize_direction, RationalUnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEntry {
    pub nu: Vec<f64>,
    pub sigma: f64,
    pub err: f64,
}

/// Planar surface-tension table, interpolated linearly in angle.
///
/// A direction between two neighbouring entries is accepted when their
/// angular gap is at most twice the table mesh (the largest distance from an
/// entry to its nearest neighbour); otherwise it is outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTable {
    entries: Vec<SigmaEntry>,
    angles: Vec<f64>,
}

fn angle(v: &[f64]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(2.0 * PI)
}

const SAME_ANGLE: f64 = 1e-12;

impl SigmaTable {
    pub fn new(mut entries: Vec<SigmaEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty sigma table".into()));
        }
        for e in &entries {
            if e.nu.len() != 2 {
                return Err(Error::InvalidArgument("sigma tables are planar".into()));
            }
            let n = e.nu[0].hypot(e.nu[1]);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("table direction {:?} is not a unit vector", e.nu)));
            }
            if !(e.sigma >= 0.0) || !(e.err >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative or undefined value at {:?}", e.nu)));
            }
        }
        entries.sort_by(|a, b| angle(&a.nu).total_cmp(&angle(&b.nu)));
        let angles: Vec<f64> = entries.iter().map(|e| angle(&e.nu)).collect();
        for i in 1..angles.len() {
            if angles[i] - angles[i - 1] <= SAME_ANGLE {
                return Err(Error::InvalidArgument(format!("duplicate direction {:?}", entries[i].nu)));
            }
        }
        if angles.len() > 1 && angles[0] + 2.0 * PI - angles[angles.len() - 1] <= SAME_ANGLE {
            return Err(Error::InvalidArgument("duplicate direction across 0".into()));
        }
        Ok(Self { entries, angles })
    }

    pub fn isotropic(sigma: f64, count: usize) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / count as f64;
                    SigmaEntry { nu: vec![t.cos(), t.sin()], sigma, err: 0.0 }
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[SigmaEntry] {
        &self.entries
    }

    fn gap_after(&self, i: usize) -> f64 {
        let n = self.angles.len();
        if n == 1 {
            return 2.0 * PI;
        }
        if i + 1 < n {
            self.angles[i + 1] - self.angles[i]
        } else {
            self.angles[0] + 2.0 * PI - self.angles[i]
        }
    }

    /// Largest nearest-neighbour angular distance.
    pub fn mesh(&self) -> f64 {
        let n = self.angles.len();
        (0..n).map(|i| self.gap_after(i).min(self.gap_after((i + n - 1) % n))).fold(0.0, f64::max)
    }

    /// `(sigma, error bar)` at a unit direction.
    pub fn sigma_at(&self, nu: &[f64]) -> Result<(f64, f64)> {
        if nu.len() != 2 {
            return Err(Error::ShapeMismatch { expected: 2, actual: nu.len() });
        }
        let a = angle(nu);
        let n = self.angles.len();
        // index of the last entry with angle <= a (wrapping)
        let i = match self.angles.partition_point(|&x| x <= a) {
            0 => n - 1,
            k => k - 1,
        };
        let j = (i + 1) % n;
        let mut da = (a - self.angles[i]).rem_euclid(2.0 * PI);
        if da > 2.0 * PI - SAME_ANGLE {
            da = 0.0;
        }
        if da <= SAME_ANGLE {
            return Ok((self.entries[i].sigma, self.entries[i].err));
        }
        let gap = self.gap_after(i);
        if gap - da <= SAME_ANGLE {
            return Ok((self.entries[j].sigma, self.entries[j].err));
        }
        if n < 2 || gap > 2.0 * self.mesh() + SAME_ANGLE {
            return Err(Error::OutsideTable(format!("direction {nu:?} lies in a gap of {gap:.4} rad")));
        }
        let w = da / gap;
        let (ei, ej) = (&self.entries[i], &self.entries[j]);
        Ok(((1.0 - w) * ei.sigma + w * ej.sigma, (1.0 - w) * ei.err + w * ej.err))
    }
}

/// One flat piece of a polygonal interface.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFacet {
    /// Outward unit normal.
    pub normal: Vec<f64>,
    /// Exact rational normal when the facet is lattice-aligned.
    pub exact: Option<RationalUnitVector>,
    pub measure: f64,
}

impl PolyFacet {
    pub fn rational(normal: RationalUnitVector, measure: f64) -> Result<Self> {
        if !(measure > 0.0) {
            return Err(Error::InvalidArgument(format!("facet measure must be positive, got {measure}")));
        }
        Ok(Self { normal: normal.to_f64(), exact: Some(normal), measure })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyInterface {
    pub facets: Vec<PolyFacet>,
    pub closed: bool,
    /// Counter-clockwise vertices for planar polygons.
    pub vertices: Option<Vec<[f64; 2]>>,
}

fn signed_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| {
        let (a, b) = (p[i], p[(i + 1) % n]);
        a[0] * b[1] - b[0] * a[1]
    }).sum::<f64>()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// First pair of non-adjacent crossing edges of a closed polygon.
pub fn find_self_intersection(p: &[[f64; 2]]) -> Option<(usize, usize)> {
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return Some((i, j));
            }
        }
    }
    None
}

impl PolyInterface {
    /// Closed polygon from vertices; normals are taken as floating point.
    pub fn from_vertices(vertices: &[[f64; 2]]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument("a polygon needs at least 3 vertices".into()));
        }
        if let Some((i, j)) = find_self_intersection(vertices) {
            return Err(Error::SelfIntersection(i, j));
        }
        let mut v = vertices.to_vec();
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        let n = v.len();
        let mut facets = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            if len == 0.0 {
                return Err(Error::InvalidArgument(format!("repeated vertex {i}")));
            }
            facets.push(PolyFacet { normal: vec![dy / len, -dx / len], exact: None, measure: len });
        }
        Ok(Self { facets, closed: true, vertices: Some(v) })
    }

    pub fn perimeter(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    /// `|sum measure_i * normal_i|`.
    pub fn closure_defect(&self) -> f64 {
        let d = self.facets.first().map_or(0, |f| f.normal.len());
        (0..d).map(|k| self.facets.iter().map(|f| f.measure * f.normal[k]).sum::<f64>().powi(2)).sum::<f64>().sqrt()
    }

    pub fn area(&self) -> Option<f64> {
        self.vertices.as_ref().map(|v| signed_area(v).abs())
    }

    /// Dilation by `c > 0` about the origin.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            facets: self.facets.iter().map(|f| PolyFacet { measure: f.measure * c, ..f.clone() }).collect(),
            closed: self.closed,
            vertices: self.vertices.as_ref().map(|v| v.iter().map(|p| [p[0] * c, p[1] * c]).collect()),
        }
    }
}

/// `sum sigma(normal_i) * measure_i`.
pub fn eval_f0(interface: &PolyInterface, table: &SigmaTable) -> Result<f64> {
    interface.facets.iter().map(|f| table.sigma_at(&f.normal).map(|(s, _)| s * f.measure)).sum()
}

fn rebuild(start: [f64; 2], tangents: &[[f64; 2]], lengths: &[f64]) -> Vec<[f64; 2]> {
    let mut v = Vec::with_capacity(lengths.len());
    let mut p = start;
    for (t, l) in tangents.iter().zip(lengths) {
        v.push(p);
        p = [p[0] + l * t[0], p[1] + l * t[1]];
    }
    v
}

/// Polygon through the samples with every edge normal replaced by a nearby
/// rational direction; edge lengths are then changed by the least-squares
/// minimal correction that closes the polygon again.
///
/// The perimeter stays within `tol` (relative) of the sampled polygon's.
pub fn polygonal_approximation(curve: &[[f64; 2]], tol: f64) -> Result<PolyInterface> {
    let base = PolyInterface::from_vertices(curve)?;
    let v = base.vertices.clone().unwrap_or_default();
    let lengths: Vec<f64> = base.facets.iter().map(|f| f.measure).collect();
    let perimeter = base.perimeter();
    let mut dir_tol = tol;
    loop {
        let exact: Vec<RationalUnitVector> = base
            .facets
            .iter()
            .map(|f| rationalize_direction(&f.normal, dir_tol))
            .collect::<Result<_>>()?;
        let tangents: Vec<[f64; 2]> = exact.iter().map(|e| {
            let n = e.to_f64();
            [-n[1], n[0]]
        }).collect();
        // l' = l - A^T (A A^T)^{-1} A l, A = [t_x; t_y]
        let (mut sxx, mut sxy, mut syy, mut rx, mut ry) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, l) in tangents.iter().zip(&lengths) {
            sxx += t[0] * t[0];
            sxy += t[0] * t[1];
            syy += t[1] * t[1];
            rx += l * t[0];
            ry += l * t[1];
        }
        let det = sxx * syy - sxy * sxy;
        if det.abs() < 1e-300 {
            return Err(Error::InvalidArgument("edge directions are degenerate".into()));
        }
        let cx = (syy * rx - sxy * ry) / det;
        let cy = (sxx * ry - sxy * rx) / det;
        let adjusted: Vec<f64> = tangents.iter().zip(&lengths).map(|(t, l)| l - (t[0] * cx + t[1] * cy)).collect();
        let new_perimeter: f64 = adjusted.iter().sum();
        let ok = adjusted.iter().all(|&l| l > 0.0) && (new_perimeter - perimeter).abs() <= tol * perimeter;
        if ok {
            let verts = rebuild(v[0], &tangents, &adjusted);
            if let Some((i, j)) = find_self_intersection(&verts) {
                if dir_tol / 2.0 < 1e-9 {
                    return Err(Error::SelfIntersection(i, j));
                }
            } else {
                let facets = exact
                    .into_iter()
                    .zip(&adjusted)
                    .map(|(e, &l)| PolyFacet::rational(e, l))
                    .collect::<Result<_>>()?;
                return Ok(PolyInterface { facets, closed: true, vertices: Some(verts) });
            }
        }
        dir_tol /= 2.0;
        if dir_tol < 1e-9 {
            return Err(Error::ToleranceTooSmall(dir_tol));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    /// `|v0| sigma(v0 / |v0|)` for `v0 = nu_i + nu_j`.
    pub lhs: f64,
    /// `sigma(nu_i) + sigma(nu_j)`.
    pub rhs: f64,
    pub slack: f64,
}

/// Subadditivity `|v0| sigma(v0^) <= sigma(v1) + sigma(v2)` over all pairs of
/// table directions, with slack equal to the three error bars. Pairs whose
/// sum is zero or falls outside the table are skipped.
pub fn convexity_check(table: &SigmaTable) -> Vec<Violation> {
    let e = table.entries();
    let mut out = Vec::new();
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let v0 = [e[i].nu[0] + e[j].nu[0], e[i].nu[1] + e[j].nu[1]];
            let r = v0[0].hypot(v0[1]);
            if r < 1e-12 {
                continue;
            }
            let Ok((s0, err0)) = table.sigma_at(&[v0[0] / r, v0[1] / r]) else { continue };
            let lhs = r * s0;
            let rhs = e[i].sigma + e[j].sigma;
            let slack = e[i].err + e[j].err + err0;
            if lhs > rhs + slack + 1e-12 * rhs.max(1.0) {
                out.push(Violation { i, j, lhs, rhs, slack });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smaller {
    First,
    Second,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub f0_first: f64,
    pub f0_second: f64,
    pub smaller: Smaller,
}

pub fn compare_interfaces(a: &PolyInterface, b: &PolyInterface, table: &SigmaTable) -> Result<Comparison> {
    if !a.closed || !b.closed {
        return Err(Error::Precondition("both interfaces must be closed".into()));
    }
    let fa = eval_f0(a, table)?;
    let fb = eval_f0(b, table)?;
    let smaller = if fa < fb {
        Smaller::First
    } else if fb < fa {
        Smaller::Second
    } else {
        Smaller::Equal
    };
    Ok(Comparison { f0_first: fa, f0_second: fb, smaller })
}

/// One vertex per line, comma-separated; blank lines and `#` comments skipped.
pub fn parse_vertices(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::InvalidArgument(format!("line {}: expected two coordinates", k + 1)));
        }
        let x = parts[0].parse::<f64>().map_err(|e| Error::InvalidArgument(format!("line {}: {e}", k + 1)))?;
        let y = parts[1].parse::<f64>().map_err(|e| Error::InvalidArgument(format!("line {}: {e}", k + 1)))?;
        out.push([x, y]);
    }
    Ok(out)
}

pub fn format_vertices(v: &[[f64; 2]]) -> String {
    v.iter().map(|p| format!("{:?},{:?}\n", p[0], p[1])).collect()
}

/// Regular polygon with `n` vertices on the circle of radius `r`.
pub fn regular_polygon(n: usize, r: f64) -> Vec<[f64; 2]> {
    (0..n).map(|k| {
        let t = 2.0 * PI * k as f64 / n as f64;
        [r * t.cos(), r * t.sin()]
    }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(s: f64) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]]
    }

    fn axis_table(s1: f64, s2: f64) -> SigmaTable {
        let e = |x: f64, y: f64, s: f64| SigmaEntry { nu: vec![x, y], sigma: s, err: 0.0 };
        SigmaTable::new(vec![e(1.0, 0.0, s1), e(0.0, 1.0, s2), e(-1.0, 0.0, s1), e(0.0, -1.0, s2)]).unwrap()
    }

    #[test]
    fn square_energies() {
        let sq = PolyInterface::from_vertices(&square(1.0)).unwrap();
        assert_relative_eq!(eval_f0(&sq, &axis_table(1.5, 1.5)).unwrap(), 6.0);
        assert_relative_eq!(eval_f0(&sq, &axis_table(1.0, 2.0)).unwrap(), 6.0);
        assert_relative_eq!(eval_f0(&sq, &axis_table(2.0, 0.5)).unwrap(), 5.0);
        assert!(sq.closure_defect() < 1e-15);
    }

    #[test]
    fn sixteen_gon_perimeter() {
        let p = PolyInterface::from_vertices(&regular_polygon(16, 1.0)).unwrap();
        let f = eval_f0(&p, &SigmaTable::isotropic(1.0, 32).unwrap()).unwrap();
        assert_relative_eq!(f, 32.0 * (PI / 16.0).sin(), epsilon = 1e-12);
        assert!((f - 2.0 * PI).abs() / (2.0 * PI) < 0.007);
    }

    #[test]
    fn interpolation_and_reach() {
        let t = axis_table(1.0, 3.0);
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(t.sigma_at(&[d, d]).unwrap().0, 2.0, epsilon = 1e-12);
        assert_relative_eq!(t.sigma_at(&[d, -d]).unwrap().0, 2.0, epsilon = 1e-12);
        assert_eq!(t.sigma_at(&[1.0, 0.0]).unwrap().0, 1.0);
        let e = |x: f64, y: f64| SigmaEntry { nu: vec![x, y], sigma: 1.0, err: 0.0 };
        let sparse = SigmaTable::new(vec![e(1.0, 0.0), e(d, d), e(0.0, 1.0)]).unwrap();
        assert!(matches!(sparse.sigma_at(&[-1.0, 0.0]), Err(Error::OutsideTable(_))));
        let t10 = 10f64.to_radians();
        assert!(sparse.sigma_at(&[t10.cos(), t10.sin()]).is_ok());
        assert!(SigmaTable::new(vec![e(1.0, 0.0), e(1.0, 0.0)]).is_err());
    }

    #[test]
    fn convexity_examples() {
        assert!(convexity_check(&SigmaTable::isotropic(2.0, 16).unwrap()).is_empty());
        let d = std::f64::consts::FRAC_1_SQRT_2;
        let s = 2f64.sqrt() * 1.01;
        let t = SigmaTable::new(vec![
            SigmaEntry { nu: vec![1.0, 0.0], sigma: 1.0, err: 0.0 },
            SigmaEntry { nu: vec![0.0, 1.0], sigma: 1.0, err: 0.0 },
            SigmaEntry { nu: vec![d, d], sigma: s, err: 0.0 },
        ])
        .unwrap();
        let v = convexity_check(&t);
        assert_eq!(v.len(), 1);
        assert_relative_eq!(v[0].lhs, 2.02, epsilon = 1e-12);
    }

    #[test]
    fn approximation_of_square_is_exact() {
        let p = polygonal_approximation(&square(2.0), 1e-3).unwrap();
        assert_eq!(p.vertices.as_ref().unwrap(), &square(2.0));
        assert!(p.facets.iter().all(|f| f.exact.is_some()));
        assert!(polygonal_approximation(&[[0.0, 0.0], [1.0, 0.0]], 1e-2).is_err());
    }

    #[test]
    fn approximation_of_circle() {
        let p = polygonal_approximation(&regular_polygon(64, 1.0), 1e-2).unwrap();
        assert!((p.perimeter() - 2.0 * PI).abs() <= 0.01 * 2.0 * PI);
        assert!(p.closure_defect() <= 1e-10);
        for f in &p.facets {
            let e = f.exact.as_ref().unwrap();
            assert_eq!(e.to_f64(), f.normal);
        }
    }

    #[test]
    fn self_intersection_is_rejected() {
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(PolyInterface::from_vertices(&bow), Err(Error::SelfIntersection(_, _))));
    }

    #[test]
    fn interface_comparisons() {
        let iso = SigmaTable::isotropic(1.0, 64).unwrap();
        let circle = PolyInterface::from_vertices(&regular_polygon(16, 1.0)).unwrap();
        let side = circle.area().unwrap().sqrt();
        let sq = PolyInterface::from_vertices(&square(side)).unwrap();
        let c = compare_interfaces(&sq, &circle, &iso).unwrap();
        assert_eq!(c.smaller, Smaller::Second);
        assert_eq!(compare_interfaces(&sq, &sq, &iso).unwrap().smaller, Smaller::Equal);
        // cheap axis directions and expensive diagonals favour the square
        let aniso = SigmaTable::new(
            (0..16)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / 16.0;
                    SigmaEntry { nu: vec![t.cos(), t.sin()], sigma: if k % 4 == 0 { 1.0 } else { 3.0 }, err: 0.0 }
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(compare_interfaces(&sq, &circle, &aniso).unwrap().smaller, Smaller::First);
        // rescaling the table keeps the ordering
        let c3 = compare_interfaces(&sq, &circle, &scaled_table(&aniso, 3.0)).unwrap();
        assert_eq!(c3.smaller, Smaller::First);
        assert_relative_eq!(c3.f0_first, 3.0 * eval_f0(&sq, &aniso).unwrap(), epsilon = 1e-12);
    }

    fn scaled_table(t: &SigmaTable, c: f64) -> SigmaTable {
        SigmaTable::new(t.entries().iter().map(|e| SigmaEntry { sigma: c * e.sigma, ..e.clone() }).collect()).unwrap()
    }

    #[test]
    fn dilation_scales_energy() {
        let iso = SigmaTable::isotropic(1.3, 16).unwrap();
        let p = PolyInterface::from_vertices(&regular_polygon(16, 1.0)).unwrap();
        assert_relative_eq!(eval_f0(&p.scaled(2.5), &iso).unwrap(), 2.5 * eval_f0(&p, &iso).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn vertex_text_roundtrip() {
        let v = regular_polygon(5, 1.5);
        let back = parse_vertices(&format!("# pentagon\n{}\n", format_vertices(&v))).unwrap();
        assert_eq!(back, v);
        assert!(parse_vertices("1,2,3").is_err());
    }
}
