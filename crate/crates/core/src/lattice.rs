//! Exact rational directions and rotations.
//!
//! A rotation `R` with rational entries and `R e_N = nu` carries an integer
//! period `lambda` (the lcm of its denominators) such that every column of
//! `lambda R` is an integer vector. For a Q-periodic potential this makes
//! `x -> W(x, p)` periodic along the rotated axes with period `lambda`.

use num::integer::Integer;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::potential::Potential;

pub type Rational = BigRational;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3/5"`, `"-4"` or `"0.25"` (finite decimals only) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse rational `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if neg {
            n = -n;
        }
        let d = num::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// A point of `Q^N ∩ S^{N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalUnitVector {
    components: Vec<Rational>,
}

impl RationalUnitVector {
    /// Checks `sum c_i^2 = 1` exactly.
    pub fn new(components: Vec<Rational>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("empty direction".into()));
        }
        let norm2: Rational = components.iter().map(|c| c * c).sum();
        if !norm2.is_one() {
            return Err(Error::InvalidArgument(format!(
                "direction is not a unit vector: squared norm {norm2}"
            )));
        }
        Ok(Self { components })
    }

    /// Parses a comma-separated list such as `"3/5,4/5"`.
    pub fn parse(s: &str) -> Result<Self> {
        let comps = s.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// The unit vector `e_k` in dimension `n`.
    pub fn axis(n: usize, k: usize) -> Self {
        let components = (0..n)
            .map(|i| if i == k { Rational::one() } else { Rational::zero() })
            .collect();
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Rational] {
        &self.components
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.components.iter().map(to_f64).collect()
    }

    /// Least common denominator of the components.
    pub fn common_denominator(&self) -> BigInt {
        self.components.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    pub fn neg(&self) -> Self {
        Self { components: self.components.iter().map(|c| -c).collect() }
    }
}

impl std::fmt::Display for RationalUnitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Inverse stereographic projection of `t in Q^{N-1}` from the pole `-e_N`
/// (`north = false`) or `+e_N` (`north = true`).
fn inverse_stereographic(t: &[Rational], north: bool) -> Vec<Rational> {
    let t2: Rational = t.iter().map(|v| v * v).sum();
    let denom = Rational::one() + &t2;
    let two = rat(2, 1);
    let mut out: Vec<Rational> = t.iter().map(|v| &two * v / &denom).collect();
    let last = if north { (&t2 - Rational::one()) / &denom } else { (Rational::one() - &t2) / &denom };
    out.push(last);
    out
}

fn inverse_stereographic_f64(t: &[f64], north: bool) -> Vec<f64> {
    let t2: f64 = t.iter().map(|v| v * v).sum();
    let denom = 1.0 + t2;
    let mut out: Vec<f64> = t.iter().map(|v| 2.0 * v / denom).collect();
    out.push(if north { (t2 - 1.0) / denom } else { (1.0 - t2) / denom });
    out
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Finds `mu in Q^N ∩ S^{N-1}` with `|mu - nu| <= tol`.
///
/// Candidates are inverse stereographic images of `round(q t)/q`, where
/// `t` is the stereographic coordinate of `nu`, for `q = 1, 2, ...` up to
/// the mesh `1/q <= tol/4`. Among the hits with `q` at most twice the first
/// one, the candidate with the smallest common denominator wins.
pub fn rationalize_direction(nu: &[f64], tol: f64) -> Result<RationalUnitVector> {
    if !(tol >= 1e-9) {
        return Err(Error::ToleranceTooSmall(tol));
    }
    if nu.len() < 2 {
        return Err(Error::InvalidArgument("direction must have at least two components".into()));
    }
    let n2: f64 = nu.iter().map(|v| v * v).sum();
    if (n2.sqrt() - 1.0).abs() > 1e-12 || nu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("direction {nu:?} is not a unit vector")));
    }
    let n = nu.len();
    let north = nu[n - 1] < 0.0;
    let scale = if north { 1.0 - nu[n - 1] } else { 1.0 + nu[n - 1] };
    let t: Vec<f64> = nu[..n - 1].iter().map(|v| v / scale).collect();

    let q_max = (4.0 / tol).ceil() as u64;
    let mut best: Option<(BigInt, f64, RationalUnitVector)> = None;
    let mut first_hit: Option<u64> = None;
    let mut cand = vec![0.0; n - 1];
    for q in 1..=q_max {
        if let Some(f) = first_hit {
            if q > 2 * f {
                break;
            }
        }
        let qf = q as f64;
        for (c, v) in cand.iter_mut().zip(&t) {
            *c = (v * qf).round() / qf;
        }
        let mu = inverse_stereographic_f64(&cand, north);
        let d = dist(&mu, nu);
        // a margin keeps the exact check below from disagreeing with rounding here
        if d > tol * (1.0 - 1e-12) {
            continue;
        }
        let t_exact: Vec<Rational> = t.iter().map(|v| rat((v * qf).round() as i64, q as i64)).collect();
        let exact = RationalUnitVector { components: inverse_stereographic(&t_exact, north) };
        let den = exact.common_denominator();
        first_hit.get_or_insert(q);
        let better = match &best {
            None => true,
            Some((bd, bdist, _)) => den < *bd || (den == *bd && d < *bdist),
        };
        if better {
            best = Some((den, d, exact));
        }
    }
    best.map(|(_, _, v)| v)
        .ok_or_else(|| Error::InvalidArgument(format!("no rational direction within {tol:e} of {nu:?}")))
}

/// Exact rational rotation together with its lattice period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalRotation {
    /// Row-major `N x N` entries.
    matrix: Vec<Vec<Rational>>,
    period: BigInt,
}

impl RationalRotation {
    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        Self { matrix, period: BigInt::one() }
    }

    /// Accepts a square matrix only if it is exactly orthogonal with determinant 1.
    pub fn from_matrix(matrix: Vec<Vec<Rational>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("rotation must be a nonempty square matrix".into()));
        }
        if !is_orthogonal(&matrix) {
            return Err(Error::InvalidArgument("matrix is not orthogonal".into()));
        }
        if !determinant(&matrix).is_one() {
            return Err(Error::InvalidArgument("matrix does not have determinant 1".into()));
        }
        let period = denominator_lcm(&matrix);
        Ok(Self { matrix, period })
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.matrix
    }

    pub fn period(&self) -> &BigInt {
        &self.period
    }

    /// The period as a machine integer, if it fits.
    pub fn period_u64(&self) -> Option<u64> {
        self.period.to_u64()
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.matrix.iter().map(|r| r.iter().map(to_f64).collect()).collect()
    }

    /// Column `i`, i.e. `R e_i`.
    pub fn column(&self, i: usize) -> Vec<Rational> {
        self.matrix.iter().map(|r| r[i].clone()).collect()
    }

    /// The integer vectors `lambda R e_i`, converted to floating point.
    pub fn lattice_shifts(&self) -> Vec<Vec<f64>> {
        let lam = Rational::from_integer(self.period.clone());
        (0..self.dim())
            .map(|i| self.column(i).iter().map(|c| to_f64(&(c * &lam))).collect())
            .collect()
    }

    pub fn mul(&self, other: &RationalRotation) -> RationalRotation {
        let prod = matmul(&self.matrix, &other.matrix);
        let period = denominator_lcm(&prod);
        RationalRotation { matrix: prod, period }
    }

    pub fn transpose(&self) -> RationalRotation {
        RationalRotation { matrix: transpose(&self.matrix), period: self.period.clone() }
    }
}

fn matmul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| &a[i][k] * &b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    (0..a[0].len()).map(|j| (0..n).map(|i| a[i][j].clone()).collect()).collect()
}

fn denominator_lcm(a: &[Vec<Rational>]) -> BigInt {
    a.iter().flatten().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

/// `A^T A == I` exactly.
pub fn is_orthogonal(a: &[Vec<Rational>]) -> bool {
    let p = matmul(&transpose(a), a);
    p.iter()
        .enumerate()
        .all(|(i, r)| r.iter().enumerate().all(|(j, v)| if i == j { v.is_one() } else { v.is_zero() }))
}

/// Exact determinant by fraction-valued Gaussian elimination.
pub fn determinant(a: &[Vec<Rational>]) -> Rational {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Rational::zero();
        };
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            for c in col..n {
                let v = &f * &m[col][c];
                m[r][c] -= v;
            }
        }
    }
    det
}

/// Rotation with `R e_N = nu`, built as a Householder reflection through
/// `w = e_N - nu` composed with the reflection `x_1 -> -x_1` (which fixes
/// `e_N`), so that `det R = +1`.
pub fn rotation_from_direction(nu: &RationalUnitVector) -> RationalRotation {
    let n = nu.dim();
    let e_n = RationalUnitVector::axis(n, n - 1);
    if *nu == e_n {
        return RationalRotation::identity(n);
    }
    if n == 1 {
        // the only unit vectors are ±1 and there is no proper rotation onto -1
        return RationalRotation::identity(1);
    }
    let w: Vec<Rational> = (0..n).map(|i| &e_n.components[i] - &nu.components[i]).collect();
    let w2: Rational = w.iter().map(|v| v * v).sum();
    let two = rat(2, 1);
    let matrix: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let delta = if i == j { Rational::one() } else { Rational::zero() };
                    let h = delta - &two * &w[i] * &w[j] / &w2;
                    if j == 0 {
                        -h
                    } else {
                        h
                    }
                })
                .collect()
        })
        .collect();
    let period = denominator_lcm(&matrix);
    RationalRotation { matrix, period }
}

/// Smallest positive integer `lambda` with `lambda R` integral.
pub fn lattice_period(r: &RationalRotation) -> BigInt {
    denominator_lcm(&r.matrix)
}

/// Outcome of a sampled periodicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityReport {
    pub passed: bool,
    pub samples: usize,
    /// First violating `(x, p, i)`.
    pub violation: Option<(Vec<f64>, Vec<f64>, usize)>,
}

/// Checks `W(x + shift_i, p) == W(x, p)` on random `(x, p, i)`.
///
/// Piecewise kinds are compared bit-for-bit; smooth kinds to 1e-12 relative.
pub fn check_periodicity(pot: &Potential, shifts: &[Vec<f64>], samples: usize, seed: u64) -> PeriodicityReport {
    let Some(n) = shifts.first().map(|s| s.len()) else {
        return PeriodicityReport { passed: true, samples: 0, violation: None };
    };
    let d = pot.phase_dim();
    let exact = pot.modulation().is_piecewise();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut xs = vec![0.0; n];
    let mut p = vec![0.0; d];
    for _ in 0..samples {
        x.iter_mut().for_each(|v| *v = rng.gen_range(-3.0..3.0));
        p.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
        let i = rng.gen_range(0..shifts.len());
        for k in 0..n {
            xs[k] = x[k] + shifts[i][k];
        }
        let w = pot.eval(&x, &p);
        let ws = pot.eval(&xs, &p);
        let ok = if exact { w == ws } else { (w - ws).abs() <= 1e-12 * w.abs().max(1.0) };
        if !ok {
            return PeriodicityReport { passed: false, samples, violation: Some((x.clone(), p.clone(), i)) };
        }
    }
    PeriodicityReport { passed: true, samples, violation: None }
}

/// Convenience wrapper using `lambda R e_i` as the shifts.
pub fn check_rotation_periodicity(pot: &Potential, r: &RationalRotation, samples: usize, seed: u64) -> PeriodicityReport {
    check_periodicity(pot, &r.lattice_shifts(), samples, seed)
}

/// Exact invariant audit of a rotation built for `nu`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationAudit {
    pub orthogonal: bool,
    pub det_one: bool,
    pub maps_axis_to_nu: bool,
    pub period_integral: bool,
}

impl RotationAudit {
    pub fn passed(&self) -> bool {
        self.orthogonal && self.det_one && self.maps_axis_to_nu && self.period_integral
    }
}

pub fn audit_rotation(r: &RationalRotation, nu: &RationalUnitVector) -> RotationAudit {
    let n = r.dim();
    let lam = Rational::from_integer(r.period.clone());
    RotationAudit {
        orthogonal: is_orthogonal(&r.matrix),
        det_one: determinant(&r.matrix).is_one(),
        maps_axis_to_nu: r.column(n - 1) == nu.components,
        period_integral: r.matrix.iter().flatten().all(|c| (c * &lam).is_integer()) && r.period.is_positive(),
    }
}

/// Rotation of the plane by the angle whose cosine and sine are rational.
pub fn planar_rotation(cos: Rational, sin: Rational) -> Result<RationalRotation> {
    RationalRotation::from_matrix(vec![vec![cos.clone(), -sin.clone()], vec![sin, cos]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        rat(n, d)
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/5").unwrap(), r(3, 5));
        assert_eq!(parse_rational("-0.25").unwrap(), r(-1, 4));
        assert_eq!(parse_rational("2").unwrap(), r(2, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!(RationalUnitVector::parse("1/2,1/2").is_err());
    }

    #[test]
    fn rationalize_exact_inputs() {
        let v = rationalize_direction(&[1.0, 0.0], 1e-3).unwrap();
        assert_eq!(v, RationalUnitVector::axis(2, 0));
        let v = rationalize_direction(&[0.6, 0.8], 1e-6).unwrap();
        assert_eq!(v.components(), &[r(3, 5), r(4, 5)]);
        let v = rationalize_direction(&[0.0, -1.0], 1e-3).unwrap();
        assert_eq!(v.components(), &[r(0, 1), r(-1, 1)]);
    }

    #[test]
    fn rationalize_diagonal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // closest small-denominator points on the circle near the diagonal:
        // (20/29, 21/29) at distance 0.02438 and (120/169, 119/169) at 0.00418
        let v = rationalize_direction(&[s, s], 0.025).unwrap();
        // both orderings are equidistant from the diagonal
        assert_eq!(v.common_denominator(), BigInt::from(29));
        let mut c = v.components().to_vec();
        c.sort();
        assert_eq!(c, vec![r(20, 29), r(21, 29)]);
        let v = rationalize_direction(&[s, s], 0.02).unwrap();
        assert_eq!(v.common_denominator(), BigInt::from(169));
        let d = dist(&v.to_f64(), &[s, s]);
        assert!(d <= 0.02);
    }

    #[test]
    fn rationalize_guard() {
        assert!(matches!(rationalize_direction(&[1.0, 0.0], 1e-10), Err(Error::ToleranceTooSmall(_))));
        assert!(rationalize_direction(&[1.0, 0.1], 1e-3).is_err());
    }

    #[test]
    fn rotation_three_four_five() {
        let nu = RationalUnitVector::parse("3/5,4/5").unwrap();
        let rot = rotation_from_direction(&nu);
        assert_eq!(rot.matrix(), &[vec![r(4, 5), r(3, 5)], vec![r(-3, 5), r(4, 5)]]);
        assert_eq!(*rot.period(), BigInt::from(5));
        assert!(audit_rotation(&rot, &nu).passed());
    }

    #[test]
    fn rotation_identity_cases() {
        let nu = RationalUnitVector::axis(2, 1);
        let rot = rotation_from_direction(&nu);
        assert_eq!(rot, RationalRotation::identity(2));
        assert_eq!(lattice_period(&rot), BigInt::one());
        let down = nu.neg();
        let rot = rotation_from_direction(&down);
        assert!(audit_rotation(&rot, &down).passed());
    }

    #[test]
    fn rotation_in_three_dimensions() {
        let nu = RationalUnitVector::parse("2/3,2/3,1/3").unwrap();
        let rot = rotation_from_direction(&nu);
        assert!(audit_rotation(&rot, &nu).passed());
        // regression value from the exact construction
        let expected = vec![
            vec![r(-1, 3), r(-2, 3), r(2, 3)],
            vec![r(2, 3), r(1, 3), r(2, 3)],
            vec![r(-2, 3), r(2, 3), r(1, 3)],
        ];
        assert_eq!(rot.matrix(), expected.as_slice());
        assert_eq!(*rot.period(), BigInt::from(3));
        assert_eq!((BigInt::from(9) % rot.period()), BigInt::zero());
    }

    #[test]
    fn mixed_denominators_give_lcm() {
        let r3 = rotation_from_direction(&RationalUnitVector::parse("2/3,2/3,1/3").unwrap());
        let r5 = RationalRotation::from_matrix(vec![
            vec![r(3, 5), r(-4, 5), r(0, 1)],
            vec![r(4, 5), r(3, 5), r(0, 1)],
            vec![r(0, 1), r(0, 1), r(1, 1)],
        ])
        .unwrap();
        let prod = r3.mul(&r5);
        assert!(is_orthogonal(prod.matrix()));
        assert!(determinant(prod.matrix()).is_one());
        assert_eq!(lattice_period(&prod), BigInt::from(15));
    }

    #[test]
    fn from_matrix_rejects_non_rotations() {
        let refl = vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(-1, 1)]];
        assert!(RationalRotation::from_matrix(refl).is_err());
        let skew = vec![vec![r(1, 1), r(1, 2)], vec![r(0, 1), r(1, 1)]];
        assert!(RationalRotation::from_matrix(skew).is_err());
    }

    #[test]
    fn checkerboard_periodic_under_rational_rotation() {
        let pot = Potential::checkerboard(2.0).unwrap();
        let rot = rotation_from_direction(&RationalUnitVector::parse("3/5,4/5").unwrap());
        let rep = check_rotation_periodicity(&pot, &rot, 1000, 11);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn float_rotation_breaks_periodicity() {
        let pot = Potential::checkerboard(2.0).unwrap();
        let th: f64 = 1.0;
        let shifts = vec![vec![5.0 * th.cos(), 5.0 * th.sin()], vec![-5.0 * th.sin(), 5.0 * th.cos()]];
        let rep = check_periodicity(&pot, &shifts, 1000, 11);
        assert!(!rep.passed);
        assert!(rep.violation.is_some());
    }

    #[test]
    fn homogeneous_periodic_under_anything() {
        let pot = Potential::homogeneous_quartic();
        let shifts = vec![vec![0.123, 4.5], vec![-2.2, 0.7]];
        assert!(check_periodicity(&pot, &shifts, 200, 1).passed);
    }
}
