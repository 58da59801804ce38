//! Points of the Riemann sphere, Möbius maps and generalized circles.
//!
//! All distances between sphere points are chordal, so the point at infinity
//! needs no special casing in comparisons. Maps are stored as determinant-one
//! matrices with a canonical sign, which makes structural equality stable.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

pub type Complex = Complex64;

/// Default tolerance for chordal comparisons and classification.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Circles with a larger radius are stored as lines.
pub const LINE_RADIUS_CUTOFF: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoebiusError {
    #[error("matrix is singular (ad - bc = 0)")]
    Singular,
    #[error("homogeneous coordinates are both zero")]
    ZeroPoint,
    #[error("map is the identity and has no isolated fixed points")]
    IsIdentity,
    #[error("trace squared {trace_sq} lies within tolerance of a class boundary")]
    AmbiguousClassification { trace_sq: Complex },
    #[error("circle pairing in fuchsian mode requires real centers")]
    NonRealCenters,
    #[error("image circle is degenerate")]
    DegenerateImage,
    #[error("invalid circle: {0}")]
    InvalidCircle(String),
}

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

/// A point of the Riemann sphere in homogeneous coordinates.
///
/// The stored representative always has its larger-modulus coordinate equal
/// to one; infinity is `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    z1: Complex,
    z2: Complex,
}

impl SpherePoint {
    pub const INFINITY: SpherePoint = SpherePoint {
        z1: Complex { re: 1.0, im: 0.0 },
        z2: Complex { re: 0.0, im: 0.0 },
    };

    pub fn new(z1: Complex, z2: Complex) -> Result<Self, MoebiusError> {
        if z1.norm() == 0.0 && z2.norm() == 0.0 {
            return Err(MoebiusError::ZeroPoint);
        }
        if !(z1.is_finite() && z2.is_finite()) {
            return Ok(Self::INFINITY);
        }
        Ok(Self::canonical(z1, z2))
    }

    fn canonical(z1: Complex, z2: Complex) -> Self {
        if z2.norm() >= z1.norm() {
            SpherePoint { z1: z1 / z2, z2: c(1.0, 0.0) }
        } else {
            SpherePoint { z1: c(1.0, 0.0), z2: z2 / z1 }
        }
    }

    pub fn finite(z: Complex) -> Self {
        if !z.is_finite() {
            return Self::INFINITY;
        }
        Self::canonical(z, c(1.0, 0.0))
    }

    pub fn from_real(x: f64) -> Self {
        Self::finite(c(x, 0.0))
    }

    pub fn coords(&self) -> (Complex, Complex) {
        (self.z1, self.z2)
    }

    pub fn is_infinity(&self) -> bool {
        self.z2.norm() == 0.0
    }

    /// Affine coordinate, `None` at infinity.
    pub fn to_complex(&self) -> Option<Complex> {
        if self.is_infinity() {
            None
        } else {
            Some(self.z1 / self.z2)
        }
    }

    /// Chordal distance on the sphere of diameter 2 (values in `[0, 2]`).
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        let num = (self.z1 * other.z2 - self.z2 * other.z1).norm();
        let den = (self.z1.norm_sqr() + self.z2.norm_sqr()).sqrt()
            * (other.z1.norm_sqr() + other.z2.norm_sqr()).sqrt();
        2.0 * num / den
    }

    pub fn approx_eq(&self, other: &SpherePoint, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }
}

impl From<Complex> for SpherePoint {
    fn from(z: Complex) -> Self {
        SpherePoint::finite(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_complex() {
            None => write!(f, "inf"),
            Some(z) => write!(f, "{:.9}{:+.9}i", z.re, z.im),
        }
    }
}

/// Dynamical type of a Möbius map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapClass {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

/// Element of PSL(2, C): a determinant-one matrix up to sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    a: Complex,
    b: Complex,
    c: Complex,
    d: Complex,
}

impl MoebiusMap {
    pub fn identity() -> Self {
        MoebiusMap { a: c(1.0, 0.0), b: c(0.0, 0.0), c: c(0.0, 0.0), d: c(1.0, 0.0) }
    }

    /// Builds `z -> (a z + b) / (c z + d)`, rescaled to determinant one.
    pub fn new(a: Complex, b: Complex, cc: Complex, d: Complex) -> Result<Self, MoebiusError> {
        let det = a * d - b * cc;
        let scale = a.norm().max(b.norm()).max(cc.norm()).max(d.norm());
        if scale == 0.0 || det.norm() <= 1e-300 || det.norm() <= (scale * scale) * 1e-15 {
            return Err(MoebiusError::Singular);
        }
        let s = det.sqrt();
        Ok(Self::with_sign_rule(a / s, b / s, cc / s, d / s))
    }

    pub fn from_real(a: f64, b: f64, cc: f64, d: f64) -> Result<Self, MoebiusError> {
        Self::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0))
    }

    pub fn scaling(k: Complex) -> Result<Self, MoebiusError> {
        Self::new(k, c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
    }

    pub fn translation(t: Complex) -> Self {
        Self::with_sign_rule(c(1.0, 0.0), t, c(0.0, 0.0), c(1.0, 0.0))
    }

    // First entry (in a, b, c, d order) that is not negligible gets an
    // argument in (-pi/2, pi/2].
    fn with_sign_rule(a: Complex, b: Complex, cc: Complex, d: Complex) -> Self {
        let scale = a.norm().max(b.norm()).max(cc.norm()).max(d.norm());
        let lead = [a, b, cc, d]
            .into_iter()
            .find(|x| x.norm() > 1e-12 * scale)
            .unwrap_or(a);
        let flip = lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0);
        if flip {
            MoebiusMap { a: -a, b: -b, c: -cc, d: -d }
        } else {
            MoebiusMap { a, b, c: cc, d }
        }
    }

    pub fn entries(&self) -> [Complex; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Self::with_sign_rule(self.d, -self.b, -self.c, self.a)
    }

    /// Matrix product `self * other`, i.e. apply `other` first.
    pub fn compose(&self, other: &MoebiusMap) -> Self {
        let a = self.a * other.a + self.b * other.c;
        let b = self.a * other.b + self.b * other.d;
        let cc = self.c * other.a + self.d * other.c;
        let d = self.c * other.b + self.d * other.d;
        // Renormalize against drift; det is 1 up to rounding.
        let s = (a * d - b * cc).sqrt();
        if s.norm() == 0.0 || !s.is_finite() {
            return Self::with_sign_rule(a, b, cc, d);
        }
        Self::with_sign_rule(a / s, b / s, cc / s, d / s)
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let (z1, z2) = p.coords();
        let w1 = self.a * z1 + self.b * z2;
        let w2 = self.c * z1 + self.d * z2;
        // det = 1 keeps (w1, w2) away from (0, 0).
        SpherePoint::new(w1, w2).unwrap_or(SpherePoint::INFINITY)
    }

    pub fn apply_complex(&self, z: Complex) -> SpherePoint {
        self.apply(&SpherePoint::finite(z))
    }

    /// Entrywise distance to `other`, minimized over the sign ambiguity.
    pub fn distance(&self, other: &MoebiusMap) -> f64 {
        let plus = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let minus = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x + y).norm())
            .fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &MoebiusMap, tol: f64) -> bool {
        self.distance(other) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&MoebiusMap::identity()) <= tol
    }

    /// Classifies by the squared trace `t = (a + d)^2`.
    ///
    /// A value is reported ambiguous when one of the deciding quantities sits
    /// between `tol / 2` and `2 tol`, where halving or doubling the tolerance
    /// would change the answer.
    pub fn classify(&self, tol: f64) -> Result<MapClass, MoebiusError> {
        let t = self.trace() * self.trace();
        let near = |q: f64| q > 0.5 * tol && q < 2.0 * tol;
        let q_id = self.distance(&MoebiusMap::identity());
        if q_id <= tol {
            if near(q_id) {
                return Err(MoebiusError::AmbiguousClassification { trace_sq: t });
            }
            return Ok(MapClass::Identity);
        }
        let q_par = (t - c(4.0, 0.0)).norm();
        let q_seg = distance_to_segment(t);
        if near(q_par) || near(q_seg) || near(q_id) {
            return Err(MoebiusError::AmbiguousClassification { trace_sq: t });
        }
        if q_par <= tol {
            Ok(MapClass::Parabolic)
        } else if q_seg <= tol {
            Ok(MapClass::Elliptic)
        } else {
            Ok(MapClass::Loxodromic)
        }
    }

    /// Fixed points as roots of `c z^2 + (d - a) z - b = 0`.
    ///
    /// A parabolic map reports its single fixed point twice.
    pub fn fixed_points(&self) -> Result<(SpherePoint, SpherePoint), MoebiusError> {
        if self.is_identity(1e-14) {
            return Err(MoebiusError::IsIdentity);
        }
        let (a, b, cc, d) = (self.a, self.b, self.c, self.d);
        let scale = a.norm().max(b.norm()).max(cc.norm()).max(d.norm());
        // Homogeneous form: c x^2 + (d - a) x y - b y^2 = 0.
        let disc = ((a - d) * (a - d) + 4.0 * b * cc).sqrt();
        if cc.norm() <= 1e-15 * scale {
            // Infinity is fixed; the other root solves (d - a) z = b.
            let other = SpherePoint::new(b, d - a).unwrap_or(SpherePoint::INFINITY);
            return Ok((other, SpherePoint::INFINITY));
        }
        let half = a - d;
        // Pick the numerically stable pairing for the two roots.
        let (r1, r2) = if (half + disc).norm() >= (half - disc).norm() {
            let q = half + disc;
            // z1 = q / 2c, z2 = -2b / q  (product of roots is -b/c)
            let z1 = SpherePoint::new(q, 2.0 * cc).unwrap_or(SpherePoint::INFINITY);
            let z2 = SpherePoint::new(-2.0 * b, q).unwrap_or(SpherePoint::INFINITY);
            (z1, z2)
        } else {
            let q = half - disc;
            let z1 = SpherePoint::new(q, 2.0 * cc).unwrap_or(SpherePoint::INFINITY);
            let z2 = SpherePoint::new(-2.0 * b, q).unwrap_or(SpherePoint::INFINITY);
            (z1, z2)
        };
        Ok((r1, r2))
    }

    /// Image of a generalized circle, by transporting three points and
    /// fitting a circle or line through the images.
    pub fn apply_circle(&self, circle: &GeneralizedCircle) -> Result<GeneralizedCircle, MoebiusError> {
        const SAMPLES: usize = 6;
        let pts: Vec<SpherePoint> = (0..SAMPLES)
            .map(|k| circle.point_at(2.0 * PI * k as f64 / SAMPLES as f64))
            .map(|p| self.apply(&p))
            .collect();
        // Choose the triple whose images are best separated on the sphere.
        let mut best = (0, 2, 4);
        let mut best_sep = -1.0;
        for i in 0..SAMPLES {
            for j in i + 1..SAMPLES {
                for k in j + 1..SAMPLES {
                    let sep = pts[i]
                        .chordal_distance(&pts[j])
                        .min(pts[j].chordal_distance(&pts[k]))
                        .min(pts[i].chordal_distance(&pts[k]));
                    if sep > best_sep {
                        best_sep = sep;
                        best = (i, j, k);
                    }
                }
            }
        }
        if best_sep <= 1e-14 {
            return Err(MoebiusError::DegenerateImage);
        }
        GeneralizedCircle::through(&pts[best.0], &pts[best.1], &pts[best.2])
    }

    /// Pairing map sending `src` onto `dst` and the exterior of `src` into
    /// the interior of `dst`.
    ///
    /// Fuchsian mode uses `(c' z - c c' - r r') / (z - c)`, which has real
    /// entries and positive determinant `r r'`; generic mode uses
    /// `c' + r r' / (z - c)`.
    pub fn from_circle_pairing(
        src: &GeneralizedCircle,
        dst: &GeneralizedCircle,
        fuchsian: bool,
    ) -> Result<Self, MoebiusError> {
        let (GeneralizedCircle::Circle { center: cs, radius: rs }, GeneralizedCircle::Circle { center: cd, radius: rd }) =
            (src, dst)
        else {
            return Err(MoebiusError::InvalidCircle("pairing requires round circles".into()));
        };
        let rr = rs * rd;
        if fuchsian {
            if cs.im.abs() > 1e-12 || cd.im.abs() > 1e-12 {
                return Err(MoebiusError::NonRealCenters);
            }
            Self::new(*cd, -(cs * cd) - rr, c(1.0, 0.0), -cs)
        } else {
            Self::new(*cd, c(rr, 0.0) - cs * cd, c(1.0, 0.0), -cs)
        }
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

fn distance_to_segment(t: Complex) -> f64 {
    let x = t.re.clamp(0.0, 4.0);
    (t - c(x, 0.0)).norm()
}

/// A round circle or a straight line in the plane.
///
/// The line variant is `{ z : Re(conj(normal) z) = offset }` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneralizedCircle {
    Circle { center: Complex, radius: f64 },
    Line { normal: Complex, offset: f64 },
}

impl GeneralizedCircle {
    pub fn circle(center: Complex, radius: f64) -> Result<Self, MoebiusError> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(MoebiusError::InvalidCircle(format!("radius {radius} must be positive")));
        }
        Ok(GeneralizedCircle::Circle { center, radius })
    }

    pub fn line(normal: Complex, offset: f64) -> Result<Self, MoebiusError> {
        let n = normal.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(MoebiusError::InvalidCircle("line normal must be nonzero".into()));
        }
        Ok(GeneralizedCircle::Line { normal: normal / n, offset: offset / n })
    }

    pub fn real_line() -> Self {
        GeneralizedCircle::Line { normal: c(0.0, 1.0), offset: 0.0 }
    }

    pub fn unit_circle() -> Self {
        GeneralizedCircle::Circle { center: c(0.0, 0.0), radius: 1.0 }
    }

    /// Parametrized point; lines are traversed through infinity at `theta = pi`.
    pub fn point_at(&self, theta: f64) -> SpherePoint {
        match *self {
            GeneralizedCircle::Circle { center, radius } => {
                SpherePoint::finite(center + Complex::from_polar(radius, theta))
            }
            GeneralizedCircle::Line { normal, offset } => {
                let half = theta / 2.0;
                if half.cos().abs() < 1e-15 {
                    return SpherePoint::INFINITY;
                }
                let foot = normal * offset;
                let dir = normal * c(0.0, 1.0);
                SpherePoint::finite(foot + dir * half.tan())
            }
        }
    }

    /// The generalized circle through three distinct sphere points.
    pub fn through(p: &SpherePoint, q: &SpherePoint, r: &SpherePoint) -> Result<Self, MoebiusError> {
        let pts = [p, q, r];
        if let Some(i) = pts.iter().position(|x| x.is_infinity()) {
            let rest: Vec<Complex> = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .filter_map(|(_, x)| x.to_complex())
                .collect();
            if rest.len() != 2 {
                return Err(MoebiusError::DegenerateImage);
            }
            return Self::line_through(rest[0], rest[1]);
        }
        let (a, b, cc) = (p.to_complex().unwrap(), q.to_complex().unwrap(), r.to_complex().unwrap());
        let ab = b - a;
        let ac = cc - a;
        let cross = ab.re * ac.im - ab.im * ac.re;
        let size = ab.norm().max(ac.norm());
        if size == 0.0 || (b - cc).norm() == 0.0 {
            return Err(MoebiusError::DegenerateImage);
        }
        if cross.abs() <= 1e-14 * size * size {
            return Self::line_through(a, b);
        }
        // Circumcenter relative to a.
        let d = 2.0 * cross;
        let ux = (ac.im * ab.norm_sqr() - ab.im * ac.norm_sqr()) / d;
        let uy = (ab.re * ac.norm_sqr() - ac.re * ab.norm_sqr()) / d;
        let u = c(ux, uy);
        let radius = u.norm();
        if radius > LINE_RADIUS_CUTOFF {
            return Self::line_through(a, b);
        }
        Self::circle(a + u, radius).map_err(|_| MoebiusError::DegenerateImage)
    }

    fn line_through(a: Complex, b: Complex) -> Result<Self, MoebiusError> {
        let dir = b - a;
        if dir.norm() == 0.0 {
            return Err(MoebiusError::DegenerateImage);
        }
        let normal = dir * c(0.0, -1.0) / dir.norm();
        let offset = (normal.conj() * a).re;
        Ok(GeneralizedCircle::Line { normal, offset })
    }

    /// Signed distance from the curve: negative inside a circle, and on the
    /// side opposite to `normal` for a line.
    pub fn signed_distance(&self, z: Complex) -> f64 {
        match *self {
            GeneralizedCircle::Circle { center, radius } => (z - center).norm() - radius,
            GeneralizedCircle::Line { normal, offset } => (normal.conj() * z).re - offset,
        }
    }

    pub fn contains_closed(&self, p: &SpherePoint, tol: f64) -> bool {
        match (self, p.to_complex()) {
            (GeneralizedCircle::Circle { .. }, None) => false,
            (GeneralizedCircle::Line { .. }, None) => true,
            (_, Some(z)) => self.signed_distance(z) <= tol,
        }
    }

    pub fn center_radius(&self) -> Option<(Complex, f64)> {
        match *self {
            GeneralizedCircle::Circle { center, radius } => Some((center, radius)),
            GeneralizedCircle::Line { .. } => None,
        }
    }

    /// Largest chordal distance from any of `samples` points on `self` to `other`.
    pub fn chordal_gap_to(&self, other: &GeneralizedCircle, samples: usize) -> f64 {
        (0..samples)
            .map(|k| self.point_at(2.0 * PI * (k as f64 + 0.5) / samples as f64))
            .map(|p| other.chordal_distance_from(&p))
            .fold(0.0, f64::max)
    }

    /// Chordal distance from a sphere point to the nearest point of the curve.
    pub fn chordal_distance_from(&self, p: &SpherePoint) -> f64 {
        let foot = match (*self, p.to_complex()) {
            (GeneralizedCircle::Circle { center, radius }, Some(z)) => {
                let v = z - center;
                if v.norm() == 0.0 {
                    SpherePoint::finite(center + radius)
                } else {
                    SpherePoint::finite(center + v * (radius / v.norm()))
                }
            }
            (GeneralizedCircle::Circle { center, radius }, None) => {
                // Closest point to infinity is the one of largest modulus.
                let dir = if center.norm() == 0.0 { c(1.0, 0.0) } else { center / center.norm() };
                SpherePoint::finite(center + dir * radius)
            }
            (GeneralizedCircle::Line { .. }, None) => return 0.0,
            (GeneralizedCircle::Line { normal, offset }, Some(z)) => {
                let s = (normal.conj() * z).re - offset;
                SpherePoint::finite(z - normal * s)
            }
        };
        p.chordal_distance(&foot)
    }
}

impl fmt::Display for GeneralizedCircle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneralizedCircle::Circle { center, radius } => {
                write!(f, "C({:.9}{:+.9}i, r={:.9})", center.re, center.im, radius)
            }
            GeneralizedCircle::Line { normal, offset } => {
                write!(f, "L(n={:.9}{:+.9}i, off={:.9})", normal.re, normal.im, offset)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m23() -> MoebiusMap {
        MoebiusMap::from_real(2.0, 3.0, 1.0, 2.0).unwrap()
    }

    fn circ(x: f64, y: f64, r: f64) -> GeneralizedCircle {
        GeneralizedCircle::circle(c(x, y), r).unwrap()
    }

    #[test]
    fn sphere_point_canonical_form() {
        let p = SpherePoint::new(c(4.0, 0.0), c(2.0, 0.0)).unwrap();
        assert_eq!(p.coords(), (c(1.0, 0.0), c(0.5, 0.0)));
        let q = SpherePoint::new(p.coords().0, p.coords().1).unwrap();
        assert_eq!(p, q);
        assert_eq!(SpherePoint::new(c(3.0, 1.0), c(0.0, 0.0)).unwrap(), SpherePoint::INFINITY);
        assert_eq!(SpherePoint::new(c(0.0, 0.0), c(0.0, 0.0)), Err(MoebiusError::ZeroPoint));
    }

    #[test]
    fn apply_examples() {
        let id = MoebiusMap::identity();
        assert!(id.apply_complex(c(5.0, 0.0)).approx_eq(&SpherePoint::from_real(5.0), 1e-15));
        assert!(m23().apply(&SpherePoint::INFINITY).approx_eq(&SpherePoint::from_real(2.0), 1e-15));
        let s3 = SpherePoint::from_real(3f64.sqrt());
        assert!(m23().apply(&s3).approx_eq(&s3, 1e-14));
    }

    #[test]
    fn compose_examples() {
        let m = m23();
        assert!(m.compose(&MoebiusMap::identity()).approx_eq(&m, 1e-15));
        assert!(m.compose(&m.inverse()).is_identity(1e-14));
        let double = MoebiusMap::scaling(c(2.0, 0.0)).unwrap();
        let shift = MoebiusMap::translation(c(1.0, 0.0));
        let expect = MoebiusMap::from_real(2.0, 2.0, 0.0, 1.0).unwrap();
        assert!(double.compose(&shift).approx_eq(&expect, 1e-15));
    }

    #[test]
    fn sign_rule_is_canonical() {
        let m = MoebiusMap::from_real(-2.0, -13.0, 1.0, 6.0).unwrap();
        let n = MoebiusMap::from_real(2.0, 13.0, -1.0, -6.0).unwrap();
        assert_eq!(m, n);
        assert!(m.entries()[0].re > 0.0);
        assert!((m.det() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(MoebiusMap::identity().classify(DEFAULT_TOL), Ok(MapClass::Identity));
        // tr^2 = 16 lies outside [0, 4].
        assert_eq!(m23().classify(DEFAULT_TOL), Ok(MapClass::Loxodromic));
        let rot = MoebiusMap::new(
            Complex::from_polar(1.0, PI / 6.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            Complex::from_polar(1.0, -PI / 6.0),
        )
        .unwrap();
        assert_eq!(rot.classify(DEFAULT_TOL), Ok(MapClass::Elliptic));
        assert_eq!(MoebiusMap::translation(c(1.0, 0.0)).classify(DEFAULT_TOL), Ok(MapClass::Parabolic));
    }

    #[test]
    fn classify_flags_boundary_cases() {
        // tr = 2 + 1e-9 gives tr^2 - 4 ~ 4e-9, inside the (tol/2, 2 tol) band for tol = 3e-9.
        let eps = 1e-9;
        let t = 2.0 + eps;
        let a = t / 2.0;
        let m = MoebiusMap::from_real(a, 1.0, a * a - 1.0, a).unwrap();
        assert!(matches!(m.classify(3e-9), Err(MoebiusError::AmbiguousClassification { .. })));
        assert_eq!(m.classify(1e-12), Ok(MapClass::Loxodromic));
    }

    #[test]
    fn fixed_point_examples() {
        let (p, q) = MoebiusMap::scaling(c(2.0, 0.0)).unwrap().fixed_points().unwrap();
        assert!(p.approx_eq(&SpherePoint::from_real(0.0), 1e-15));
        assert!(q.is_infinity());
        let (p, q) = m23().fixed_points().unwrap();
        let s = 3f64.sqrt();
        let mut xs = [p.to_complex().unwrap().re, q.to_complex().unwrap().re];
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + s).abs() < 1e-14 && (xs[1] - s).abs() < 1e-14);
        let (p, q) = MoebiusMap::translation(c(1.0, 0.0)).fixed_points().unwrap();
        assert!(p.is_infinity() && q.is_infinity());
        assert_eq!(MoebiusMap::identity().fixed_points(), Err(MoebiusError::IsIdentity));
    }

    #[test]
    fn apply_circle_examples() {
        let unit = GeneralizedCircle::unit_circle();
        let img = MoebiusMap::identity().apply_circle(&unit).unwrap();
        let (cc, r) = img.center_radius().unwrap();
        assert!(cc.norm() < 1e-12 && (r - 1.0).abs() < 1e-12);

        // 1/z sends |z - 3| = 1 to |w - 3/8| = 1/8.
        let inv = MoebiusMap::from_real(0.0, 1.0, 1.0, 0.0).unwrap();
        let img = inv.apply_circle(&circ(3.0, 0.0, 1.0)).unwrap();
        let (cc, r) = img.center_radius().unwrap();
        assert!((cc - c(0.375, 0.0)).norm() < 1e-12);
        assert!((r - 0.125).abs() < 1e-12);

        let img = MoebiusMap::scaling(c(2.0, 0.0)).unwrap().apply_circle(&GeneralizedCircle::real_line()).unwrap();
        match img {
            GeneralizedCircle::Line { normal, offset } => {
                assert!(normal.re.abs() < 1e-12 && offset.abs() < 1e-12);
            }
            other => panic!("expected a line, got {other}"),
        }
    }

    #[test]
    fn circle_through_pole_becomes_line() {
        // 1/z maps the circle |z - 1| = 1 (through 0) to the line Re w = 1/2.
        let inv = MoebiusMap::from_real(0.0, 1.0, 1.0, 0.0).unwrap();
        let img = inv.apply_circle(&circ(1.0, 0.0, 1.0)).unwrap();
        match img {
            GeneralizedCircle::Line { normal, offset } => {
                assert!((normal.re.abs() - 1.0).abs() < 1e-9);
                assert!((offset.abs() - 0.5).abs() < 1e-9);
            }
            other => panic!("expected a line, got {other}"),
        }
    }

    #[test]
    fn circle_pairing_examples() {
        let g = MoebiusMap::from_circle_pairing(&circ(-2.0, 0.0, 1.0), &circ(2.0, 0.0, 1.0), true).unwrap();
        assert!(g.approx_eq(&m23(), 1e-14));

        let unit = GeneralizedCircle::unit_circle();
        let generic = MoebiusMap::from_circle_pairing(&unit, &unit, false).unwrap();
        let recip = MoebiusMap::from_real(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(generic.approx_eq(&recip, 1e-14));
        let fuchsian = MoebiusMap::from_circle_pairing(&unit, &unit, true).unwrap();
        let neg_recip = MoebiusMap::from_real(0.0, -1.0, 1.0, 0.0).unwrap();
        assert!(fuchsian.approx_eq(&neg_recip, 1e-14));

        let g = MoebiusMap::from_circle_pairing(&circ(-6.0, 0.0, 1.0), &circ(-2.0, 0.0, 1.0), true).unwrap();
        let expect = MoebiusMap::from_real(-2.0, -13.0, 1.0, 6.0).unwrap();
        assert!(g.approx_eq(&expect, 1e-14));
        assert!((g.det() - c(1.0, 0.0)).norm() < 1e-14);

        let err = MoebiusMap::from_circle_pairing(&circ(0.0, 1.0, 0.5), &circ(3.0, 0.0, 1.0), true);
        assert_eq!(err, Err(MoebiusError::NonRealCenters));
    }

    #[test]
    fn pairing_sends_far_points_inside_dst() {
        for fuchsian in [true, false] {
            let src = circ(-6.0, 0.0, 1.0);
            let dst = circ(-2.0, 0.0, 1.0);
            let g = MoebiusMap::from_circle_pairing(&src, &dst, fuchsian).unwrap();
            for z in [c(40.0, 0.0), c(-6.0, 5.0), c(0.0, -30.0)] {
                let w = g.apply_complex(z).to_complex().unwrap();
                assert!(dst.signed_distance(w) < 0.0);
            }
            let img = g.apply_circle(&src).unwrap();
            assert!(img.chordal_gap_to(&dst, 32) < 1e-12);
        }
    }

    fn arb_complex(r: f64) -> impl Strategy<Value = Complex> {
        (-r..r, -r..r).prop_map(|(x, y)| c(x, y))
    }

    fn arb_map() -> impl Strategy<Value = MoebiusMap> {
        (arb_complex(3.0), arb_complex(3.0), arb_complex(3.0), arb_complex(3.0))
            .prop_filter_map("singular", |(a, b, cc, d)| {
                let det = a * d - b * cc;
                if det.norm() < 0.1 {
                    None
                } else {
                    MoebiusMap::new(a, b, cc, d).ok()
                }
            })
    }

    proptest! {
        #[test]
        fn inverse_round_trip(m in arb_map(), z in arb_complex(50.0)) {
            let p = SpherePoint::finite(z);
            let back = m.inverse().apply(&m.apply(&p));
            prop_assert!(back.chordal_distance(&p) < 1e-9);
            prop_assert!((m.det() - c(1.0, 0.0)).norm() < 1e-9);
        }

        #[test]
        fn classify_conjugation_invariant(m in arb_map(), gs in prop::collection::vec(arb_map(), 100)) {
            let tol = 1e-8;
            if let Ok(class) = m.classify(tol) {
                for g in &gs {
                    let conj = g.compose(&m).compose(&g.inverse());
                    match conj.classify(tol) {
                        Ok(other) => prop_assert_eq!(other, class),
                        // Rounding can push a conjugate into the ambiguity band; that
                        // is reported, never misclassified.
                        Err(MoebiusError::AmbiguousClassification { .. }) => {}
                        Err(e) => prop_assert!(false, "unexpected {e}"),
                    }
                }
            }
        }

        #[test]
        fn apply_circle_agrees_with_pointwise(m in arb_map(), center in arb_complex(4.0), r in 0.1f64..3.0) {
            let circle = circ(center.re, center.im, r);
            let img = m.apply_circle(&circle).unwrap();
            for k in 0..1000 {
                let p = circle.point_at(2.0 * PI * k as f64 / 1000.0 + 0.1234);
                let q = m.apply(&p);
                prop_assert!(img.chordal_distance_from(&q) < 1e-8, "k={} dist={}", k, img.chordal_distance_from(&q));
            }
        }
    }
}
