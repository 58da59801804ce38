//! Rational maps of the sphere: ramification, loop preimages and
//! essential parts with respect to marked points.
//!
//! Polynomials are coefficient vectors in ascending order. A map `p / q`
//! has degree `max(deg p, deg q)` and is evaluated in homogeneous
//! coordinates, so infinity needs no special case on either side.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::moebius::{Complex, SpherePoint};

/// Coprimality threshold on the normalized resultant.
pub const COPRIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BrancovError {
    #[error("parse error at {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("map is constant")]
    ConstantMap,
    #[error("numerator and denominator share a root (normalized resultant {resultant:e})")]
    NotCoprime { resultant: f64 },
    #[error("degree must be at least 1")]
    InvalidDegree,
    #[error("RootFindingFailure: residual {residual:e}")]
    RootFindingFailure { residual: f64 },
    #[error("BranchValueTooClose: branch value {value} is {distance:e} from the loop")]
    BranchValueTooClose { value: SpherePoint, distance: f64 },
    #[error("MatchingAmbiguous near loop parameter {t}")]
    MatchingAmbiguous { t: f64 },
    #[error("WindingAmbiguous: winding {winding}")]
    WindingAmbiguous { winding: f64 },
    #[error("marked point {0} lies on the loop")]
    MarkedPointOnLoop(SpherePoint),
    #[error("need at least 3 samples, got {0}")]
    InvalidSamples(usize),
}

/// Polynomial with ascending complex coefficients and no zero leading term.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `z`.
    pub fn z() -> Self {
        Self::new(vec![Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)])
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Complex {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Complex) -> Complex {
        self.coeffs.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |a_k| |z|^k`, the scale against which residuals are judged.
    pub fn abs_eval(&self, z: Complex) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    pub fn add(&self, other: &Poly) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or_default();
        Self::new((0..n).map(|k| get(self, k) + get(other, k)).collect())
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn sub(&self, other: &Poly) -> Self {
        self.add(&other.scale(Complex::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Complex::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(Complex::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    /// Coefficients of `h -> self(c + h)`.
    pub fn taylor_at(&self, c: Complex) -> Vec<Complex> {
        let mut a = self.coeffs.clone();
        let n = a.len();
        for i in 0..n {
            for k in (i..n - 1).rev() {
                let next = a[k + 1];
                a[k] += c * next;
            }
        }
        a
    }

    /// Coefficients reversed against degree `d`: `z^d p(1/z)`.
    fn reversed(&self, d: usize) -> Self {
        let mut c = vec![Complex::new(0.0, 0.0); d + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            c[d - k] = a;
        }
        Self::new(c)
    }

    /// Number of vanishing low-order coefficients, relative to the largest.
    fn low_order_zeros(&self, rel: f64) -> usize {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs.iter().take_while(|c| c.norm() <= rel * scale).count()
    }

    /// All complex roots with multiplicity, from the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex>, BrancovError> {
        let Some(n) = self.degree() else {
            return Ok(Vec::new());
        };
        if n == 0 {
            return Ok(Vec::new());
        }
        // Exact zero roots are split off; a nilpotent companion block
        // stalls the QR iteration.
        let zeros = self.coeffs.iter().take_while(|c| **c == Complex::new(0.0, 0.0)).count();
        if zeros > 0 {
            let mut out = vec![Complex::new(0.0, 0.0); zeros];
            out.extend(Poly::new(self.coeffs[zeros..].to_vec()).roots()?);
            return Ok(out);
        }
        let lead = self.leading();
        if n == 1 {
            return Ok(vec![-self.coeffs[0] / lead]);
        }
        let monic: Vec<Complex> = self.coeffs.iter().map(|&c| c / lead).collect();
        let m = DMatrix::<Complex>::from_fn(n, n, |i, j| {
            if j == n - 1 {
                -monic[i]
            } else if i == j + 1 {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let mut roots: Vec<Complex> = match nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000 * n) {
            Some(schur) => {
                let (_, t) = schur.unpack();
                (0..n).map(|i| t[(i, i)]).collect()
            }
            None => self.aberth(&monic)?,
        };
        let dp = self.derivative();
        for r in roots.iter_mut() {
            *r = self.polish(&dp, *r);
        }
        Ok(roots)
    }

    // Simultaneous Aberth iteration, the fallback when QR stalls on a
    // near-Jordan companion matrix.
    fn aberth(&self, monic: &[Complex]) -> Result<Vec<Complex>, BrancovError> {
        let p = Poly::new(monic.to_vec());
        let dp = p.derivative();
        let n = monic.len() - 1;
        // Cauchy bound on the root moduli.
        let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut z: Vec<Complex> = (0..n)
            .map(|k| Complex::from_polar(0.5 * bound, 2.0 * PI * k as f64 / n as f64 + 0.4))
            .collect();
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for k in 0..n {
                let val = p.eval(z[k]);
                if val.norm() == 0.0 {
                    continue;
                }
                let ratio = val / dp.eval(z[k]);
                let repulse: Complex = (0..n).filter(|&j| j != k).map(|j| Complex::new(1.0, 0.0) / (z[k] - z[j])).sum();
                let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulse);
                if step.is_finite() {
                    z[k] -= step;
                    moved = moved.max(step.norm() / z[k].norm().max(1.0));
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(BrancovError::RootFindingFailure { residual: f64::INFINITY });
        }
        Ok(z)
    }

    // Newton steps kept only while they lower the residual.
    fn polish(&self, dp: &Poly, mut z: Complex) -> Complex {
        let mut res = self.eval(z).norm();
        for _ in 0..4 {
            let d = dp.eval(z);
            if d.norm() == 0.0 || res == 0.0 {
                break;
            }
            let next = z - self.eval(z) / d;
            let r2 = self.eval(next).norm();
            if !(r2 < res) {
                break;
            }
            z = next;
            res = r2;
        }
        z
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == Complex::new(0.0, 0.0) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            match k {
                0 => {}
                1 => write!(f, "z")?,
                _ => write!(f, "z^{k}")?,
            }
        }
        Ok(())
    }
}

/// `p / q` with `p`, `q` coprime and not both constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMap {
    num: Poly,
    den: Poly,
}

impl RationalMap {
    pub fn new(num: Poly, den: Poly) -> Result<Self, BrancovError> {
        if den.is_zero() {
            return Err(BrancovError::ZeroDenominator);
        }
        let (dp, dq) = (num.degree().unwrap_or(0), den.degree().unwrap_or(0));
        if dp == 0 && dq == 0 {
            return Err(BrancovError::ConstantMap);
        }
        if num.is_zero() {
            return Err(BrancovError::ConstantMap);
        }
        let res = normalized_resultant(&num, &den);
        if res <= COPRIME_TOL {
            return Err(BrancovError::NotCoprime { resultant: res });
        }
        // Monic denominator keeps the representation canonical.
        let s = Complex::new(1.0, 0.0) / den.leading();
        Ok(RationalMap { num: num.scale(s), den: den.scale(s) })
    }

    pub fn polynomial(p: Poly) -> Result<Self, BrancovError> {
        Self::new(p, Poly::constant(Complex::new(1.0, 0.0)))
    }

    pub fn identity() -> Self {
        Self::polynomial(Poly::z()).expect("z is a valid map")
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.num.degree().unwrap_or(0).max(self.den.degree().unwrap_or(0))
    }

    pub fn apply(&self, z: &SpherePoint) -> SpherePoint {
        let d = self.degree();
        let (z1, z2) = z.coords();
        let hom = |p: &Poly| {
            p.coeffs.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (k, &c)| {
                acc + c * z1.powu(k as u32) * z2.powu((d - k) as u32)
            })
        };
        SpherePoint::new(hom(&self.num), hom(&self.den)).unwrap_or(SpherePoint::INFINITY)
    }

    /// The Wronskian `p' q - p q'`; its root orders are the finite
    /// ramification indices minus one.
    pub fn wronskian(&self) -> Poly {
        self.num.derivative().mul(&self.den).sub(&self.num.mul(&self.den.derivative()))
    }

    /// `w -> f(1/w)` written with both parts reversed against the degree.
    fn at_infinity(&self) -> RationalMap {
        let d = self.degree();
        RationalMap { num: self.num.reversed(d), den: self.den.reversed(d) }
    }

    /// Fiber over `w`, `d` points counted with multiplicity.
    pub fn fiber(&self, w: &SpherePoint) -> Result<Vec<SpherePoint>, BrancovError> {
        let d = self.degree();
        // Solve w2 p - w1 q = 0 in the affine chart.
        let (w1, w2) = w.coords();
        let r = self.num.scale(w2).sub(&self.den.scale(w1));
        let scale = self.num.coeffs.iter().chain(&self.den.coeffs).map(|c| c.norm()).fold(0.0, f64::max);
        let mut coeffs = r.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= 1e-13 * scale) {
            coeffs.pop();
        }
        let r = Poly::new(coeffs);
        let mut out: Vec<SpherePoint> = r.roots()?.into_iter().map(SpherePoint::finite).collect();
        for z in &out {
            let zc = z.to_complex().expect("finite root");
            let res = r.eval(zc).norm();
            let s = self.num.abs_eval(zc) * w2.norm() + self.den.abs_eval(zc) * w1.norm();
            if res > 1e-8 * s.max(f64::MIN_POSITIVE) {
                return Err(BrancovError::RootFindingFailure { residual: res / s });
            }
        }
        out.resize(d, SpherePoint::INFINITY);
        Ok(out)
    }
}

impl fmt::Display for RationalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

// |Res(p, q)| / (|p|^deg q |q|^deg p) with max-norm coefficients.
fn normalized_resultant(p: &Poly, q: &Poly) -> f64 {
    let (m, n) = (p.degree().unwrap_or(0), q.degree().unwrap_or(0));
    if m == 0 || n == 0 {
        return 1.0;
    }
    let norm = |x: &Poly| x.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let size = m + n;
    let mut s = DMatrix::<Complex>::zeros(size, size);
    for i in 0..n {
        for (k, &c) in p.coeffs.iter().rev().enumerate() {
            s[(i, i + k)] = c / norm(p);
        }
    }
    for i in 0..m {
        for (k, &c) in q.coeffs.iter().rev().enumerate() {
            s[(n + i, i + k)] = c / norm(q);
        }
    }
    s.determinant().norm()
}

/// Ramification points with their indices (at least 2), finite points in
/// (re, im) order followed by infinity.
pub fn ramification_profile(f: &RationalMap) -> Result<Vec<(SpherePoint, u32)>, BrancovError> {
    let w = f.wronskian();
    let mut out = Vec::new();
    for (z, m) in multiple_roots(&w)? {
        out.push((SpherePoint::finite(z), m as u32 + 1));
    }
    out.sort_by(|a, b| {
        let (za, zb) = (a.0.to_complex().unwrap(), b.0.to_complex().unwrap());
        za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im))
    });
    let order_at_inf = f.at_infinity().wronskian().low_order_zeros(1e-12);
    if order_at_inf > 0 {
        out.push((SpherePoint::INFINITY, order_at_inf as u32 + 1));
    }
    Ok(out)
}

// Distinct roots with multiplicities. Eigenvalues of a multiple root
// scatter by about eps^(1/m), so nearby eigenvalues are grouped and the
// group is accepted only if the Taylor expansion at its mean really starts
// at the group size; otherwise its members count as simple roots.
fn multiple_roots(p: &Poly) -> Result<Vec<(Complex, usize)>, BrancovError> {
    let roots = p.roots()?;
    let n = roots.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        if g[i] != i {
            let r = find(g, g[i]);
            g[i] = r;
        }
        g[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let radius = 0.05 * roots[i].norm().max(roots[j].norm()).max(1.0);
            if (roots[i] - roots[j]).norm() <= radius {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[a] = b;
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<Complex>> = Default::default();
    for (i, &r) in roots.iter().enumerate() {
        let g = find(&mut group, i);
        clusters.entry(g).or_default().push(r);
    }
    let dp = p.derivative();
    let mut out = Vec::new();
    for members in clusters.into_values() {
        let m = members.len();
        let mut mean = members.iter().sum::<Complex>() / m as f64;
        if m > 1 {
            // A root of order m is a simple root of the (m-1)-th derivative.
            let q = (1..m).fold(p.clone(), |acc, _| acc.derivative());
            mean = q.polish(&q.derivative(), mean);
        }
        if m > 1 && is_root_of_order(p, mean, m) {
            out.push((mean, m));
        } else {
            for z in members {
                out.push((p.polish(&dp, z), 1));
            }
        }
    }
    for &(z, _) in &out {
        let scale = p.abs_eval(z).max(f64::MIN_POSITIVE);
        let res = p.eval(z).norm() / scale;
        if res > 1e-6 {
            return Err(BrancovError::RootFindingFailure { residual: res });
        }
    }
    Ok(out)
}

fn is_root_of_order(p: &Poly, c: Complex, m: usize) -> bool {
    let t = p.taylor_at(c);
    let rho = 0.05 * c.norm().max(1.0);
    let weighted: Vec<f64> = t.iter().enumerate().map(|(k, a)| a.norm() * rho.powi(k as i32)).collect();
    let top = weighted.iter().copied().fold(0.0, f64::max);
    weighted.len() > m && weighted[..m].iter().all(|&x| x <= 1e-8 * top) && weighted[m] > 1e-8 * top
}

/// Σ(index - 1) over the profile equals `2(d - 1)`.
pub fn rh_verify_profile(degree: usize, profile: &[(SpherePoint, u32)]) -> bool {
    let total: u64 = profile.iter().map(|(_, e)| u64::from(e.saturating_sub(1))).sum();
    degree >= 1 && total == 2 * (degree as u64 - 1)
}

/// Computes the profile and checks Riemann-Hurwitz on it. A `false`
/// result means the numerics lost or invented a ramification point.
pub fn rh_verify(f: &RationalMap) -> bool {
    ramification_profile(f).is_ok_and(|p| rh_verify_profile(f.degree(), &p))
}

/// `(z - p')^d + p'`.
pub fn structure_extension_map(p_prime: Complex, d: u32) -> Result<RationalMap, BrancovError> {
    if d == 0 {
        return Err(BrancovError::InvalidDegree);
    }
    let shifted = Poly::new(vec![-p_prime, Complex::new(1.0, 0.0)]).pow(d);
    RationalMap::polynomial(shifted.add(&Poly::constant(p_prime)))
}

/// Sampled closed curve on the sphere; the last point repeats the first
/// up to `closure_error`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub points: Vec<SpherePoint>,
}

impl LoopTrace {
    pub fn closure_error(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => a.chordal_distance(b),
            _ => 0.0,
        }
    }

    pub fn max_step(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].chordal_distance(&w[1])).fold(0.0, f64::max)
    }

    /// Winding number around `m` by summing argument increments; the
    /// result must be within 0.1 of an integer.
    pub fn winding_number(&self, m: &SpherePoint) -> Result<i64, BrancovError> {
        let pts = self.chart_points(m)?;
        let Some(center) = pts.1 else {
            // Infinity stays outside any loop drawn in the affine chart.
            return Ok(0);
        };
        let mut total = 0.0;
        for w in pts.0.windows(2) {
            total += ((w[1] - center) / (w[0] - center)).arg();
        }
        let winding = total / (2.0 * PI);
        let k = winding.round();
        if (winding - k).abs() > 0.1 {
            return Err(BrancovError::WindingAmbiguous { winding });
        }
        Ok(k as i64)
    }

    // Loop and marked point in an affine chart where the loop is finite.
    // Infinite loop points trigger the chart change z -> 1/(z - a).
    fn chart_points(&self, m: &SpherePoint) -> Result<(Vec<Complex>, Option<Complex>), BrancovError> {
        let min_dist = self.points.iter().map(|p| p.chordal_distance(m)).fold(f64::INFINITY, f64::min);
        if min_dist <= 1e-9 {
            return Err(BrancovError::MarkedPointOnLoop(*m));
        }
        let finite: Option<Vec<Complex>> = self.points.iter().map(|p| p.to_complex()).collect();
        if let Some(pts) = finite.filter(|v| v.iter().all(|z| z.norm() < 1e12)) {
            return Ok((pts, m.to_complex()));
        }
        let a = [0.0, 1.0, -1.0, 2.0, -2.0, 0.5]
            .iter()
            .flat_map(|&x| [Complex::new(x, 0.0), Complex::new(0.0, x + 0.25)])
            .map(SpherePoint::finite)
            .max_by(|p, q| {
                let gap = |c: &SpherePoint| {
                    self.points.iter().chain([m]).map(|x| x.chordal_distance(c)).fold(f64::INFINITY, f64::min)
                };
                gap(p).total_cmp(&gap(q))
            })
            .and_then(|p| p.to_complex())
            .expect("candidates are finite");
        let chart = |p: &SpherePoint| match p.to_complex() {
            None => Complex::new(0.0, 0.0),
            Some(z) => Complex::new(1.0, 0.0) / (z - a),
        };
        Ok((self.points.iter().map(chart).collect(), Some(chart(m))))
    }
}

/// Base loop for preimage tracing, parametrized by `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseLoop {
    /// Counterclockwise circle starting at `center + radius`.
    Circle { center: Complex, radius: f64 },
    /// Closed polygon through the vertices, traversed in order.
    Polygon(Vec<Complex>),
}

impl BaseLoop {
    pub fn point(&self, t: f64) -> Complex {
        match self {
            BaseLoop::Circle { center, radius } => *center + Complex::from_polar(*radius, 2.0 * PI * t),
            BaseLoop::Polygon(v) => {
                let n = v.len() as f64;
                let s = (t.rem_euclid(1.0)) * n;
                let i = (s.floor() as usize).min(v.len() - 1);
                let frac = s - i as f64;
                v[i] + (v[(i + 1) % v.len()] - v[i]) * frac
            }
        }
    }

    pub fn trace(&self, samples: usize) -> LoopTrace {
        let mut points: Vec<SpherePoint> = (0..samples).map(|k| SpherePoint::finite(self.point(k as f64 / samples as f64))).collect();
        points.push(points[0]);
        LoopTrace { points }
    }

    /// Euclidean distance from `z` to the loop.
    pub fn distance_to(&self, z: Complex) -> f64 {
        match self {
            BaseLoop::Circle { center, radius } => ((z - center).norm() - radius).abs(),
            BaseLoop::Polygon(v) => (0..v.len())
                .map(|i| {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let ab = b - a;
                    let t = if ab.norm_sqr() == 0.0 { 0.0 } else { ((z - a) * ab.conj()).re / ab.norm_sqr() };
                    (z - (a + ab * t.clamp(0.0, 1.0))).norm()
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Preimage tracing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreimageOptions {
    /// Minimum Euclidean distance between the loop and any branch value.
    pub margin: f64,
    /// Maximum number of bisections of a single sampling interval.
    pub max_refine: u32,
}

impl Default for PreimageOptions {
    fn default() -> Self {
        PreimageOptions { margin: 1e-6, max_refine: 30 }
    }
}

/// Components of `f^{-1}(loop)` and the end-to-start permutation of the
/// fiber over the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Preimage {
    pub components: Vec<LoopTrace>,
    pub monodromy: Vec<usize>,
    /// Parameters actually sampled, after refinement.
    pub samples: usize,
}

/// Lifts the base loop through `f`: solves the fiber at `n_samples`
/// parameters, matches consecutive fibers (bisecting an interval until the
/// smallest gap in the fiber exceeds three times the largest step), and
/// splits the strands into the cycles of the monodromy.
pub fn preimage_loop(f: &RationalMap, base: &BaseLoop, n_samples: usize, opts: PreimageOptions) -> Result<Preimage, BrancovError> {
    if n_samples < 3 {
        return Err(BrancovError::InvalidSamples(n_samples));
    }
    for (z, e) in ramification_profile(f)? {
        let _ = e;
        let v = f.apply(&z);
        if let Some(vz) = v.to_complex() {
            let dist = base.distance_to(vz);
            if dist <= opts.margin {
                return Err(BrancovError::BranchValueTooClose { value: v, distance: dist });
            }
        }
    }
    let d = f.degree();
    let fiber_at = |t: f64| f.fiber(&SpherePoint::finite(base.point(t)));
    let coarse: Vec<(f64, Vec<SpherePoint>)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / n_samples as f64;
            fiber_at(t).map(|fib| (t, fib))
        })
        .collect::<Result<_, _>>()?;

    // strands[j] follows the root that starts as fiber entry j.
    let mut strands: Vec<Vec<SpherePoint>> = coarse[0].1.iter().map(|p| vec![*p]).collect();
    let mut current: Vec<SpherePoint> = coarse[0].1.clone();
    let mut samples = n_samples;
    for k in 0..n_samples {
        let (t0, _) = coarse[k];
        let t1 = if k + 1 < n_samples { coarse[k + 1].0 } else { 1.0 };
        let end = if k + 1 < n_samples { coarse[k + 1].1.clone() } else { fiber_at(1.0)? };
        let mut stack = vec![(t1, end, 0u32)];
        let mut t_cur = t0;
        while let Some((t_next, fib, depth)) = stack.pop() {
            let assignment = match_fibers(&current, &fib);
            let max_step = (0..d).map(|j| current[j].chordal_distance(&fib[assignment[j]])).fold(0.0, f64::max);
            if min_gap(&current) > 3.0 * max_step || d == 1 {
                let next: Vec<SpherePoint> = (0..d).map(|j| fib[assignment[j]]).collect();
                for (s, p) in strands.iter_mut().zip(&next) {
                    s.push(*p);
                }
                current = next;
                t_cur = t_next;
                continue;
            }
            if depth >= opts.max_refine {
                return Err(BrancovError::MatchingAmbiguous { t: t_cur });
            }
            let t_mid = 0.5 * (t_cur + t_next);
            samples += 1;
            stack.push((t_next, fib, depth + 1));
            stack.push((t_mid, fiber_at(t_mid)?, depth + 1));
        }
    }

    // The end fiber was solved afresh at t = 1; identify it with the start.
    let start = &coarse[0].1;
    let closing = match_fibers(&current, start);
    let monodromy: Vec<usize> = (0..d).map(|j| closing[j]).collect();
    let mut seen = vec![false; d];
    let mut components = Vec::new();
    for j in 0..d {
        if seen[j] {
            continue;
        }
        let mut points = Vec::new();
        let mut i = j;
        loop {
            seen[i] = true;
            if points.is_empty() {
                points.extend_from_slice(&strands[i]);
            } else {
                points.extend_from_slice(&strands[i][1..]);
            }
            i = monodromy[i];
            if i == j {
                break;
            }
        }
        components.push(LoopTrace { points });
    }
    Ok(Preimage { components, monodromy, samples })
}

fn min_gap(points: &[SpherePoint]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            gap = gap.min(points[i].chordal_distance(&points[j]));
        }
    }
    gap
}

// assignment[i] = index in `b` matched to `a[i]`; optimal for small
// fibers, greedy nearest neighbour otherwise.
fn match_fibers(a: &[SpherePoint], b: &[SpherePoint]) -> Vec<usize> {
    let n = a.len();
    let cost: Vec<Vec<f64>> = a.iter().map(|p| b.iter().map(|q| p.chordal_distance(q)).collect()).collect();
    if n <= 8 {
        return hungarian(&cost);
    }
    let mut used = vec![false; n];
    (0..n)
        .map(|i| {
            let j = (0..n).filter(|&j| !used[j]).min_by(|&x, &y| cost[i][x].total_cmp(&cost[i][y])).expect("free column");
            used[j] = true;
            j
        })
        .collect()
}

// Minimum-cost perfect assignment on a square matrix (potentials method).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Components that separate the marked points: some marked point winds
/// around the component and some does not.
pub fn essential_part(components: &[LoopTrace], marked: &[SpherePoint]) -> Result<Vec<LoopTrace>, BrancovError> {
    let mut out = Vec::new();
    for c in components {
        let w = marked.iter().map(|m| c.winding_number(m)).collect::<Result<Vec<_>, _>>()?;
        if w.iter().any(|&x| x != 0) && w.contains(&0) {
            out.push(c.clone());
        }
    }
    Ok(out)
}

/// Parses a rational expression in `z`: `+ - * / ^`, parentheses, real
/// literals and the imaginary unit `i` (`2.5i`, `3+4i`), implicit products
/// such as `2z` or `z(z+1)`, and integer exponents including negative ones.
pub fn parse_map(src: &str) -> Result<RationalMap, BrancovError> {
    let mut p = Parser { s: src.as_bytes(), pos: 0 };
    let (num, den) = p.expr()?;
    p.skip_ws();
    if p.pos < p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    // Cancel common powers of z exactly.
    let k = num.coeffs.iter().take_while(|c| c.norm() == 0.0).count().min(den.coeffs.iter().take_while(|c| c.norm() == 0.0).count());
    let strip = |x: &Poly| Poly::new(x.coeffs[k.min(x.coeffs.len())..].to_vec());
    RationalMap::new(strip(&num), strip(&den))
}

type Frac = (Poly, Poly);

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> BrancovError {
        BrancovError::Parse { pos: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Frac, BrancovError> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let rhs = if c == b'-' { (rhs.0.scale(Complex::new(-1.0, 0.0)), rhs.1) } else { rhs };
            acc = (acc.0.mul(&rhs.1).add(&rhs.0.mul(&acc.1)), acc.1.mul(&rhs.1));
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Frac, BrancovError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = (acc.0.mul(&rhs.0), acc.1.mul(&rhs.1));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let rhs = self.unary()?;
                    if rhs.0.is_zero() {
                        return Err(BrancovError::Parse { pos: at, message: "division by zero".into() });
                    }
                    acc = (acc.0.mul(&rhs.1), acc.1.mul(&rhs.0));
                }
                Some(c) if c == b'z' || c == b'i' || c == b'(' || c.is_ascii_digit() || c == b'.' => {
                    let rhs = self.power()?;
                    acc = (acc.0.mul(&rhs.0), acc.1.mul(&rhs.1));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Frac, BrancovError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let (n, d) = self.unary()?;
                Ok((n.scale(Complex::new(-1.0, 0.0)), d))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Frac, BrancovError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let neg = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.s.get(self.pos) == Some(&b'.') {
            return Err(BrancovError::Parse { pos: start, message: "exponent must be an integer".into() });
        }
        let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        let n: u32 = digits.parse().map_err(|_| BrancovError::Parse { pos: start, message: "expected integer exponent".into() })?;
        let (num, den) = (base.0.pow(n), base.1.pow(n));
        if neg {
            if num.is_zero() {
                return Err(BrancovError::Parse { pos: start, message: "division by zero".into() });
            }
            Ok((den, num))
        } else {
            Ok((num, den))
        }
    }

    fn atom(&mut self) -> Result<Frac, BrancovError> {
        let one = Poly::constant(Complex::new(1.0, 0.0));
        match self.peek() {
            Some(b'z') => {
                self.pos += 1;
                Ok((Poly::z(), one))
            }
            Some(b'i') => {
                self.pos += 1;
                Ok((Poly::constant(Complex::new(0.0, 1.0)), one))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let x = self.number()?;
                // A literal immediately followed by `i` is imaginary.
                if self.s.get(self.pos) == Some(&b'i') {
                    self.pos += 1;
                    return Ok((Poly::constant(Complex::new(0.0, x)), one));
                }
                Ok((Poly::constant(Complex::new(x, 0.0)), one))
            }
            _ => Err(self.err("expected z, i, a number or '('")),
        }
    }

    fn number(&mut self) -> Result<f64, BrancovError> {
        let start = self.pos;
        let s = self.s;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        // Exponent only when digits follow, so `2e` is not swallowed.
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                self.pos = q;
                digits(&mut self.pos);
            }
        }
        std::str::from_utf8(&s[start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| BrancovError::Parse { pos: start, message: "malformed number".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn profile_of(src: &str) -> Vec<(SpherePoint, u32)> {
        ramification_profile(&parse_map(src).unwrap()).unwrap()
    }

    fn assert_profile(got: &[(SpherePoint, u32)], want: &[(SpherePoint, u32)]) {
        assert_eq!(got.len(), want.len(), "{got:?}");
        for ((p, e), (q, f)) in got.iter().zip(want) {
            assert_eq!(e, f);
            assert!(p.chordal_distance(q) < 1e-6, "{p} vs {q}");
        }
    }

    #[test]
    fn parser_builds_expected_maps() {
        let f = parse_map("z^2").unwrap();
        assert_eq!(f.num().coeffs(), &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let g = parse_map("z + 1/z").unwrap();
        assert_eq!(g.degree(), 2);
        assert_eq!(g.num().coeffs(), &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(g.den().coeffs(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        let h = parse_map("(z-1)^3 + 1").unwrap();
        assert_eq!(h.num().coeffs(), &[c(0.0, 0.0), c(3.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]);
        let k = parse_map("2z(z + 3+4i) - 1.5e-1").unwrap();
        assert_eq!(k.num().coeffs(), &[c(-0.15, 0.0), c(6.0, 8.0), c(2.0, 0.0)]);
        assert_eq!(parse_map("z^-1").unwrap().den().coeffs(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(parse_map("z^3/z").unwrap().degree(), 2);
        assert!(matches!(parse_map("z +"), Err(BrancovError::Parse { .. })));
        assert!(matches!(parse_map("z^1.5"), Err(BrancovError::Parse { .. })));
        assert!(matches!(parse_map("1/0"), Err(BrancovError::Parse { .. })));
        assert!(matches!(parse_map("3"), Err(BrancovError::ConstantMap)));
        assert!(matches!(parse_map("(z^2-1)/(z-1)"), Err(BrancovError::NotCoprime { .. })));
    }

    #[test]
    fn profile_examples() {
        let inf = SpherePoint::INFINITY;
        let zero = SpherePoint::finite(c(0.0, 0.0));
        assert_profile(&profile_of("z^2"), &[(zero, 2), (inf, 2)]);
        let cube = structure_extension_map(c(0.0, 0.0), 3).unwrap();
        assert_profile(&ramification_profile(&cube).unwrap(), &[(zero, 3), (inf, 3)]);
        assert_profile(
            &profile_of("z + 1/z"),
            &[(SpherePoint::finite(c(-1.0, 0.0)), 2), (SpherePoint::finite(c(1.0, 0.0)), 2)],
        );
        let shifted = structure_extension_map(c(1.0, 0.0), 3).unwrap();
        assert_eq!(shifted, parse_map("(z-1)^3 + 1").unwrap());
        assert_profile(&ramification_profile(&shifted).unwrap(), &[(SpherePoint::finite(c(1.0, 0.0)), 3), (inf, 3)]);
        assert_eq!(structure_extension_map(c(0.0, 0.0), 1).unwrap(), RationalMap::identity());
        assert!(ramification_profile(&RationalMap::identity()).unwrap().is_empty());
    }

    #[test]
    fn rh_holds_for_extension_maps() {
        for d in 1..=8 {
            for p in [c(0.0, 0.0), c(1.0, 0.0), c(-0.5, 2.0)] {
                let f = structure_extension_map(p, d).unwrap();
                assert!(rh_verify(&f), "d={d} p={p}");
                if d > 1 {
                    let prof = ramification_profile(&f).unwrap();
                    assert_eq!(prof.len(), 2);
                    assert_eq!(prof[0].1, d);
                }
            }
        }
    }

    #[test]
    fn rh_detects_missing_points() {
        let f = parse_map("z^3 + 0.001z + 0.001").unwrap();
        let prof = ramification_profile(&f).unwrap();
        assert_eq!(prof.len(), 3);
        assert!(rh_verify_profile(3, &prof));
        assert!(!rh_verify_profile(3, &prof[1..]));
        assert!(!rh_verify_profile(3, &[]));
    }

    #[test]
    fn fiber_counts_points_at_infinity() {
        let f = parse_map("z + 1/z").unwrap();
        let fib = f.fiber(&SpherePoint::INFINITY).unwrap();
        assert_eq!(fib.len(), 2);
        assert!(fib.iter().any(|p| p.is_infinity()));
        assert!(fib.iter().any(|p| p.chordal_distance(&SpherePoint::finite(c(0.0, 0.0))) < 1e-12));
    }

    #[test]
    fn preimage_examples() {
        let sq = parse_map("z^2").unwrap();
        let big = BaseLoop::Circle { center: c(0.0, 0.0), radius: 2.0 };
        let pre = preimage_loop(&sq, &big, 256, PreimageOptions::default()).unwrap();
        assert_eq!(pre.components.len(), 1);
        let comp = &pre.components[0];
        assert!(comp.closure_error() < 1e-6);
        for p in &comp.points {
            assert!((p.to_complex().unwrap().norm() - 2f64.sqrt()).abs() < 1e-9);
        }

        let off = BaseLoop::Circle { center: c(3.0, 0.0), radius: 1.0 };
        let pre = preimage_loop(&sq, &off, 256, PreimageOptions::default()).unwrap();
        assert_eq!(pre.components.len(), 2);
        let mut centers: Vec<f64> = pre
            .components
            .iter()
            .map(|t| {
                let n = (t.points.len() - 1) as f64;
                t.points[..t.points.len() - 1].iter().map(|p| p.to_complex().unwrap().re).sum::<f64>() / n
            })
            .collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] + 3f64.sqrt()).abs() < 0.1 && (centers[1] - 3f64.sqrt()).abs() < 0.1, "{centers:?}");

        let id = RationalMap::identity();
        let pre = preimage_loop(&id, &off, 64, PreimageOptions::default()).unwrap();
        assert_eq!(pre.components.len(), 1);
        let base = off.trace(64);
        for (p, q) in pre.components[0].points.iter().zip(&base.points) {
            assert!(p.chordal_distance(q) < 1e-12);
        }
    }

    #[test]
    fn preimage_rejects_loops_through_branch_values() {
        let sq = parse_map("z^2").unwrap();
        let through = BaseLoop::Circle { center: c(1.0, 0.0), radius: 1.0 };
        assert!(matches!(
            preimage_loop(&sq, &through, 64, PreimageOptions::default()),
            Err(BrancovError::BranchValueTooClose { .. })
        ));
    }

    #[test]
    fn essential_part_examples() {
        let sq = parse_map("z^2").unwrap();
        let marked = [SpherePoint::finite(c(0.0, 0.0)), SpherePoint::INFINITY];
        let off = preimage_loop(&sq, &BaseLoop::Circle { center: c(3.0, 0.0), radius: 1.0 }, 256, PreimageOptions::default()).unwrap();
        assert!(essential_part(&off.components, &marked).unwrap().is_empty());
        let big = preimage_loop(&sq, &BaseLoop::Circle { center: c(0.0, 0.0), radius: 2.0 }, 256, PreimageOptions::default()).unwrap();
        assert_eq!(big.components[0].winding_number(&marked[0]).unwrap(), 1);
        assert_eq!(essential_part(&big.components, &marked).unwrap().len(), 1);
        assert!(essential_part(&big.components, &[]).unwrap().is_empty());
    }

    #[test]
    fn winding_through_infinity_uses_a_chart_change() {
        // The real line closed up through infinity separates i from -i.
        let pts: Vec<SpherePoint> = (-20..=20)
            .map(|k| SpherePoint::finite(c((k as f64 * PI / 42.0).tan(), 0.0)))
            .chain([SpherePoint::INFINITY])
            .chain([SpherePoint::finite(c((-20.0 * PI / 42.0).tan(), 0.0))])
            .collect();
        let line = LoopTrace { points: pts };
        let up = line.winding_number(&SpherePoint::finite(c(0.0, 1.0))).unwrap();
        let down = line.winding_number(&SpherePoint::finite(c(0.0, -1.0))).unwrap();
        assert_ne!(up, down);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = (0..3).map(|i| cost[i][a[i]]).sum();
        assert_eq!(total, 5.0);
    }
}
