//! Möbius transformations of the Riemann sphere and their Poincaré extension
//! to hyperbolic 3-space.
//!
//! Three charts are used throughout:
//!
//! - the extended complex plane, identified with the unit sphere by
//!   stereographic projection (`0` is the south pole, `∞` the north pole);
//! - the upper half-space `{(z, t) : t > 0}`, which hosts the matrix action;
//! - the unit ball, which hosts the measure kernel.
//!
//! The ball and half-space charts are related by a fixed conformal map whose
//! boundary restriction is exactly the stereographic projection, so the
//! sphere action and the interior action always agree on endpoints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

pub type Cx = Complex64;

const NORTH: Vec3 = [0.0, 0.0, 1.0];

/// Tolerance band used by [`MoebiusMap::classify`].
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

/// A point of the Riemann sphere, kept as a unit vector together with its
/// extended-complex coordinate (`None` is `∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    v: Vec3,
    z: Option<Cx>,
}

impl SpherePoint {
    pub const INFINITY: SpherePoint = SpherePoint {
        v: NORTH,
        z: None,
    };

    pub fn from_complex(z: Cx) -> Self {
        if z.norm_sqr() <= 1.0 {
            Self::from_ratio(z, Cx::new(1.0, 0.0))
        } else {
            Self::from_ratio(Cx::new(1.0, 0.0), z.inv())
        }
    }

    /// Builds the point from a unit (or nonzero) vector; the vector is
    /// renormalized.
    pub fn from_unit(v: Vec3) -> Self {
        let v = vec3::normalize(v);
        let z = stereo_inv(v);
        SpherePoint { v, z }
    }

    /// The point `num / den` of the projective line. At least one of the two
    /// must be nonzero.
    pub fn from_ratio(num: Cx, den: Cx) -> Self {
        if num.norm_sqr() <= den.norm_sqr() {
            let z = num / den;
            let r2 = z.norm_sqr();
            let s = 1.0 / (1.0 + r2);
            SpherePoint {
                v: [2.0 * z.re * s, 2.0 * z.im * s, (r2 - 1.0) * s],
                z: Some(z),
            }
        } else {
            // u = 1/z, stable near the north pole
            let u = den / num;
            let r2 = u.norm_sqr();
            let s = 1.0 / (1.0 + r2);
            SpherePoint {
                v: [2.0 * u.re * s, -2.0 * u.im * s, (1.0 - r2) * s],
                z: if r2 == 0.0 { None } else { Some(u.inv()) },
            }
        }
    }

    #[inline]
    pub fn unit(&self) -> Vec3 {
        self.v
    }

    /// Extended-complex coordinate; `None` is `∞`.
    #[inline]
    pub fn complex(&self) -> Option<Cx> {
        self.z
    }

    pub fn is_infinity(&self) -> bool {
        self.z.is_none()
    }

    /// A homogeneous pair `(p0, p1)` with `p0 / p1` equal to the point, chosen
    /// so that both entries are bounded by one.
    pub fn homogeneous(&self) -> (Cx, Cx) {
        let [x, y, h] = self.v;
        if h <= 0.0 {
            (Cx::new(x, y) / (1.0 - h), Cx::new(1.0, 0.0))
        } else {
            (Cx::new(1.0, 0.0), Cx::new(x, -y) / (1.0 + h))
        }
    }

    /// Great-circle distance in radians.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        vec3::angle(self.v, other.v)
    }
}

/// Stereographic projection from the extended plane to the unit sphere.
pub fn stereo(z: Option<Cx>) -> Vec3 {
    match z {
        None => NORTH,
        Some(z) => SpherePoint::from_complex(z).v,
    }
}

/// Inverse stereographic projection; the north pole maps to `None` (`∞`).
pub fn stereo_inv(v: Vec3) -> Option<Cx> {
    let [x, y, h] = v;
    if h <= 0.0 {
        Some(Cx::new(x, y) / (1.0 - h))
    } else {
        let u = Cx::new(x, -y) / (1.0 + h);
        if u == Cx::new(0.0, 0.0) {
            None
        } else {
            Some(u.inv())
        }
    }
}

/// One or two fixed points of a non-identity map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPoints {
    One(SpherePoint),
    /// For loxodromic maps the attracting point comes first.
    Two(SpherePoint, SpherePoint),
}

impl FixedPoints {
    pub fn to_vec(self) -> Vec<SpherePoint> {
        match self {
            FixedPoints::One(p) => vec![p],
            FixedPoints::Two(p, q) => vec![p, q],
        }
    }
}

/// A point of the open unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPoint(Vec3);

impl BallPoint {
    pub const ORIGIN: BallPoint = BallPoint([0.0; 3]);

    pub fn new(y: Vec3) -> Result<Self> {
        let r2 = vec3::norm2(y);
        if !(r2 < 1.0) || !y.iter().all(|c| c.is_finite()) {
            return Err(Error::Range(format!(
                "ball point {y:?} has radius {} >= 1",
                r2.sqrt()
            )));
        }
        Ok(BallPoint(y))
    }

    #[inline]
    pub fn coords(&self) -> Vec3 {
        self.0
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        vec3::norm(self.0)
    }

    pub fn to_half_space(&self) -> HalfSpacePoint {
        // The chart map is an involution of R^3 composed with t -> -t.
        let d = vec3::sub(self.0, NORTH);
        let p = vec3::add(NORTH, vec3::scale(d, 2.0 / vec3::norm2(d)));
        HalfSpacePoint {
            z: Cx::new(p[0], p[1]),
            t: -p[2],
        }
    }

    pub fn from_half_space(h: HalfSpacePoint) -> Result<Self> {
        if !(h.t > 0.0) || !h.t.is_finite() || !h.z.re.is_finite() || !h.z.im.is_finite() {
            return Err(Error::Range(format!("half-space point {h:?} is not interior")));
        }
        let p = [h.z.re, h.z.im, -h.t];
        let d = vec3::sub(p, NORTH);
        let y = vec3::add(NORTH, vec3::scale(d, 2.0 / vec3::norm2(d)));
        BallPoint::new(y)
    }

    /// Projective (Klein) coordinates of the same point.
    pub fn to_klein(&self) -> Vec3 {
        vec3::scale(self.0, 2.0 / (1.0 + vec3::norm2(self.0)))
    }

    pub fn from_klein(k: Vec3) -> Result<Self> {
        let r2 = vec3::norm2(k);
        if !(r2 < 1.0) {
            return Err(Error::Range(format!("Klein point {k:?} is not interior")));
        }
        BallPoint::new(vec3::scale(k, 1.0 / (1.0 + (1.0 - r2).sqrt())))
    }
}

/// A point `(z, t)` of the upper half-space, `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpacePoint {
    pub z: Cx,
    pub t: f64,
}

pub fn ball_distance(p: &BallPoint, q: &BallPoint) -> f64 {
    let num = 2.0 * vec3::norm2(vec3::sub(p.0, q.0));
    let den = (1.0 - vec3::norm2(p.0)) * (1.0 - vec3::norm2(q.0));
    (1.0 + num / den).acosh()
}

pub fn half_space_distance(p: &HalfSpacePoint, q: &HalfSpacePoint) -> f64 {
    let num = (p.z - q.z).norm_sqr() + (p.t - q.t).powi(2);
    (1.0 + num / (2.0 * p.t * q.t)).acosh()
}

/// A normalized element of `SL(2, C)`, understood up to sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    pub a: Cx,
    pub b: Cx,
    pub c: Cx,
    pub d: Cx,
}

impl MoebiusMap {
    pub const IDENTITY: MoebiusMap = MoebiusMap {
        a: Cx::new(1.0, 0.0),
        b: Cx::new(0.0, 0.0),
        c: Cx::new(0.0, 0.0),
        d: Cx::new(1.0, 0.0),
    };

    /// Scales the matrix to determinant one and applies the sign rule.
    pub fn new(a: Cx, b: Cx, c: Cx, d: Cx) -> Result<Self> {
        let det = a * d - b * c;
        let scale2 = a.norm_sqr().max(b.norm_sqr()).max(c.norm_sqr()).max(d.norm_sqr());
        if !(det.norm() > 1e-14 * scale2) || !det.is_finite() {
            return Err(Error::SingularMatrix(det.norm()));
        }
        let s = det.sqrt().inv();
        Ok(MoebiusMap {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        }
        .canonical())
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(Cx::new(a, 0.0), Cx::new(b, 0.0), Cx::new(c, 0.0), Cx::new(d, 0.0))
    }

    /// `z ↦ k z`.
    pub fn dilation(k: Cx) -> Result<Self> {
        let s = k.sqrt();
        Self::new(s, Cx::new(0.0, 0.0), Cx::new(0.0, 0.0), s.inv())
    }

    /// `z ↦ z + w`.
    pub fn translation(w: Cx) -> Self {
        MoebiusMap {
            a: Cx::new(1.0, 0.0),
            b: w,
            c: Cx::new(0.0, 0.0),
            d: Cx::new(1.0, 0.0),
        }
        .canonical()
    }

    /// A map sending `0 ↦ zero_to` and `∞ ↦ inf_to` (the points must differ).
    pub fn sending_zero_inf(zero_to: SpherePoint, inf_to: SpherePoint) -> Result<Self> {
        let (p0, p1) = inf_to.homogeneous();
        let (q0, q1) = zero_to.homogeneous();
        // Columns are the images of ∞ = (1, 0) and 0 = (0, 1).
        Self::new(p0, q0, p1, q1)
    }

    /// The loxodromic (or elliptic, when `|k| = 1`) map with multiplier `k`
    /// fixing `attracting` and `repelling`; `|k| > 1` makes `attracting`
    /// attract.
    pub fn with_fixed_points(attracting: SpherePoint, repelling: SpherePoint, k: Cx) -> Result<Self> {
        let s = Self::sending_zero_inf(repelling, attracting)?;
        Ok(s.compose(&Self::dilation(k)?).compose(&s.inverse()))
    }

    fn canonical(self) -> Self {
        let entries = [self.a, self.b, self.c, self.d];
        let scale = entries.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let eps = 1e-14 * scale;
        let mut flip = false;
        for e in entries {
            if e.norm() > eps {
                flip = if e.re.abs() > eps { e.re < 0.0 } else { e.im < 0.0 };
                break;
            }
        }
        if flip {
            MoebiusMap {
                a: -self.a,
                b: -self.b,
                c: -self.c,
                d: -self.d,
            }
        } else {
            self
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, g: &MoebiusMap) -> MoebiusMap {
        let f = self;
        let m = MoebiusMap {
            a: f.a * g.a + f.b * g.c,
            b: f.a * g.b + f.b * g.d,
            c: f.c * g.a + f.d * g.c,
            d: f.c * g.b + f.d * g.d,
        };
        // Renormalize to keep det drift from accumulating along long words.
        let det = m.a * m.d - m.b * m.c;
        let s = det.sqrt().inv();
        MoebiusMap {
            a: m.a * s,
            b: m.b * s,
            c: m.c * s,
            d: m.d * s,
        }
        .canonical()
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
        .canonical()
    }

    pub fn entries(&self) -> [Cx; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> Cx {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Cx {
        self.a + self.d
    }

    /// Frobenius norm of the matrix.
    pub fn norm(&self) -> f64 {
        self.entries().iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Distance between the two maps as elements of `PSL(2, C)`: the smaller
    /// Frobenius distance over the two sign choices.
    pub fn distance(&self, other: &MoebiusMap) -> f64 {
        let plus: f64 = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        let minus: f64 = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x + y).norm_sqr())
            .sum();
        plus.min(minus).sqrt()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&Self::IDENTITY) <= tol
    }

    pub fn classify(&self) -> Kind {
        if self.b.norm() <= TRACE_TOL && self.c.norm() <= TRACE_TOL && (self.a - self.d).norm() <= TRACE_TOL {
            return Kind::Identity;
        }
        let tr2 = self.trace() * self.trace();
        if tr2.im.abs() <= TRACE_TOL && tr2.re >= -TRACE_TOL && tr2.re <= 4.0 + TRACE_TOL {
            // Nearest case inside the band: 4 is parabolic, everything
            // below it elliptic.
            if (tr2.re - 4.0).abs() <= TRACE_TOL {
                Kind::Parabolic
            } else {
                Kind::Elliptic
            }
        } else {
            Kind::Loxodromic
        }
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let (p0, p1) = p.homogeneous();
        SpherePoint::from_ratio(self.a * p0 + self.b * p1, self.c * p0 + self.d * p1)
    }

    pub fn apply_complex(&self, z: Cx) -> SpherePoint {
        self.apply(&SpherePoint::from_complex(z))
    }

    /// Modulus of the derivative at a finite point (`1/|cz + d|²`) or the
    /// multiplier modulus at `∞` when `∞` is fixed.
    fn derivative_modulus(&self, p: &SpherePoint) -> f64 {
        match p.complex() {
            Some(z) => 1.0 / (self.c * z + self.d).norm_sqr(),
            None => (self.d / self.a).norm_sqr(),
        }
    }

    pub fn fixed_points(&self) -> Result<FixedPoints> {
        let kind = self.classify();
        if kind == Kind::Identity {
            return Err(Error::IdentityFixedPoints);
        }
        let (p, q) = if self.c.norm() <= 1e-15 * self.norm() {
            let diff = self.d - self.a;
            if kind == Kind::Parabolic || diff.norm() <= 1e-15 * self.norm() {
                return Ok(FixedPoints::One(SpherePoint::INFINITY));
            }
            (SpherePoint::INFINITY, SpherePoint::from_ratio(self.b, diff))
        } else {
            let amd = self.a - self.d;
            if kind == Kind::Parabolic {
                return Ok(FixedPoints::One(SpherePoint::from_ratio(amd, 2.0 * self.c)));
            }
            let tr = self.trace();
            let disc = (tr * tr - 4.0).sqrt();
            let two_c = 2.0 * self.c;
            (
                SpherePoint::from_ratio(amd + disc, two_c),
                SpherePoint::from_ratio(amd - disc, two_c),
            )
        };
        if kind == Kind::Loxodromic && self.derivative_modulus(&q) < self.derivative_modulus(&p) {
            Ok(FixedPoints::Two(q, p))
        } else {
            Ok(FixedPoints::Two(p, q))
        }
    }

    /// Attracting fixed point of a loxodromic map.
    pub fn attracting_fixed_point(&self) -> Option<SpherePoint> {
        if self.classify() != Kind::Loxodromic {
            return None;
        }
        match self.fixed_points() {
            Ok(FixedPoints::Two(p, _)) => Some(p),
            _ => None,
        }
    }

    /// Poincaré extension in the upper half-space chart.
    pub fn apply_half_space(&self, p: &HalfSpacePoint) -> HalfSpacePoint {
        let HalfSpacePoint { z, t } = *p;
        let w = self.c * z + self.d;
        let den = w.norm_sqr() + self.c.norm_sqr() * t * t;
        let z_new = ((self.a * z + self.b) * w.conj() + self.a * self.c.conj() * t * t) / den;
        HalfSpacePoint { z: z_new, t: t / den }
    }

    /// Poincaré extension in the ball chart.
    pub fn apply_ball(&self, y: &BallPoint) -> Result<BallPoint> {
        let h = self.apply_half_space(&y.to_half_space());
        BallPoint::from_half_space(h)
    }
}

/// The hyperbolic translation of the ball along the diameter through `y`,
/// taking the origin to `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallTranslation {
    y: Vec3,
    y2: f64,
}

impl BallTranslation {
    pub fn new(y: &BallPoint) -> Self {
        let y = y.coords();
        BallTranslation { y, y2: vec3::norm2(y) }
    }

    pub fn target(&self) -> Vec3 {
        self.y
    }

    pub fn inverse(&self) -> Self {
        BallTranslation {
            y: vec3::scale(self.y, -1.0),
            y2: self.y2,
        }
    }

    fn map(&self, x: Vec3) -> Vec3 {
        let xy = vec3::dot(x, self.y);
        let x2 = vec3::norm2(x);
        let num_x = 1.0 - self.y2;
        let num_y = 1.0 + 2.0 * xy + x2;
        let den = 1.0 + 2.0 * xy + x2 * self.y2;
        vec3::scale(vec3::add(vec3::scale(x, num_x), vec3::scale(self.y, num_y)), 1.0 / den)
    }

    pub fn apply_interior(&self, x: &BallPoint) -> BallPoint {
        let v = self.map(x.coords());
        // Clamp rounding that could push a near-boundary image onto the sphere.
        let r2 = vec3::norm2(v);
        if r2 < 1.0 {
            BallPoint(v)
        } else {
            BallPoint(vec3::scale(v, (1.0 - 1e-16) / r2.sqrt()))
        }
    }

    /// Boundary action on unit vectors.
    pub fn apply_boundary(&self, v: Vec3) -> Vec3 {
        vec3::normalize(self.map(v))
    }

    pub fn inverse_boundary(&self, v: Vec3) -> Vec3 {
        self.inverse().apply_boundary(v)
    }
}

/// Endpoint on the sphere of the geodesic ray from `y` with initial
/// direction `dir` (any nonzero vector).
pub fn ray_endpoint(y: &BallPoint, dir: Vec3) -> Vec3 {
    // The translation's derivative at the origin is a positive multiple of
    // the identity, so directions carry over unchanged.
    BallTranslation::new(y).apply_boundary(vec3::normalize(dir))
}
