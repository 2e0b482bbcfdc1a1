//! Spherical-trigonometry primitives on the unit sphere.
//!
//! Everything here works in radians on the unit sphere: distances are central
//! angles in `[0, π]`, cap radii live in `[0, π]`, areas in `[0, 4π]`. The
//! inverse-trig forms are chosen for precision at small angles: distances use
//! `2·asin(chord/2)`, areas use `4π·sin²(r/2)`, and the cap-split offset uses
//! the `sin²` variant throughout. The `cos`/`arccos` variants appear only in
//! tests as cross-checks.

use crate::error::{Error, Result};
use rand::Rng;
use std::f64::consts::PI;
use std::fmt;

/// Area of the full unit sphere.
pub const SPHERE_AREA: f64 = 4.0 * PI;

/// An angle in radians.
///
/// A thin newtype so distances, cap radii, and kernel ranges do not get
/// confused with dimensionless values in signatures.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Radians(f64);

impl Radians {
    pub const ZERO: Radians = Radians(0.0);
    pub const PI: Radians = Radians(PI);

    #[inline]
    pub fn new(value: f64) -> Self {
        Radians(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Radians {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

impl std::ops::Add for Radians {
    type Output = Radians;
    fn add(self, rhs: Radians) -> Radians {
        Radians(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Radians {
    type Output = Radians;
    fn sub(self, rhs: Radians) -> Radians {
        Radians(self.0 - rhs.0)
    }
}

impl std::ops::Mul<f64> for Radians {
    type Output = Radians;
    fn mul(self, rhs: f64) -> Radians {
        Radians(self.0 * rhs)
    }
}

impl std::ops::Neg for Radians {
    type Output = Radians;
    fn neg(self) -> Radians {
        Radians(-self.0)
    }
}

/// A point on the unit sphere, stored as a Cartesian triple with
/// `x² + y² + z² = 1` to within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec3 {
    /// Normalizes `(x, y, z)` onto the sphere. Zero or non-finite input is an
    /// input error.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::invalid("unit vector components must be finite"));
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero-length vector"));
        }
        Ok(UnitVec3 {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Geographic longitude/latitude in degrees to a unit vector.
    ///
    /// Latitude must lie in `[-90, 90]`; longitude is wrapped mod 360.
    pub fn from_lonlat_deg(lon_deg: f64, lat_deg: f64) -> Result<Self> {
        if !lon_deg.is_finite() || !lat_deg.is_finite() {
            return Err(Error::invalid("lon/lat must be finite"));
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::invalid(format!(
                "latitude {lat_deg} outside [-90, 90]"
            )));
        }
        let lon = (lon_deg % 360.0).to_radians();
        let lat = lat_deg.to_radians();
        UnitVec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    #[inline]
    pub fn x(self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(self) -> f64 {
        self.z
    }

    #[inline]
    pub fn dot(self, other: UnitVec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Euclidean chord length to `other`, in `[0, 2]`.
    #[inline]
    pub fn chord_to(self, other: UnitVec3) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Great-circle distance between two unit vectors.
///
/// Uses the chord form `2·asin(‖q − p‖ / 2)`, which keeps full precision for
/// small separations where the dot-product form loses digits.
#[inline]
pub fn spherical_distance(p: UnitVec3, q: UnitVec3) -> Radians {
    let half_chord = 0.5 * p.chord_to(q);
    Radians(2.0 * half_chord.clamp(0.0, 1.0).asin())
}

/// Uniformly distributed random point on the unit sphere.
pub fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> UnitVec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..(2.0 * PI));
    let s = (1.0 - z * z).max(0.0).sqrt();
    UnitVec3 {
        x: s * phi.cos(),
        y: s * phi.sin(),
        z,
    }
}

/// Area of the spherical disk (cap) of radius `r`, `4π·sin²(r/2)`.
pub fn cap_area(r: Radians) -> Result<f64> {
    let r = r.value();
    if !(0.0..=PI).contains(&r) {
        return Err(Error::invalid(format!("cap radius {r} outside [0, π]")));
    }
    Ok(cap_area_unchecked(r))
}

#[inline]
pub(crate) fn cap_area_unchecked(r: f64) -> f64 {
    SPHERE_AREA * half_sin_sq(r)
}

/// Signed area of a spherical right triangle with legs `a` and `b`,
/// `2·atan(tan(a/2)·tan(b/2))`. The sign follows the sign of `b`, which is
/// how the same-side-center case of the cap intersection carries a negative
/// triangle contribution.
pub fn right_triangle_area(a: Radians, b: Radians) -> f64 {
    let (a, b) = (a.value(), b.value());
    debug_assert!((0.0..=PI / 2.0 + 1e-12).contains(&a), "leg a = {a}");
    debug_assert!(b.abs() <= PI / 2.0 + 1e-12, "leg b = {b}");
    2.0 * ((0.5 * a).tan() * (0.5 * b).tan()).atan()
}

/// Area of the spherical circular sector with spherical angle `alpha` and
/// radius `r`, `2·alpha·sin²(r/2)`.
pub fn sector_area(alpha: Radians, r: Radians) -> Result<f64> {
    let (alpha, r) = (alpha.value(), r.value());
    if !(0.0..=2.0 * PI).contains(&alpha) {
        return Err(Error::invalid(format!(
            "sector angle {alpha} outside [0, 2π]"
        )));
    }
    if !(0.0..=PI).contains(&r) {
        return Err(Error::invalid(format!("sector radius {r} outside [0, π]")));
    }
    let s = (0.5 * r).sin();
    Ok(2.0 * alpha * s * s)
}

/// Signed area of the spherical circular segment cut from the cap of radius
/// `r`: twice the sector minus twice the right triangle with legs `(a, b)`.
/// `alpha` is the spherical angle at the cap center; `b` may be negative.
pub fn segment_area(alpha: Radians, r: Radians, a: Radians, b: Radians) -> Result<f64> {
    Ok(2.0 * (sector_area(alpha, r)? - right_triangle_area(a, b)))
}

/// Offset `x` splitting the center distance of two intersecting caps so that
/// `∠AOC = d/2 + x` and `∠BOC = d/2 - x` locate the chord through the
/// intersection points.
///
/// Uses the `sin²` form; when both radii are exactly `π/2` the expression is
/// 0/0 and any value is geometrically valid, so 0 is returned to preserve
/// symmetry.
pub fn cap_split_offset(r0: Radians, r1: Radians, d: Radians) -> Radians {
    let (r0, r1, d) = (r0.value(), r1.value(), d.value());
    debug_assert!(r0 > 0.0 && r0 <= PI / 2.0, "r0 = {r0}");
    debug_assert!(r1 > 0.0 && r1 <= PI / 2.0, "r1 = {r1}");
    debug_assert!(
        (r0 - r1).abs() < d && d < r0 + r1,
        "not intersecting: r0 = {r0}, r1 = {r1}, d = {d}"
    );
    let s0 = half_sin_sq(r0);
    let s1 = half_sin_sq(r1);
    if s0 == s1 {
        return Radians(0.0);
    }
    let half_d = 0.5 * d;
    let cot_half_d = half_d.cos() / half_d.sin();
    Radians((cot_half_d * (s0 - s1) / (1.0 - (s0 + s1))).atan())
}

/// Half-chord angle `∠COD` for a cap of radius `r` whose chord passes at
/// axis offset `t` from the center:
/// `2·asin(√((sin²(r/2) − sin²(t/2)) / (1 − 2·sin²(t/2))))`.
///
/// The caller picks the `(r0, ∠AOC)` or `(r1, ∠BOC)` variant whose
/// denominator `1 − 2·sin²(t/2) = cos(t)` is larger. A slightly negative
/// numerator from floating-point noise is clamped to zero.
pub fn half_chord_angle(r: Radians, t: Radians) -> Radians {
    let (r, t) = (r.value(), t.value());
    debug_assert!(r > 0.0 && r <= PI / 2.0, "cap radius r = {r}");
    debug_assert!(t.abs() <= r + 1e-12, "axis offset t = {t} beyond r = {r}");
    let s_r = half_sin_sq(r);
    let s_t = half_sin_sq(t);
    let num = (s_r - s_t).max(0.0);
    debug_assert!(
        s_r - s_t > -1e-9,
        "numerator clamp too large: {}",
        s_r - s_t
    );
    let den = 1.0 - 2.0 * s_t;
    let u_sq = (num / den).clamp(0.0, 1.0);
    Radians(2.0 * u_sq.sqrt().asin())
}

#[inline]
fn half_sin_sq(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    s * s
}

/// Exact area of the intersection of two spherical caps with radii `r0`, `r1`
/// and center separation `d` (all in `[0, π]`).
///
/// Caps larger than a hemisphere are handled through their complements;
/// disjoint and nested configurations short-circuit, and at the exact branch
/// boundaries the disjoint/containment value wins. The intersecting case sums
/// two (possibly signed) segment areas, which also covers centers lying on
/// the same side of the chord.
pub fn cap_intersection_area(r0: Radians, r1: Radians, d: Radians) -> Result<f64> {
    let (r0, r1, d) = (r0.value(), r1.value(), d.value());
    for (name, v) in [("r0", r0), ("r1", r1), ("d", d)] {
        if !(0.0..=PI).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, π]")));
        }
    }
    let g0 = CapGeom::new(r0);
    let g1 = CapGeom::new(r1);
    let ctx = SeparationGeom::new(d);
    Ok(pair_intersection(&g0, &g1, &ctx))
}

// ---------------------------------------------------------------------------
// Fused intersection path.
//
// The covariance double sum evaluates the intersection area for millions of
// (r_i, r_j, d) triples, so the per-cap and per-distance trig is hoisted into
// `CapGeom` / `SeparationGeom` and the remaining per-pair work runs on
// half-angle tangents: two acos, one or two atan, and a few square roots.
// ---------------------------------------------------------------------------

/// Per-cap quantities reused across intersection evaluations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CapGeom {
    /// Raw radius in [0, π].
    pub r: f64,
    /// Cap area of the raw radius.
    pub area: f64,
    /// Whether the raw cap exceeds a hemisphere (complement used instead).
    big: bool,
    /// Reduced radius: `r` itself, or `π − r` when `big`.
    red_r: f64,
    /// sin²(red_r / 2).
    red_shs: f64,
    /// 1 / sin(red_r); only used in the intersecting branch where red_r > 0.
    red_inv_sin: f64,
    /// Cap area of the reduced radius.
    red_area: f64,
}

impl CapGeom {
    pub fn new(r: f64) -> Self {
        debug_assert!((0.0..=PI).contains(&r));
        let big = r > PI / 2.0;
        let red_r = if big { PI - r } else { r };
        let red_shs = half_sin_sq(red_r);
        let red_inv_sin = if red_r > 0.0 {
            1.0 / red_r.sin()
        } else {
            f64::INFINITY
        };
        let red_area = SPHERE_AREA * red_shs;
        let area = if big {
            SPHERE_AREA - red_area
        } else {
            red_area
        };
        CapGeom {
            r,
            area,
            big,
            red_r,
            red_shs,
            red_inv_sin,
            red_area,
        }
    }
}

/// Per-distance quantities for both `d` and its complement `π − d`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SeparationGeom {
    pub d: f64,
    direct: HalfDist,
    mirror: HalfDist,
}

#[derive(Debug, Clone, Copy)]
struct HalfDist {
    d: f64,
    /// tan(d/2); huge but finite at d = π, never consumed there because the
    /// disjoint/containment checks fire first.
    tan_half: f64,
    /// cot(d/2) = 1 / tan(d/2).
    cot_half: f64,
    /// tan(d/4).
    quarter_tan: f64,
}

impl HalfDist {
    fn new(d: f64) -> Self {
        let (s, c) = (0.5 * d).sin_cos();
        let tan_half = s / c;
        HalfDist {
            d,
            tan_half,
            cot_half: c / s,
            quarter_tan: half_tan(tan_half),
        }
    }
}

impl SeparationGeom {
    pub fn new(d: f64) -> Self {
        debug_assert!((0.0..=PI).contains(&d));
        SeparationGeom {
            d,
            direct: HalfDist::new(d),
            mirror: HalfDist::new(PI - d),
        }
    }
}

/// tan(θ/2) from tan(θ) for θ ∈ (−π/2, π/2), computed without cancellation.
#[inline]
fn half_tan(t: f64) -> f64 {
    let a = t.abs();
    if a > 1e150 {
        // tan(θ) → ±∞ means θ → ±π/2, so tan(θ/2) → ±1.
        return t.signum();
    }
    t / (1.0 + (1.0 + t * t).sqrt())
}

/// Intersection area for prepared caps. Total over the full domain.
#[inline]
pub(crate) fn pair_intersection(g0: &CapGeom, g1: &CapGeom, ctx: &SeparationGeom) -> f64 {
    // Cheap branches on raw radii: they hold regardless of cap size.
    let d = ctx.d;
    if g0.r + g1.r <= d {
        return 0.0;
    }
    if g1.r <= g0.r - d {
        return g1.area;
    }
    if g0.r <= g1.r - d {
        return g0.area;
    }
    match (g0.big, g1.big) {
        (false, false) => reduced_intersection(g0, g1, &ctx.direct),
        (true, false) => g1.area - reduced_intersection(g0, g1, &ctx.mirror),
        (false, true) => g0.area - reduced_intersection(g0, g1, &ctx.mirror),
        (true, true) => g0.area + g1.area - SPHERE_AREA + reduced_intersection(g0, g1, &ctx.direct),
    }
}

/// Intersection of the reduced caps (radii ≤ π/2) at distance `hd.d`.
fn reduced_intersection(g0: &CapGeom, g1: &CapGeom, hd: &HalfDist) -> f64 {
    let d = hd.d;
    // The complement reductions can land back in a trivial branch.
    if g0.red_r + g1.red_r <= d {
        return 0.0;
    }
    if g1.red_r <= g0.red_r - d {
        return g1.red_area;
    }
    if g0.red_r <= g1.red_r - d {
        return g0.red_area;
    }

    // Split offset as a tangent: q = tan(x) from the sin² form of the offset
    // equation. Equal radii short-circuit to the symmetric split, which also
    // covers the 0/0 case of two exact hemispheres. For unequal radii the
    // denominator is positive in exact arithmetic; the clamp keeps rounding
    // from flipping its sign when both radii sit within an ulp of π/2.
    let q = if g0.red_shs == g1.red_shs {
        0.0
    } else {
        let den = (1.0 - (g0.red_shs + g1.red_shs)).max(f64::MIN_POSITIVE);
        hd.cot_half * (g0.red_shs - g1.red_shs) / den
    };

    // tan(∠AOC) and tan(∠BOC) by tangent addition. Both angles lie in
    // (−π/2, π/2]; a collapsing denominator means the angle sits at +π/2
    // (only the positive end is reachable), so the half-angle tangent
    // saturates to +1 there regardless of the garbage quotient sign.
    let den0 = 1.0 - hd.tan_half * q;
    let den1 = 1.0 + hd.tan_half * q;
    let t0 = (hd.tan_half + q) / den0;
    let t1 = (hd.tan_half - q) / den1;
    let w0 = if q == 0.0 {
        hd.quarter_tan
    } else if den0 <= 0.0 || !t0.is_finite() {
        1.0
    } else {
        half_tan(t0)
    };
    let w1 = if q == 0.0 {
        hd.quarter_tan
    } else if den1 <= 0.0 || !t1.is_finite() {
        1.0
    } else {
        half_tan(t1)
    };

    // cos(t), sin(t), sin²(t/2) from w = tan(t/2).
    let w0_sq = w0 * w0;
    let w1_sq = w1 * w1;
    let inv0 = 1.0 / (1.0 + w0_sq);
    let inv1 = 1.0 / (1.0 + w1_sq);
    let cos_t0 = (1.0 - w0_sq) * inv0;
    let cos_t1 = (1.0 - w1_sq) * inv1;
    let sin_t0 = 2.0 * w0 * inv0;
    let sin_t1 = 2.0 * w1 * inv1;
    let shs_t0 = w0_sq * inv0;
    let shs_t1 = w1_sq * inv1;

    // sin²(∠COD / 2) from the variant with the larger denominator.
    let u_sq = if cos_t0 >= cos_t1 {
        (g0.red_shs - shs_t0) / cos_t0
    } else {
        (g1.red_shs - shs_t1) / cos_t1
    };
    debug_assert!(u_sq > -1e-7, "half-chord numerator clamp too large: {u_sq}");
    let u_sq = u_sq.clamp(0.0, 1.0 - f64::EPSILON);
    // tan(∠COD / 2) = sin/√(1−sin²) of the half angle.
    let cod_half_tan = (u_sq / (1.0 - u_sq)).sqrt();
    let cos_cod = 1.0 - 2.0 * u_sq;

    // Spherical angles at the cap centers. The textbook form
    // acos(cot(r)·tan(t)) is 0·∞ at r = t = π/2; substituting
    // cos(t) = cos(r)/cos(∠COD) gives the equivalent stable form
    // acos(sin(t)·cos(∠COD)/sin(r)).
    let ang0 = (sin_t0 * cos_cod * g0.red_inv_sin).clamp(-1.0, 1.0).acos();
    let ang1 = (sin_t1 * cos_cod * g1.red_inv_sin).clamp(-1.0, 1.0).acos();

    // Sum of the two right-triangle areas, folding the two atan calls into
    // one when safely inside the principal branch.
    let p = cod_half_tan * w0;
    let s = cod_half_tan * w1;
    let triangle_sum = if p * s < 0.5 {
        ((p + s) / (1.0 - p * s)).atan()
    } else {
        p.atan() + s.atan()
    };

    // Two segments: 2·(sector − triangle) each, sectors 2·ang·sin²(r/2).
    let area = 4.0 * (ang0 * g0.red_shs + ang1 * g1.red_shs) - 4.0 * triangle_sum;
    debug_assert!(area > -1e-7, "negative intersection area: {area}");
    area.max(0.0)
}
