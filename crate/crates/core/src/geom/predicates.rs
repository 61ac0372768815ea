//! Sign-exact orientation and in-sphere predicates.
//!
//! Each predicate first evaluates a floating-point determinant guarded by a
//! static error bound (Shewchuk-style filter). When the magnitude falls
//! below the bound, the same determinant is re-evaluated in exact dyadic
//! arithmetic (arbitrary-precision mantissa times a power of two), so the
//! returned sign is always the sign of the exact real value.

use num_bigint::{BigInt, Sign};
use num_traits::Zero;

use super::{GeomError, Point3};

// Shewchuk's half-ulp epsilon: 2^-53.
const EPS: f64 = f64::EPSILON * 0.5;

fn orient3d_bound() -> f64 {
    (7.0 + 56.0 * EPS) * EPS
}

fn insphere_bound() -> f64 {
    (16.0 + 224.0 * EPS) * EPS
}

/// Sign of det [b - a; c - a; d - a].
///
/// +1 when `d` lies on the side of plane (a, b, c) that the right-handed
/// normal (b - a) x (c - a) points to, -1 on the other side, 0 when
/// coplanar. Exact for all representable inputs.
pub fn orient3d(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> i8 {
    let bax = b.x - a.x;
    let bay = b.y - a.y;
    let baz = b.z - a.z;
    let cax = c.x - a.x;
    let cay = c.y - a.y;
    let caz = c.z - a.z;
    let dax = d.x - a.x;
    let day = d.y - a.y;
    let daz = d.z - a.z;

    let cayxdaz = cay * daz;
    let cazxday = caz * day;
    let caxxdaz = cax * daz;
    let cazxdax = caz * dax;
    let caxxday = cax * day;
    let cayxdax = cay * dax;

    let det = bax * (cayxdaz - cazxday) - bay * (caxxdaz - cazxdax) + baz * (caxxday - cayxdax);
    let permanent = bax.abs() * (cayxdaz.abs() + cazxday.abs())
        + bay.abs() * (caxxdaz.abs() + cazxdax.abs())
        + baz.abs() * (caxxday.abs() + cayxdax.abs());
    let errbound = orient3d_bound() * permanent;
    if det > errbound {
        return 1;
    }
    if det < -errbound {
        return -1;
    }
    orient3d_exact(a, b, c, d)
}

/// Always-exact evaluation of [`orient3d`] (no floating-point filter).
pub fn orient3d_exact(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> i8 {
    let [ax, ay, az] = dx3(a);
    let [bx, by, bz] = dx3(b);
    let [cx, cy, cz] = dx3(c);
    let [dx, dy, dz] = dx3(d);

    let bax = bx.sub(&ax);
    let bay = by.sub(&ay);
    let baz = bz.sub(&az);
    let cax = cx.sub(&ax);
    let cay = cy.sub(&ay);
    let caz = cz.sub(&az);
    let dax = dx.sub(&ax);
    let day = dy.sub(&ay);
    let daz = dz.sub(&az);

    det3(&bax, &bay, &baz, &cax, &cay, &caz, &dax, &day, &daz).signum()
}

/// Naive floating-point orientation sign without any filter.
///
/// Benchmark-only variant; near-degenerate inputs can return a wrong sign.
pub fn orient3d_fast(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> i8 {
    let det = (b - a).cross(&(c - a)).dot(&(d - a));
    if det > 0.0 {
        1
    } else if det < 0.0 {
        -1
    } else {
        0
    }
}

/// +1 iff `e` lies strictly inside the circumsphere of tetrahedron
/// (a, b, c, d), -1 strictly outside, 0 exactly on it. The tetrahedron may
/// have either orientation but must not be degenerate.
pub fn insphere(
    a: &Point3,
    b: &Point3,
    c: &Point3,
    d: &Point3,
    e: &Point3,
) -> Result<i8, GeomError> {
    let orient = orient3d(a, b, c, d);
    if orient == 0 {
        return Err(GeomError::DegenerateTetrahedron);
    }
    Ok(-orient * insphere_raw(a, b, c, d, e))
}

/// Always-exact evaluation of [`insphere`].
pub fn insphere_exact(
    a: &Point3,
    b: &Point3,
    c: &Point3,
    d: &Point3,
    e: &Point3,
) -> Result<i8, GeomError> {
    let orient = orient3d_exact(a, b, c, d);
    if orient == 0 {
        return Err(GeomError::DegenerateTetrahedron);
    }
    Ok(-orient * insphere_raw_exact(a, b, c, d, e))
}

// Sign of the 4x4 lifted determinant in Shewchuk's row order; the caller
// folds in the tetrahedron orientation.
fn insphere_raw(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> i8 {
    let aex = a.x - e.x;
    let aey = a.y - e.y;
    let aez = a.z - e.z;
    let bex = b.x - e.x;
    let bey = b.y - e.y;
    let bez = b.z - e.z;
    let cex = c.x - e.x;
    let cey = c.y - e.y;
    let cez = c.z - e.z;
    let dex = d.x - e.x;
    let dey = d.y - e.y;
    let dez = d.z - e.z;

    let aexbey = aex * bey;
    let bexaey = bex * aey;
    let ab = aexbey - bexaey;
    let bexcey = bex * cey;
    let cexbey = cex * bey;
    let bc = bexcey - cexbey;
    let cexdey = cex * dey;
    let dexcey = dex * cey;
    let cd = cexdey - dexcey;
    let dexaey = dex * aey;
    let aexdey = aex * dey;
    let da = dexaey - aexdey;
    let aexcey = aex * cey;
    let cexaey = cex * aey;
    let ac = aexcey - cexaey;
    let bexdey = bex * dey;
    let dexbey = dex * bey;
    let bd = bexdey - dexbey;

    let abc = aez * bc - bez * ac + cez * ab;
    let bcd = bez * cd - cez * bd + dez * bc;
    let cda = cez * da + dez * ac + aez * cd;
    let dab = dez * ab + aez * bd + bez * da;

    let alift = aex * aex + aey * aey + aez * aez;
    let blift = bex * bex + bey * bey + bez * bez;
    let clift = cex * cex + cey * cey + cez * cez;
    let dlift = dex * dex + dey * dey + dez * dez;

    let det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);

    let aezp = aez.abs();
    let bezp = bez.abs();
    let cezp = cez.abs();
    let dezp = dez.abs();
    let aexbeyp = aexbey.abs();
    let bexaeyp = bexaey.abs();
    let bexceyp = bexcey.abs();
    let cexbeyp = cexbey.abs();
    let cexdeyp = cexdey.abs();
    let dexceyp = dexcey.abs();
    let dexaeyp = dexaey.abs();
    let aexdeyp = aexdey.abs();
    let aexceyp = aexcey.abs();
    let cexaeyp = cexaey.abs();
    let bexdeyp = bexdey.abs();
    let dexbeyp = dexbey.abs();

    let permanent = ((cexdeyp + dexceyp) * bezp
        + (dexbeyp + bexdeyp) * cezp
        + (bexceyp + cexbeyp) * dezp)
        * alift
        + ((dexaeyp + aexdeyp) * cezp + (aexceyp + cexaeyp) * dezp + (cexdeyp + dexceyp) * aezp)
            * blift
        + ((aexbeyp + bexaeyp) * dezp + (bexdeyp + dexbeyp) * aezp + (dexaeyp + aexdeyp) * bezp)
            * clift
        + ((bexceyp + cexbeyp) * aezp + (cexaeyp + aexceyp) * bezp + (aexbeyp + bexaeyp) * cezp)
            * dlift;
    let errbound = insphere_bound() * permanent;
    if det > errbound {
        return 1;
    }
    if det < -errbound {
        return -1;
    }
    insphere_raw_exact(a, b, c, d, e)
}

fn insphere_raw_exact(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> i8 {
    let [ax, ay, az] = dx3(a);
    let [bx, by, bz] = dx3(b);
    let [cx, cy, cz] = dx3(c);
    let [dx, dy, dz] = dx3(d);
    let [ex, ey, ez] = dx3(e);

    let aex = ax.sub(&ex);
    let aey = ay.sub(&ey);
    let aez = az.sub(&ez);
    let bex = bx.sub(&ex);
    let bey = by.sub(&ey);
    let bez = bz.sub(&ez);
    let cex = cx.sub(&ex);
    let cey = cy.sub(&ey);
    let cez = cz.sub(&ez);
    let dex = dx.sub(&ex);
    let dey = dy.sub(&ey);
    let dez = dz.sub(&ez);

    let ab = aex.mul(&bey).sub(&bex.mul(&aey));
    let bc = bex.mul(&cey).sub(&cex.mul(&bey));
    let cd = cex.mul(&dey).sub(&dex.mul(&cey));
    let da = dex.mul(&aey).sub(&aex.mul(&dey));
    let ac = aex.mul(&cey).sub(&cex.mul(&aey));
    let bd = bex.mul(&dey).sub(&dex.mul(&bey));

    let abc = aez.mul(&bc).sub(&bez.mul(&ac)).add(&cez.mul(&ab));
    let bcd = bez.mul(&cd).sub(&cez.mul(&bd)).add(&dez.mul(&bc));
    let cda = cez.mul(&da).add(&dez.mul(&ac)).add(&aez.mul(&cd));
    let dab = dez.mul(&ab).add(&aez.mul(&bd)).add(&bez.mul(&da));

    let alift = aex.mul(&aex).add(&aey.mul(&aey)).add(&aez.mul(&aez));
    let blift = bex.mul(&bex).add(&bey.mul(&bey)).add(&bez.mul(&bez));
    let clift = cex.mul(&cex).add(&cey.mul(&cey)).add(&cez.mul(&cez));
    let dlift = dex.mul(&dex).add(&dey.mul(&dey)).add(&dez.mul(&dez));

    dlift
        .mul(&abc)
        .sub(&clift.mul(&dab))
        .add(&blift.mul(&cda))
        .sub(&alift.mul(&bcd))
        .signum()
}

fn dx3(p: &Point3) -> [Dyadic; 3] {
    [Dyadic::from_f64(p.x), Dyadic::from_f64(p.y), Dyadic::from_f64(p.z)]
}

#[allow(clippy::too_many_arguments)]
fn det3(
    m00: &Dyadic,
    m01: &Dyadic,
    m02: &Dyadic,
    m10: &Dyadic,
    m11: &Dyadic,
    m12: &Dyadic,
    m20: &Dyadic,
    m21: &Dyadic,
    m22: &Dyadic,
) -> Dyadic {
    let c0 = m11.mul(m22).sub(&m12.mul(m21));
    let c1 = m10.mul(m22).sub(&m12.mul(m20));
    let c2 = m10.mul(m21).sub(&m11.mul(m20));
    m00.mul(&c0).sub(&m01.mul(&c1)).add(&m02.mul(&c2))
}

/// Exact dyadic rational: mantissa * 2^exp. Addition, subtraction and
/// multiplication of f64-derived values are exact; only the sign is read.
struct Dyadic {
    mantissa: BigInt,
    exp: i64,
}

impl Dyadic {
    fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "predicate input must be finite");
        if v == 0.0 {
            return Self { mantissa: BigInt::zero(), exp: 0 };
        }
        let bits = v.to_bits();
        let sign_neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let mut mantissa = BigInt::from(mant);
        if sign_neg {
            mantissa = -mantissa;
        }
        Self { mantissa, exp }
    }

    fn add(&self, other: &Self) -> Self {
        if self.mantissa.is_zero() {
            return Self { mantissa: other.mantissa.clone(), exp: other.exp };
        }
        if other.mantissa.is_zero() {
            return Self { mantissa: self.mantissa.clone(), exp: self.exp };
        }
        let exp = self.exp.min(other.exp);
        let a = &self.mantissa << (self.exp - exp) as u64;
        let b = &other.mantissa << (other.exp - exp) as u64;
        Self { mantissa: a + b, exp }
    }

    fn sub(&self, other: &Self) -> Self {
        self.add(&Self { mantissa: -other.mantissa.clone(), exp: other.exp })
    }

    fn mul(&self, other: &Self) -> Self {
        Self { mantissa: &self.mantissa * &other.mantissa, exp: self.exp + other.exp }
    }

    fn signum(&self) -> i8 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tetra() -> [Point3; 4] {
        [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ]
    }

    #[test]
    fn orient3d_unit_tetra() {
        let [a, b, c, d] = unit_tetra();
        assert_eq!(orient3d(&a, &b, &c, &d), 1);
        assert_eq!(orient3d(&a, &b, &c, &Point3::new(0.3, 0.3, 0.0)), 0);
        assert_eq!(orient3d(&a, &b, &c, &Point3::new(0.0, 0.0, -1.0)), -1);
    }

    #[test]
    fn insphere_unit_tetra() {
        let [a, b, c, d] = unit_tetra();
        let centroid = Point3::new(0.25, 0.25, 0.25);
        assert_eq!(insphere(&a, &b, &c, &d, &centroid), Ok(1));
        assert_eq!(insphere(&a, &b, &c, &d, &Point3::new(10.0, 10.0, 10.0)), Ok(-1));
        // Orientation of the tetrahedron must not change the answer.
        assert_eq!(insphere(&a, &c, &b, &d, &centroid), Ok(1));
        assert_eq!(insphere(&a, &c, &b, &d, &Point3::new(10.0, 10.0, 10.0)), Ok(-1));
    }

    #[test]
    fn insphere_on_circumsphere_of_regular_tetra_is_zero() {
        // Regular tetrahedron with exactly representable coordinates; its
        // circumsphere is centered at the origin with radius sqrt(3), so
        // (-1,-1,-1) lies exactly on it.
        let a = Point3::new(1.0, 1.0, 1.0);
        let b = Point3::new(1.0, -1.0, -1.0);
        let c = Point3::new(-1.0, 1.0, -1.0);
        let d = Point3::new(-1.0, -1.0, 1.0);
        let e = Point3::new(-1.0, -1.0, -1.0);
        assert_ne!(orient3d(&a, &b, &c, &d), 0);
        assert_eq!(insphere(&a, &b, &c, &d, &e), Ok(0));
    }

    #[test]
    fn insphere_rejects_degenerate_tetra() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        let d = Point3::new(0.4, 0.6, 0.0);
        assert_eq!(
            insphere(&a, &b, &c, &d, &Point3::new(0.0, 0.0, 1.0)),
            Err(GeomError::DegenerateTetrahedron)
        );
    }

    #[test]
    fn dyadic_roundtrip_signs() {
        for v in [0.0, 1.0, -1.0, 0.5, -3.75, 1e-300, -1e300, f64::MIN_POSITIVE] {
            let d = Dyadic::from_f64(v);
            assert_eq!(d.signum() as f64, v.signum() * f64::from(v != 0.0));
        }
        let a = Dyadic::from_f64(0.1);
        let b = Dyadic::from_f64(0.3);
        // 0.1 + 0.1 + 0.1 != 0.3 in binary floating point; the exact dyadic
        // difference must be nonzero with the correct sign.
        let sum = a.add(&a).add(&a);
        assert_eq!(sum.sub(&b).signum(), (0.1f64 + 0.1 + 0.1 - 0.3).signum() as i8);
    }

    // Sign-exactness on adversarial near-degenerate inputs: the filtered
    // predicate must agree with the always-exact route everywhere.
    #[test]
    fn filtered_matches_exact_near_coplanar() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        let mut mismatches = 0;
        for i in -20i32..=20 {
            for j in -20i32..=20 {
                // d hovers a few ulps around the plane z = 0.
                let z = i as f64 * f64::EPSILON * 0.25;
                let d = Point3::new(0.3 + j as f64 * 1e-3, 0.3, z);
                let fast = orient3d(&a, &b, &c, &d);
                let exact = orient3d_exact(&a, &b, &c, &d);
                if fast != exact {
                    mismatches += 1;
                }
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn filtered_insphere_matches_exact_near_cosphere() {
        // Points almost on the unit sphere: the filter must hand off to the
        // exact path and still give the true sign.
        let a = Point3::new(1.0, 0.0, 0.0);
        let b = Point3::new(0.0, 1.0, 0.0);
        let c = Point3::new(0.0, 0.0, 1.0);
        let d = Point3::new(-1.0, 0.0, 0.0);
        for i in -10i32..=10 {
            let r = 1.0 + i as f64 * f64::EPSILON;
            let s = 0.5f64.sqrt();
            let e = Point3::new(r * s, r * s, 0.0);
            let fast = insphere(&a, &b, &c, &d, &e).unwrap();
            let exact = insphere_exact(&a, &b, &c, &d, &e).unwrap();
            assert_eq!(fast, exact, "i = {i}");
        }
    }
}
