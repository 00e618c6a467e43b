//! Piecewise contraction of unbounded space into the open cube of radius 2.

use glam::DVec3;

/// Identity inside the unit L-infinity ball; outside it the dominant
/// coordinate is mapped to `(2 - 1/|x_j|) * sign(x_j)` and the others are
/// divided by the L-infinity norm.
pub fn contract(x: DVec3) -> DVec3 {
    let m = x.abs().max_element();
    if m <= 1.0 {
        return x;
    }
    let mut out = x / m;
    for j in 0..3 {
        if x[j].abs() == m {
            out[j] = (2.0 - 1.0 / m) * x[j].signum();
        }
    }
    out
}

/// Inverse of [`contract`] on the open cube `(-2, 2)^3`. Inputs on or beyond
/// the cube surface are pulled just inside it.
pub fn uncontract(s: DVec3) -> DVec3 {
    let s = s.clamp(DVec3::splat(-2.0 + 1e-9), DVec3::splat(2.0 - 1e-9));
    let m = s.abs().max_element();
    if m <= 1.0 {
        return s;
    }
    let norm = 1.0 / (2.0 - m);
    let mut out = s * norm;
    for j in 0..3 {
        if s[j].abs() == m {
            out[j] = norm * s[j].signum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_branch() {
        let p = DVec3::new(0.5, -0.3, 0.9);
        assert_eq!(contract(p), p);
        assert_eq!(contract(DVec3::new(1.0, -1.0, 1.0)), DVec3::new(1.0, -1.0, 1.0));
    }

    #[test]
    fn dominant_axis_branch() {
        let c = contract(DVec3::new(3.0, 0.0, 0.0));
        assert!((c.x - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!((c.y, c.z), (0.0, 0.0));
        let c = contract(DVec3::new(-4.0, 2.0, 1.0));
        assert!((c - DVec3::new(-1.75, 0.5, 0.25)).length() < 1e-15);
    }

    #[test]
    fn continuity_at_corner() {
        for eps in [1e-3, 1e-6] {
            let c = contract(DVec3::new(1.0 + eps, 1.0 + eps, 0.0));
            assert!((c - DVec3::new(1.0, 1.0, 0.0)).abs().max_element() <= 1.01 * eps);
        }
    }

    proptest! {
        #[test]
        fn bounded_and_invertible(x in -1e4f64..1e4, y in -1e4f64..1e4, z in -1e4f64..1e4) {
            let p = DVec3::new(x, y, z);
            let c = contract(p);
            prop_assert!(c.abs().max_element() < 2.0);
            let back = uncontract(c);
            prop_assert!((back - p).abs().max_element() <= 1e-6 * p.abs().max_element().max(1.0));
        }
    }
}
