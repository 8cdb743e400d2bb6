//! Adaptive Gauss–Kronrod line quadrature and adaptive triangle cubature.

use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

/// One 15-point Kronrod panel; returns `(kronrod, |kronrod - gauss|)`.
fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let fc = f(center);
    let mut kronrod = fc * T::of(WGK[7]);
    let mut gauss = fc * T::of(WG[3]);
    for j in 0..7 {
        let dx = half * T::of(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod += T::of(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss += T::of(WG[j / 2]) * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, depth: u32) -> T {
    let (value, err) = gk15(f, a, b);
    let roundoff = T::of(50.0) * T::epsilon() * value.abs();
    if err <= tol || err <= roundoff || depth >= MAX_DEPTH || !err.is_finite() {
        return value;
    }
    let mid = (a + b) * T::half();
    adapt(f, a, mid, tol * T::half(), depth + 1)
        + adapt(f, mid, b, tol * T::half(), depth + 1)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by recursive
/// bisection of 15-point Gauss–Kronrod panels.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    adapt(&f, a, b, tol, 0)
}

/// [`integrate`] at the scalar type's default tolerance.
pub fn integrate_default<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T) -> T {
    integrate(f, a, b, T::of(T::QUAD_TOL))
}

/// Triangle in the plane, vertices as `(x, y)`.
pub type Triangle<T> = [(T, T); 3];

// Degree-5 seven-point rule (barycentric coordinates, weights relative to area).
fn radon7<T: Scalar, F: Fn(T, T) -> T>(f: &F, tri: &Triangle<T>) -> T {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w0 = 9.0 / 40.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;

    let [(x0, y0), (x1, y1), (x2, y2)] = *tri;
    let at = |l0: f64, l1: f64, l2: f64| {
        let (l0, l1, l2) = (T::of(l0), T::of(l1), T::of(l2));
        f(l0 * x0 + l1 * x1 + l2 * x2, l0 * y0 + l1 * y1 + l2 * y2)
    };
    let third = 1.0 / 3.0;
    let sum = T::of(w0) * at(third, third, third)
        + T::of(w1) * (at(b1, a1, a1) + at(a1, b1, a1) + at(a1, a1, b1))
        + T::of(w2) * (at(b2, a2, a2) + at(a2, b2, a2) + at(a2, a2, b2));
    sum * triangle_area(tri)
}

/// Unsigned area of a triangle.
pub fn triangle_area<T: Scalar>(tri: &Triangle<T>) -> T {
    let [(x0, y0), (x1, y1), (x2, y2)] = *tri;
    ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)).abs() * T::half()
}

fn split4<T: Scalar>(tri: &Triangle<T>) -> [Triangle<T>; 4] {
    let mid = |p: (T, T), q: (T, T)| ((p.0 + q.0) * T::half(), (p.1 + q.1) * T::half());
    let [a, b, c] = *tri;
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

fn adapt_tri<T: Scalar, F: Fn(T, T) -> T>(f: &F, tri: &Triangle<T>, coarse: T, tol: T, depth: u32) -> T {
    let kids = split4(tri);
    let parts = kids.map(|k| radon7(f, &k));
    let fine = parts.iter().copied().sum::<T>();
    if (fine - coarse).abs() <= tol || depth >= 12 {
        return fine;
    }
    let child_tol = tol * T::of(0.25);
    kids.iter()
        .zip(parts)
        .map(|(k, p)| adapt_tri(f, k, p, child_tol, depth + 1))
        .sum()
}

/// Integrates `f(x, y)` over a triangle to absolute tolerance `tol` by
/// recursive 1-to-4 refinement of a degree-5 rule.
pub fn integrate_triangle<T: Scalar, F: Fn(T, T) -> T>(f: F, tri: &Triangle<T>, tol: T) -> T {
    let coarse = radon7(&f, tri);
    adapt_tri(&f, tri, coarse, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_log_integrals() {
        let v = integrate(|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert_relative_eq!(v, 4.0, max_relative = 1e-14);
        let v = integrate(|x: f64| 1.0 / x, 1.0, std::f64::consts::E, 1e-12);
        assert_relative_eq!(v, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let f = |x: f64| x.exp();
        let fwd = integrate(f, 0.0, 1.0, 1e-12);
        let back = integrate(f, 1.0, 0.0, 1e-12);
        assert_relative_eq!(fwd, -back, max_relative = 1e-15);
    }

    #[test]
    fn sqrt_endpoint_singularity_converges() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn f32_instantiation() {
        let v = integrate_default(|x: f32| x * x, 0.0f32, 3.0f32);
        assert!((v - 9.0).abs() < 1e-4);
    }

    #[test]
    fn triangle_rule_exact_for_quintics() {
        let tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        // ∫∫ x^2 y^3 over the unit simplex = 2! 3! / 7! = 12/5040
        let v = integrate_triangle(|x: f64, y: f64| x * x * y.powi(3), &tri, 1e-14);
        assert_relative_eq!(v, 12.0 / 5040.0, max_relative = 1e-12);
    }

    #[test]
    fn triangle_smooth_nonpolynomial() {
        let tri = [(1.0, 1.0), (3.0, 1.0), (1.0, 2.0)];
        // ∫_1^3 ∫_1^{2 - (x-1)/2} exp(x) dy dx = ∫_1^3 exp(x)(1 - (x-1)/2) dx
        let exact = integrate(
            |x: f64| x.exp() * (1.0 - (x - 1.0) / 2.0),
            1.0,
            3.0,
            1e-13,
        );
        let v = integrate_triangle(|x: f64, _y: f64| x.exp(), &tri, 1e-11);
        assert_relative_eq!(v, exact, max_relative = 1e-10);
    }
}
