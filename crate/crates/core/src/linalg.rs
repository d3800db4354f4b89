//! Small fixed-size helpers: characteristic polynomials and polynomial roots.
//!
//! The drift matrix is 4×4, so its spectrum comes from the quartic
//! characteristic polynomial rather than a general eigensolver.

use nalgebra::Matrix4;
use num_complex::Complex64;

/// Coefficients `[c0, c1, c2, c3]` of the monic characteristic polynomial
/// `det(λI − M) = λ⁴ + c3 λ³ + c2 λ² + c1 λ + c0` (Faddeev–LeVerrier).
pub fn char_poly(m: &Matrix4<f64>) -> [f64; 4] {
    let mut coeffs = [0.0; 4];
    let mut aux = Matrix4::zeros();
    let mut c_prev = 1.0;
    for k in 1..=4 {
        aux = m * aux + Matrix4::identity() * c_prev;
        let c = -(m * aux).trace() / k as f64;
        coeffs[4 - k] = c;
        c_prev = c;
    }
    coeffs
}

fn horner(monic_low: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // p(z) = z^n + c_{n-1} z^{n-1} + ... + c_0, and p'(z)
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in monic_low.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of the monic polynomial with low-order coefficients
/// `monic_low` (`c0, c1, ...`), by Aberth–Ehrlich iteration followed by a
/// Newton polish. Roots are returned sorted by real part, then imaginary.
pub fn poly_roots(monic_low: &[f64]) -> Vec<Complex64> {
    let n = monic_low.len();
    if n == 0 {
        return Vec::new();
    }
    // Cauchy bound on root moduli.
    let radius = 1.0 + monic_low.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let (p, dp) = horner(monic_low, roots[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = roots[i] - roots[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                roots[i] -= step;
                max_step = max_step.max(step.norm() / roots[i].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(monic_low, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() || step.norm() > 1e-6 * r.norm().max(1.0) {
                break;
            }
            *r -= step;
        }
    }

    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Eigenvalues of a real 4×4 matrix via its characteristic polynomial.
pub fn eigenvalues4(m: &Matrix4<f64>) -> Vec<Complex64> {
    poly_roots(&char_poly(m))
}

/// Routh–Hurwitz test for a monic quartic `λ⁴ + c3 λ³ + c2 λ² + c1 λ + c0`:
/// true iff every root has strictly negative real part.
pub fn hurwitz_stable_quartic(c: &[f64; 4]) -> bool {
    let [c0, c1, c2, c3] = *c;
    c0 > 0.0
        && c1 > 0.0
        && c2 > 0.0
        && c3 > 0.0
        && c3 * c2 - c1 > 0.0
        && c3 * c2 * c1 - c1 * c1 - c3 * c3 * c0 > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn char_poly_of_diagonal() {
        let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 2.0, 3.0, 4.0));
        // (λ-1)(λ-2)(λ-3)(λ-4) = λ⁴ - 10λ³ + 35λ² - 50λ + 24
        let c = char_poly(&m);
        assert_eq!(c, [24.0, -50.0, 35.0, -10.0]);
    }

    #[test]
    fn roots_of_known_quartic() {
        let roots = poly_roots(&[24.0, -50.0, 35.0, -10.0]);
        for (r, want) in roots.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert_abs_diff_eq!(r.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(r.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn complex_pair_roots() {
        // (λ² + 1)(λ² + 2λ + 5): roots ±i, -1±2i
        let roots = poly_roots(&[5.0, 2.0, 6.0, 2.0]);
        let mut found = roots.iter().map(|r| (r.re, r.im)).collect::<Vec<_>>();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let want = [(-1.0, -2.0), (-1.0, 2.0), (0.0, -1.0), (0.0, 1.0)];
        for (f, w) in found.iter().zip(want) {
            assert_abs_diff_eq!(f.0, w.0, epsilon = 1e-12);
            assert_abs_diff_eq!(f.1, w.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn repeated_roots_converge() {
        // (λ + 0.2)² + 1 squared: double pair at -0.2 ± i
        let p = [1.0816, 0.832, 2.24, 0.8];
        let roots = poly_roots(&p);
        for r in roots {
            assert_abs_diff_eq!(r.re, -0.2, epsilon = 1e-6);
            assert_abs_diff_eq!(r.im.abs(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn hurwitz_matches_roots() {
        assert!(hurwitz_stable_quartic(&[24.0, 50.0, 35.0, 10.0]));
        assert!(!hurwitz_stable_quartic(&[24.0, -50.0, 35.0, -10.0]));
        assert!(!hurwitz_stable_quartic(&[5.0, 2.0, 6.0, 2.0]));
    }
}
