use proptest::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use wgident::bspline::{
    fourier_magnitude, gaussian_fourier, gaussian_fourier_bound, make_coefficient_basis, matched_gaussian_sigma,
    SplineBasis,
};

#[test]
fn partition_of_unity_at_random_points() {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for (count, degree) in [(7, 6), (12, 3), (9, 0), (20, 5)] {
        let basis = make_coefficient_basis(-1.0, 2.5, count, degree).unwrap();
        for _ in 0..1000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let x = -1.0 + 2.5 * (state >> 11) as f64 / (1u64 << 53) as f64;
            let sum: f64 = (0..count).map(|m| basis.eval(m, 0, x).unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "M={count} d={degree} x={x} sum={sum}");
        }
    }
}

#[test]
fn derivatives_match_central_differences() {
    let basis = make_coefficient_basis(0.0, 2.0, 7, 6).unwrap();
    let h = basis.knot_spacing();
    let step = 1e-6;
    for m in 0..7 {
        for i in 0..400 {
            let x = 0.0025 + i as f64 * 0.005;
            // Stay away from knots where high derivatives jump.
            let frac = (x / h).fract();
            if frac < 1e-3 || frac > 1.0 - 1e-3 {
                continue;
            }
            for r in 1..=4 {
                let fd = (basis.eval(m, r - 1, x + step).unwrap() - basis.eval(m, r - 1, x - step).unwrap()) / (2.0 * step);
                let exact = basis.eval(m, r, x).unwrap();
                let scale = 1.0f64.max(exact.abs());
                assert!((fd - exact).abs() < 1e-5 * scale, "m={m} r={r} x={x}: {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn dirichlet_interior_fits_inside() {
    let basis = SplineBasis::dirichlet_interior(0.0, 1.0, 6, 0.05).unwrap();
    for m in 0..basis.count() {
        let (a, b) = basis.support(m);
        assert!(a >= -1e-12 && b <= 1.0 + 1e-12);
        for r in 0..6 {
            let tol = 1e-9 / 0.05f64.powi(r as i32);
            assert!(basis.eval(m, r, 0.0).unwrap().abs() < tol);
            assert!(basis.eval(m, r, 1.0).unwrap().abs() < tol);
        }
    }
}

#[test]
fn moments_follow_closed_forms() {
    for (degree, h) in [(6, 0.4), (0, 1.0), (3, 0.25), (5, 0.1)] {
        let basis = SplineBasis::dirichlet_interior(0.0, 5.0, degree, h).unwrap();
        let p = (degree + 1) as f64;
        for m in 0..basis.count().min(4) {
            let mo = basis.moments(m).unwrap();
            let l1 = basis.start(m);
            let mu1 = l1 + p * h / 2.0;
            let mu2 = mu1 * mu1 + p * h * h / 12.0;
            assert!((mo.m0 - 1.0).abs() < 1e-10);
            assert!((mo.m1 - mu1).abs() < 1e-10, "{} vs {mu1}", mo.m1);
            assert!((mo.m2 - mu2).abs() < 1e-10, "{} vs {mu2}", mo.m2);
        }
    }
}

#[test]
fn box_spline_mean_is_half() {
    let basis = SplineBasis::dirichlet_interior(0.0, 1.0, 0, 1.0).unwrap();
    assert!((basis.moments(0).unwrap().m1 - 0.5).abs() < 1e-12);
}

#[test]
fn centred_moments_match_gaussian() {
    let (p, h) = (7, 0.4);
    let basis = SplineBasis::centered(p - 1, h).unwrap();
    let mo = basis.moments(0).unwrap();
    let sigma = matched_gaussian_sigma(p, h);
    assert!((mo.m0 - 1.0).abs() < 1e-8);
    assert!(mo.m1.abs() < 1e-8);
    assert!((mo.m2 - sigma * sigma).abs() < 1e-8);
    assert!((mo.m2 - 7.0 * 0.16 / 12.0).abs() < 1e-8);
    assert!(mo.m3.abs() < 1e-8);
}

#[test]
fn fourier_transform_matches_fft_of_samples() {
    let (p, h) = (7, 0.4);
    let basis = SplineBasis::centered(p - 1, h).unwrap();
    // A window of length 2 pi puts w = 3 exactly on bin 3.
    let n = 1 << 14;
    let len = 2.0 * std::f64::consts::PI;
    let dx = len / n as f64;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|j| {
            let x = -0.5 * len + j as f64 * dx;
            Complex::new(basis.eval(0, 0, x).unwrap() / h, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let numeric = buf[3].norm() * dx;
    let exact = fourier_magnitude(p, h, 3.0);
    assert!(((numeric - exact) / exact).abs() < 1e-4, "{numeric} vs {exact}");
    assert_eq!(fourier_magnitude(p, h, 0.0), 1.0);
    assert!(fourier_magnitude(1, 2.0 * std::f64::consts::PI, 1.0).abs() < 1e-15);
}

#[test]
fn gaussian_closeness_bound_holds() {
    let (p, h) = (7, 0.4);
    let (bound, limit) = gaussian_fourier_bound(p, h);
    let n = 20_000;
    let worst = (0..=n)
        .map(|i| {
            let w = -limit + 2.0 * limit * i as f64 / n as f64;
            (gaussian_fourier(p, h, w) - fourier_magnitude(p, h, w)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst <= bound, "{worst} > {bound}");
}

proptest! {
    #[test]
    fn periodic_values_repeat(m in 0usize..4, x in 0.0f64..1.0) {
        let basis = make_coefficient_basis(0.0, 1.0, 4, 2).unwrap();
        let a = basis.eval(m, 0, x).unwrap();
        let b = basis.eval(m, 0, x + 1.0).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn unity_for_any_size(count in 7usize..30, x in -3.0f64..3.0) {
        let basis = make_coefficient_basis(-3.0, 6.0, count, 6).unwrap();
        let sum: f64 = (0..count).map(|m| basis.eval(m, 0, x).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }
}
