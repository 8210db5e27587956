use psodrift::hdensity::{eval_density, make_h_density, HDensity};
use psodrift::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Density of `c_l r + c_g s` by direct convolution: the measure of the set
/// of `r` in [0, 1] with `(h - c_l r) / c_g` in [0, 1], over `|c_g|`.
fn convolution_density(c_l: f64, c_g: f64, h: f64) -> f64 {
    if c_g == 0.0 {
        return convolution_density(c_g, c_l, h);
    }
    // Solve 0 <= (h - c_l r) / c_g <= 1 for r.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if c_l == 0.0 {
        let s = h / c_g;
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
    } else {
        let a = h / c_l;
        let b = (h - c_g) / c_l;
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (hi - lo).max(0.0) / c_g.abs()
}

/// Composite Simpson on each piece between kinks, exact for the
/// piecewise-linear density up to roundoff.
fn moment(d: &HDensity, k: i32) -> f64 {
    d.breakpoints()
        .windows(2)
        .map(|w| {
            let n = 64;
            let step = (w[1] - w[0]) / n as f64;
            (0..n)
                .map(|i| {
                    let (a, b) = (w[0] + i as f64 * step, w[0] + (i + 1) as f64 * step);
                    let m = 0.5 * (a + b);
                    let inner = |x: f64| {
                        // Stay strictly inside the piece so the ends use the piece's own line.
                        let x = x.clamp(w[0] + 1e-14 * step, w[1] - 1e-14 * step);
                        d.eval(x) * x.powi(k)
                    };
                    (b - a) / 6.0 * (inner(a) + 4.0 * inner(m) + inner(b))
                })
                .sum::<f64>()
        })
        .sum()
}

fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        8 => -5.0f64..5.0,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_direct_convolution(c_l in coefficient(), c_g in coefficient(), t in 0.0f64..1.0) {
        prop_assume!(c_l.abs() > 1e-3 || c_g.abs() > 1e-3);
        let d = make_h_density(c_l, c_g).unwrap();
        // A zero coefficient makes H uniform; the convolution oracle is
        // then a plain indicator, exact everywhere but the support ends.
        let (lo, hi) = d.support();
        let h = lo + t * (hi - lo);
        let expect = convolution_density(c_l, c_g, h);
        prop_assert!((d.eval(h) - expect).abs() <= 1e-9 * (1.0 + expect), "h={h}: {} vs {expect}", d.eval(h));
    }

    #[test]
    fn moments_are_those_of_the_sum(c_l in coefficient(), c_g in coefficient()) {
        prop_assume!(c_l.abs() > 1e-2 && c_g.abs() > 1e-2);
        let d = make_h_density(c_l, c_g).unwrap();
        let mass = moment(&d, 0);
        let mean = moment(&d, 1);
        let second = moment(&d, 2);
        let var = (c_l * c_l + c_g * c_g) / 12.0;
        prop_assert!((mass - 1.0).abs() <= 1e-10, "mass {mass}");
        prop_assert!((mean - d.mean()).abs() <= 1e-10 * (1.0 + mean.abs()));
        prop_assert!((second - mean * mean - var).abs() <= 1e-9 * (1.0 + var));
    }

    #[test]
    fn symmetric_in_the_coefficients(c_l in coefficient(), c_g in coefficient(), h in -10.0f64..10.0) {
        prop_assume!(c_l != 0.0 || c_g != 0.0);
        let a = make_h_density(c_l, c_g).unwrap();
        let b = make_h_density(c_g, c_l).unwrap();
        prop_assert_eq!(a.eval(h), b.eval(h));
        prop_assert_eq!(a.breakpoints(), b.breakpoints());
    }

    #[test]
    fn vanishes_outside_support(c_l in coefficient(), c_g in coefficient(), gap in 1e-9f64..10.0) {
        prop_assume!(c_l != 0.0 || c_g != 0.0);
        let d = make_h_density(c_l, c_g).unwrap();
        prop_assert_eq!(d.eval(d.l_h - gap), 0.0);
        prop_assert_eq!(d.eval(d.u_h + gap), 0.0);
    }
}

#[test]
fn sampled_cdf_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (c_l, c_g) in [(1.496172, 1.496172), (2.0, 0.5), (-0.5, 1.5), (-1.0, -2.0)] {
        let d = make_h_density(c_l, c_g).unwrap();
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| c_l * rng.random::<f64>() + c_g * rng.random::<f64>())
            .collect();
        let (lo, hi) = d.support();
        for q in [0.2, 0.5, 0.8] {
            let x = lo + q * (hi - lo);
            let empirical = samples.iter().filter(|&&h| h <= x).count() as f64 / n as f64;
            // Trapezoid rule is exact between kinks, so integrate piecewise.
            let mut cuts: Vec<f64> = d.breakpoints().into_iter().filter(|&b| b < x).collect();
            cuts.push(x);
            let model: f64 = cuts
                .windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (d.eval(w[0] + 1e-12) + d.eval(w[1] - 1e-12)))
                .sum();
            let sigma = (empirical * (1.0 - empirical) / n as f64).sqrt();
            assert!((model - empirical).abs() <= 4.0 * sigma + 1e-9, "({c_l}, {c_g}) at {x}: {model} vs {empirical}");
        }
    }
}

#[test]
fn triangle_for_equal_coefficients() {
    let d = make_h_density(2.0, 2.0).unwrap();
    assert_eq!(d.breakpoints(), vec![0.0, 2.0, 4.0]);
    assert_eq!(d.eval(2.0), 0.5);
    assert_eq!(d.eval(1.0), 0.25);
    assert_eq!(d.eval(3.0), 0.25);
}

#[test]
fn uniform_when_one_coefficient_vanishes() {
    let d = make_h_density(0.0, 4.0).unwrap();
    assert_eq!(d.support(), (0.0, 4.0));
    for h in [0.0, 1.0, 2.5, 4.0] {
        assert_eq!(d.eval(h), 0.25);
    }
}

#[test]
fn rejects_bad_input() {
    assert_eq!(make_h_density(0.0, 0.0).unwrap_err(), Error::DegenerateCoefficients);
    assert!(matches!(make_h_density(f64::NAN, 1.0), Err(Error::NonFiniteInput(_))));
    assert!(matches!(make_h_density(1.0, f64::INFINITY), Err(Error::NonFiniteInput(_))));
    let d = make_h_density(1.0, 1.0).unwrap();
    assert!(matches!(eval_density(&d, f64::NAN), Err(Error::NonFiniteInput(_))));
    assert_eq!(eval_density(&d, 0.5).unwrap(), 0.5);
}
