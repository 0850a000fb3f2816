//! Cross-checks of the statistics and convolution code against brute-force
//! and third-party reference implementations.

use oofkit_core::blur::{bokeh_blur, convolve_direct, gaussian_blur};
use oofkit_core::eval::{auc, correlation_p_value, linreg, regularized_incomplete_beta, spearman};
use oofkit_core::kernel::{disk_kernel, gaussian_kernel};
use oofkit_core::raster::RasterPatch;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Rank by counting: smaller values plus the average position among ties.
fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

fn small_ints(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), n)
}

proptest! {
    #[test]
    fn spearman_matches_brute_force((x, y) in (3usize..=12).prop_flat_map(|n| (small_ints(n..=n), small_ints(n..=n)))) {
        let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
        match spearman(&x, &y) {
            Ok(c) => {
                let want = brute_pearson(&brute_ranks(&x), &brute_ranks(&y));
                prop_assert!((c.rho - want).abs() < 1e-9, "{} vs {}", c.rho, want);
            }
            Err(_) => prop_assert!(constant(&x) || constant(&y)),
        }
    }

    #[test]
    fn auc_matches_pair_count(
        (scores, labels) in (2usize..=12).prop_flat_map(|n| (small_ints(n..=n), prop::collection::vec(any::<bool>(), n)))
    ) {
        let pos: Vec<f64> = scores.iter().zip(&labels).filter(|p| *p.1).map(|p| *p.0).collect();
        let neg: Vec<f64> = scores.iter().zip(&labels).filter(|p| !*p.1).map(|p| *p.0).collect();
        match auc(&scores, &labels) {
            Ok(a) => {
                let mut wins = 0.0;
                for p in &pos {
                    for q in &neg {
                        wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
                    }
                }
                let want = wins / (pos.len() * neg.len()) as f64;
                prop_assert!((a - want).abs() < 1e-9);
            }
            Err(_) => prop_assert!(pos.is_empty() || neg.is_empty()),
        }
    }

    #[test]
    fn linreg_matches_normal_equations((x, y) in (2usize..=12).prop_flat_map(|n| (small_ints(n..=n), small_ints(n..=n)))) {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let det = n * sxx - sx * sx;
        match linreg(&x, &y) {
            Ok(fit) => {
                let slope = (n * sxy - sx * sy) / det;
                let intercept = (sy * sxx - sx * sxy) / det;
                prop_assert!((fit.slope - slope).abs() < 1e-9);
                prop_assert!((fit.intercept - intercept).abs() < 1e-9);
            }
            Err(_) => prop_assert_eq!(det, 0.0),
        }
    }

    #[test]
    fn p_value_matches_students_t(r in -0.99f64..0.99, n in 3usize..200) {
        let df = (n - 2) as f64;
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        let want = 2.0 * dist.cdf(-t.abs());
        let got = correlation_p_value(r, n);
        prop_assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn incomplete_beta_matches_statrs(a in 0.2f64..40.0, b in 0.2f64..40.0, x in 0.0f64..=1.0) {
        let want = statrs::function::beta::beta_reg(a, b, x);
        let got = regularized_incomplete_beta(a, b, x);
        prop_assert!((got - want).abs() < 1e-9, "I_{x}({a}, {b}) = {got} vs {want}");
    }
}

#[test]
fn p_value_of_perfect_correlation_is_zero() {
    assert_eq!(correlation_p_value(1.0, 10), 0.0);
    assert_eq!(correlation_p_value(-1.0, 10), 0.0);
    assert!((correlation_p_value(0.0, 10) - 1.0).abs() < 1e-12);
}

/// Mirror with edge duplication written as a reflection loop.
fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn naive_convolve(p: &RasterPatch, k: &oofkit_core::kernel::BlurKernel) -> RasterPatch {
    let h = k.half() as isize;
    RasterPatch::from_fn(p.width(), p.height(), |x, y| {
        let mut acc = [0.0; 3];
        for dy in -h..=h {
            for dx in -h..=h {
                let w = k.at(dx, dy);
                let src = p.get(mirror(x as isize + dx, p.width()), mirror(y as isize + dy, p.height()));
                for c in 0..3 {
                    acc[c] += w * src[c];
                }
            }
        }
        acc
    })
}

fn test_image(w: usize, h: usize) -> RasterPatch {
    RasterPatch::from_fn(w, h, |x, y| {
        let v = ((x * 7919 + y * 104729) % 97) as f64 / 96.0;
        [v, 1.0 - v, ((x ^ y) % 5) as f64 / 4.0]
    })
}

fn max_diff(a: &RasterPatch, b: &RasterPatch) -> f64 {
    a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn direct_convolution_matches_naive_sum() {
    let img = test_image(23, 17);
    for k in [disk_kernel(3.3).unwrap(), gaussian_kernel(1.7).unwrap(), disk_kernel(12.0).unwrap()] {
        assert!(max_diff(&convolve_direct(&img, &k), &naive_convolve(&img, &k)) < 1e-12);
    }
}

#[test]
fn blur_paths_agree_with_direct_convolution() {
    let img = test_image(64, 48);
    // Large radius and sigma take the frequency-domain / separable paths.
    for r in [2.5, 18.0, 31.0] {
        let d = convolve_direct(&img, &disk_kernel(r).unwrap());
        assert!(max_diff(&bokeh_blur(&img, r).unwrap(), &d) < 1e-9, "radius {r}");
    }
    for s in [0.8, 6.5] {
        let d = convolve_direct(&img, &gaussian_kernel(s).unwrap());
        assert!(max_diff(&gaussian_blur(&img, s).unwrap(), &d) < 1e-9, "sigma {s}");
    }
}
