use mourre_core::conjugate::commutator;
use mourre_core::experiments::{parse_config, RunReport};
use mourre_core::fgr::geometric_grid;
use mourre_core::model::Profile;
use mourre_core::mourre::{spectral_projector, ScalingRegime};
use mourre_core::numerics::{hermitian_eigenvalues, sine_transform, CMatrix, HermitianMatrix, SineTransform, C64};
use proptest::prelude::*;

fn hermitian(n: usize, seed: &[f64]) -> HermitianMatrix {
    let m = CMatrix::from_fn(n, n, |i, j| {
        let t = seed[(i * n + j) % seed.len()];
        C64::new(t, if i == j { 0.0 } else { 0.5 * t.sin() })
    });
    HermitianMatrix::symmetrized(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_sine_transform_matches_direct_and_is_an_involution(
        xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..80)
    ) {
        let x: Vec<C64> = xs.iter().map(|&(a, b)| C64::new(a, b)).collect();
        let fast = SineTransform::new(x.len());
        let y = fast.apply(&x);
        let d = sine_transform(&x);
        for (a, b) in y.iter().zip(&d) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let back = fast.apply(&y);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_is_hermitian_and_traceless(n in 2usize..7, seed in prop::collection::vec(-1.0f64..1.0, 8..20)) {
        let a = hermitian(n, &seed);
        let rev: Vec<f64> = seed.iter().rev().map(|t| t * 0.7 + 0.1).collect();
        let s = hermitian(n, &rev);
        let c = commutator(&a, &s).unwrap();
        let m = c.as_matrix();
        let mut trace = C64::new(0.0, 0.0);
        for i in 0..n {
            trace += m[(i, i)];
            for j in 0..n {
                prop_assert!((m[(i, j)] - m[(j, i)].conj()).norm() < 1e-12);
            }
        }
        prop_assert!(trace.norm() < 1e-12);
    }

    #[test]
    fn spectral_projector_is_idempotent_with_rank_of_the_window(
        n in 2usize..8,
        seed in prop::collection::vec(-1.0f64..1.0, 8..20),
        lo in -2.0f64..0.0,
        width in 0.1f64..3.0,
    ) {
        let a = hermitian(n, &seed);
        let hi = lo + width;
        let p = spectral_projector(&a, (lo, hi)).unwrap();
        let vals = hermitian_eigenvalues(&a).unwrap();
        let inside = vals.iter().filter(|&&v| v >= lo && v <= hi).count();
        prop_assert_eq!(p.rank(), inside);
        let d = p.to_dense().as_matrix().clone();
        let d2 = d.matmul(&d);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((d2[(i, j)] - d[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn geometric_grid_hits_both_ends_and_increases(lo in 1e-4f64..1.0, factor in 1.01f64..100.0, count in 2usize..20) {
        let hi = lo * factor;
        let g = geometric_grid(lo, hi, count);
        prop_assert_eq!(g.len(), count);
        prop_assert!((g[0] - lo).abs() <= 1e-15 * lo);
        prop_assert!((g[count - 1] - hi).abs() <= 1e-12 * hi);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn scaling_regime_orders_lambda_eps_theta(a in 0.05f64..0.95, frac in 0.05f64..0.95, lambda in 1e-6f64..0.9) {
        let b = a * frac;
        let r = ScalingRegime::new(a, b).unwrap();
        prop_assert!(lambda < r.eps(lambda) && r.eps(lambda) < r.theta(lambda) && r.theta(lambda) < 1.0);
        prop_assert!(ScalingRegime::new(b, a).is_err());
    }

    #[test]
    fn profiles_round_trip_through_display(kind in 0usize..4, x in 0.1f64..5.0, y in 0.1f64..5.0) {
        let p = match kind {
            0 => Profile::Exp { rate: x },
            1 => Profile::Power { exponent: x },
            2 => Profile::Constant { value: x },
            _ => Profile::Gaussian { center: x, width: y },
        };
        prop_assert_eq!(Profile::parse(&p.to_string(), 0.5).unwrap(), p);
    }

    #[test]
    fn config_values_survive_parsing(upsilon in 0.5f64..50.0, seed in any::<u64>(), theta in 0.11f64..0.59) {
        let text = format!("experiment = virial\nupsilon = {upsilon}\nseed = {seed}\ntheta_scaling = {theta}\n");
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.upsilon, upsilon);
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.theta_scaling, theta);
    }

    #[test]
    fn report_json_and_csv_are_lossless(rows in prop::collection::vec((any::<f64>(), -1e300f64..1e300), 0..10)) {
        let mut r = RunReport::new("virial", "s", serde_json::Value::Null, &["x", "y"]);
        for &(x, y) in &rows {
            if x.is_finite() {
                r.push_row(vec![x, y]);
            }
        }
        r.check("c", 0.0, 1.0, true);
        r.finalize();
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(&back, &r);
        let parsed: Vec<Vec<f64>> = r
            .to_csv()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
            .collect();
        prop_assert_eq!(parsed, r.rows.clone());
    }
}
