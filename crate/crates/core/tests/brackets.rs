mod common;

use common::*;
use nhstab_core::jets::{Field, VectorField};
use nhstab_core::liealg::{
    assemble_f, feedback_coefficients, feedback_residual, lie_bracket, lie_bracket_field, IndexSets,
};
use nhstab_core::systems;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bracket(f: &Field, g: &Field, x: &[f64]) -> Vec<f64> {
    lie_bracket(&**f, &**g, x).unwrap()
}

#[test]
fn first_and_second_order_brackets_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let dim = rng.gen_range(2..=6);
        let (f, g, k) =
            (random_field(&mut rng, dim, 3), random_field(&mut rng, dim, 3), random_field(&mut rng, dim, 3));
        let x = random_point(&mut rng, dim, 1.5);
        let scale = max_abs(&x).max(1.0);
        let (mf, mg, mk) = (eval_map(&f), eval_map(&g), eval_map(&k));

        let jet = bracket(&f, &g, &x);
        let fd = fd_bracket(&mf, &mg, &x, 1e-3 * scale);
        assert!(close_rel(&jet, &fd, 1e-6), "{jet:?} vs {fd:?}");

        let fg = lie_bracket_field(f.clone(), g.clone());
        let nested = bracket(&fg, &k, &x);
        let inner = |y: &[f64]| fd_bracket(&mf, &mg, y, 1e-3 * scale);
        let fd_nested = fd_bracket(&inner, &mk, &x, 1e-2 * scale);
        assert!(close_rel(&nested, &fd_nested, 1e-6), "{nested:?} vs {fd_nested:?}");
    }
}

#[test]
fn hand_example_bracket() {
    // f = (x2, 0), g = (0, 1)
    let f: Field = std::sync::Arc::new(
        nhstab_core::PolynomialField::new(2, vec![nhstab_core::Monomial { row: 0, coef: 1.0, powers: vec![0, 1] }])
            .unwrap(),
    );
    let g: Field = std::sync::Arc::new(nhstab_core::jets::ConstantField(vec![0.0, 1.0]));
    assert_eq!(bracket(&f, &g, &[0.0, 0.0]), vec![-1.0, 0.0]);
    assert_eq!(bracket(&f, &f, &[0.3, -0.2]), vec![0.0, 0.0]);
}

#[test]
fn assembled_columns_equal_bracket_outputs() {
    let car = systems::front_wheel_car();
    let fields = &car.system.fields;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = random_point(&mut rng, 4, 2.0);
        let m = assemble_f(fields, &car.sets, &x).unwrap();
        assert_eq!(m.column(0), fields[0].eval(&x).unwrap());
        assert_eq!(m.column(1), fields[1].eval(&x).unwrap());
        assert_eq!(m.column(2), bracket(&fields[0], &fields[1], &x));
        let b = lie_bracket_field(fields[0].clone(), fields[1].clone());
        assert_eq!(m.column(3), bracket(&b, &fields[0], &x));
    }
}

#[test]
fn paper_fields_match_finite_differences() {
    let v = systems::vehicle_fields();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let x = random_point(&mut rng, 6, 1.2);
        for (i, j) in [(0, 2), (0, 3), (1, 2)] {
            let fd = fd_bracket(&eval_map(&v[i]), &eval_map(&v[j]), &x, 1e-3);
            assert!(close_rel(&bracket(&v[i], &v[j], &x), &fd, 1e-8));
        }
    }
    let c = systems::car_fields();
    for _ in 0..10 {
        let x = random_point(&mut rng, 4, 2.0);
        let (m1, m2) = (eval_map(&c[0]), eval_map(&c[1]));
        let inner = |y: &[f64]| fd_bracket(&m1, &m2, y, 1e-3);
        let fd = fd_bracket(&inner, &m1, &x, 1e-2);
        let b = lie_bracket_field(c[0].clone(), c[1].clone());
        assert!(close_rel(&bracket(&b, &c[0], &x), &fd, 1e-6));
    }
}

#[test]
fn vehicle_feedback_residual_at_initial_state() {
    let s = systems::underwater_vehicle();
    let m = assemble_f(&s.system.fields, &s.sets, &s.x0).unwrap();
    let a = feedback_coefficients(&m, 10.0, &s.x0, &s.x_star).unwrap();
    assert!(feedback_residual(&m, &a, 10.0, &s.x0, &s.x_star) <= 1e-9);
}

fn seeded_triple(seed: u64) -> (Field, Field, Field, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..=5);
    let f = random_field(&mut rng, dim, 3);
    let g = random_field(&mut rng, dim, 3);
    let h = random_field(&mut rng, dim, 2);
    (f, g, h, random_point(&mut rng, dim, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antisymmetry(seed in any::<u64>()) {
        let (f, g, _, x) = seeded_triple(seed);
        let fg = bracket(&f, &g, &x);
        let gf: Vec<f64> = bracket(&g, &f, &x).iter().map(|v| -v).collect();
        prop_assert!(close_rel(&fg, &gf, 1e-12));
    }

    #[test]
    fn bilinearity(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let (f, g1, g2, x) = seeded_triple(seed);
        let combo: Field = std::sync::Arc::new(Combination { a: g1.clone(), b: g2.clone(), alpha });
        let lhs = bracket(&f, &combo, &x);
        let r1 = bracket(&f, &g1, &x);
        let r2 = bracket(&f, &g2, &x);
        let rhs: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + alpha * b).collect();
        prop_assert!(close_rel(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>()) {
        let (f, g, h, x) = seeded_triple(seed);
        let gh = lie_bracket_field(g.clone(), h.clone());
        let hf = lie_bracket_field(h.clone(), f.clone());
        let fg = lie_bracket_field(f.clone(), g.clone());
        let terms = [bracket(&f, &gh, &x), bracket(&g, &hf, &x), bracket(&h, &fg, &x)];
        let scale = terms.iter().map(|t| max_abs(t)).fold(1.0, f64::max);
        for ((a, b), c) in terms[0].iter().zip(&terms[1]).zip(&terms[2]) {
            prop_assert!((a + b + c).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn self_bracket_vanishes(seed in any::<u64>()) {
        let (f, _, _, x) = seeded_triple(seed);
        let ff = lie_bracket_field(f.clone(), f.clone());
        prop_assert!(max_abs(&ff.eval(&x).unwrap()) == 0.0);
    }

    #[test]
    fn feedback_residual_is_small(seed in any::<u64>(), gamma in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let car = systems::front_wheel_car();
        let x = random_point(&mut rng, 4, 2.0);
        let target = random_point(&mut rng, 4, 1.0);
        let m = assemble_f(&car.system.fields, &car.sets, &x).unwrap();
        let a = feedback_coefficients(&m, gamma, &x, &target).unwrap();
        let dist: f64 = x.iter().zip(&target).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(feedback_residual(&m, &a, gamma, &x, &target) <= 1e-9 * gamma * dist);
    }
}

/// `a + alpha b`.
struct Combination {
    a: Field,
    b: Field,
    alpha: f64,
}

impl VectorField for Combination {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval_jet(&self, x: &[nhstab_core::Jet2]) -> Result<Vec<nhstab_core::Jet2>, nhstab_core::EvalError> {
        let a = self.a.eval_jet(x)?;
        let b = self.b.eval_jet(x)?;
        Ok(a.into_iter().zip(b).map(|(p, q)| p + q * nhstab_core::Jet2::constant(self.alpha)).collect())
    }
}

#[test]
fn index_sets_must_cover_dimension() {
    let car = systems::front_wheel_car();
    let short = IndexSets::new(vec![1, 2], vec![(1, 2)], vec![]);
    assert!(assemble_f(&car.system.fields, &short, &[0.0; 4]).is_err());
}
