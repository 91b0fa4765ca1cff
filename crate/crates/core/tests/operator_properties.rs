use mevolve::operators::{
    add_potential, build_laplacian_1d, principal_eig, resolvent_apply, semigroup_apply, BoundaryCondition, GeneratorSpec,
};
use mevolve::order::GridFunction;
use ode_solvers::{DVector, Dopri5, OutputType, System};
use proptest::prelude::*;

fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        Just(BoundaryCondition::Dirichlet),
        Just(BoundaryCondition::Neumann),
        (0.0f64..10.0).prop_map(|beta| BoundaryCondition::Robin { beta }),
    ]
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct Laplace<'a> {
    a: &'a GeneratorSpec,
    lambda: f64,
}

// y' = -(lambda + A) y, z' = y
impl System<f64, DVector<f64>> for Laplace<'_> {
    fn system(&self, _t: f64, s: &DVector<f64>, ds: &mut DVector<f64>) {
        let n = self.a.dim();
        let y = GridFunction::scalar_field(s.as_slice()[..n].to_vec()).unwrap();
        let ay = self.a.apply(&y).unwrap();
        for i in 0..n {
            ds[i] = -ay.values()[i] - self.lambda * s[i];
            ds[n + i] = s[i];
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn semigroup_and_resolvent_are_positive(
        bc in bc_strategy(),
        n in 2usize..25,
        t in 1e-4f64..3.0,
        lambda in 1e-3f64..5.0,
        raw in proptest::collection::vec(0.0f64..1.0, 25),
    ) {
        let a = build_laplacian_1d(n, bc).unwrap();
        let v = GridFunction::scalar_field(raw[..n].to_vec()).unwrap();
        let tol = 1e-12 * sup(v.values()).max(1e-300);
        let s = semigroup_apply(&a, t, &v).unwrap();
        prop_assert!(s.min() >= -tol, "semigroup min {}", s.min());
        let r = resolvent_apply(&a, lambda, &v).unwrap();
        prop_assert!(r.min() >= -tol / lambda, "resolvent min {}", r.min());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn semigroup_law(
        bc in bc_strategy(),
        n in 2usize..30,
        t in 0.0f64..2.0,
        s in 0.0f64..2.0,
        raw in proptest::collection::vec(-1.0f64..1.0, 30),
    ) {
        let a = build_laplacian_1d(n, bc).unwrap();
        let v = GridFunction::scalar_field(raw[..n].to_vec()).unwrap();
        let two_step = semigroup_apply(&a, t, &semigroup_apply(&a, s, &v).unwrap()).unwrap();
        let one_step = semigroup_apply(&a, t + s, &v).unwrap();
        let d = sup(two_step.sub(&one_step).unwrap().values());
        prop_assert!(d <= 1e-10 * sup(v.values()).max(1.0), "defect {d:e}");
    }

    #[test]
    fn potential_monotonicity_is_strict(
        bc in bc_strategy(),
        n in 3usize..30,
        base in proptest::collection::vec(-5.0f64..5.0, 30),
        bump in proptest::collection::vec(0.0f64..2.0, 30),
        node in 0usize..30,
    ) {
        let a = build_laplacian_1d(n, bc).unwrap();
        let m1: Vec<f64> = base[..n].to_vec();
        let mut m2: Vec<f64> = m1.iter().zip(&bump).map(|(x, b)| x + if *b > 1.0 { b - 1.0 } else { 0.0 }).collect();
        m2[node % n] += 0.5;
        let l1 = principal_eig(&add_potential(&a, &GridFunction::scalar_field(m1).unwrap()).unwrap()).unwrap().lambda1;
        let l2 = principal_eig(&add_potential(&a, &GridFunction::scalar_field(m2).unwrap()).unwrap()).unwrap().lambda1;
        prop_assert!(l1 < l2, "{l1} !< {l2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resolvent_is_the_laplace_transform_of_the_semigroup(
        bc in bc_strategy(),
        n in 2usize..8,
        lambda in 0.5f64..4.0,
        raw in proptest::collection::vec(-1.0f64..1.0, 8),
    ) {
        let a = build_laplacian_1d(n, bc).unwrap();
        let v = &raw[..n];
        let horizon = 40.0 / lambda;
        let mut y0 = DVector::zeros(2 * n);
        y0.as_mut_slice()[..n].copy_from_slice(v);
        let mut solver = Dopri5::from_param(
            Laplace { a: &a, lambda }, 0.0, horizon, horizon, y0, 1e-11, 1e-13,
            0.9, 0.04, 0.2, 10.0, horizon, 0.0, 1_000_000, u32::MAX, OutputType::Sparse,
        );
        solver.integrate().unwrap();
        let end = solver.y_out().last().unwrap();
        let z = &end.as_slice()[n..];
        let r = resolvent_apply(&a, lambda, &GridFunction::scalar_field(v.to_vec()).unwrap()).unwrap();
        let d = z.iter().zip(r.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(d <= 1e-6 * sup(r.values()).max(1e-3), "defect {d:e}");
    }
}
