use fedns_core::data::{synth_ridge, Dataset, LabeledData};
use fedns_core::objective::{centralized_newton, krr_closed_form, NewtonOptions};
use fedns_core::{LossFamily, Objective};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FD_STEP: f64 = 1e-5;

fn fd_gradient(obj: &Objective, data: &Dataset, w: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(w.len(), |i, _| {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[i] += FD_STEP;
        minus[i] -= FD_STEP;
        (obj.loss(data, &plus).unwrap() - obj.loss(data, &minus).unwrap()) / (2.0 * FD_STEP)
    })
}

fn fd_hessian(obj: &Objective, data: &Dataset, w: &DVector<f64>) -> DMatrix<f64> {
    let d = w.len();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[i] += FD_STEP;
        minus[i] -= FD_STEP;
        let col = (obj.gradient(data, &plus).unwrap() - obj.gradient(data, &minus).unwrap())
            / (2.0 * FD_STEP);
        h.set_column(i, &col);
    }
    h
}

#[derive(Debug, Clone)]
struct Instance {
    data: Dataset,
    w: DVector<f64>,
    obj: Objective,
}

fn instance() -> impl Strategy<Value = Instance> {
    (5usize..=50, 1usize..=8, prop_oneof![Just(LossFamily::Logistic), Just(LossFamily::Squared)])
        .prop_flat_map(|(n, d, family)| {
            (
                prop::collection::vec(-2.0f64..2.0, n * d),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(-1.5f64..1.5, n),
                prop::collection::vec(-1.0f64..1.0, d),
                1e-3f64..1.0,
            )
                .prop_map(move |(x, signs, targets, w, lambda)| {
                    let y = match family {
                        LossFamily::Logistic => DVector::from_iterator(
                            n,
                            signs.iter().map(|&s| if s { 1.0 } else { -1.0 }),
                        ),
                        LossFamily::Squared => DVector::from_vec(targets),
                    };
                    Instance {
                        data: Dataset::new("prop", DMatrix::from_vec(n, d, x), y).unwrap(),
                        w: DVector::from_vec(w),
                        obj: Objective::new(family, lambda).unwrap(),
                    }
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(inst in instance()) {
        let g = inst.obj.gradient(&inst.data, &inst.w).unwrap();
        let fd = fd_gradient(&inst.obj, &inst.data, &inst.w);
        let rel = (&fd - &g).norm() / g.norm().max(1e-6);
        prop_assert!(rel <= 1e-5, "relative error {}", rel);
    }

    #[test]
    fn hessian_matches_differenced_gradient(inst in instance()) {
        let h = inst.obj.hessian(&inst.data, &inst.w).unwrap();
        let fd = fd_hessian(&inst.obj, &inst.data, &inst.w);
        let rel = (&fd - &h).norm() / h.norm();
        prop_assert!(rel <= 1e-4, "relative error {}", rel);
    }

    #[test]
    fn sqrt_factor_gram_plus_ridge_is_hessian(inst in instance()) {
        let b = inst.obj.sqrt_hessian(&inst.data, &inst.w).unwrap().factor;
        let h = inst.obj.hessian(&inst.data, &inst.w).unwrap();
        let mut gram = b.tr_mul(&b);
        for i in 0..gram.nrows() {
            gram[(i, i)] += inst.obj.lambda();
        }
        prop_assert!((&gram - &h).norm() <= 1e-10 * h.norm());
    }

    #[test]
    fn hessian_is_symmetric_and_bounded_below_by_lambda(inst in instance()) {
        let h = inst.obj.hessian(&inst.data, &inst.w).unwrap();
        prop_assert!((&h - h.transpose()).amax() <= 1e-12 * (1.0 + h.amax()));
        let lambda = inst.obj.lambda();
        let min_eig = h.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= lambda * (1.0 - 1e-10), "{} < {}", min_eig, lambda);
    }

    #[test]
    fn squared_newton_is_exact_in_one_step(inst in instance(), w0 in prop::collection::vec(-3.0f64..3.0, 8)) {
        let obj = Objective::squared(inst.obj.lambda()).unwrap();
        let y = DVector::from_fn(inst.data.len(), |i, _| inst.data.labels()[i] * 0.7 + i as f64 * 0.01);
        let data = Dataset::new("sq", inst.data.features().clone(), y).unwrap();
        let w0 = DVector::from_column_slice(&w0[..data.dim()]);
        let opts = NewtonOptions { step_size: 1.0, tol: 1e-9, max_iter: 1 };
        let run = centralized_newton(&obj, &data, &w0, opts).unwrap();
        let g = obj.gradient(&data, &run.state.w).unwrap();
        prop_assert!(g.norm() <= 1e-9, "gradient norm {} after one step", g.norm());
    }
}

#[test]
fn newton_on_squared_loss_matches_closed_form_ridge() {
    for seed in 0..10 {
        let data = synth_ridge(60 + 7 * seed as usize, 6, 0.3, seed).unwrap();
        let lambda = 10f64.powi(-(seed as i32 % 4) - 1);
        let obj = Objective::squared(lambda).unwrap();
        let run = centralized_newton(&obj, &data, &DVector::zeros(6), NewtonOptions::default()).unwrap();
        let closed = krr_closed_form(&data, lambda).unwrap();
        let diff = (&run.state.w - &closed).amax();
        assert!(diff <= 1e-8, "seed {seed}: {diff}");
    }
}

#[test]
fn ridge_gradient_vanishes_at_closed_form() {
    let data = synth_ridge(40, 5, 0.1, 3).unwrap();
    let obj = Objective::squared(0.05).unwrap();
    let w = krr_closed_form(&data, 0.05).unwrap();
    assert!(obj.gradient(&data, &w).unwrap().norm() <= 1e-10);
}
