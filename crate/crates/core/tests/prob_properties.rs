mod common;

use mismatch_relay::prob::{compose_joint, entropy_of, mutual_information};
use mismatch_relay::{Channel, Distribution};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;

fn simplex(n: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        Array1::from(v) / s
    })
}

fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(simplex(cols), rows).prop_map(move |rows_v| {
        let mut m = Array2::zeros((rows_v.len(), cols));
        for (mut row, v) in m.rows_mut().into_iter().zip(rows_v) {
            row.assign(&v);
        }
        m
    })
}

fn chain() -> impl Strategy<Value = (Array1<f64>, Array2<f64>, Array2<f64>)> {
    (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(m, k, n)| (simplex(m), stochastic(m, k), stochastic(k, n)))
}

proptest! {
    #[test]
    fn compose_conserves_mass((p, theta, omega) in chain()) {
        let joint = compose_joint(
            &Distribution::new(p.clone()).unwrap(),
            &Channel::from_matrix(theta.clone()).unwrap(),
            &Channel::from_matrix(omega.clone()).unwrap(),
        ).unwrap();
        prop_assert!((joint.sum() - 1.0).abs() < 1e-10);
        let rows = joint.sum_axis(Axis(1));
        for (a, b) in rows.iter().zip(p.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let cols = joint.sum_axis(Axis(0));
        let expected = omega.t().dot(&theta.t().dot(&p));
        for (a, b) in cols.iter().zip(expected.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn data_processing((p, theta, omega) in chain()) {
        let joint_xz = compose_joint(
            &Distribution::new(p.clone()).unwrap(),
            &Channel::from_matrix(theta.clone()).unwrap(),
            &Channel::from_matrix(omega).unwrap(),
        ).unwrap();
        let joint_xy = common::joint_xy(&p, &theta);
        let i_xz = mutual_information(&joint_xz);
        prop_assert!(i_xz >= 0.0);
        prop_assert!(i_xz <= mutual_information(&joint_xy) + 1e-9);
    }

    #[test]
    fn information_is_entropy_balance((p, theta, omega) in chain()) {
        let joint = compose_joint(
            &Distribution::new(p).unwrap(),
            &Channel::from_matrix(theta).unwrap(),
            &Channel::from_matrix(omega).unwrap(),
        ).unwrap();
        let flat = Array1::from_iter(joint.iter().copied());
        let h_joint = entropy_of(flat.view());
        let h_x = entropy_of(joint.sum_axis(Axis(1)).view());
        let h_z = entropy_of(joint.sum_axis(Axis(0)).view());
        prop_assert!((mutual_information(&joint) - (h_x + h_z - h_joint)).abs() < 1e-10);
    }
}

#[test]
fn push_forward_matches_relay_marginal() {
    let mut rng = common::rng(7);
    let theta = Channel::from_matrix(common::stochastic(&mut rng, 3, 5)).unwrap();
    let p = Distribution::new(common::dirichlet(&mut rng, 3)).unwrap();
    let q = theta.push_forward(&p).unwrap();
    let expected = theta.kernel().t().dot(p.mass());
    for (a, b) in q.mass().iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-15);
    }
}
