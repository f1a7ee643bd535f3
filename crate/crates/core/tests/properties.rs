use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tensor_factor::baselines::{hooi, hosvd};
use tensor_factor::preaverage::{preaverage_direction, PreaverageConfig};
use tensor_factor::projection::{estimate_loading_space, refine_directions, RefineConfig};
use tensor_factor::rank::{correlation_from_covariance, rank_threshold};
use tensor_factor::tensor::{fold, kron_chain_minus_k, unfold, Matrix, Tensor, TensorSeries};

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    prop::collection::vec(1usize..5, 2..=4).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(-10.0f64..10.0, n).prop_map(move |data| Tensor::new(dims.clone(), data).unwrap())
    })
}

fn close(a: &[f64], b: &[f64]) -> bool {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-10 * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fold_inverts_unfold(x in tensor_strategy()) {
        for k in 0..x.order() {
            let m = unfold(&x, k).unwrap();
            prop_assert_eq!(m.shape(), (x.dims()[k], x.len() / x.dims()[k]));
            prop_assert_eq!(fold(&m, x.dims(), k).unwrap(), x.clone());
        }
        let (v, m0) = (x.vectorize(), unfold(&x, 0).unwrap());
        prop_assert_eq!(v.as_slice(), m0.as_slice());
    }

    #[test]
    fn unfolded_tucker_product(x in tensor_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<Matrix> = x.dims().iter().map(|&d| {
            let r = 1 + (rand::Rng::random::<u32>(&mut rng) % 3) as usize;
            Matrix::from_fn(r, d, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0))
        }).collect();
        let mut full = x.clone();
        for (k, a) in mats.iter().enumerate() {
            full = full.mode_product(a, k).unwrap();
        }
        for k in 0..x.order() {
            let lhs = unfold(&full, k).unwrap();
            let rhs = &mats[k] * unfold(&x, k).unwrap() * kron_chain_minus_k(&mats, k).unwrap().transpose();
            prop_assert!(close(lhs.as_slice(), rhs.as_slice()));
        }
    }

    #[test]
    fn threshold_count_is_monotone(seed in any::<u64>(), d in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(d, 2 * d, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let r = correlation_from_covariance(&(&g * g.transpose())).unwrap();
        let counts: Vec<usize> = (0..40).map(|i| rank_threshold(&r, i as f64 * 0.1).unwrap()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(counts[0] <= d);
    }
}

fn rank_one_series(dims: &[usize], t: usize, seed: u64) -> TensorSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loads: Vec<Vec<f64>> =
        dims.iter().map(|&d| (0..d).map(|_| rand::Rng::random_range(&mut rng, 0.5..1.5)).collect()).collect();
    let steps = (0..t)
        .map(|_| {
            let f: f64 = rand::Rng::random_range(&mut rng, -2.0..2.0);
            Tensor::from_fn(dims.to_vec(), |i| f * i.iter().zip(&loads).map(|(&j, a)| a[j]).product::<f64>()).unwrap()
        })
        .collect();
    TensorSeries::new(steps).unwrap()
}

#[test]
fn estimates_are_orthonormal() {
    let x = rank_one_series(&[6, 5, 4], 30, 1);
    let x = x.shifted(&Tensor::from_fn(vec![6, 5, 4], |i| i[0] as f64).unwrap()).unwrap();
    for e in hosvd(&x, &[2, 2, 2]).unwrap().iter().chain(&hooi(&x, &[2, 2, 2], 4).unwrap()) {
        assert!(e.orthonormality_defect() < 1e-10, "{}", e.method);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = PreaverageConfig { m0: 20, m: 3, z: 2, ..Default::default() };
    let pre = preaverage_direction(&x, 1, &cfg, &mut rng).unwrap();
    assert!(pre.estimate.orthonormality_defect() < 1e-10);
    let init: Vec<_> = x.dims().iter().map(|&d| nalgebra::DVector::from_element(d, 1.0 / (d as f64).sqrt())).collect();
    let st = refine_directions(&x, &init, &RefineConfig::default()).unwrap();
    let est = estimate_loading_space(&x, 2, &st, 3).unwrap();
    assert!(est.orthonormality_defect() < 1e-10);
}
