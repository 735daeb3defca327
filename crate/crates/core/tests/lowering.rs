mod common;

use blockca::linops::{conv_to_matrix, deconv_to_matrix, KernelSpec};
use blockca::nn::{conv_forward, deconv_forward};
use common::{as_batch, max_diff, naive_conv, naive_deconv, random_case, random_vec, TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn conv_lowering_matches_direct_convolution() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, shape) = random_case(&mut rng, true);
        let x = random_vec(&mut rng, shape.0 * shape.1 * shape.2);
        let want = naive_conv(&k, &x, shape);
        let lowered = conv_to_matrix(&k, shape).unwrap().apply(&x).unwrap();
        let direct = conv_forward(&k, &as_batch(&x, shape)).unwrap();
        assert!(max_diff(&lowered, &want) <= TOL, "seed {seed}");
        assert!(max_diff(direct.data(), &want) <= TOL, "seed {seed}");
    }
}

#[test]
fn deconv_lowering_matches_direct_transpose() {
    for seed in 100..120 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, shape) = random_case(&mut rng, false);
        let x = random_vec(&mut rng, shape.0 * shape.1 * shape.2);
        let want = naive_deconv(&k, &x, shape);
        let lowered = deconv_to_matrix(&k, shape).unwrap().apply(&x).unwrap();
        let direct = deconv_forward(&k, &as_batch(&x, shape)).unwrap();
        assert!(max_diff(&lowered, &want) <= TOL, "seed {seed}");
        assert!(max_diff(direct.data(), &want) <= TOL, "seed {seed}");
    }
}

#[test]
fn deconv_is_adjoint_of_conv() {
    for seed in 200..220 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut k, shape) = random_case(&mut rng, true);
        k.bias.iter_mut().for_each(|b| *b = 0.0);
        let x = random_vec(&mut rng, shape.0 * shape.1 * shape.2);
        let cx = naive_conv(&k, &x, shape);
        let y = random_vec(&mut rng, cx.len());
        let out_shape = (k.out_channels, (shape.1 - k.height) / k.stride + 1, (shape.2 - k.width) / k.stride + 1);
        let mut kt = k.clone();
        kt.bias = vec![0.0; k.in_channels];
        let dy = deconv_forward(&kt, &as_batch(&y, out_shape)).unwrap();
        let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "seed {seed}: {lhs} vs {rhs}");

        // and the lowered matrices are transposes of each other
        let conv_m = conv_to_matrix(&k, shape).unwrap().matrix;
        let deconv_m = deconv_to_matrix(&kt, out_shape).unwrap().matrix;
        assert_eq!(conv_m.transpose(), deconv_m, "seed {seed}");
    }
}

#[test]
fn largest_shape_lowers() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = KernelSpec::new(8, 8, 2, 2, 2, random_vec(&mut rng, 256), random_vec(&mut rng, 8)).unwrap();
    let shape = (8, 16, 16);
    let x = random_vec(&mut rng, 8 * 16 * 16);
    assert!(max_diff(&conv_to_matrix(&k, shape).unwrap().apply(&x).unwrap(), &naive_conv(&k, &x, shape)) <= TOL);
}

#[test]
fn identity_one_by_one_is_exact() {
    let k = KernelSpec::new(1, 1, 1, 1, 1, vec![1.0], vec![0.0]).unwrap();
    let x: Vec<f64> = (0..36).map(|i| i as f64 * 0.37 - 3.0).collect();
    assert_eq!(conv_to_matrix(&k, (1, 6, 6)).unwrap().apply(&x).unwrap(), x);
    assert_eq!(deconv_to_matrix(&k, (1, 6, 6)).unwrap().apply(&x).unwrap(), x);
}
