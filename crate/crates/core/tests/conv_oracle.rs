mod common;

use common::*;
use pavecnn::nn::ConvLayer;
use proptest::prelude::*;

#[test]
fn fast_conv_matches_nested_loops() {
    let gap = cases::conv_oracle_gap(100, 100);
    assert!(gap <= 1e-10, "max gap {gap}");
}

#[test]
fn first_layer_shapes_at_full_input() {
    let layer = ConvLayer::zeros(32, (5, 5), 1, 1).unwrap();
    assert_eq!(layer.output_dims(&[500, 500, 1]).unwrap(), [496, 496, 32]);
    assert_eq!(layer.output_dims(&[256, 256, 1]).unwrap(), [252, 252, 32]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shape_law_at_unit_stride(h in 1usize..40, w in 1usize..40, k in 1usize..8) {
        prop_assume!(h >= k && w >= k);
        let layer = ConvLayer::zeros(2, (k, k), 1, 1).unwrap();
        prop_assert_eq!(layer.output_dims(&[h, w, 1]).unwrap(), [h - k + 1, w - k + 1, 2]);
    }

    #[test]
    fn conv_oracle_property(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = random_int(&mut r, 1, 4);
        let h = random_int(&mut r, k, 9);
        let c_in = random_int(&mut r, 1, 3);
        let c_out = random_int(&mut r, 1, 3);
        let input = uniform(&[h, h, c_in], -1.0, 1.0, &mut r);
        let kernels = uniform(&[c_out, k, k, c_in], -1.0, 1.0, &mut r);
        let bias = uniform(&[c_out], -1.0, 1.0, &mut r);
        let fast = ConvLayer::new(kernels.clone(), bias.clone(), 1).unwrap().forward(&input).unwrap();
        let slow = naive_conv(&input, &kernels, &bias, 1);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}
