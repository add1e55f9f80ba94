//! Finite-difference checks of every hand-written backward pass.

mod common;

use common::{cases, GradReport};

fn exact(report: GradReport) {
    // These maps are linear or smooth at the sampled points, so every
    // component should agree.
    assert_eq!(report.passed, report.checked, "{report:?}");
}

#[test]
fn conv_gradients() {
    exact(cases::conv());
}

#[test]
fn strided_conv_gradients() {
    exact(cases::strided_conv());
}

#[test]
fn dense_gradients() {
    exact(cases::dense());
}

#[test]
fn relu_gradients_away_from_kink() {
    exact(cases::relu());
}

#[test]
fn maxpool_gradients_away_from_ties() {
    let report = cases::maxpool();
    assert!(report.ok(), "{report:?}");
}

#[test]
fn softmax_cross_entropy_gradients() {
    exact(cases::softmax_cross_entropy_loss());
}

#[test]
fn composed_network_gradients() {
    let report = cases::composed();
    assert!(report.ok(), "{report:?}");
    let net = common::toy_network(7);
    assert_eq!(report.checked, 18 * 18 + pavecnn::models::count_parameters(&net));
}
