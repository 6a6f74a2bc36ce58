//! Backpropagation against central differences on random networks.

use airmia::rng;
use airmia::tinynn::{grad_check, DenseNetwork, LossSpec, OutputHead};
use rand::Rng;

fn random_nets(head: OutputHead, stream: u64) -> impl Iterator<Item = (DenseNetwork<f64>, LossSpec<f64>, Vec<f64>)> {
    (0..20u64).map(move |i| {
        let mut r = rng::substream(stream, rng::domain("tests/gradients"), i);
        let mut dims = vec![r.random_range(2..=8)];
        let depth = r.random_range(1..=3);
        dims.extend((0..depth).map(|_| r.random_range(2..=12)));
        dims.push(head.output_dim());
        let mut net = DenseNetwork::new(&dims, head, r.random()).unwrap();
        // keep away from exact ReLU ties, where the derivative is undefined
        for k in 0..net.param_count() {
            let p = net.parameter(k);
            net.set_parameter(k, p + r.random_range(-0.1..0.1));
        }
        let input = (0..dims[0]).map(|_| r.random_range(-1.0..1.0)).collect();
        let loss = match head {
            OutputHead::Softmax2 => LossSpec::CrossEntropy { label: r.random_range(0..2) },
            OutputHead::SigmoidScalar => LossSpec::Membership { member: r.random_bool(0.5), weight: r.random_range(0.5..2.0) },
        };
        (net, loss, input)
    })
}

#[test]
fn softmax_head_matches_finite_differences() {
    for (net, loss, x) in random_nets(OutputHead::Softmax2, 1) {
        let err = grad_check(&net, &loss, &x, 1e-5).unwrap();
        assert!(err < 1e-4, "{:?}: {err}", net.layer_dims());
    }
}

#[test]
fn sigmoid_head_matches_finite_differences() {
    for (net, loss, x) in random_nets(OutputHead::SigmoidScalar, 2) {
        let err = grad_check(&net, &loss, &x, 1e-5).unwrap();
        assert!(err < 1e-4, "{:?}: {err}", net.layer_dims());
    }
}

#[test]
fn pipeline_layer_shapes_at_reduced_width() {
    // full checks on the 23k-parameter nets are slow; the layer shapes are
    // what matters, so check the real architectures at a reduced width
    for (dims, head, loss) in [
        (vec![32, 10, 10, 10, 2], OutputHead::Softmax2, LossSpec::CrossEntropy { label: 1 }),
        (vec![34, 10, 10, 1], OutputHead::SigmoidScalar, LossSpec::Membership { member: false, weight: 1.3 }),
    ] {
        let mut r = rng::substream(3, rng::domain("tests/gradients/shapes"), 0);
        let net = DenseNetwork::new(&dims, head, 77).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| r.random_range(0.0..1.0)).collect();
        assert!(grad_check(&net, &loss, &x, 1e-5).unwrap() < 1e-4);
    }
}
