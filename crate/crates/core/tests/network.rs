mod common;

use common::*;
use sr_forge_core::nn::{
    mse_loss, train_step, Activation, Checkpoint, LayerSpec, Network, NetworkSpec, Optimizer, Tensor,
};
use sr_forge_core::Error;

#[test]
fn srcnn_gradients_match_finite_differences() {
    for c in [1, 3] {
        let check = gradient_check(NetworkSpec::srcnn(c).with_filter_cap(4), 21, 1e-4);
        assert!(check.checked > 0);
        assert!(
            check.worst <= 1e-3,
            "channels {c}: worst relative error {}",
            check.worst
        );
    }
}

#[test]
fn msrcnn_gradients_match_finite_differences() {
    for c in [1, 3] {
        let check = gradient_check(NetworkSpec::msrcnn(c).with_filter_cap(4), 22, 1e-4);
        assert!(
            check.worst <= 1e-3,
            "channels {c}: worst relative error {}",
            check.worst
        );
    }
}

#[test]
fn strided_layers_have_correct_gradients() {
    // Downsample by two and come back up with a stride-2 transposed layer.
    let spec = NetworkSpec {
        input_channels: 2,
        layers: vec![
            LayerSpec {
                stride: 2,
                ..LayerSpec::conv(3, 3, Activation::leaky_relu())
            },
            LayerSpec {
                stride: 2,
                ..LayerSpec::conv_transpose(2, 3, Activation::leaky_relu())
            },
            LayerSpec {
                bias: false,
                ..LayerSpec::conv(1, 3, Activation::Sigmoid)
            },
        ],
    };
    let check = gradient_check(spec, 23, 1e-4);
    assert!(check.worst <= 1e-3, "worst relative error {}", check.worst);
}

#[test]
fn input_gradient_matches_finite_differences() {
    let net: Network<f64> = Network::<f32>::new(NetworkSpec::msrcnn(1).with_filter_cap(3), 4)
        .unwrap()
        .cast();
    let mut r = rng(5);
    let x = random_tensor([1, 1, 6, 6], &mut r);
    let target = random_tensor([1, 1, 6, 6], &mut r);
    let (out, cache) = net.forward_cached(&x).unwrap();
    let grads = net.backward(&cache, &mse_loss(&out, &target).unwrap().1).unwrap();
    let eps = 1e-4;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += eps;
        let mut xm = x.clone();
        xm.data_mut()[i] -= eps;
        let numeric = (mse_loss(&net.forward(&xp).unwrap(), &target).unwrap().0
            - mse_loss(&net.forward(&xm).unwrap(), &target).unwrap().0)
            / (2.0 * eps);
        assert!(relative_error(grads.input.data()[i], numeric) <= 1e-3);
    }
}

#[test]
fn presets_preserve_spatial_size() {
    for spec in [NetworkSpec::srcnn(1), NetworkSpec::msrcnn(3)] {
        let c = spec.input_channels;
        let net = Network::<f32>::new(spec.with_filter_cap(2), 0).unwrap();
        let y = net.forward(&Tensor::zeros([2, c, 13, 9])).unwrap();
        assert_eq!(y.shape(), [2, c, 13, 9]);
    }
}

#[test]
fn init_is_seeded() {
    let a = Network::<f32>::new(NetworkSpec::msrcnn(1), 3).unwrap();
    let b = Network::<f32>::new(NetworkSpec::msrcnn(1), 3).unwrap();
    let c = Network::<f32>::new(NetworkSpec::msrcnn(1), 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.layers().iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
}

#[test]
fn batch_gradient_is_the_mean_of_per_sample_gradients() {
    let net: Network<f64> = Network::<f32>::new(NetworkSpec::srcnn(1).with_filter_cap(3), 8)
        .unwrap()
        .cast();
    let mut r = rng(6);
    let xs = random_tensor([3, 1, 5, 5], &mut r);
    let ts = random_tensor([3, 1, 5, 5], &mut r);
    let grads_for = |x: &Tensor<f64>, t: &Tensor<f64>| {
        let (out, cache) = net.forward_cached(x).unwrap();
        net.backward(&cache, &mse_loss(&out, t).unwrap().1).unwrap()
    };
    let batch = grads_for(&xs, &ts);
    let single = |i: usize| {
        let pick = |t: &Tensor<f64>| Tensor::new([1, 1, 5, 5], t.sample(i).to_vec()).unwrap();
        grads_for(&pick(&xs), &pick(&ts))
    };
    let parts: Vec<_> = (0..3).map(single).collect();
    for li in 0..net.layers().len() {
        let mean: Vec<f64> = (0..batch.weights[li].len())
            .map(|j| parts.iter().map(|p| p.weights[li].data()[j]).sum::<f64>() / 3.0)
            .collect();
        assert!(max_abs_diff(batch.weights[li].data(), &mean) <= 1e-12);
    }
}

#[test]
fn msrcnn_overfits_a_single_patch() {
    let hr = Tensor::<f32>::from_fn([1, 1, 32, 32], |i| {
        let (y, x) = (i / 32, i % 32);
        if (x / 6 + y / 9) % 2 == 0 {
            0.8
        } else {
            0.25
        }
    });
    let lr = Tensor::<f32>::new([1, 1, 32, 32], hr.data().iter().map(|v| v * 0.9 + 0.05).collect()).unwrap();
    let mut net = Network::<f32>::new(NetworkSpec::msrcnn(1), 31).unwrap();
    let mut opt = Optimizer::adam();
    let mut reached = None;
    for step in 1..=500 {
        train_step(&mut net, &lr, &hr, &mut opt, 0.003).unwrap();
        let loss = mse_loss(&net.forward(&lr).unwrap(), &hr).unwrap().0;
        if loss < 1e-3 {
            reached = Some(step);
            break;
        }
    }
    assert!(reached.is_some(), "loss never dropped below 1e-3");
}

#[test]
fn backward_rejects_a_mismatched_cache() {
    let a = Network::<f32>::new(NetworkSpec::srcnn(1).with_filter_cap(2), 0).unwrap();
    let b = Network::<f32>::new(NetworkSpec::msrcnn(1).with_filter_cap(2), 0).unwrap();
    let x = Tensor::zeros([1, 1, 4, 4]);
    let (out, cache) = a.forward_cached(&x).unwrap();
    assert!(matches!(b.backward(&cache, &out), Err(Error::StaleCache(_))));
}

#[test]
fn checkpoint_restores_an_identical_network() {
    let net = Network::<f32>::new(NetworkSpec::msrcnn(3), 12).unwrap();
    let ckpt = Checkpoint::from_network(&net, 2, vec![0.5, 0.25]);
    let back = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.network().unwrap(), net);
}
