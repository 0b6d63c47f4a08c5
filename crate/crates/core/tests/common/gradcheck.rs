//! Central-difference checks of the network backward pass.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sfcrl::nn::DenseNet;

pub fn random_input(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Random biases so that ReLU units are not all aligned at the origin.
pub fn jitter_biases(net: &mut DenseNet, rng: &mut ChaCha8Rng) {
    let n = net.param_count();
    let mut i = 0;
    let sizes: Vec<(usize, usize)> = net.layers().iter().map(|l| (l.weight.len(), l.bias.len())).collect();
    for (w, b) in sizes {
        i += w;
        for j in 0..b {
            net.set_param(i + j, rng.random_range(-0.3..0.3));
        }
        i += b;
    }
    assert_eq!(i, n);
}

pub fn weighted_output(net: &DenseNet, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (net.forward_batch(x.view()) * c).sum()
}

/// ReLU on/off pattern of every hidden unit for the batch.
pub fn pattern(net: &DenseNet, x: &Array2<f64>) -> Vec<bool> {
    let cache = net.forward_cached(x.view());
    let hidden = cache.acts.len() - 2;
    cache.acts[1..=hidden].iter().flat_map(|a| a.iter().map(|&v| v > 0.0).collect::<Vec<_>>()).collect()
}

/// Checks `count` parameters (or all, if fewer) against central
/// differences, skipping perturbations that flip a ReLU. Returns how many
/// were checked.
pub fn check_gradients(net: &DenseNet, x: &Array2<f64>, c: &Array2<f64>, count: usize, tol: f64, rng: &mut ChaCha8Rng) -> usize {
    let cache = net.forward_cached(x.view());
    let (g, _) = net.backward(&cache, c.view()).unwrap();
    let base = pattern(net, x);
    let n = net.param_count();
    let picks: Vec<usize> = if n <= count { (0..n).collect() } else { (0..count).map(|_| rng.random_range(0..n)).collect() };
    let h = 1e-5;
    let mut checked = 0;
    for i in picks {
        let mut plus = net.clone();
        plus.set_param(i, net.param(i) + h);
        let mut minus = net.clone();
        minus.set_param(i, net.param(i) - h);
        if pattern(&plus, x) != base || pattern(&minus, x) != base {
            continue;
        }
        let fd = (weighted_output(&plus, x, c) - weighted_output(&minus, x, c)) / (2.0 * h);
        let an = g.get(i);
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5);
        assert!(err < tol, "param {i}: fd {fd} analytic {an} rel {err}");
        checked += 1;
    }
    checked
}

/// Gradient check on the two production topologies; returns the number
/// of parameters checked per network.
pub fn production_topologies(rng: &mut ChaCha8Rng, tol: f64) -> Vec<usize> {
    [[66, 256, 256, 180], [69, 256, 256, 1]]
        .iter()
        .map(|widths| {
            let mut net = DenseNet::new(widths, rng).unwrap();
            jitter_biases(&mut net, rng);
            let x = random_input(rng, 2, widths[0]);
            let c = random_input(rng, 2, widths[3]);
            check_gradients(&net, &x, &c, 400, tol, rng)
        })
        .collect()
}
