use humor_core::classify::{fit_gnb, logreg_loss_and_grad, LogReg};
use humor_core::neural::{grad_check, GradCheckOptions, NeuralConfig, NeuralLM, Vocab};

fn twenty_points() -> (Vec<Vec<f64>>, Vec<u8>) {
    let x: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let i = i as f64;
            vec![
                i * 0.5 - 3.0,
                (i * 7.0) % 5.0,
                if i < 10.0 { 1.0 } else { -2.0 } + i * 0.1,
            ]
        })
        .collect();
    let y = (0..20).map(|i| u8::from(i % 3 == 0 || i > 14)).collect();
    (x, y)
}

#[test]
#[allow(clippy::needless_range_loop)]
fn gnb_matches_closed_form() {
    let (x, y) = twenty_points();
    let model = fit_gnb(&x, &y);
    let d = 3;
    let n = x.len() as f64;

    let mut max_var = 0.0f64;
    for j in 0..d {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / n;
        max_var = max_var.max(col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n);
    }
    let eps = 1e-9 * max_var;
    assert!((model.epsilon - eps).abs() <= 1e-12);

    for class in 0..2u8 {
        let idx: Vec<usize> = (0..x.len()).filter(|&i| y[i] == class).collect();
        let nc = idx.len() as f64;
        assert!((model.priors[class as usize] - nc / n).abs() <= 1e-12);
        for j in 0..d {
            let mean = idx.iter().map(|&i| x[i][j]).sum::<f64>() / nc;
            let var = idx.iter().map(|&i| (x[i][j] - mean).powi(2)).sum::<f64>() / nc + eps;
            assert!(
                (model.means[class as usize][j] - mean).abs() <= 1e-12,
                "mean c{class} f{j}"
            );
            assert!(
                (model.variances[class as usize][j] - var).abs() <= 1e-12,
                "var c{class} f{j}"
            );
        }
    }
}

fn loss_only(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
        let p = 1.0 / (1.0 + (-z).exp());
        total -= if label == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total / x.len() as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

fn rel(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-12);
    (a - b).abs() / denom
}

#[test]
fn logreg_gradient_matches_central_differences() {
    let (x, y) = twenty_points();
    let lambda = 0.01;
    let model = LogReg {
        weights: vec![0.3, -0.2, 0.15],
        bias: -0.1,
    };
    let (loss, gw, gb) = logreg_loss_and_grad(&model, &x, &y, lambda);
    assert!((loss - loss_only(&model.weights, model.bias, &x, &y, lambda)).abs() < 1e-12);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..3 {
        let mut up = model.weights.clone();
        let mut down = model.weights.clone();
        up[j] += h;
        down[j] -= h;
        let fd =
            (loss_only(&up, model.bias, &x, &y, lambda) - loss_only(&down, model.bias, &x, &y, lambda)) / (2.0 * h);
        worst = worst.max(rel(gw[j], fd));
    }
    let fd = (loss_only(&model.weights, model.bias + h, &x, &y, lambda)
        - loss_only(&model.weights, model.bias - h, &x, &y, lambda))
        / (2.0 * h);
    worst = worst.max(rel(gb, fd));
    assert!(worst < 1e-5, "max relative error {worst}");
}

#[test]
fn lstm_gradient_matches_central_differences() {
    let config = NeuralConfig {
        vocab_size: 10,
        embed_dim: 6,
        hidden_dim: 8,
        dropout_rate: 0.0,
        ..NeuralConfig::default()
    };
    let mut model = NeuralLM::build(&config, Vocab::placeholder(10)).unwrap();
    // at the default init scale many gradients sit below finite-difference resolution
    model.reinitialize(0.5, 3);
    let windows = vec![vec![2, 3, 4, 5, 6], vec![7, 8, 9, 2, 1], vec![3, 3, 4, 4, 5]];
    let err = grad_check(
        &model,
        &windows,
        GradCheckOptions {
            coordinates: 400,
            ..Default::default()
        },
    );
    assert!(err < 1e-4, "max relative error {err}");
}
