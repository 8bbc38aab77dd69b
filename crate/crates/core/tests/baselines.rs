use mmwave_senn::baselines::{fit_linear, least_squares};
use mmwave_senn::dataset::{generate, split};
use mmwave_senn::{EnvConfig, Matrix, SamplingRanges};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least squares by modified Gram-Schmidt QR of the design `[x | 1]`.
fn qr_solve(x: &Matrix, y: &Matrix) -> Vec<Vec<f64>> {
    let (n, d) = x.shape();
    let p = d + 1;
    let mut q: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|i| if j < d { x.get(i, j) } else { 1.0 }).collect())
        .collect();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        for k in 0..j {
            let dot: f64 = q[k].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[k][j] = dot;
            let qk = q[k].clone();
            q[j].iter_mut().zip(&qk).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    (0..y.cols())
        .map(|c| {
            let qty: Vec<f64> = (0..p).map(|j| (0..n).map(|i| q[j][i] * y.get(i, c)).sum()).collect();
            let mut beta = vec![0.0; p];
            for j in (0..p).rev() {
                let s: f64 = (j + 1..p).map(|k| r[j][k] * beta[k]).sum();
                beta[j] = (qty[j] - s) / r[j][j];
            }
            beta
        })
        .collect()
}

#[test]
fn normal_equations_agree_with_qr() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Matrix::from_fn(300, 4, |_, _| rng.random_range(-2.0..2.0));
    let y = Matrix::from_fn(300, 6, |i, j| x.get(i, j % 4) * (j as f64 + 1.0) + rng.random_range(-1.0..1.0) + 20.0);
    let (w, b) = least_squares(&x, &y).unwrap();
    let reference = qr_solve(&x, &y);
    for (c, beta) in reference.iter().enumerate() {
        for j in 0..4 {
            assert!((w.get(c, j) - beta[j]).abs() < 1e-9, "w[{c}][{j}] {} vs {}", w.get(c, j), beta[j]);
        }
        assert!((b[c] - beta[4]).abs() < 1e-9);
    }
}

#[test]
fn residuals_are_orthogonal_to_the_design() {
    let d = split(generate(3_000, 2, &SamplingRanges::default(), &EnvConfig::default()).unwrap(), 0.8, 1).unwrap();
    let m = fit_linear(&d).unwrap();
    let rows = d.train_indices().unwrap();
    let x = d.normalized_inputs(&rows).unwrap();
    let y = d.geometry_targets(&rows);
    let pred = m.predict(&x).unwrap();
    for c in 0..6 {
        let res: Vec<f64> = (0..x.rows()).map(|i| y.get(i, c) - pred.get(i, c)).collect();
        let scale = res.iter().map(|r| r.abs()).sum::<f64>();
        assert!(res.iter().sum::<f64>().abs() < 1e-8 * scale);
        for j in 0..4 {
            let dot: f64 = res.iter().enumerate().map(|(i, r)| r * x.get(i, j)).sum();
            assert!(dot.abs() < 1e-8 * scale, "column {c} input {j}: {dot}");
        }
    }
}
