use cvens_core::gmrf::{
    assemble_galerkin, build_precision, dense_spd_inverse, empirical_correlation, matern_correlation, sample_field,
    MaternParams,
};
use cvens_core::mesh::generate_cylinder_mesh;

#[test]
fn covariance_matches_dense_inverse() {
    let mesh = generate_cylinder_mesh(4.0, 6.0, 7, 6).unwrap();
    assert!(mesh.n_nodes() <= 50);
    let gm = assemble_galerkin(&mesh);
    let p = MaternParams::new(2.5, 1.0, 2.0).unwrap();
    let op = build_precision(&gm, &p).unwrap();
    let n = mesh.n_nodes();
    let n_s = 100_000;
    let ens = sample_field(&op, 0.0, n_s, 2024).unwrap();
    let inv = dense_spd_inverse(&op.q.to_dense()).unwrap();
    let s2 = op.scale * op.scale;
    let mut cov = vec![vec![0.0; n]; n];
    for r in 0..n_s {
        let x = ens.realization(r);
        for i in 0..n {
            for j in 0..=i {
                cov[i][j] += x[i] * x[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let c = cov[i][j] / n_s as f64;
            let want = s2 * inv[i][j];
            let se = ((s2 * inv[i][i] * s2 * inv[j][j] + want * want) / n_s as f64).sqrt();
            assert!((c - want).abs() < 5.0 * se, "cov[{i}][{j}] = {c}, want {want} +- {se}");
        }
    }
}

#[test]
fn interior_variance_matches_target() {
    let mesh = generate_cylinder_mesh(4.0, 30.0, 43, 60).unwrap();
    let gm = assemble_galerkin(&mesh);
    let sigma = 7.0e5;
    let p = MaternParams::new(sigma * sigma, 1.0, 3.7).unwrap();
    let op = build_precision(&gm, &p).unwrap();
    let n_s = 10_000;
    let ens = sample_field(&op, 7.0e6, n_s, 1).unwrap();
    let node = 30 * 43 + 5;
    let series: Vec<f64> = (0..n_s).map(|r| ens.realization(r)[node]).collect();
    let mean = series.iter().sum::<f64>() / n_s as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_s - 1) as f64;
    let rel = var / p.sigma2 - 1.0;
    assert!(rel.abs() < 0.05, "variance ratio off by {rel}");
    assert!((mean - 7.0e6).abs() < 4.0 * sigma / (n_s as f64).sqrt());
}

#[test]
fn cylinder_correlation_follows_matern() {
    let mesh = generate_cylinder_mesh(4.0, 30.0, 43, 60).unwrap();
    assert!(mesh.n_nodes() >= 2500);
    let gm = assemble_galerkin(&mesh);
    let p = MaternParams::new(1.0, 1.0, 3.7).unwrap();
    let op = build_precision(&gm, &p).unwrap();
    let ens = sample_field(&op, 0.0, 2000, 7).unwrap();
    let est = empirical_correlation(&ens, &mesh, 16).unwrap();
    for ((h, c), k) in est.bin_centers().iter().zip(&est.correlation).zip(&est.pair_counts) {
        let exact = matern_correlation(&p, *h);
        eprintln!("h = {h:.3}  empirical = {c:.4}  exact = {exact:.4}  pairs = {k}");
    }
    for (h, c) in est.bin_centers().iter().zip(&est.correlation) {
        if c.is_nan() {
            continue;
        }
        let exact = matern_correlation(&p, *h);
        let tol = if *h <= p.corr_len { 0.05 } else { 0.1 };
        assert!((c - exact).abs() <= tol, "h = {h}: {c} vs {exact}");
    }
}
