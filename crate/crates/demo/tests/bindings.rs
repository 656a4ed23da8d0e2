use ggm_demo::{cover_sizes, glasso_path, sample_first_diagonal};

#[test]
fn complete_graph_diagonal_mean_is_wishart() {
    // W(b + p - 1, I): E[Λ₀₀] = ν, Var[Λ₀₀] = 2ν.
    let (p, b) = (3, 4.0);
    let nu = b + p as f64 - 1.0;
    for sampler in ["bg", "hmc"] {
        let xs = sample_first_diagonal(p, 1.0, b, 20_000, sampler, 5).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = (2.0 * nu / xs.len() as f64).sqrt();
        assert!((mean - nu).abs() < 8.0 * se, "{sampler}: {mean} vs {nu}");
    }
}

#[test]
fn cover_sizes_of_extreme_graphs() {
    assert_eq!(cover_sizes(6, 1.0, 1).unwrap(), vec![15.0, 1.0, 1.0]);
    assert_eq!(cover_sizes(6, 0.0, 1).unwrap(), vec![0.0, 6.0, 6.0]);
}

#[test]
fn glasso_path_starts_diagonal() {
    let path = glasso_path(8, 0.3, 60, 10, 2).unwrap();
    assert_eq!(path.len(), 20);
    assert_eq!(path[1], 0.0);
    assert!(path.chunks(2).all(|c| c[0] > 0.0));
}
