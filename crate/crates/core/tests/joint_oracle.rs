mod common;

use common::{edge_inclusion, gaussian_rows, graph_posterior};
use ggm_core::ggm::{run_joint_sampler, DataSummary, GgmConfig};
use ggm_core::numkernel::{Rng, SymMatrix};

#[test]
fn two_vertex_edge_posterior_matches_normalizer_ratio() {
    let mut rng = Rng::seed_from_u64(77);
    let lambda = SymMatrix::from_rows(&[&[1.0, 0.35], &[0.35, 1.0]]).unwrap();
    let data = DataSummary::from_rows(&gaussian_rows(&mut rng, &lambda, 25));
    let mut config = GgmConfig::new(2);
    config.sigma_e = 0.3;
    let oracle = edge_inclusion(&graph_posterior(2, config.b0, &config.d0, &data.gram, data.n, 1.0, 1.0), 0, 1);
    assert!(oracle > 0.05 && oracle < 0.95, "uninformative oracle {oracle}");
    let trace = run_joint_sampler(&data, &config, 30_000, 1000, &mut rng).unwrap();
    let freq = trace.edge_probabilities().get(0, 1);
    assert!((freq - oracle).abs() < 0.03, "sampler {freq} vs oracle {oracle}");
}

#[test]
fn three_vertex_strong_edge_is_found() {
    let mut rng = Rng::seed_from_u64(78);
    // Partial correlation of (0, 1): 0.9.
    let lambda = SymMatrix::from_rows(&[&[1.0, -0.9, 0.0], &[-0.9, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
    let data = DataSummary::from_rows(&gaussian_rows(&mut rng, &lambda, 100));
    let mut config = GgmConfig::new(3);
    config.sigma_e = 0.3;
    let post = graph_posterior(3, config.b0, &config.d0, &data.gram, data.n, 1.0, 1.0);
    assert!(edge_inclusion(&post, 0, 1) > 0.9);
    let trace = run_joint_sampler(&data, &config, 5000, 500, &mut rng).unwrap();
    let probs = trace.edge_probabilities();
    assert!(probs.get(0, 1) > 0.9, "{}", probs.get(0, 1));
    for (i, j) in [(0, 2), (1, 2)] {
        assert!((probs.get(i, j) - edge_inclusion(&post, i, j)).abs() < 0.05, "({i},{j}) {} vs {}", probs.get(i, j), edge_inclusion(&post, i, j));
    }
}
