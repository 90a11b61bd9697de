use lyapmkv::benchmarks::*;
use lyapmkv::diagnostics::{det_closure_check, index_probe};
use lyapmkv::funcspace::SpaceParams;
use lyapmkv::montecarlo::{enumerate_exact, estimate_furstenberg, estimate_subadditive};
use lyapmkv::transfer::{eigenmeasure, lyapunov_via_perturbation, Discretization, TransferOperator};
use lyapmkv::{build_chain, Matrix, MatrixFamily, ProjPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn estimators_agree_on_every_benchmark() {
    let chain = two_state_chain();
    for (name, fam) in [
        ("conformal", conformal()),
        ("contracting", contracting()),
        ("rotation", rotation_control()),
        ("diagonal", diagonal()),
        ("orthogonal", orthogonal()),
    ] {
        let a = estimate_subadditive(&fam, &chain, 50_000, 32, 21).unwrap();
        let b = estimate_furstenberg(&fam, &chain, 400_000, 1000, 21).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(
            (a.gamma_hat - b.gamma_hat).abs() <= 3.0 * se + 1e-12,
            "{name}: {} vs {} (se {se})",
            a.gamma_hat,
            b.gamma_hat
        );
    }
}

#[test]
fn enumeration_derivative_approaches_gamma() {
    let fam = contracting();
    let chain = two_state_chain();
    let n_grid = 1024;
    let disc = Discretization::new(fam.clone(), chain.clone(), n_grid, SpaceParams::default()).unwrap();
    let nu = eigenmeasure(&disc).unwrap();
    let gamma = lyapunov_via_perturbation(&disc, &nu).unwrap();
    let h = 1e-4;
    let slope = |n: usize, j: usize, x: &ProjPoint| -> f64 {
        let plus = enumerate_exact(&fam, &chain, n, h, j, x).unwrap();
        let minus = enumerate_exact(&fam, &chain, n, -h, j, x).unwrap();
        (plus - minus) / (2.0 * h * n as f64)
    };
    let node = |m: usize| ProjPoint::from_angle(m as f64 * std::f64::consts::PI / n_grid as f64);
    for n in 2..=10 {
        // Started from the eigenmeasure the average is gamma for every n.
        let mut from_nu = 0.0;
        for j in 0..2 {
            for (m, &w) in nu.symbol_weights(j).iter().enumerate() {
                if w > 1e-12 {
                    from_nu += w * slope(n, j, &node(m));
                }
            }
        }
        assert!((from_nu - gamma).abs() < 1e-4, "n = {n}: {from_nu} vs {gamma}");
        // From a fixed line the bias is O(1/n).
        let fixed = 0.5 * (slope(n, 0, &node(0)) + slope(n, 1, &node(0)));
        assert!(n as f64 * (fixed - gamma).abs() < 0.25, "n = {n}: {fixed} vs {gamma}");
    }
}

#[test]
fn transposition_identity() {
    let fam = contracting();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let word: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut prod = Matrix::identity(2);
        let mut rev = Matrix::identity(2);
        for &s in &word {
            prod = prod.mul(fam.get(s).matrix());
            rev = fam.get(s).matrix().transpose().mul(&rev);
        }
        let (a, b) = (prod.operator_norm(), rev.operator_norm());
        assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn index_decay_tracks_exponent_gap() {
    let fam = contracting();
    let chain = two_state_chain();
    let disc = Discretization::new(fam.clone(), chain.clone(), 2048, SpaceParams::default()).unwrap();
    let g1 = lyapunov_via_perturbation(&disc, &eigenmeasure(&disc).unwrap()).unwrap();
    let g2 = det_closure_check(&fam, &chain).unwrap() - g1;
    // Median ratio normalized by exp((g2 - g1) n) stays in a factor-3 band.
    let normalized: Vec<f64> = [20, 40, 60, 80]
        .iter()
        .map(|&n| {
            let s = index_probe(&fam, &chain, n, 2000, 3).unwrap();
            (s.median_log - (g2 - g1) * n as f64).exp()
        })
        .collect();
    let hi = normalized.iter().cloned().fold(0.0, f64::max);
    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 3.0, "{normalized:?}");
}

#[test]
fn oracle_equivalence_three_symbols() {
    let third = Matrix::rotation(-0.5).mul(&Matrix::diag(&[1.5, 1.0]));
    let mut ms: Vec<Matrix> = contracting().matrices().iter().map(|m| m.matrix().clone()).collect();
    ms.push(third);
    let fam = MatrixFamily::from_matrices(ms).unwrap();
    let chain = build_chain(&[vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.3, 0.3, 0.4]]).unwrap();
    let n_grid = 512;
    let disc = Discretization::new(fam.clone(), chain.clone(), n_grid, SpaceParams::default()).unwrap();
    for t in [0.1, -0.1] {
        let op = TransferOperator::parametric(&disc, t);
        let mut w = disc.ones();
        for n in 1..=6 {
            w = op.apply(&w).unwrap();
            for j in 0..3 {
                for m in (0..n_grid).step_by(7) {
                    let x = ProjPoint::from_angle(m as f64 * std::f64::consts::PI / n_grid as f64);
                    let exact = enumerate_exact(&fam, &chain, n, t, j, &x).unwrap();
                    assert!((w.at(j, m) - exact).abs() <= 1e-3, "n={n} t={t} j={j} m={m}");
                }
            }
        }
    }
}
