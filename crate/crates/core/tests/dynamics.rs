mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sindyg::experiment::simple_case_network;
use sindyg::{
    finite_diff_derivs, generate_er, integrate_rk4_strided, random_initial_state,
    sample_random_params, FeatureLibrary, SlNetwork, SlParams, StateVariableMap, WeightedGraph,
};

fn random_network(seed: u64, n: usize) -> SlNetwork {
    let graph = generate_er(n, 0.5, (0.05, 0.3), seed).unwrap();
    let params = sample_random_params(n, (0.1, 0.5), (1.0, 10.0), seed + 1).unwrap();
    SlNetwork::new(params, graph).unwrap()
}

#[test]
fn true_model_reproduces_the_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..10 {
        let net = random_network(seed, 5);
        let lib = FeatureLibrary::build(net.svmap(), 3).unwrap();
        let truth = net.true_coefficients(&lib).unwrap();
        let states = DMatrix::from_fn(50, net.n_vars(), |_, _| rng.gen_range(-1.5..1.5));
        let pred = lib.evaluate(&states).unwrap() * &truth.xi;
        for (i, row) in states.row_iter().enumerate() {
            let x: Vec<f64> = row.iter().copied().collect();
            let rhs = net.sl_rhs(&x).unwrap();
            for (k, v) in rhs.iter().enumerate() {
                assert!((pred[(i, k)] - v).abs() <= 1e-12, "seed {seed} row {i} var {k}");
            }
        }
    }
}

#[test]
fn zeroed_edge_decouples_bitwise() {
    let coupled = simple_case_network(0.0).unwrap();
    let x0 = random_initial_state(6, 5);
    let joint = coupled.simulate(&x0, 5.0, 0.01).unwrap();
    for node in 0..3 {
        let single = SlNetwork::new(
            SlParams::new(vec![coupled.params.sigma[node]], vec![coupled.params.omega[node]]).unwrap(),
            WeightedGraph::empty(1).unwrap(),
        )
        .unwrap();
        let alone = single.simulate(&x0[2 * node..2 * node + 2], 5.0, 0.01).unwrap();
        for i in 0..joint.len() {
            assert_eq!(joint.states[(i, 2 * node)].to_bits(), alone.states[(i, 0)].to_bits());
            assert_eq!(joint.states[(i, 2 * node + 1)].to_bits(), alone.states[(i, 1)].to_bits());
        }
    }
}

#[test]
fn uncoupled_nodes_settle_on_their_radius() {
    let params = SlParams::new(vec![0.1, 0.3, 0.5], vec![1.0, 4.0, 9.0]).unwrap();
    let net = SlNetwork::new(params.clone(), WeightedGraph::empty(3).unwrap()).unwrap();
    let traj = net.simulate(&random_initial_state(6, 2), 60.0, 0.01).unwrap();
    let last = traj.final_state();
    for n in 0..3 {
        let r = last[2 * n].hypot(last[2 * n + 1]);
        assert!((r - params.sigma[n].sqrt()).abs() <= 1e-3, "node {n}: radius {r}");
    }
}

#[test]
fn exact_derivatives_beat_finite_differences() {
    let net = simple_case_network(0.2).unwrap();
    let coarse = net.simulate(&random_initial_state(6, 9), 4.0, 0.01).unwrap();
    let fine = net.simulate(&random_initial_state(6, 9), 4.0, 0.005).unwrap();
    let err = |t: &sindyg::Trajectory| {
        let fd = finite_diff_derivs(&t.times, &t.states).unwrap();
        // interior points only: the one-sided ends have a larger constant
        (1..t.len() - 1).map(|i| (fd.row(i) - t.derivs.row(i)).amax()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(&coarse), err(&fine));
    assert!(e1 > 0.0);
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "finite difference error ratio {ratio}");
    for (i, row) in coarse.states.row_iter().enumerate().step_by(37) {
        let x: Vec<f64> = row.iter().copied().collect();
        let rhs = net.sl_rhs(&x).unwrap();
        for k in 0..6 {
            assert_eq!(coarse.derivs[(i, k)], rhs[k]);
        }
    }
}

#[test]
fn strided_output_matches_full_output() {
    let net = random_network(3, 4);
    let x0 = random_initial_state(8, 1);
    let full = net.simulate(&x0, 1.0, 0.01).unwrap();
    let strided =
        integrate_rk4_strided(|x, dx| net.rhs(x, dx), &x0, 1.0, 0.01, 10, StateVariableMap::planar(4).unwrap())
            .unwrap();
    assert_eq!(strided.len(), 11);
    for i in 0..strided.len() {
        assert_eq!(strided.states.row(i), full.states.row(10 * i));
    }
}
