#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sindyg::{
    compute_penalty, CoefficientMatrix, FeatureLibrary, PenaltyMatrix, SlNetwork, SlParams,
    SolverConfig, WeightedGraph,
};

/// Damped Stuart–Landau network: every node spirals into the origin, so
/// the trajectory stays away from any invariant curve of the library.
pub fn stable_cubic_network(seed: u64) -> SlNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2;
    let mut a = DMatrix::zeros(n, n);
    if rng.gen_bool(0.8) {
        let w = rng.gen_range(0.1..0.5);
        a[(0, 1)] = w;
        a[(1, 0)] = w;
    }
    let sigma = (0..n).map(|_| rng.gen_range(-0.3..-0.05)).collect();
    let omega = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let graph = WeightedGraph::new(a, false).unwrap();
    SlNetwork::new(SlParams::new(sigma, omega).unwrap(), graph).unwrap()
}

pub struct RecoveryCase {
    pub network: SlNetwork,
    pub library: FeatureLibrary,
    pub theta: DMatrix<f64>,
    pub xdot: DMatrix<f64>,
    pub truth: CoefficientMatrix,
}

/// 2000 noiseless samples at dt = 0.01, each node starting at radius 1 to 2.
pub fn recovery_case(seed: u64) -> RecoveryCase {
    let network = stable_cubic_network(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut x0 = Vec::new();
    for _ in 0..network.params.n_nodes() {
        let (r, phase) = (rng.gen_range(1.0..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
        x0.extend([r * phase.cos(), r * phase.sin()]);
    }
    let traj = network.simulate(&x0, 19.99, 0.01).unwrap();
    assert_eq!(traj.len(), 2000);
    let library = FeatureLibrary::build(network.svmap(), 3).unwrap();
    let theta = library.evaluate(&traj.states).unwrap();
    let truth = network.true_coefficients(&library).unwrap();
    RecoveryCase { network, library, theta, xdot: traj.derivs, truth }
}

impl RecoveryCase {
    pub fn penalty(&self, config: &SolverConfig) -> PenaltyMatrix {
        compute_penalty(&self.library, &self.network.graph, config).unwrap()
    }

    /// Smallest nonzero |ξ|, optionally weighted entrywise by a penalty.
    pub fn smallest_true(&self, penalty: Option<&PenaltyMatrix>) -> f64 {
        let xi = &self.truth.xi;
        let mut best = f64::INFINITY;
        for j in 0..xi.nrows() {
            for k in 0..xi.ncols() {
                let v = xi[(j, k)].abs() * penalty.map_or(1.0, |p| p.f[(j, k)]);
                if xi[(j, k)] != 0.0 {
                    best = best.min(v);
                }
            }
        }
        best
    }
}

/// Random tall matrix with entries uniform in [-1, 1].
pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}
