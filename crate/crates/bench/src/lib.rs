//! Benchmark fixtures shared by the criterion targets.

use hadamard::clifford::build_gamma_rep;
use hadamard::evolution::HamiltonianSource;
use hadamard::reduction::HamiltonianAssembler;
use hadamard::MetricModel;

pub const BREATHING: &str = "(1+0.2*tanh(t)*cos(x))^2";

/// Assembler for the breathing circle at cutoff `k`.
pub fn breathing(k: usize) -> HamiltonianAssembler {
    let rep = build_gamma_rep(2).expect("2d representation");
    let model = MetricModel::parse(BREATHING, "1", "0", -2.0, 2.0, 2).expect("model parses");
    HamiltonianAssembler::new(&model, &rep, k, 4 * k + 4, 0.0).expect("assembler")
}

pub fn source(k: usize) -> HamiltonianSource {
    HamiltonianSource::new(breathing(k), 0.0)
}
