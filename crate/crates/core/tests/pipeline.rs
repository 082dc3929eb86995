//! End-to-end at a small cutoff: Hamiltonian family, projections, corrections, evolution.

use hadamard::clifford::build_gamma_rep;
use hadamard::evolution::{Evolution, HamiltonianSource};
use hadamard::microlocal::intertwining_defect;
use hadamard::projections::{adiabatic_correct, gap_regularize_with, spectral_projections_with};
use hadamard::psdo::decay::geometric_thresholds;
use hadamard::psdo::dense;
use hadamard::reduction::assemble_h;
use hadamard::{MetricModel, TimeGrid};

#[test]
fn corrected_projections_stay_projections_and_improve() {
    let k = 16;
    let rep = build_gamma_rep(2).unwrap();
    let model = MetricModel::parse("(1+0.2*tanh(t)*cos(x))^2", "1", "0", -2.0, 2.0, 2).unwrap();
    let grid = TimeGrid::chebyshev(-2.0, 2.0, 17).unwrap();
    let fam = assemble_h(&model, &rep, &grid, k, 4 * k + 4).unwrap();
    let th = geometric_thresholds(k / 8, k / 2, 4);
    let reg = gap_regularize_with(&fam, &th).unwrap();
    let p0 = spectral_projections_with(&reg, &th).unwrap();
    let p1 = adiabatic_correct(&p0, &reg, &fam, 1).unwrap();
    let dim = p1.p_plus[0].nrows();
    for p in p1.p_plus.iter().chain(&p0.p_plus) {
        assert!(dense::hermiticity_residual(p) < 1e-12);
        assert!(dense::max_abs(&(&dense::matmul(p, p) - p)) < 1e-10);
        // Half the modes are positive-frequency.
        let trace: f64 = (0..dim).map(|i| p[(i, i)].re).sum();
        assert!((trace - dim as f64 / 2.0).abs() < 1e-8);
    }
    // One correction lowers the high-frequency defect at every threshold.
    let (d0, d1) = (&p1.defect_profiles[0], &p1.defect_profiles[1]);
    for (a, b) in d0.norms.iter().zip(&d1.norms) {
        assert!(b < a, "{:?} vs {:?}", d0.norms, d1.norms);
    }

    // Through the evolution, order 0 is far from intertwining compared with the step error.
    let evo = Evolution::new(HamiltonianSource::new(fam.assembler.clone(), reg.lambda), &grid, 0.01).unwrap();
    assert!(evo.max_step_drift < 1e-12);
    let (e0, _) = intertwining_defect(&p0, &evo, &th).unwrap();
    let (e1, _) = intertwining_defect(&p1, &evo, &th).unwrap();
    assert!(e1.norms[0] < e0.norms[0], "{:?} vs {:?}", e0.norms, e1.norms);
}
