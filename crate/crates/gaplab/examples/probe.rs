use gaplab::bits::BitString;
use gaplab::dense;
use gaplab::experiment::{derive_rng, run_cells};
use gaplab::hamiltonian::FieldCoefficients;
use gaplab::perturbation::select_penalty_target;
use gaplab::qmc::{run_point, RunParams};
use gaplab::sat::*;
use std::time::Instant;

fn main() {
    let mut rng = derive_rng(0xACC3, 0, 0);
    let base = generate_double_plant(3, &mut rng).unwrap();
    let target = select_penalty_target(&base).unwrap();
    let inst_a = add_penalty(&base, target);
    let inst_b = generate_double_plant(3, &mut rng).unwrap();
    let coeffs_a = FieldCoefficients::uniform(3);
    let coeffs_b = FieldCoefficients::new(vec![1.5, 0.5, 1.5]).unwrap();
    let jobs: Vec<(&str, &Instance, &FieldCoefficients, f64)> = vec![
        ("penalized b8", &inst_a, &coeffs_a, 8.0),
        ("randomized b8", &inst_b, &coeffs_b, 8.0),
        ("penalized b5", &inst_a, &coeffs_a, 5.0),
        ("randomized b5", &inst_b, &coeffs_b, 5.0),
    ];
    let t = Instant::now();
    let results: Vec<String> = run_cells(jobs.len(), 2, |j| {
        let (name, inst, coeffs, beta) = jobs[j];
        let th = dense::thermal_averages(inst, coeffs, 0.9, beta);
        let params = RunParams::new(beta, 32_000_000, 32, 30_000);
        let mut rng = derive_rng(0xFEED, 7, j as u64);
        let est = run_point(inst, coeffs, 0.9, BitString::zeros(inst.n), params, &mut rng).unwrap();
        format!(
            "{name}: W {:.4}+-{:.4} ({:+.1}s) H {:.5}+-{:.5} ({:+.1}s) V ({:+.1}s) H0 ({:+.1}s)",
            est.w.mean, est.w.err, (est.w.mean - th.w) / est.w.err,
            est.h.mean, est.h.err, (est.h.mean - th.h) / est.h.err,
            (est.v.mean - th.v) / est.v.err,
            (est.h0.mean - th.h0) / est.h0.err,
        )
    });
    for r in results { println!("{r}"); }
    println!("total {:?}", t.elapsed());
}
