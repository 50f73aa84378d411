use ripalm::numerics::norm2;
use ripalm::qrot::{self, gen_gaussian_mixture_instance, QrotOracle};
use ripalm::solver::*;
use ripalm::ssn::SsnConfig;
use ripalm::DenseMatrix;

fn main() {
    let inst = gen_gaussian_mixture_instance(8, 8, 1.0, 5);
    let oracle = QrotOracle::new(&inst);
    let cfg = default_schedules();
    let mut state = RipalmState::new(InitialPoint::origin(16, 64));
    for _ in 0..25 {
        let prev = state.clone();
        match ripalm_step(&oracle, &state, &cfg, &SsnConfig::default()) {
            Ok((next, rec)) => {
                let res = qrot::kkt_residuals_qrot(
                    &inst,
                    &qrot::QrotDualPoint::from_stacked(&next.y, 8),
                    &DenseMatrix::from_vec(8, 8, next.x.0.clone()),
                );
                println!(
                    "k={:2} sig={:9.2e} res={:9.2e} dy={:9.2e} dx={:9.2e} lhs={:9.2e} rhs={:9.2e} |D|={:9.2e} |w-y|={:9.2e} inner={}",
                    rec.k, rec.sigma, res.res_max(),
                    norm2(&next.y.minus(&prev.y)), norm2(&next.x.minus(&prev.x)),
                    rec.criterion_lhs.unwrap(), rec.criterion_rhs.unwrap(),
                    norm2(&next.delta), norm2(&next.w.minus(&next.y)),
                    rec.inner_iterations,
                );
                state = next;
            }
            Err(e) => {
                println!("STALL at k={}: {e}", state.k);
                break;
            }
        }
    }
}
