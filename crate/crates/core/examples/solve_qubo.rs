//! Minimize a small QUBO with the ballistic solver and check it against
//! exhaustive search.
//!
//! ```bash
//! cargo run --example solve_qubo
//! ```

use sbtrade::ising::QuboProblem;
use sbtrade::sb::{self, SbParams, SplitProblem};

fn main() -> sbtrade::Result<()> {
    let qubo = QuboProblem::from_rows(vec![
        vec![-3.0, 2.0, 0.0, 1.0, 0.0],
        vec![2.0, -2.0, 1.5, 0.0, 0.0],
        vec![0.0, 1.5, -4.0, 2.0, -1.0],
        vec![1.0, 0.0, 2.0, -1.0, 0.5],
        vec![0.0, 0.0, -1.0, 0.5, -2.0],
    ])?;
    let ising = qubo.to_ising()?;
    let problem = SplitProblem::from_ising(ising);

    let params = SbParams {
        restarts: 8,
        seed: 3,
        ..SbParams::default()
    };
    let sol = sb::solve(&problem, &params)?;
    let bits = sol.spins.to_bits();
    println!("bits   {:?}", bits.bits());
    println!("energy {:.4} (run {})", sol.energy, sol.run_index);

    let (best, e_min) = qubo.brute_force_min()?;
    println!("exact  {:?} energy {e_min:.4}", best.bits());
    Ok(())
}
