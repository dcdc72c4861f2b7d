// The idealized modulation system: two same-sign bubbles at rest collapse
// toward each other, opposite signs separate.

use channelkit::error::Result;
use channelkit::groundstate::GroundState;
use channelkit::modulation::{exit_time, scaling_check, simulate, ModState, ModSystem, SimulateConfig};
use channelkit::params::derive_params;

pub struct OdeSummary {
    pub exit: Option<f64>,
    pub drift: f64,
    pub spread: f64,
    pub repelled_gamma: f64,
}

pub fn run_example() -> Result<OdeSummary> {
    let sys = ModSystem::new(&GroundState::new(derive_params(3, 2.0)?))?;
    let same = ModState::at_rest(vec![1.0, 0.1], vec![1.0, 1.0])?;
    let exit = exit_time(&sys, &same, 0.5, 1e3)?;
    println!("same signs: gamma reaches 0.5 at t = {:?}, H drift {:.1e}", exit.time, exit.hamiltonian_drift);

    let spread = scaling_check(&sys, &same, &[0.5, 2.0, 10.0], 0.5, 1e4)?.max_deviation;
    println!("exit time / lambda_1(0) spread over rescalings: {spread:.1e}");

    let opp = ModState::at_rest(vec![1.0, 0.1], vec![1.0, -1.0])?;
    let tr = simulate(&sys, &opp, &SimulateConfig { t_max: 0.5, ..Default::default() })?;
    println!("opposite signs: gamma {:.4} -> {:.4}", opp.gamma(), tr.last().gamma());
    Ok(OdeSummary { exit: exit.time, drift: exit.hamiltonian_drift, spread, repelled_gamma: tr.last().gamma() })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
