// The nonlinear solver started from `(W_a, 0)`: energy is conserved, and
// the state stays near `W_a` until the discretization error excites the
// unstable mode.

use channelkit::error::Result;
use channelkit::groundstate::GroundState;
use channelkit::nonlinear::{evolve, EvolveConfig, Mode, Scheme};
use channelkit::params::derive_params;
use channelkit::radialgrid::{RadialField, StatePair};

pub fn run_example() -> Result<Vec<(f64, f64)>> {
    let params = derive_params(3, 2.0)?;
    let gs = GroundState::new(params);
    let cfg = EvolveConfig { t_final: 2.0, dr: 0.025, r_max: 40.0, sponge_fraction: 0.0, snapshot_every: Some(0.5), ..Default::default() };
    let grid = cfg.grid(params.n)?;
    let w = RadialField::from_fn(&grid, |r| gs.w(r));
    let scheme = Scheme::new(&params, &grid, Mode::Nonlinear, 0.0, 0.0)?;
    let wn = scheme.h1a_sq(&w.values).sqrt();
    let tr = evolve(&params, &StatePair::new(w.clone(), RadialField::zeros(&grid))?, &cfg)?;
    println!("energy drift {:.1e}", tr.energy_drift());
    let drift: Vec<(f64, f64)> = tr
        .snapshots
        .iter()
        .map(|(t, s)| {
            let d: Vec<f64> = s.position.values.iter().zip(&w.values).map(|(a, b)| a - b).collect();
            (*t, scheme.h1a_sq(&d).sqrt() / wn)
        })
        .collect();
    for (t, d) in &drift {
        println!("t = {t:.1}  |u - W| / |W| = {d:.2e}");
    }
    Ok(drift)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
