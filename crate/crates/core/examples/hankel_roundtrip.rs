// The order-`ν` Hankel transform on a uniform grid: isometry, inversion and
// diagonalization of `L_a`, then one free propagation step through it.

use channelkit::error::Result;
use channelkit::hankel::{check_transform, HankelPlan, Packets, TransformCheck};
use channelkit::linprop::{evolve_linear, pair_energy};
use channelkit::params::derive_params;
use channelkit::radialgrid::{RadialGrid, StatePair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(TransformCheck, f64)> {
    let params = derive_params(3, 2.0)?;
    let grid = RadialGrid::uniform(params.n, 0.05, 800)?;
    let plan = HankelPlan::for_grid(&params, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = Packets::random(&mut rng, 3, 6.0, 14.0);
    let g = Packets::random(&mut rng, 3, 6.0, 14.0);
    let check = check_transform(&plan, &f, &g)?;
    println!("{check:?}");

    // the free flow conserves energy while the wave stays on the grid
    let s = StatePair::from_fns(&grid, |r| f.value(r), |r| g.value(r));
    let e0 = pair_energy(&params, &s, 0.0)?;
    let e1 = pair_energy(&params, &evolve_linear(&params, &s, 5.0)?, 0.0)?;
    let drift = (e1 / e0 - 1.0).abs();
    println!("energy {e0:.6} -> {e1:.6} after t = 5 (relative change {drift:.1e})");
    Ok((check, drift))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
