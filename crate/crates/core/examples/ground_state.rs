// The ground state `W_a`, its scaling generator and the constants that feed
// the modulation equations. Writes a small profile CSV to the temp dir.

use std::fs::File;

use channelkit::error::Result;
use channelkit::groundstate::{GroundState, GroundStateConstants};
use channelkit::params::derive_params;
use channelkit::radialgrid::{fmt17, RadialGrid};

pub fn run_example() -> Result<(GroundStateConstants, f64)> {
    let params = derive_params(3, 2.0)?;
    let gs = GroundState::new(params);
    let c = gs.constants()?;
    println!("m = {:.6}  kappa0 = {:.6}  kappa1 = {:.6}  E(W) = {:.6}", c.m, c.kappa0, c.kappa1, c.energy_w);

    // L_a W = |W|^{4/(N-2)} W holds to discretization error
    let grid = RadialGrid::uniform(params.n, 0.01, 4000)?;
    let residual = gs.stationarity_residual(&grid, 1.0)?;
    println!("relative stationarity residual on dr = 0.01: {residual:.2e}");

    let path = std::env::temp_dir().join("channelkit_ground_state.csv");
    let mut w = csv::Writer::from_writer(File::create(&path)?);
    w.write_record(["r", "W", "LambdaW", "AW"])?;
    for &r in RadialGrid::log_spaced(params.n, 1e-2, 1e2, 9)?.nodes() {
        w.write_record([fmt17(r), fmt17(gs.w(r)), fmt17(gs.lambda_w(r)), fmt17(gs.a_w(r))])?;
    }
    w.flush()?;
    println!("profile written to {}", path.display());
    Ok((c, residual))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
