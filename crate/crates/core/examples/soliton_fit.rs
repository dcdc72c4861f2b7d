// Fits scales and velocity coefficients to a planted two-soliton state.

use channelkit::error::Result;
use channelkit::groundstate::GroundState;
use channelkit::modulation::{fit_state, multi_soliton, FitOptions, FitReport};
use channelkit::params::derive_params;
use channelkit::radialgrid::{RadialField, RadialGrid, StatePair};

pub fn run_example() -> Result<FitReport> {
    let gs = GroundState::new(derive_params(3, 2.0)?);
    let grid = RadialGrid::log_spaced(3, 1e-5, 1e5, 6000)?;
    let (lambda, iota) = ([1.0, 0.02], [1.0, -1.0]);
    let u0 = multi_soliton(&gs, &grid, &lambda, &iota);
    // velocity of ι_j W_(λ_j(t)) with λ_1' = 0.1, λ_2' = -0.05
    let lp = [0.1, -0.05];
    let u1 = RadialField::from_fn(&grid, |r| {
        lambda.iter().zip(&iota).zip(&lp).map(|((&l, &i), &d)| -i * d * gs.scale_l2(l, r, |x| gs.lambda_w(x))).sum()
    });
    let s = StatePair::new(u0, u1)?;
    let rep = fit_state(&gs, &s, &iota, &[0.95, 0.021], &FitOptions::default())?;
    println!("lambda = {:?}  beta = {:?}  in {} iterations", rep.lambda, rep.beta, rep.iterations);
    Ok(rep)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
