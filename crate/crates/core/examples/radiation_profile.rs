// The outgoing radiation profile of compact data: half of the energy
// leaves along the forward light cone.

use channelkit::error::Result;
use channelkit::linprop::{radiation_field, RadiationField};
use channelkit::params::derive_params;
use channelkit::radialgrid::{RadialGrid, StatePair};

pub fn run_example() -> Result<RadiationField> {
    let params = derive_params(5, 4.0)?;
    let grid = RadialGrid::uniform(params.n, 0.05, 800)?;
    let s = StatePair::from_fns(&grid, |r| (-(r - 4.0f64).powi(2)).exp(), |r| 0.5 * (-(r - 5.0f64).powi(2)).exp());
    let rad = radiation_field(&params, &s, 200.0, 0.02)?;
    println!("int |G|^2 = {:.6}  E/2 = {:.6}  relative error {:.1e}", rad.norm_sq, rad.target, rad.relative_error);
    Ok(rad)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
