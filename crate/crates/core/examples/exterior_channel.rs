// Exterior energy channel of compact data outside `R = 1`, compared with
// the energy of the data orthogonal to the radiation-free kernel.

use channelkit::error::Result;
use channelkit::linprop::{channel_limit, kernel_channel, ChannelOptions, ChannelReport, KernelChannelOptions};
use channelkit::params::derive_params;
use channelkit::projection::{as_value, InteriorConvention};
use channelkit::radialgrid::{RadialGrid, StatePair};

pub fn run_example() -> Result<(ChannelReport, f64, ChannelReport)> {
    let params = derive_params(3, 2.0)?;
    let grid = RadialGrid::uniform(params.n, 0.05, 800)?;
    let bump = |r: f64| (-(r - 5.0f64).powi(2)).exp();
    let s = StatePair::from_fns(&grid, |_| 0.0, bump);
    let rep = channel_limit(&params, &s, 1.0, &ChannelOptions::default())?;
    let (_, as_g) = as_value(&params, &s, 1.0, InteriorConvention::Frozen)?;
    println!("(0, g): E+ = {:.6}  E- = {:.6}  AS_g = {as_g:.6}", rep.e_plus, rep.e_minus);

    // (0, r^α) outside R carries no channel
    let kernel = kernel_channel(&params, params.alpha, 1.0, &KernelChannelOptions::default())?;
    println!("(0, r^alpha): E+ / input = {:.1e}", kernel.e_plus.abs() / kernel.input_energy);
    Ok((rep, as_g, kernel))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
