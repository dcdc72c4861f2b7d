// Exact rational coefficient tables and Cauchy inverses, then the floating
// projection report of a data pair.

use channelkit::error::Result;
use channelkit::params::derive_params;
use channelkit::projection::{cauchy_inverse, cauchy_matrix, g_nodes, is_identity, mat_mul, report, CoeffTable, InteriorConvention, ProjectionReport};
use channelkit::radialgrid::{RadialGrid, StatePair};

pub fn run_example() -> Result<(CoeffTable, bool, ProjectionReport)> {
    let table = CoeffTable::new(5)?;
    println!("p = 5: ctilde = {:?}, dtilde = {:?}", table.ctilde.iter().map(|q| q.to_string()).collect::<Vec<_>>(), table.dtilde.iter().map(|q| q.to_string()).collect::<Vec<_>>());
    let failed = table.check_identities().into_iter().filter(|c| !c.pass).count();
    println!("identities failing: {failed}");

    let (x, y) = g_nodes(7, 3);
    let inv = cauchy_inverse(&x, &y)?;
    let exact = is_identity(&mat_mul(&cauchy_matrix(&x, &y)?, &inv));
    println!("3x3 Cauchy inverse exact: {exact}");

    let params = derive_params(5, 4.0)?;
    let grid = RadialGrid::uniform(params.n, 0.05, 600)?;
    let s = StatePair::from_fns(&grid, |r| (-(r - 4.0f64).powi(2)).exp(), |r| (-(r - 6.0f64).powi(2)).exp());
    let rep = report(&params, &s, 1.0, InteriorConvention::Frozen)?;
    println!("AS_f = {:.6}  AS_g = {:.6}  exterior energy = {:.6}", rep.as_f, rep.as_g, rep.exterior_energy);
    Ok((table, exact, rep))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
