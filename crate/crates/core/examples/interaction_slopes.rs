// Log-log slopes of the two-scale interaction integrals as `λ/μ → 0`,
// against the exponents of the corresponding bounds.

use channelkit::error::Result;
use channelkit::groundstate::{GroundState, InteractionKind};
use channelkit::params::derive_params;

pub fn run_example() -> Result<Vec<(InteractionKind, f64, f64)>> {
    let gs = GroundState::new(derive_params(5, 4.0)?);
    let mut rows = Vec::new();
    for kind in [InteractionKind::AlwAlw, InteractionKind::LwLw, InteractionKind::ConeLambda] {
        let slope = gs.fit_interaction_exponent(kind)?;
        let bound = gs.bound_exponent(kind);
        println!("{:<12} slope {slope:.4}  bound {bound:.4}", kind.label());
        rows.push((kind, slope, bound));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
