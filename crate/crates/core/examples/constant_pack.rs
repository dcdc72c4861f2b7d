// Derived constants for a few `(N, a)` pairs, and the inverse map from a
// target `p = (N-2)β` back to `a`.

use channelkit::error::Result;
use channelkit::params::{a_for_p, derive_params, Params};

pub fn run_example() -> Result<Vec<Params>> {
    let mut packs = Vec::new();
    for (n, a) in [(3, 0.0), (3, 2.0), (5, 4.0), (7, a_for_p(7, 5.0)), (4, -0.5)] {
        let p = derive_params(n, a)?;
        println!(
            "N={} a={:<8.4} beta={:.6} nu={:.4} c={:+.4} alpha={:+.4} p_odd={:?} ktilde=({},{})",
            p.n, p.a, p.beta, p.nu, p.c, p.alpha, p.p_odd, p.ktilde1, p.ktilde2
        );
        packs.push(p);
    }
    // below the Hardy threshold the operator is not positive
    assert!(derive_params(3, -0.3).is_err());
    Ok(packs)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
