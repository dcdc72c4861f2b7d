macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(constant_pack);
example!(ground_state);
example!(hankel_roundtrip);
example!(exterior_channel);
example!(exact_projection);
example!(interaction_slopes);
example!(modulation_ode);
example!(soliton_fit);
example!(ground_state_flow);
example!(two_bubble);
example!(radiation_profile);

#[test]
fn constant_pack_runs() {
    let packs = constant_pack::run_example().unwrap();
    assert_eq!(packs[1].p_odd, Some(3));
    assert_eq!(packs[3].p_odd, Some(5));
    assert_eq!(packs[4].p_odd, None);
}

#[test]
fn ground_state_runs() {
    let (c, residual) = ground_state::run_example().unwrap();
    assert!(c.m.is_finite() && c.m > 0.0);
    assert!((c.kappa1 / c.kappa1_ode - 1.0).abs() < 1e-10);
    assert!(residual < 1e-2);
}

#[test]
fn hankel_roundtrip_runs() {
    let (check, drift) = hankel_roundtrip::run_example().unwrap();
    assert!(check.isometry < 1e-3 && check.round_trip < 1e-3);
    assert!(check.diagonalization < 1e-2);
    assert!(drift < 1e-3);
}

#[test]
fn exterior_channel_runs() {
    let (rep, as_g, kernel) = exterior_channel::run_example().unwrap();
    assert!((rep.asymptotic_energy / as_g - 1.0).abs() < 0.02);
    assert!(kernel.e_plus.abs() / kernel.input_energy < 1e-3);
}

#[test]
fn exact_projection_runs() {
    let (table, exact, rep) = exact_projection::run_example().unwrap();
    assert!(table.check_identities().iter().all(|c| c.pass));
    assert!(exact);
    assert!(rep.as_f > 0.0 && rep.as_g > 0.0);
}

#[test]
fn interaction_slopes_runs() {
    for (kind, slope, bound) in interaction_slopes::run_example().unwrap() {
        assert!(slope >= bound - 0.1, "{} slope {slope} below bound {bound}", kind.label());
    }
}

#[test]
fn modulation_ode_runs() {
    let s = modulation_ode::run_example().unwrap();
    assert!(s.exit.is_some());
    assert!(s.drift < 1e-8);
    assert!(s.spread < 1e-8);
    assert!(s.repelled_gamma < 0.1);
}

#[test]
fn soliton_fit_runs() {
    let rep = soliton_fit::run_example().unwrap();
    assert!((rep.lambda[0] - 1.0).abs() < 1e-8);
    assert!((rep.lambda[1] / 0.02 - 1.0).abs() < 1e-8);
    // α_j = -λ_j'
    assert!((rep.alpha[0] + 0.1).abs() < 1e-6, "{:?}", rep.alpha);
    assert!((rep.alpha[1] - 0.05).abs() < 1e-6, "{:?}", rep.alpha);
    assert!(rep.beta[0] > 0.0 && rep.beta[1] < 0.0);
}

#[test]
fn ground_state_flow_runs() {
    let drift = ground_state_flow::run_example().unwrap();
    assert_eq!(drift[0].1, 0.0);
    // close at first, then the unstable mode takes over
    assert!(drift[1].1 < 1e-2);
    assert!(drift.last().unwrap().1 > drift[1].1);
}

#[test]
fn two_bubble_runs() {
    let rep = two_bubble::run_example().unwrap();
    assert_eq!(rep.pde_beta_direction, rep.ode_beta_direction);
    assert!(rep.beta_relative_deviation < 0.3);
    assert!(rep.samples.len() > 3);
}

#[test]
fn radiation_profile_runs() {
    let rad = radiation_profile::run_example().unwrap();
    assert!(rad.relative_error < 0.02);
    assert!(!rad.flagged);
}
