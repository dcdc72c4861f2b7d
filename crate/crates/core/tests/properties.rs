use std::sync::{Arc, OnceLock};

use channelkit::groundstate::GroundState;
use channelkit::hankel::{check_transform, HankelPlan, Packets};
use channelkit::modulation::{scaling_check, simulate, ModState, ModSystem, SimulateConfig};
use channelkit::params::{derive_params, Params};
use channelkit::projection::{cauchy_inverse, cauchy_matrix, is_identity, mat_mul, q};
use channelkit::radialgrid::{fmt17, RadialGrid};
use proptest::collection::btree_set;
use proptest::prelude::*;

fn plan() -> &'static (Params, HankelPlan) {
    static PLAN: OnceLock<(Params, HankelPlan)> = OnceLock::new();
    PLAN.get_or_init(|| {
        let params = derive_params(3, 2.0).unwrap();
        let grid: Arc<RadialGrid> = RadialGrid::uniform(3, 0.05, 800).unwrap();
        let plan = HankelPlan::for_grid(&params, &grid).unwrap();
        (params, plan)
    })
}

fn system() -> &'static ModSystem {
    static SYS: OnceLock<ModSystem> = OnceLock::new();
    SYS.get_or_init(|| ModSystem::new(&GroundState::new(derive_params(3, 2.0).unwrap())).unwrap())
}

fn packet() -> impl Strategy<Value = Packets> {
    prop::collection::vec((-1.0..1.0f64, 6.0..14.0f64, 0.8..1.5f64), 1..4).prop_map(|terms| Packets { terms })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cauchy_inverse_is_exact(nodes in btree_set(-40i64..40, 2..9)) {
        let nodes: Vec<i64> = nodes.into_iter().collect();
        let k = nodes.len() / 2;
        let x: Vec<_> = nodes[..k].iter().map(|&v| q(v)).collect();
        let y: Vec<_> = nodes[k..2 * k].iter().map(|&v| q(v)).collect();
        let c = cauchy_matrix(&x, &y).unwrap();
        let inv = cauchy_inverse(&x, &y).unwrap();
        prop_assert!(is_identity(&mat_mul(&c, &inv)));
        prop_assert!(is_identity(&mat_mul(&inv, &c)));
    }

    #[test]
    fn hankel_transform_is_an_isometry(f in packet(), g in packet()) {
        let (_, plan) = plan();
        let c = check_transform(plan, &f, &g).unwrap();
        prop_assert!(c.isometry < 1e-3, "{c:?}");
        prop_assert!(c.round_trip < 1e-3, "{c:?}");
    }

    #[test]
    fn hamiltonian_is_conserved(
        ratio in 0.01..0.2f64,
        b in prop::array::uniform3(-0.05..0.05f64),
        s2 in prop::bool::ANY,
        s3 in prop::bool::ANY,
    ) {
        let sign = |s: bool| if s { 1.0 } else { -1.0 };
        let s0 = ModState::new(vec![1.0, ratio, ratio * ratio], b.to_vec(), vec![1.0, sign(s2), sign(s3)]).unwrap();
        let tr = simulate(system(), &s0, &SimulateConfig { t_max: 0.2, gamma_ceiling: 0.9, ..Default::default() }).unwrap();
        prop_assert!(tr.hamiltonian_drift() < 1e-6, "drift {}", tr.hamiltonian_drift());
    }

    #[test]
    fn exit_times_scale_with_the_largest_bubble(ratio in 0.02..0.2f64, sigma in 0.2..20.0f64) {
        let s0 = ModState::at_rest(vec![1.0, ratio], vec![1.0, 1.0]).unwrap();
        let rep = scaling_check(system(), &s0, &[sigma], 0.5, 1e5).unwrap();
        prop_assert!(rep.max_deviation < 1e-8, "{:?}", rep.max_deviation);
    }

    #[test]
    fn floats_round_trip_through_the_artifact_format(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn constant_pack_satisfies_its_identities(n in 3usize..9, a in -0.2..20.0f64) {
        let p = derive_params(n, a).unwrap();
        let d = (n - 2) as f64;
        prop_assert!((p.beta * p.beta - (1.0 + 4.0 * a / (d * d))).abs() < 1e-12 * (1.0 + a));
        prop_assert!((p.c + p.alpha + d * p.beta).abs() < 1e-9);
        prop_assert!((p.c - p.alpha - d).abs() < 1e-9);
        prop_assert_eq!(derive_params(n, a).unwrap(), p);
    }
}
