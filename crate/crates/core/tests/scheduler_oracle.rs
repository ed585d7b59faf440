mod common;

use cstream::hwmodel::{ClusterSpec, HardwareProfile, LinkSpec, RooflineParams, TaskCost};
use cstream::scheduler::{evaluate_plan, search_optimal, JobSpec, Stage, StageGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flat(v: f64) -> RooflineParams {
    RooflineParams::from_knots([1.0, 2.0, 4.0], [v; 4]).unwrap()
}

/// One little and one big core with flat rooflines, so every placement can
/// be costed by hand.
fn two_core_profile(little_c_max: f64) -> HardwareProfile {
    let cluster = |name: &str, c_max: f64, eta: f64, zeta: f64, lambda: f64| ClusterSpec {
        name: name.into(),
        cores: 1,
        freq_ghz: 1.0,
        nominal_freq_ghz: None,
        c_max,
        lambda_ns_per_byte: lambda,
        omega_ns: 0.0,
        l1_line: 64,
        l2_line: 64,
        perf: flat(eta),
        energy: flat(zeta),
    };
    let link = |from: &str, to: &str, rho: f64| LinkSpec {
        from: from.into(),
        to: to.into(),
        m_ns: 10.0,
        rho,
    };
    HardwareProfile::new(
        "two-core",
        vec![cluster("little", little_c_max, 1e9, 4e9, 2.0), cluster("big", 1e10, 2e9, 1e9, 1.0)],
        vec![
            link("little", "little", 1.0),
            link("big", "big", 1.0),
            link("big", "little", 1.0),
            link("little", "big", 2.0),
        ],
        0.0,
        0.0,
    )
    .unwrap()
}

fn two_stage() -> StageGraph {
    StageGraph::new(vec![
        Stage::new("first", TaskCost::new(16.0, 1.0)),
        Stage::new("second", TaskCost::new(32.0, 2.0)),
    ])
    .unwrap()
}

// Hand-costed placements for 6400 B per task (little = core 0, big = core 1):
//   (L,L): l = 12800, 25600            E = 3.2e-6 + 6.4e-6   = 9.6e-6
//   (B,B): l = 6400, 12800             E = 12.8e-6 + 25.6e-6 = 38.4e-6
//   (L,B): l = 12800, 2000 + 12800     E = 3.2e-6 + 29.6e-6  = 32.8e-6
//   (B,L): l = 6400, 1000 + 25600      E = 12.8e-6 + 6.65e-6 = 19.45e-6
const PLACEMENTS: [([usize; 2], f64, f64); 4] = [
    ([0, 0], 25600.0, 9.6e-6),
    ([1, 1], 12800.0, 38.4e-6),
    ([0, 1], 14800.0, 32.8e-6),
    ([1, 0], 26600.0, 19.45e-6),
];

#[test]
fn four_placements_match_hand_costs() {
    let p = two_core_profile(1e10);
    let g = two_stage();
    let job = JobSpec::new(6400.0, 1e9).unwrap();
    for (assign, latency, energy) in PLACEMENTS {
        let eval = evaluate_plan(&assign, &g, &p, &job).unwrap();
        assert!((eval.latency_ns - latency).abs() < 1e-6, "{assign:?}");
        assert!((eval.energy_j - energy).abs() < 1e-15, "{assign:?}: {}", eval.energy_j);
    }
}

#[test]
fn latency_cap_moves_the_choice() {
    let p = two_core_profile(1e10);
    let g = two_stage();
    let pick = |l_set: f64| search_optimal(&g, &p, &JobSpec::new(6400.0, l_set).unwrap()).unwrap();
    assert_eq!(pick(30000.0).assignment, vec![0, 0]);
    assert_eq!(pick(20000.0).assignment, vec![0, 1]);
    assert_eq!(pick(14000.0).assignment, vec![1, 1]);
    let none = pick(12000.0);
    assert!(!none.feasible);
    assert_eq!(none.assignment, vec![1, 1]);
    assert_eq!(none.latency_ns, 12800.0);
}

#[test]
fn instruction_budget_excludes_overloaded_core() {
    // both tasks on little need 2e9 instructions/s; allow only 1.5e9
    let p = two_core_profile(1.5e9);
    let plan = search_optimal(&two_stage(), &p, &JobSpec::new(6400.0, 30000.0).unwrap()).unwrap();
    assert_eq!(plan.assignment, vec![1, 0]);
}

#[test]
fn search_matches_exhaustive_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut infeasible = 0;
    for case in 0..300 {
        let profile = common::random_profile(&mut rng, 6);
        let graph = common::random_graph(&mut rng, 4);
        let job = common::random_job(&mut rng);
        let plan = search_optimal(&graph, &profile, &job).unwrap();
        match common::exhaustive_min_energy(&graph, &profile, &job) {
            Some((energy, _)) => {
                assert!(plan.feasible, "case {case}");
                assert_eq!(plan.energy_j, energy, "case {case}");
                let (l, e, ok) = common::oracle_eval(&plan.assignment, &graph, &profile, &job);
                assert!(ok);
                assert_eq!((l, e), (plan.latency_ns, plan.energy_j), "case {case}");
            }
            None => {
                infeasible += 1;
                assert!(!plan.feasible, "case {case}");
            }
        }
    }
    assert!(infeasible > 0 && infeasible < 150, "{infeasible} infeasible cases");
}

#[test]
fn tightening_cap_never_lowers_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let profile = common::random_profile(&mut rng, 5);
        let graph = common::random_graph(&mut rng, 4);
        let bytes = 2e4;
        let mut last: Option<f64> = None;
        let mut was_feasible = true;
        for l_set in [1e6, 1e5, 5e4, 3e4, 2e4, 1e4, 5e3, 1e3] {
            let plan = search_optimal(&graph, &profile, &JobSpec::new(bytes, l_set).unwrap()).unwrap();
            assert!(was_feasible || !plan.feasible);
            was_feasible = plan.feasible;
            if plan.feasible {
                if let Some(prev) = last {
                    assert!(plan.energy_j >= prev);
                }
                last = Some(plan.energy_j);
            }
        }
    }
}
