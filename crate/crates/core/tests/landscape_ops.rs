//! Landscape search on small problems: duplicate detection under the
//! symmetry group, downward/upward searches, determinism, and the audit.

mod common;

use common::{cubic_problem, interval_space, quartic_problem, square_space};
use hisd_core::dynamics::SchemeParams;
use hisd_core::fem::{interpolate, l2_norm, Field};
use hisd_core::landscape::{
    dedup, graph_to_dot, graph_to_json, LandscapeContext, LandscapeParams, SearchDirection,
    SolutionRecord,
};
use hisd_core::Error;

fn toy_params() -> LandscapeParams {
    LandscapeParams {
        epsilon_rel: 0.1,
        epsilon_abs: 0.1,
        dedup_tol: 1e-2,
        residual_threshold: 1e-4,
        max_runs: 40,
        upward_targets: vec![1],
        seed: 7,
    }
}

#[test]
fn dedup_sign_flip_and_distinct_modes() {
    let space = interval_space(32);
    let u = interpolate(&space, |x| (x[0]).sin());
    let mut neg = u.clone();
    neg.scale(-1.0);
    assert!(dedup(&space, &u, &neg, 1e-8));
    let other = interpolate(&space, |x| (2.0 * x[0]).sin());
    assert!(!dedup(&space, &u, &other, 1e-3));
}

#[test]
fn dedup_is_reflexive_and_symmetric() {
    let space = square_space(1.0, 8);
    let pi = std::f64::consts::PI;
    let a = interpolate(&space, |x| (pi * x[0]).sin() * (pi * x[1]).sin());
    let b = interpolate(&space, |x| 0.99 * (pi * x[0]).sin() * (pi * x[1]).sin());
    let c = interpolate(&space, |x| (2.0 * pi * x[0]).sin() * (pi * x[1]).sin());
    for tol in [1e-3, 1e-2, 1e-1] {
        assert!(dedup(&space, &a, &a, tol));
        for other in [&b, &c] {
            assert_eq!(dedup(&space, &a, other, tol), dedup(&space, other, &a, tol));
        }
    }
}

#[test]
fn dedup_rotated_field_on_the_square() {
    let space = square_space(1.0, 12);
    let pi = std::f64::consts::PI;
    let a = interpolate(&space, |x| (pi * x[0]).sin() * (2.0 * pi * x[1]).sin());
    // 90-degree rotation of the same pattern
    let b = interpolate(&space, |x| (2.0 * pi * x[0]).sin() * (pi * x[1]).sin());
    assert!(dedup(&space, &a, &b, 1e-8));
    // on a non-square rectangle only identity and sign are available
    let rect = hisd_core::fem::FemSpace::new(
        hisd_core::fem::build_mesh(2, &[1.0, 2.0], &[8, 16]).unwrap(),
    );
    let c = interpolate(&rect, |x| (pi * x[0]).sin() * (pi * x[1] / 2.0).sin());
    assert!(dedup(&rect, &c, &c, 1e-10));
}

#[test]
fn downward_search_from_the_cubic_zero_state() {
    // u = 0 has index 1; both signed children relax to the two minima,
    // which coincide under the sign flip
    let space = interval_space(40);
    let problem = cubic_problem();
    let scheme = SchemeParams::new(1, 1e-3, 8.0);
    let ctx = LandscapeContext::new(&space, &problem, scheme, toy_params()).unwrap();
    let (index, _) = ctx.analyze(&Field::zeros(space.n_dofs()), 1).unwrap();
    assert_eq!(index, 1);
    let parent = SolutionRecord {
        id: 0,
        u: Field::zeros(space.n_dofs()),
        index,
        residual: 0.0,
        parent: None,
        search: SearchDirection::Root,
        perturbation: None,
    };
    let children = ctx.downward_search(&parent, 0).unwrap();
    assert_eq!(children.len(), 1, "the +/- minima are sign-equivalent");
    assert_eq!(children[0].index, 0);
    assert!(children[0].residual <= 1e-4);
    assert!(l2_norm(&space, &children[0].u) > 0.5, "nontrivial minimum");
}

#[test]
fn zero_perturbation_returns_the_parent() {
    let space = interval_space(40);
    let problem = cubic_problem();
    let scheme = SchemeParams::new(1, 1e-3, 2.0);
    let mut params = toy_params();
    params.epsilon_rel = 0.0;
    params.epsilon_abs = 0.0;
    let ctx = LandscapeContext::new(&space, &problem, scheme, params).unwrap();
    let parent = SolutionRecord {
        id: 0,
        u: Field::zeros(space.n_dofs()),
        index: 1,
        residual: 0.0,
        parent: None,
        search: SearchDirection::Root,
        perturbation: None,
    };
    let children = ctx.downward_search(&parent, 0).unwrap();
    assert_eq!(children.len(), 1);
    assert!(dedup(&space, &children[0].u, &parent.u, 1e-2));
}

#[test]
fn upward_search_reaches_an_index_one_saddle_of_the_quartic() {
    // u = 0 is a local minimum of the quartic model (fprime(0) = 0); the
    // softest ascent finds the small index-1 saddle of its landscape
    let space = interval_space(50);
    let problem = quartic_problem();
    let mut scheme = SchemeParams::new(1, 1e-3, 6.0);
    scheme.picard_max = 100;
    let mut params = toy_params();
    params.residual_threshold = 1e-5;
    params.max_runs = 10;
    let ctx = LandscapeContext::new(&space, &problem, scheme, params).unwrap();
    let parent = SolutionRecord {
        id: 0,
        u: Field::zeros(space.n_dofs()),
        index: 0,
        residual: 0.0,
        parent: None,
        search: SearchDirection::Root,
        perturbation: None,
    };
    let children = ctx.upward_search(&parent, 1).unwrap();
    assert!(!children.is_empty(), "no ascent children survived");
    assert!(
        children.iter().any(|c| c.index == 1),
        "indices found: {:?}",
        children.iter().map(|c| c.index).collect::<Vec<_>>()
    );
}

#[test]
fn search_target_preconditions() {
    let space = interval_space(24);
    let problem = cubic_problem();
    let scheme = SchemeParams::new(1, 1e-3, 1.0);
    let ctx = LandscapeContext::new(&space, &problem, scheme, toy_params()).unwrap();
    let parent = SolutionRecord {
        id: 0,
        u: Field::zeros(space.n_dofs()),
        index: 1,
        residual: 0.0,
        parent: None,
        search: SearchDirection::Root,
        perturbation: None,
    };
    assert!(matches!(
        ctx.downward_search(&parent, 1),
        Err(Error::InvalidSearchTarget { target: 1, parent: 1 })
    ));
    assert!(matches!(
        ctx.upward_search(&parent, 1),
        Err(Error::InvalidSearchTarget { .. })
    ));
}

#[test]
fn upward_padding_beyond_the_window_errors() {
    // 3 interior DOFs cannot host a 3-pair-plus window
    let space = interval_space(4);
    let problem = cubic_problem();
    let scheme = SchemeParams::new(1, 1e-3, 1.0);
    let ctx = LandscapeContext::new(&space, &problem, scheme, toy_params()).unwrap();
    let parent = SolutionRecord {
        id: 0,
        u: Field::zeros(space.n_dofs()),
        index: 0,
        residual: 0.0,
        parent: None,
        search: SearchDirection::Root,
        perturbation: None,
    };
    assert!(matches!(
        ctx.upward_search(&parent, 3),
        Err(Error::SpectrumWindow { .. })
    ));
}

#[test]
fn sweep_is_deterministic_and_audited() {
    let space = interval_space(40);
    let problem = cubic_problem();
    let scheme = SchemeParams::new(1, 1e-3, 8.0);
    let ctx = LandscapeContext::new(&space, &problem, scheme, toy_params()).unwrap();
    let g1 = ctx.build(Field::zeros(space.n_dofs())).unwrap();
    let g2 = ctx.build(Field::zeros(space.n_dofs())).unwrap();
    let json1 = graph_to_json(&g1, |id| format!("fields/sol_{id:03}.txt"));
    let json2 = graph_to_json(&g2, |id| format!("fields/sol_{id:03}.txt"));
    assert_eq!(json1, json2, "sweep is not deterministic");
    assert!(ctx.audit(&g1).unwrap(), "stored indices disagree with recomputation");
    // the toy landscape: zero (index 1) and the sign-equivalent minima
    assert!(g1.nodes.len() >= 2);
    assert!(g1.edges.iter().all(|e| g1.nodes[e.parent].index != g1.nodes[e.child].index));
    let dot = graph_to_dot(&g1);
    assert!(dot.contains("digraph"));
}
