mod common;

use stringnet::error::Error;
use stringnet::scenario::{AttackerInit, Scenario};

fn conditions(s: &Scenario) -> Vec<String> {
    s.violations().into_iter().map(|v| v.condition).collect()
}

fn from_value(v: serde_json::Value) -> Scenario {
    Scenario::from_json(&v.to_string()).expect("well-formed document")
}

#[test]
fn reference_is_valid() {
    let s = common::reference();
    assert!(s.violations().is_empty(), "{:?}", s.violations());
    assert_eq!(s.attacker_count(), 4);
    assert_eq!(s.defenders.len(), 5);
    assert!(matches!(s.attackers, AttackerInit::Sampler(_)));
}

#[test]
fn serialization_is_a_fixpoint() {
    let s = common::reference();
    let once = s.to_json();
    let back = Scenario::from_json(&once).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_json(), once);
}

#[test]
fn explicit_attacker_states_round_trip() {
    let mut s = common::reference();
    s.attackers = AttackerInit::States(s.attacker_states(3).unwrap());
    let back = Scenario::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
    assert!(back.violations().is_empty());
}

#[test]
fn defaults_fill_optional_fields() {
    let mut v = common::reference_value();
    let obstacle = &mut v["obstacles"][0];
    obstacle.as_object_mut().unwrap().remove("margin");
    obstacle.as_object_mut().unwrap().remove("exponent");
    v.as_object_mut().unwrap().remove("annotations");
    let s = from_value(v);
    assert_eq!(s.obstacles[0].margin, 0.05);
    assert_eq!(s.obstacles[0].exponent, 4);
    assert!(s.annotations.is_empty());
    assert!(!s.to_json().contains("annotations"));
}

#[test]
fn net_radius_above_maximum_is_reported() {
    let mut s = common::reference();
    s.herding.net_radius = 7.0;
    assert!(conditions(&s).contains(&"net radius range".to_string()));
    match s.validate() {
        Err(Error::Validation(v)) => assert!(v.iter().any(|x| x.condition == "net radius range")),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn too_few_defenders_is_reported() {
    let mut s = common::reference();
    s.defenders.truncate(2);
    assert_eq!(s.min_defenders().unwrap(), 3);
    assert!(conditions(&s).contains(&"defender count below minimum".to_string()));
}

#[test]
fn every_violation_is_listed() {
    let mut s = common::reference();
    s.herding.alpha2 = 1.5;
    s.herding.c0 = 0.0;
    s.sim.dt = -1.0;
    let c = conditions(&s);
    for name in ["alpha2 range", "c0 range", "simulation settings"] {
        assert!(c.contains(&name.to_string()), "{name} missing from {c:?}");
    }
}

#[test]
fn herding_must_be_slower_than_attackers() {
    let mut s = common::reference();
    s.herding.herd_u_max = s.flock.u_max;
    assert!(conditions(&s).contains(&"herding acceleration bound".to_string()));
}

#[test]
fn formation_clearance_is_checked() {
    let mut s = common::reference();
    s.herding.formation_obstacle_potential.min_distance = 4.0;
    assert!(conditions(&s).contains(&"formation clearance".to_string()));
}

#[test]
fn gathering_target_inside_obstacle_blend_is_reported() {
    let mut v = common::reference_value();
    v["obstacles"][0]["center"] = serde_json::json!([-10.0, -5.5]);
    v["obstacles"][0]["width"] = serde_json::json!(2.0);
    v["obstacles"][0]["height"] = serde_json::json!(2.0);
    let s = from_value(v);
    assert!(conditions(&s).contains(&"gathering targets clear of obstacles".to_string()));
}

#[test]
fn short_gathering_distance_is_reported() {
    let mut s = common::reference();
    s.herding.formation_time_estimate = Some(30.0);
    assert!(conditions(&s).contains(&"gathering distance".to_string()));
}

#[test]
fn schema_mismatch_is_reported() {
    let mut s = common::reference();
    s.schema = "stringnet-scenario/0".into();
    assert!(conditions(&s).contains(&"schema".to_string()));
}

#[test]
fn impossible_sampler_is_reported() {
    let mut v = common::reference_value();
    v["attackers"]["sampler"]["min_separation"] = serde_json::json!(10.0);
    let s = from_value(v);
    assert!(conditions(&s).contains(&"attacker sampler".to_string()));
}

#[test]
fn parse_errors_carry_a_location() {
    let text = "{\n  \"schema\": \"stringnet-scenario/1\",\n  \"name\": 3\n}";
    match Scenario::from_json(text) {
        Err(Error::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn sampler_is_seeded() {
    let s = common::reference();
    assert_eq!(s.attacker_states(9).unwrap(), s.attacker_states(9).unwrap());
    assert_ne!(s.attacker_states(9).unwrap(), s.attacker_states(10).unwrap());
}

#[test]
fn derived_quantities() {
    let s = common::reference();
    // Reference values: acos(2.5 / 6) gives 2.83 polygon sides, so 3.
    assert_eq!(s.min_defenders().unwrap(), 3);
    assert!((s.clearance_margin().unwrap() - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
    // k1 = k2 = 1: P = [[3/2, 1/2], [1/2, 1]] has eigenvalues (5 ∓ √5)/4, so the bound is
    // 2·λmax·sqrt(λmax/λmin)·u/c0 with u = 1, c0 = 0.5.
    let (lo, hi) = ((5.0 - 5f64.sqrt()) / 4.0, (5.0 + 5f64.sqrt()) / 4.0);
    let expected = 2.0 * hi * (hi / lo).sqrt() / 0.5;
    assert!((s.tracking_bound().unwrap() - expected).abs() < 1e-12);
}
