use floydnet_web::{compare_model, compare_refinement, compose_rotations, presets};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn preset(id: &str) -> (String, String) {
    let all = parse(&presets());
    let p = all
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["id"] == id)
        .unwrap();
    (
        p["a"].as_str().unwrap().to_string(),
        p["b"].as_str().unwrap().to_string(),
    )
}

#[test]
fn presets_cover_the_curated_suite() {
    let all = parse(&presets());
    assert_eq!(
        all.as_array().unwrap().len(),
        floydnet::wl::pair_suite().len()
    );
}

#[test]
fn refinement_verdicts_follow_the_hierarchy_on_shrikhande() {
    let (a, b) = preset("shrikhande_vs_rook4x4");
    assert_eq!(
        parse(&compare_refinement(&a, &b, "2-FWL").unwrap())["distinguished"],
        false
    );
    assert_eq!(
        parse(&compare_refinement(&a, &b, "3-FWL").unwrap())["distinguished"],
        true
    );
}

#[test]
fn model_verdicts_match_the_oracle_on_hexagon_vs_triangles() {
    let (a, b) = preset("c6_vs_2c3");
    assert_eq!(
        parse(&compare_refinement(&a, &b, "1-WL").unwrap())["distinguished"],
        false
    );
    assert_eq!(
        parse(&compare_model(&a, &b, 2, 0).unwrap())["distinguished"],
        true
    );
}

#[test]
fn rotations_compose_exactly() {
    let r = parse(&compose_rotations(5).unwrap());
    assert!(r["max_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn bad_input_is_reported() {
    let tri = "3\n0 1 1\n1 2 1\n2 0 1\n";
    assert!(compare_refinement(tri, tri, "7-XYZ").is_err());
    assert!(compare_refinement("x", tri, "1-WL").is_err());
    assert!(compare_model(tri, tri, 4, 0).is_err());
    let big = format!("{}\n", 40);
    assert!(compare_model(&big, &big, 3, 0).is_err());
}
