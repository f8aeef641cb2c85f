//! Browser demo: color refinement verdicts, untrained-model verdicts and the
//! rotation composition check, each returning a JSON string.
//!
//! The plain functions are usable from native code; the `wasm_bindgen`
//! wrappers at the bottom only map errors to JavaScript exceptions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use floydnet::attention::rotation::{random_rotation, rotation_compose_check};
use floydnet::graph::io::write_edge_list;
use floydnet::graph::{parse_edge_list, Graph};
use floydnet::model::ModelParams;
use floydnet::wl::{
    alignment_config, distinguishes, model_signature, pair_suite, refine, Scheme, DEFAULT_DECIMALS,
};
use floydnet::{Error, Result};

/// Largest graph the demo refines or runs the model on, per tuple order.
const MAX_NODES: [usize; 3] = [64, 32, 16];

fn parse_sized(text: &str, order: usize) -> Result<Graph> {
    let g = parse_edge_list(text)?;
    let cap = MAX_NODES[order.clamp(1, 3) - 1];
    if g.n > cap {
        return Err(Error::InvalidArgument(format!(
            "{} nodes exceed the demo limit of {cap} for order {order}",
            g.n
        )));
    }
    Ok(g)
}

/// Curated pairs as edge-list text, for the page's preset menu.
pub fn presets() -> String {
    let pairs: Vec<Value> = pair_suite()
        .iter()
        .map(|p| json!({"id": p.id, "a": write_edge_list(&p.a), "b": write_edge_list(&p.b)}))
        .collect();
    Value::Array(pairs).to_string()
}

/// Refines both graphs under `scheme` (`1-WL`, `k-WL` or `k-FWL`).
pub fn compare_refinement(a: &str, b: &str, scheme: &str) -> Result<String> {
    let scheme = Scheme::parse(scheme)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{scheme}`")))?;
    let (ga, gb) = (
        parse_sized(a, scheme.order())?,
        parse_sized(b, scheme.order())?,
    );
    let (distinguished, rounds) = distinguishes(&ga, &gb, scheme)?;
    let classes = |g: &Graph| refine(g, scheme).map(|p| p.num_colors);
    Ok(json!({
        "scheme": scheme.to_string(),
        "distinguished": distinguished,
        "rounds": rounds,
        "classes": [classes(&ga)?, classes(&gb)?],
    })
    .to_string())
}

/// Runs a freshly initialized order-`order` network on both graphs and
/// compares the rounded multisets of final tuple states.
pub fn compare_model(a: &str, b: &str, order: usize, seed: u64) -> Result<String> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "order must be 1, 2 or 3, got {order}"
        )));
    }
    let (ga, gb) = (parse_sized(a, order)?, parse_sized(b, order)?);
    let cfg = alignment_config(order, seed);
    let params = ModelParams::init(&cfg)?;
    let sa = model_signature(&ga, &cfg, &params, DEFAULT_DECIMALS)?;
    let sb = model_signature(&gb, &cfg, &params, DEFAULT_DECIMALS)?;
    Ok(json!({
        "order": order,
        "seed": seed,
        "layers": cfg.layers,
        "rel_dim": cfg.rel_dim,
        "distinguished": sa != sb,
    })
    .to_string())
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Composes two random rotations through the attention value path and
/// reports the largest deviation from the matrix product.
pub fn compose_rotations(seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_a, t_b) = (random_rotation(&mut rng), random_rotation(&mut rng));
    let got = rotation_compose_check(&t_a, &t_b)?;
    let want = matmul3(&t_a, &t_b);
    let err = got
        .iter()
        .flatten()
        .zip(want.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(
        json!({"t_a": t_a, "t_b": t_b, "composed": got, "product": want, "max_error": err})
            .to_string(),
    )
}

fn to_js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = presets)]
pub fn presets_js() -> String {
    presets()
}

#[wasm_bindgen(js_name = compareRefinement)]
pub fn compare_refinement_js(
    a: &str,
    b: &str,
    scheme: &str,
) -> std::result::Result<String, JsError> {
    to_js(compare_refinement(a, b, scheme))
}

#[wasm_bindgen(js_name = compareModel)]
pub fn compare_model_js(
    a: &str,
    b: &str,
    order: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(compare_model(a, b, order, seed as u64))
}

#[wasm_bindgen(js_name = composeRotations)]
pub fn compose_rotations_js(seed: u32) -> std::result::Result<String, JsError> {
    to_js(compose_rotations(seed as u64))
}
