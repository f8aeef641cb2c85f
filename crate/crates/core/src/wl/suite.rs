//! Curated graph pairs with frozen verdicts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::refine::{distinguishes, Scheme};
use crate::error::{Error, Result};
use crate::graph::families::*;
use crate::graph::{apply_permutation, gen_random_graph, Graph, NodePermutation};

pub struct SuitePair {
    pub id: &'static str,
    pub a: Graph,
    pub b: Graph,
    /// The pair is a graph and a relabelled copy of itself.
    pub isomorphic: bool,
}

fn permuted(g: Graph, seed: u64) -> (Graph, Graph) {
    let pi = NodePermutation::random(g.n, &mut ChaCha8Rng::seed_from_u64(seed));
    let h = apply_permutation(&g, &pi).expect("permutation matches the graph");
    (g, h)
}

pub fn pair_suite() -> Vec<SuitePair> {
    let pair = |id, (a, b): (Graph, Graph), isomorphic| SuitePair {
        id,
        a,
        b,
        isomorphic,
    };
    let random = gen_random_graph(9, 0.4, (1, 1), 17).expect("valid generator arguments");
    vec![
        pair(
            "c6_vs_2c3",
            (cycle(6), disjoint_union(&[cycle(3), cycle(3)])),
            false,
        ),
        pair(
            "c8_vs_2c4",
            (cycle(8), disjoint_union(&[cycle(4), cycle(4)])),
            false,
        ),
        pair(
            "c7_vs_c3_c4",
            (cycle(7), disjoint_union(&[cycle(3), cycle(4)])),
            false,
        ),
        pair("k33_vs_prism3", (complete_bipartite(3, 3), prism(3)), false),
        pair(
            "decalin_vs_bicyclopentyl",
            (decalin(), bicyclopentyl()),
            false,
        ),
        pair("csl11_2_vs_csl11_3", (csl(11, 2), csl(11, 3)), false),
        pair("star3_vs_path4", (star(3), path(4)), false),
        pair("shrikhande_vs_rook4x4", (shrikhande(), rook_4x4()), false),
        pair("iso_random9", permuted(random, 1), true),
        pair("iso_petersen", permuted(petersen(), 2), true),
        pair("iso_shrikhande", permuted(shrikhande(), 3), true),
    ]
}

/// Oracle schemes recorded in the golden file.
pub const GOLDEN_SCHEMES: [Scheme; 3] = [Scheme::Wl1, Scheme::Fwl(2), Scheme::Fwl(3)];

/// One line of the JSON-lines verdict output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub pair_id: String,
    pub scheme: String,
    pub distinguished: bool,
    pub rounds: usize,
    pub seed: Option<u64>,
}

/// Frozen oracle verdicts, one JSON object per line.
pub const GOLDEN: &str = include_str!("golden_verdicts.jsonl");

pub fn golden_verdicts() -> Result<Vec<VerdictRecord>> {
    GOLDEN
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Runs the oracle `scheme` on every suite pair.
pub fn oracle_verdicts(suite: &[SuitePair], scheme: Scheme) -> Result<Vec<VerdictRecord>> {
    suite
        .iter()
        .map(|p| {
            let (distinguished, rounds) = distinguishes(&p.a, &p.b, scheme)?;
            Ok(VerdictRecord {
                pair_id: p.id.to_string(),
                scheme: scheme.to_string(),
                distinguished,
                rounds,
                seed: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shape() {
        let s = pair_suite();
        assert!(s.len() >= 10);
        for p in &s {
            assert_eq!(p.a.n, p.b.n, "{}", p.id);
            assert_eq!(p.a.edge_count(), p.b.edge_count(), "{}", p.id);
        }
        let mut ids: Vec<_> = s.iter().map(|p| p.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), s.len());
    }

    #[test]
    fn golden_file_matches_a_fresh_oracle_run() {
        let suite = pair_suite();
        let mut fresh = Vec::new();
        for scheme in GOLDEN_SCHEMES {
            fresh.extend(oracle_verdicts(&suite, scheme).unwrap());
        }
        assert_eq!(golden_verdicts().unwrap(), fresh);
    }

    #[test]
    fn isomorphic_controls_are_never_distinguished() {
        for v in golden_verdicts().unwrap() {
            if v.pair_id.starts_with("iso_") {
                assert!(!v.distinguished, "{v:?}");
            }
        }
    }
}
