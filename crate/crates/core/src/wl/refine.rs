use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest number of tuples a refinement will enumerate.
pub const MAX_TUPLES: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Node color refinement.
    Wl1,
    /// Classical `k`-WL: one multiset per substituted position.
    Wl(usize),
    /// Folklore `k`-WL: one multiset over pivots of substituted tuples.
    Fwl(usize),
}

impl Scheme {
    pub fn order(self) -> usize {
        match self {
            Scheme::Wl1 => 1,
            Scheme::Wl(k) | Scheme::Fwl(k) => k,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "1-WL" {
            return Some(Scheme::Wl1);
        }
        let (k, kind) = s.split_once('-')?;
        let k: usize = k.parse().ok()?;
        match kind {
            "WL" => Some(Scheme::Wl(k)),
            "FWL" => Some(Scheme::Fwl(k)),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Wl1 => write!(f, "1-WL"),
            Scheme::Wl(k) => write!(f, "{k}-WL"),
            Scheme::Fwl(k) => write!(f, "{k}-FWL"),
        }
    }
}

/// Stable coloring of all `k`-tuples, tuple `(t_0, .., t_{k-1})` at index
/// `sum t_a n^(k-1-a)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorPartition {
    pub scheme: Scheme,
    pub n: usize,
    /// Dense ids `0..num_colors`.
    pub colors: Vec<u32>,
    pub num_colors: usize,
    /// Refinement rounds until the partition stopped splitting (the last,
    /// non-splitting round included).
    pub rounds: usize,
    /// Class count after initialization and after every round.
    pub class_counts: Vec<usize>,
    digest: [u8; 32],
}

/// Canonical hash of the full refinement transcript. Two graphs get equal
/// signatures exactly when joint refinement cannot tell them apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GraphSignature(pub [u8; 32]);

impl fmt::Display for GraphSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

pub fn signature(p: &ColorPartition) -> GraphSignature {
    GraphSignature(p.digest)
}

/// Replaces arbitrary keys by dense ids in sorted key order, and appends the
/// sorted `(key, count)` table to the transcript.
fn reindex(keys: &[Vec<u64>], hasher: &mut Sha256) -> (Vec<u32>, usize) {
    let mut table: BTreeMap<&[u64], (u32, u64)> = BTreeMap::new();
    for k in keys {
        table.entry(k.as_slice()).or_insert((0, 0)).1 += 1;
    }
    hasher.update((table.len() as u64).to_le_bytes());
    for (id, (key, slot)) in table.iter_mut().enumerate() {
        slot.0 = id as u32;
        hasher.update((key.len() as u64).to_le_bytes());
        for x in key.iter() {
            hasher.update(x.to_le_bytes());
        }
        hasher.update(slot.1.to_le_bytes());
    }
    let ids = keys.iter().map(|k| table[k.as_slice()].0).collect();
    (ids, table.len())
}

fn tuple_count(n: usize, k: usize) -> Result<usize> {
    n.checked_pow(k as u32)
        .filter(|&t| t <= MAX_TUPLES)
        .ok_or_else(|| {
            Error::Unsupported(format!(
                "{k}-tuple refinement on {n} nodes ({MAX_TUPLES} tuple limit)"
            ))
        })
}

fn decode(mut idx: usize, n: usize, t: &mut [usize]) {
    for a in (0..t.len()).rev() {
        t[a] = idx % n;
        idx /= n;
    }
}

fn encode(t: &[usize], n: usize) -> usize {
    t.iter().fold(0, |acc, &x| acc * n + x)
}

/// Atomic type of an ordered tuple: node features of every entry, then for
/// every ordered pair of positions the equality bit, the edge flag and the
/// raw weight and feature bits.
fn atomic_key(g: &Graph, t: &[usize]) -> Vec<u64> {
    let mut key = Vec::new();
    for &u in t {
        key.extend(g.node_row(u).iter().map(|x| x.to_bits()));
    }
    for a in 0..t.len() {
        for b in 0..t.len() {
            if a == b {
                continue;
            }
            let (u, v) = (t[a], t[b]);
            key.push((u == v) as u64);
            let e = u != v && g.has_edge(u, v);
            key.push(e as u64);
            if e {
                key.push(g.weight(u, v).to_bits());
                key.extend(g.edge_row(u, v).iter().map(|x| x.to_bits()));
            }
        }
    }
    key.extend(g.graph_feats.iter().map(|x| x.to_bits()));
    key
}

fn run(
    g: &Graph,
    scheme: Scheme,
    init: Vec<Vec<u64>>,
    step: impl Fn(&[u32]) -> Vec<Vec<u64>>,
) -> ColorPartition {
    let mut hasher = Sha256::new();
    hasher.update(scheme.to_string().as_bytes());
    hasher.update((g.n as u64).to_le_bytes());
    let (mut colors, mut classes) = reindex(&init, &mut hasher);
    let mut class_counts = vec![classes];
    let mut rounds = 0;
    loop {
        let keys = step(&colors);
        let (next, next_classes) = reindex(&keys, &mut hasher);
        rounds += 1;
        class_counts.push(next_classes);
        colors = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    ColorPartition {
        scheme,
        n: g.n,
        colors,
        num_colors: classes,
        rounds,
        class_counts,
        digest: hasher.finalize().into(),
    }
}

/// Node color refinement to stability. Directed graphs use separate
/// out- and in-neighbour multisets.
pub fn wl1_refine(g: &Graph) -> ColorPartition {
    let n = g.n;
    let init = (0..n).map(|u| atomic_key(g, &[u])).collect();
    let edge_key = |u: usize, v: usize| {
        let mut k = vec![g.weight(u, v).to_bits()];
        k.extend(g.edge_row(u, v).iter().map(|x| x.to_bits()));
        k
    };
    run(g, Scheme::Wl1, init, |c| {
        (0..n)
            .map(|u| {
                let mut out: Vec<Vec<u64>> = (0..n)
                    .filter(|&v| g.has_edge(u, v))
                    .map(|v| [edge_key(u, v), vec![c[v] as u64]].concat())
                    .collect();
                let mut inc: Vec<Vec<u64>> = (0..n)
                    .filter(|&v| g.directed && g.has_edge(v, u))
                    .map(|v| [edge_key(v, u), vec![c[v] as u64]].concat())
                    .collect();
                out.sort_unstable();
                inc.sort_unstable();
                let mut key = vec![c[u] as u64, out.len() as u64];
                out.iter().for_each(|e| key.extend(e));
                key.push(inc.len() as u64);
                inc.iter().for_each(|e| key.extend(e));
                key
            })
            .collect()
    })
}

fn initial_tuples(g: &Graph, k: usize, tuples: usize) -> Vec<Vec<u64>> {
    let mut t = vec![0; k];
    (0..tuples)
        .map(|i| {
            decode(i, g.n, &mut t);
            atomic_key(g, &t)
        })
        .collect()
}

/// Folklore `k`-WL: `C'(e) = (C(e), {{ (C(e[0 <- p]), .., C(e[k-1 <- p])) : p }})`.
pub fn kfwl_refine(g: &Graph, k: usize) -> Result<ColorPartition> {
    if !(1..=3).contains(&k) {
        return Err(Error::Unsupported(format!("{k}-FWL (supported: 1, 2, 3)")));
    }
    let n = g.n;
    let tuples = tuple_count(n, k)?;
    let strides: Vec<usize> = (0..k).map(|a| n.pow((k - 1 - a) as u32)).collect();
    Ok(run(g, Scheme::Fwl(k), initial_tuples(g, k, tuples), |c| {
        let mut t = vec![0; k];
        (0..tuples)
            .map(|e| {
                decode(e, n, &mut t);
                let mut ms: Vec<Vec<u64>> = (0..n)
                    .map(|p| {
                        (0..k)
                            .map(|a| c[e - t[a] * strides[a] + p * strides[a]] as u64)
                            .collect()
                    })
                    .collect();
                ms.sort_unstable();
                let mut key = Vec::with_capacity(1 + n * k);
                key.push(c[e] as u64);
                ms.iter().for_each(|m| key.extend(m));
                key
            })
            .collect()
    }))
}

/// Classical `k`-WL for `k >= 2`:
/// `C'(e) = (C(e), {{C(e[0 <- p])}}, .., {{C(e[k-1 <- p])}})`.
pub fn kwl_refine(g: &Graph, k: usize) -> Result<ColorPartition> {
    if !(2..=3).contains(&k) {
        return Err(Error::Unsupported(format!(
            "{k}-WL (supported: 2, 3; use wl1_refine for 1)"
        )));
    }
    let n = g.n;
    let tuples = tuple_count(n, k)?;
    let strides: Vec<usize> = (0..k).map(|a| n.pow((k - 1 - a) as u32)).collect();
    Ok(run(g, Scheme::Wl(k), initial_tuples(g, k, tuples), |c| {
        let mut t = vec![0; k];
        (0..tuples)
            .map(|e| {
                decode(e, n, &mut t);
                let mut key = vec![c[e] as u64];
                for a in 0..k {
                    let mut ms: Vec<u64> = (0..n)
                        .map(|p| c[e - t[a] * strides[a] + p * strides[a]] as u64)
                        .collect();
                    ms.sort_unstable();
                    key.extend(ms);
                }
                key
            })
            .collect()
    }))
}

pub fn refine(g: &Graph, scheme: Scheme) -> Result<ColorPartition> {
    match scheme {
        Scheme::Wl1 => Ok(wl1_refine(g)),
        Scheme::Wl(k) => kwl_refine(g, k),
        Scheme::Fwl(k) => kfwl_refine(g, k),
    }
}

/// Whether `scheme` tells `a` and `b` apart, and the larger round count.
pub fn distinguishes(a: &Graph, b: &Graph, scheme: Scheme) -> Result<(bool, usize)> {
    let pa = refine(a, scheme)?;
    let pb = refine(b, scheme)?;
    Ok((signature(&pa) != signature(&pb), pa.rounds.max(pb.rounds)))
}

/// Color of tuple `t` in `p`.
pub fn color_of(p: &ColorPartition, t: &[usize]) -> u32 {
    p.colors[encode(t, p.n)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;
    use crate::graph::{apply_permutation, gen_random_graph, NodePermutation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regular_graph_has_one_node_class() {
        for g in [cycle(7), petersen(), complete(5), shrikhande()] {
            assert_eq!(wl1_refine(&g).num_colors, 1);
        }
    }

    #[test]
    fn wl1_fails_on_c6_vs_two_triangles() {
        let two = disjoint_union(&[cycle(3), cycle(3)]);
        assert!(!distinguishes(&cycle(6), &two, Scheme::Wl1).unwrap().0);
        assert!(distinguishes(&cycle(6), &two, Scheme::Fwl(2)).unwrap().0);
    }

    #[test]
    fn star_vs_path_split_at_round_zero() {
        let (a, b) = (wl1_refine(&star(3)), wl1_refine(&path(4)));
        assert_ne!(signature(&a), signature(&b));
        assert_eq!(a.class_counts[0], 1);
    }

    #[test]
    fn shrikhande_rook_needs_three_fwl() {
        let (s, r) = (shrikhande(), rook_4x4());
        assert!(!distinguishes(&s, &r, Scheme::Fwl(2)).unwrap().0);
        assert!(distinguishes(&s, &r, Scheme::Fwl(3)).unwrap().0);
    }

    #[test]
    fn permuted_copies_share_signatures() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for seed in 0..5 {
            let g = gen_random_graph(7, 0.4, (1, 3), seed).unwrap();
            let h = apply_permutation(&g, &NodePermutation::random(7, &mut rng)).unwrap();
            for scheme in [
                Scheme::Wl1,
                Scheme::Wl(2),
                Scheme::Fwl(2),
                Scheme::Fwl(3),
                Scheme::Wl(3),
            ] {
                assert!(!distinguishes(&g, &h, scheme).unwrap().0, "{scheme}");
            }
        }
    }

    #[test]
    fn same_graph_twice() {
        let g = petersen();
        assert_eq!(
            signature(&kfwl_refine(&g, 2).unwrap()),
            signature(&kfwl_refine(&g, 2).unwrap())
        );
    }

    #[test]
    fn partitions_only_split() {
        for seed in 0..10 {
            let g = gen_random_graph(6, 0.5, (1, 2), seed).unwrap();
            for scheme in [Scheme::Wl1, Scheme::Fwl(2), Scheme::Wl(2), Scheme::Fwl(3)] {
                let p = refine(&g, scheme).unwrap();
                assert!(p.class_counts.windows(2).all(|w| w[0] <= w[1]), "{scheme}");
                assert!(p.rounds <= g.n.pow(scheme.order() as u32));
                assert_eq!(
                    p.colors.iter().copied().max().unwrap() as usize + 1,
                    p.num_colors
                );
            }
        }
    }

    #[test]
    fn fwl2_diagonal_colors_refine_wl1_colors() {
        // the diagonal (u, u) of 2-FWL is at least as fine as the 1-WL node coloring
        let g = gen_random_graph(8, 0.3, (1, 1), 4).unwrap();
        let w = wl1_refine(&g);
        let f = kfwl_refine(&g, 2).unwrap();
        for u in 0..8 {
            for v in 0..8 {
                if color_of(&f, &[u, u]) == color_of(&f, &[v, v]) {
                    assert_eq!(w.colors[u], w.colors[v]);
                }
            }
        }
    }

    #[test]
    fn limits_and_scheme_names() {
        assert!(kfwl_refine(&cycle(3), 4).is_err());
        assert!(kwl_refine(&cycle(3), 1).is_err());
        assert!(kfwl_refine(&Graph::empty(200), 3).is_err());
        for s in [Scheme::Wl1, Scheme::Wl(2), Scheme::Fwl(3)] {
            assert_eq!(Scheme::parse(&s.to_string()), Some(s));
        }
        assert_eq!(Scheme::parse("2-XYZ"), None);
    }
}
