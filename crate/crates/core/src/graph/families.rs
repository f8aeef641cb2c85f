//! Named unweighted graphs used by the expressivity suite and tests.

use super::Graph;

fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Graph {
    let mut g = Graph::empty(n);
    for (u, v) in edges {
        g.add_edge(u, v, 1.0)
            .expect("family edges are in range and loop-free");
    }
    g
}

pub fn cycle(n: usize) -> Graph {
    build(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn path(n: usize) -> Graph {
    build(n, (1..n).map(|i| (i - 1, i)))
}

/// Star with one centre (node 0) and `leaves` leaves.
pub fn star(leaves: usize) -> Graph {
    build(leaves + 1, (1..=leaves).map(|i| (0, i)))
}

pub fn complete(n: usize) -> Graph {
    build(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

pub fn complete_bipartite(a: usize, b: usize) -> Graph {
    build(a + b, (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v))))
}

/// Disjoint union, relabelling the parts consecutively.
pub fn disjoint_union(parts: &[Graph]) -> Graph {
    let n = parts.iter().map(|g| g.n).sum();
    let mut edges = Vec::new();
    let mut off = 0;
    for g in parts {
        edges.extend(g.edges().into_iter().map(|(u, v, _)| (u + off, v + off)));
        off += g.n;
    }
    build(n, edges)
}

/// `C_k x K_2`: two `k`-cycles joined by a perfect matching.
pub fn prism(k: usize) -> Graph {
    let ring = (0..k).flat_map(|i| [(i, (i + 1) % k), (k + i, k + (i + 1) % k)]);
    build(2 * k, ring.chain((0..k).map(|i| (i, k + i))))
}

/// Circulant skip-link graph: the cycle `C_n` plus chords `i ~ i + skip`.
pub fn csl(n: usize, skip: usize) -> Graph {
    build(
        n,
        (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + skip) % n)]),
    )
}

pub fn petersen() -> Graph {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, 5 + i));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    build(10, outer.chain(spokes).chain(inner))
}

/// Cayley graph of `Z4 x Z4` with connection set `{±(1,0), ±(0,1), ±(1,1)}`.
pub fn shrikhande() -> Graph {
    let id = |a: usize, b: usize| 4 * (a % 4) + b % 4;
    let mut edges = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for (da, db) in [(1, 0), (0, 1), (1, 1)] {
                edges.push((id(a, b), id(a + da, b + db)));
            }
        }
    }
    build(16, edges)
}

/// `K4 x K4`: cells of a 4x4 board, adjacent when they share a row or column.
pub fn rook_4x4() -> Graph {
    let mut edges = Vec::new();
    for u in 0..16 {
        for v in u + 1..16 {
            if (u / 4 == v / 4) != (u % 4 == v % 4) {
                edges.push((u, v));
            }
        }
    }
    build(16, edges)
}

/// Carbon skeleton of decalin: two hexagons sharing the edge `{0, 5}`.
pub fn decalin() -> Graph {
    let a = (0..6).map(|i| (i, (i + 1) % 6));
    let b = [(5, 6), (6, 7), (7, 8), (8, 9), (9, 0)];
    build(10, a.chain(b))
}

/// Carbon skeleton of bicyclopentyl: two pentagons joined by the edge `{0, 5}`.
pub fn bicyclopentyl() -> Graph {
    let a = (0..5).map(|i| (i, (i + 1) % 5));
    let b = (0..5).map(|i| (5 + i, 5 + (i + 1) % 5));
    build(10, a.chain(b).chain([(0, 5)]))
}

/// `(n, k, lambda, mu)` when `g` is strongly regular.
pub fn srg_parameters(g: &Graph) -> Option<(usize, usize, usize, usize)> {
    let n = g.n;
    let k = g.degree(0);
    if (0..n).any(|u| g.degree(u) != k) {
        return None;
    }
    let common = |u: usize, v: usize| {
        (0..n)
            .filter(|&w| g.has_edge(u, w) && g.has_edge(v, w))
            .count()
    };
    let (mut lambda, mut mu) = (None, None);
    for u in 0..n {
        for v in u + 1..n {
            let slot = if g.has_edge(u, v) {
                &mut lambda
            } else {
                &mut mu
            };
            let c = common(u, v);
            match *slot {
                None => *slot = Some(c),
                Some(x) if x != c => return None,
                _ => {}
            }
        }
    }
    Some((n, k, lambda.unwrap_or(0), mu.unwrap_or(0)))
}
