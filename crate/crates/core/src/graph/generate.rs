use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

/// Undirected G(n, p) with integer weights drawn uniformly from
/// `lo..=hi`. Identical arguments give identical graphs.
pub fn gen_random_graph(n: usize, p: f64, weight_range: (i64, i64), seed: u64) -> Result<Graph> {
    let (lo, hi) = weight_range;
    if n == 0 || !(0.0..=1.0).contains(&p) || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "random graph needs n >= 1, 0 <= p <= 1 and lo <= hi (got n={n}, p={p}, [{lo}, {hi}])"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                let w = rng.gen_range(lo..=hi) as f64;
                g.add_edge(u, v, w)?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_zero_is_edgeless() {
        assert_eq!(gen_random_graph(5, 0.0, (1, 9), 1).unwrap().edge_count(), 0);
    }

    #[test]
    fn p_one_is_complete_with_fixed_weight() {
        let g = gen_random_graph(5, 1.0, (1, 1), 1).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert!(g.edges().iter().all(|&(_, _, w)| w == 1.0));
    }

    #[test]
    fn same_seed_same_graph() {
        let a = gen_random_graph(8, 0.5, (1, 100), 7).unwrap();
        let b = gen_random_graph(8, 0.5, (1, 100), 7).unwrap();
        assert_eq!(a, b);
        assert!(a
            .weights
            .iter()
            .zip(&b.weights)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, gen_random_graph(8, 0.5, (1, 100), 8).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gen_random_graph(0, 0.5, (1, 2), 0).is_err());
        assert!(gen_random_graph(3, 1.5, (1, 2), 0).is_err());
        assert!(gen_random_graph(3, 0.5, (3, 2), 0).is_err());
    }
}
