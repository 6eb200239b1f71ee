use crate::error::{Error, Result};
use crate::lattice::{PathSet, MAX_PATHS};

use super::BoundingTopology;

/// Maximal cliques of the graph on `n` vertices with adjacency bitmasks
/// `adj` (Bron–Kerbosch with pivoting). Isolated vertices come out as
/// singletons. Output is sorted.
pub fn maximal_cliques(n: usize, adj: &[u64]) -> Vec<PathSet> {
    assert_eq!(adj.len(), n);
    let all = PathSet::full(n).bits();
    let mut out = Vec::new();
    expand(0, all, 0, adj, &mut out);
    out.sort_unstable();
    out
}

fn expand(r: u64, mut p: u64, mut x: u64, adj: &[u64], out: &mut Vec<PathSet>) {
    if p == 0 {
        if x == 0 {
            out.push(PathSet::from_bits(r));
        }
        return;
    }
    let pivot = bits(p | x)
        .max_by_key(|&u| ((p & adj[u]).count_ones(), std::cmp::Reverse(u)))
        .expect("p is nonempty");
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        expand(r | bit, p & adj[v], x & adj[v], adj, out);
        p &= !bit;
        x |= bit;
        cand &= !bit;
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(v)
        }
    })
}

/// Initial bounding topology from pairwise tests: the maximal cliques of
/// the graph joining paths whose pair tested nonzero at order 2. The oracle
/// is called once with every pair in canonical order.
pub fn clique_init<O>(n: usize, oracle: O) -> Result<BoundingTopology>
where
    O: FnOnce(&[PathSet], usize) -> Result<Vec<bool>>,
{
    if n == 0 || n > MAX_PATHS {
        return Err(Error::invalid(format!("path count must be in 1..=64, got {n}")));
    }
    let mut pairs = PathSet::full(n).subsets_of_size(2);
    pairs.sort_unstable();
    let decisions = if pairs.is_empty() { Vec::new() } else { oracle(&pairs, 2)? };
    if decisions.len() != pairs.len() {
        return Err(Error::Dimension(format!(
            "oracle returned {} decisions for {} pairs",
            decisions.len(),
            pairs.len()
        )));
    }
    let mut adj = vec![0u64; n];
    for (pair, _) in pairs.iter().zip(&decisions).filter(|(_, &d)| d) {
        let mut it = pair.iter();
        let (a, b) = (it.next().unwrap(), it.next().unwrap());
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    BoundingTopology::new(maximal_cliques(n, &adj))
}
