use rand::Rng;

use crate::graph::Graph;

/// Walks `k` uniform hops from `root` and returns where the walk ends.
///
/// With `include_self` each hop picks uniformly among the neighbors and the
/// node itself (`|N_i| = deg + 1`), so the end point follows row `root` of
/// `(D^-1 (A + I))^k`. Without it, an isolated node stays put.
pub fn mc_sample_path<R: Rng + ?Sized>(
    g: &Graph,
    root: usize,
    k: usize,
    include_self: bool,
    rng: &mut R,
) -> usize {
    let mut node = root;
    for _ in 0..k {
        let nbrs = g.neighbor_slice(node);
        let choices = nbrs.len() + usize::from(include_self);
        if choices == 0 {
            continue;
        }
        let pick = rng.gen_range(0..choices);
        if pick < nbrs.len() {
            node = nbrs[pick];
        }
    }
    node
}
