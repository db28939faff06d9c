//! Betti numbers over GF(2), small-graph isomorphism, and the geometric
//! indicator functions evaluated on point tuples.

use std::collections::HashMap;

use crate::distributions::Points;
use crate::error::{Error, Result};
use crate::geometry::{build_geometric_graph, cech_complex, SimplicialComplex, UnionFind};

/// Betti numbers `beta_0 .. beta_max_dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BettiVector {
    pub betti: Vec<usize>,
}

impl BettiVector {
    pub fn get(&self, p: usize) -> usize {
        self.betti.get(p).copied().unwrap_or(0)
    }
}

/// Rank of a GF(2) matrix given as columns of row-index bitsets.
fn gf2_rank(mut columns: Vec<Vec<u64>>) -> usize {
    let mut pivots: HashMap<usize, usize> = HashMap::new(); // pivot row -> column index
    let mut stored: Vec<Vec<u64>> = Vec::new();
    let mut rank = 0;
    for col in columns.iter_mut() {
        loop {
            let Some(pivot) = lowest_set_bit(col) else {
                break;
            };
            match pivots.get(&pivot) {
                Some(&other) => {
                    let rhs = stored[other].clone();
                    xor_into(col, &rhs);
                }
                None => {
                    pivots.insert(pivot, stored.len());
                    stored.push(col.clone());
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn lowest_set_bit(bits: &[u64]) -> Option<usize> {
    for (w, &word) in bits.iter().enumerate() {
        if word != 0 {
            return Some(w * 64 + word.trailing_zeros() as usize);
        }
    }
    None
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Betti numbers of a downward-closed complex, truncated at `max_dim`:
/// `beta_p = S_p - rank d_p - rank d_{p+1}` with GF(2) boundary matrices,
/// `rank d_0 = 0` and `d_{max_dim+1}` treated as zero.
pub fn betti_numbers(complex: &SimplicialComplex, max_dim: usize) -> Result<BettiVector> {
    validate_closure(complex)?;
    let mut ranks = vec![0usize; max_dim + 2]; // ranks[p] = rank of d_p
    for p in 1..=max_dim {
        ranks[p] = boundary_rank(complex, p);
    }
    ranks[max_dim + 1] = 0;
    let betti = (0..=max_dim)
        .map(|p| {
            complex
                .count(p)
                .saturating_sub(ranks[p])
                .saturating_sub(ranks[p + 1])
        })
        .collect();
    Ok(BettiVector { betti })
}

fn boundary_rank(complex: &SimplicialComplex, p: usize) -> usize {
    let cols_src = match complex.simplices_by_dim.get(p) {
        Some(s) if !s.is_empty() => s,
        _ => return 0,
    };
    let rows_src = &complex.simplices_by_dim[p - 1];
    let row_index: HashMap<&[u32], usize> = rows_src
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let words = rows_src.len().div_ceil(64);
    let mut columns = Vec::with_capacity(cols_src.len());
    let mut face = Vec::with_capacity(p);
    for simplex in cols_src {
        let mut col = vec![0u64; words];
        for omit in 0..simplex.len() {
            face.clear();
            face.extend(simplex.iter().enumerate().filter(|&(i, _)| i != omit).map(|(_, &v)| v));
            let row = row_index[face.as_slice()];
            col[row / 64] ^= 1u64 << (row % 64);
        }
        columns.push(col);
    }
    gf2_rank(columns)
}

fn validate_closure(complex: &SimplicialComplex) -> Result<()> {
    for p in 1..complex.simplices_by_dim.len() {
        let lower: HashMap<&[u32], ()> = complex.simplices_by_dim[p - 1]
            .iter()
            .map(|s| (s.as_slice(), ()))
            .collect();
        for simplex in &complex.simplices_by_dim[p] {
            if simplex.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structural(format!(
                    "simplex {simplex:?} is not strictly increasing"
                )));
            }
            for omit in 0..simplex.len() {
                let face: Vec<u32> = simplex
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != omit)
                    .map(|(_, &v)| v)
                    .collect();
                if !lower.contains_key(face.as_slice()) {
                    return Err(Error::Structural(format!(
                        "missing face {face:?} of {simplex:?}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// An undirected simple graph on at most 8 vertices (tuple sizes of interest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmallGraph {
    pub num_vertices: usize,
    /// Adjacency bitmask per vertex.
    adj: [u8; 8],
}

impl SmallGraph {
    pub fn new(num_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_vertices > 8 {
            return Err(Error::domain(
                "small graphs are capped at 8 vertices".to_string(),
            ));
        }
        let mut adj = [0u8; 8];
        for &(a, b) in edges {
            if a >= num_vertices || b >= num_vertices || a == b {
                return Err(Error::domain(format!("bad edge ({a}, {b})")));
            }
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        Ok(SmallGraph { num_vertices, adj })
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        SmallGraph::new(n, &edges).unwrap()
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((n - 1, 0));
        SmallGraph::new(n, &edges).unwrap()
    }

    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        SmallGraph::new(n, &edges).unwrap()
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        SmallGraph::new(n, &edges).unwrap()
    }

    /// Graph on a point tuple with edges at pairwise distance <= r.
    pub fn from_points(points: Points<'_>, r: f64) -> Result<Self> {
        let n = points.len();
        if n > 8 {
            return Err(Error::domain("tuples are capped at 8 points"));
        }
        let mut edges = Vec::new();
        let r2 = r * r;
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = points
                    .get(i)
                    .iter()
                    .zip(points.get(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 <= r2 {
                    edges.push((i, j));
                }
            }
        }
        SmallGraph::new(n, &edges)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] & (1 << b) != 0
    }

    pub fn num_edges(&self) -> usize {
        self.adj[..self.num_vertices]
            .iter()
            .map(|m| m.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.num_vertices == 0 {
            return false;
        }
        let mut seen: u8 = 1;
        let mut frontier: u8 = 1;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = self.adj[v] & !seen;
            seen |= fresh;
            frontier |= fresh;
        }
        seen.count_ones() as usize == self.num_vertices
    }
}

/// Exact isomorphism test by backtracking over degree-compatible vertex
/// assignments. Both graphs must have at most 8 vertices.
pub fn graph_isomorphic(g1: &SmallGraph, g2: &SmallGraph) -> Result<bool> {
    if g1.num_vertices > 8 || g2.num_vertices > 8 {
        return Err(Error::domain("isomorphism test capped at 8 vertices"));
    }
    if g1.num_vertices != g2.num_vertices || g1.num_edges() != g2.num_edges() {
        return Ok(false);
    }
    let n = g1.num_vertices;
    let mut deg1: Vec<usize> = (0..n).map(|v| g1.degree(v)).collect();
    let mut deg2: Vec<usize> = (0..n).map(|v| g2.degree(v)).collect();
    deg1.sort_unstable();
    deg2.sort_unstable();
    if deg1 != deg2 {
        return Ok(false);
    }
    let mut mapping = [usize::MAX; 8];
    let mut used = [false; 8];
    Ok(extend_mapping(g1, g2, 0, &mut mapping, &mut used))
}

fn extend_mapping(
    g1: &SmallGraph,
    g2: &SmallGraph,
    v: usize,
    mapping: &mut [usize; 8],
    used: &mut [bool; 8],
) -> bool {
    let n = g1.num_vertices;
    if v == n {
        return true;
    }
    for w in 0..n {
        if used[w] || g1.degree(v) != g2.degree(w) {
            continue;
        }
        let consistent = (0..v).all(|u| g1.has_edge(u, v) == g2.has_edge(mapping[u], w));
        if consistent {
            mapping[v] = w;
            used[w] = true;
            if extend_mapping(g1, g2, v + 1, mapping, used) {
                return true;
            }
            used[w] = false;
            mapping[v] = usize::MAX;
        }
    }
    false
}

/// The geometric constraint `h` together with its tuple size and proximity
/// bound `M` (at unit scale).
#[derive(Clone, Debug)]
pub struct ConstraintH {
    pub kind: ConstraintKind,
    pub tuple_size: usize,
    pub proximity_m: f64,
}

#[derive(Clone, Debug)]
pub enum ConstraintKind {
    /// `h = 1` iff `G(points, r)` is isomorphic to the target graph.
    GammaIso(SmallGraph),
    /// `h = 1` iff `beta_{k-2}` of the Čech complex on the tuple equals 1
    /// (and the tuple is connected; for k = 2 this is plain connectivity).
    BettiCycle,
    /// `h = 1` iff `G(points, r)` is connected.
    Connected,
}

impl ConstraintH {
    pub fn connected(k: usize) -> Self {
        ConstraintH {
            kind: ConstraintKind::Connected,
            tuple_size: k,
            proximity_m: (k - 1) as f64,
        }
    }

    pub fn betti_cycle(k: usize) -> Self {
        ConstraintH {
            kind: ConstraintKind::BettiCycle,
            tuple_size: k,
            proximity_m: (k - 1) as f64,
        }
    }

    pub fn gamma_iso(target: SmallGraph) -> Self {
        let k = target.num_vertices;
        ConstraintH {
            kind: ConstraintKind::GammaIso(target),
            tuple_size: k,
            proximity_m: (k - 1) as f64,
        }
    }
}

/// Proximity bound `M` at unit scale: a connected geometric graph on `k`
/// points at radius 1 has diameter at most `k - 1`, and all three constraint
/// kinds imply connectivity.
pub fn proximity_bound(constraint: &ConstraintH) -> f64 {
    (constraint.tuple_size - 1) as f64
}

/// Evaluates the scaled indicator `h(points / r)` in {0, 1}.
///
/// Shift invariant, permutation invariant, and invariant under joint scaling
/// of the points and the radius.
pub fn evaluate_h(constraint: &ConstraintH, points: Points<'_>, r: f64) -> Result<bool> {
    let k = constraint.tuple_size;
    if points.len() != k {
        return Err(Error::domain(format!(
            "constraint expects {k} points, got {}",
            points.len()
        )));
    }
    // points-in-proximity short circuit: h vanishes when any point is
    // farther than M * r from the first one
    let m_scaled = constraint.proximity_m * r;
    let first = points.get(0);
    for i in 1..k {
        let d2: f64 = first
            .iter()
            .zip(points.get(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2.sqrt() > m_scaled {
            return Ok(false);
        }
    }
    match &constraint.kind {
        ConstraintKind::Connected => {
            let g = SmallGraph::from_points(points, r)?;
            Ok(g.is_connected())
        }
        ConstraintKind::GammaIso(target) => {
            let g = SmallGraph::from_points(points, r)?;
            graph_isomorphic(&g, target)
        }
        ConstraintKind::BettiCycle => {
            let g = SmallGraph::from_points(points, r)?;
            if !g.is_connected() {
                return Ok(false);
            }
            if k == 2 {
                return Ok(true); // beta_0 = 1 iff connected
            }
            let complex = cech_complex(points, r, k - 1)?;
            let betti = betti_numbers(&complex, k - 1)?;
            Ok(betti.get(k - 2) == 1)
        }
    }
}

/// `h~`: 1 iff the Čech complex on the tuple is connected (equivalently its
/// 1-skeleton is).
pub fn evaluate_h_tilde(points: Points<'_>, r: f64) -> Result<bool> {
    if points.is_empty() {
        return Ok(false);
    }
    let g = build_geometric_graph(points, r)?;
    let mut uf = UnionFind::new(points.len());
    for &(a, b) in &g.edges {
        uf.union(a, b);
    }
    let root = uf.find(0);
    Ok((1..points.len() as u32).all(|i| uf.find(i) == root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cech_complex;

    fn complex_from(simplices: &[&[u32]]) -> SimplicialComplex {
        let max_dim = simplices.iter().map(|s| s.len() - 1).max().unwrap_or(0);
        let mut c = SimplicialComplex::empty(max_dim);
        for s in simplices {
            c.simplices_by_dim[s.len() - 1].push(s.to_vec());
        }
        for level in &mut c.simplices_by_dim {
            level.sort_unstable();
        }
        c
    }

    #[test]
    fn hollow_triangle_is_a_circle() {
        let c = complex_from(&[&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2]]);
        let b = betti_numbers(&c, 1).unwrap();
        assert_eq!(b.betti, vec![1, 1]);
    }

    #[test]
    fn full_triangle_is_contractible() {
        let c = complex_from(&[&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]]);
        let b = betti_numbers(&c, 2).unwrap();
        assert_eq!(b.betti, vec![1, 0, 0]);
    }

    #[test]
    fn hollow_octahedron_is_a_sphere() {
        // vertices 0..6, all edges and faces except pairs of antipodes (0,1), (2,3), (4,5)
        let anti = |a: u32, b: u32| (a / 2 == b / 2) && a != b;
        let mut simplices: Vec<Vec<u32>> = (0..6).map(|v| vec![v]).collect();
        for i in 0..6u32 {
            for j in i + 1..6 {
                if !anti(i, j) {
                    simplices.push(vec![i, j]);
                }
            }
        }
        for i in 0..6u32 {
            for j in i + 1..6 {
                for k in j + 1..6 {
                    if !anti(i, j) && !anti(i, k) && !anti(j, k) {
                        simplices.push(vec![i, j, k]);
                    }
                }
            }
        }
        let refs: Vec<&[u32]> = simplices.iter().map(|s| s.as_slice()).collect();
        let c = complex_from(&refs);
        assert_eq!(c.count(1), 12);
        assert_eq!(c.count(2), 8);
        let b = betti_numbers(&c, 2).unwrap();
        assert_eq!(b.betti, vec![1, 0, 1]);
    }

    #[test]
    fn non_closed_complex_is_rejected() {
        let mut c = SimplicialComplex::empty(1);
        c.simplices_by_dim[0] = vec![vec![0]];
        c.simplices_by_dim[1] = vec![vec![0, 1]];
        assert!(matches!(
            betti_numbers(&c, 1),
            Err(crate::error::Error::Structural(_))
        ));
    }

    #[test]
    fn euler_identity_on_random_cech_complexes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n = 3 + rng.random_range(0..25);
            let coords: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..2.0)).collect();
            let p = crate::distributions::Points::new(&coords, 2);
            let r = rng.random_range(0.1..0.8);
            let max_dim = 3;
            let complex = cech_complex(p, r, max_dim).unwrap();
            let b = betti_numbers(&complex, max_dim).unwrap();
            let chi_b: i64 = b
                .betti
                .iter()
                .enumerate()
                .map(|(p, &v)| if p % 2 == 0 { v as i64 } else { -(v as i64) })
                .sum();
            assert_eq!(chi_b, complex.euler_characteristic());
        }
    }

    #[test]
    fn graph_cycle_rank_identity_with_max_dim_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(29);
        for _ in 0..40 {
            let n = 2 + rng.random_range(0..30);
            let coords: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..2.5)).collect();
            let p = crate::distributions::Points::new(&coords, 2);
            let complex = cech_complex(p, 0.6, 1).unwrap();
            let b = betti_numbers(&complex, 1).unwrap();
            let v = complex.count(0) as i64;
            let e = complex.count(1) as i64;
            assert_eq!(b.betti[1] as i64, e - v + b.betti[0] as i64);
        }
    }

    #[test]
    fn any_graph_is_isomorphic_to_itself() {
        let g = SmallGraph::cycle(5);
        assert!(graph_isomorphic(&g, &g).unwrap());
    }

    #[test]
    fn path_and_star_differ() {
        // P4 and S3 both have 4 vertices and 3 edges, but degree sequences differ
        let p4 = SmallGraph::path(4);
        let s3 = SmallGraph::star(4);
        assert!(!graph_isomorphic(&p4, &s3).unwrap());
    }

    #[test]
    fn relabeled_cycles_are_isomorphic() {
        let c5 = SmallGraph::cycle(5);
        let relabeled =
            SmallGraph::new(5, &[(2, 4), (4, 1), (1, 3), (3, 0), (0, 2)]).unwrap();
        assert!(graph_isomorphic(&c5, &relabeled).unwrap());
        let relabeled2 =
            SmallGraph::new(5, &[(3, 1), (1, 4), (4, 2), (2, 0), (0, 3)]).unwrap();
        assert!(graph_isomorphic(&c5, &relabeled2).unwrap());
    }

    #[test]
    fn size_cap_is_enforced() {
        assert!(SmallGraph::new(9, &[]).is_err());
    }

    #[test]
    fn connected_pair_evaluates_to_one() {
        let c = ConstraintH::connected(2);
        let coords = [0.0, 0.8];
        assert!(evaluate_h(&c, Points::new(&coords, 1), 1.0).unwrap());
    }

    #[test]
    fn betti_cycle_on_a_hollow_equilateral_triangle() {
        let c = ConstraintH::betti_cycle(3);
        let side = 0.9;
        let h = side * 3f64.sqrt() / 2.0;
        let coords = [0.0, 0.0, side, 0.0, side / 2.0, h];
        assert!(evaluate_h(&c, Points::new(&coords, 2), 1.0).unwrap());
        // at side 0.8 the MEB radius 0.462 <= 0.5 fills the triangle
        let side = 0.8;
        let h = side * 3f64.sqrt() / 2.0;
        let coords = [0.0, 0.0, side, 0.0, side / 2.0, h];
        assert!(!evaluate_h(&c, Points::new(&coords, 2), 1.0).unwrap());
    }

    #[test]
    fn distant_point_forces_zero() {
        let c = ConstraintH::connected(3);
        let m = proximity_bound(&c);
        let coords = [0.0, 0.5, 10.0 * m];
        assert!(!evaluate_h(&c, Points::new(&coords, 1), 1.0).unwrap());
    }

    #[test]
    fn tuple_size_mismatch_is_an_error() {
        let c = ConstraintH::connected(3);
        let coords = [0.0, 0.5];
        assert!(evaluate_h(&c, Points::new(&coords, 1), 1.0).is_err());
    }

    #[test]
    fn h_is_shift_permutation_and_scale_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let constraints = [
            ConstraintH::connected(3),
            ConstraintH::betti_cycle(3),
            ConstraintH::gamma_iso(SmallGraph::path(3)),
        ];
        for _ in 0..60 {
            let coords: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
            let r = rng.random_range(0.4..1.6);
            for c in &constraints {
                let base = evaluate_h(c, Points::new(&coords, 2), r).unwrap();
                // translation
                let shifted: Vec<f64> = coords
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v + if i % 2 == 0 { 3.25 } else { -1.5 })
                    .collect();
                assert_eq!(base, evaluate_h(c, Points::new(&shifted, 2), r).unwrap());
                // permutation of the points
                let mut perm = coords.clone();
                perm.swap(0, 4);
                perm.swap(1, 5);
                assert_eq!(base, evaluate_h(c, Points::new(&perm, 2), r).unwrap());
                // joint scaling by a power of two is exact in floating point
                let scaled: Vec<f64> = coords.iter().map(|v| v * 2.0).collect();
                assert_eq!(
                    base,
                    evaluate_h(c, Points::new(&scaled, 2), r * 2.0).unwrap()
                );
            }
        }
    }

    #[test]
    fn betti_cycle_matches_connected_for_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        let conn = ConstraintH::connected(2);
        let cyc = ConstraintH::betti_cycle(2);
        for _ in 0..50 {
            let coords: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = Points::new(&coords, 2);
            assert_eq!(
                evaluate_h(&conn, p, 1.0).unwrap(),
                evaluate_h(&cyc, p, 1.0).unwrap()
            );
        }
    }

    #[test]
    fn h_tilde_chain_and_split_clusters() {
        let chain = [0.0, 0.5, 1.0, 1.5];
        assert!(evaluate_h_tilde(Points::new(&chain, 1), 1.0).unwrap());
        let split = [0.0, 0.5, 4.0, 4.5];
        assert!(!evaluate_h_tilde(Points::new(&split, 1), 1.0).unwrap());
    }

    #[test]
    fn h_tilde_agrees_with_component_count() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for _ in 0..50 {
            let coords: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
            let p = Points::new(&coords, 2);
            let connected = evaluate_h_tilde(p, 1.0).unwrap();
            let comps = crate::geometry::connected_components(p, 1.0);
            assert_eq!(connected, comps.len() == 1);
        }
    }

    #[test]
    fn proximity_bounds_for_the_three_kinds() {
        assert_eq!(proximity_bound(&ConstraintH::connected(2)), 1.0);
        assert_eq!(
            proximity_bound(&ConstraintH::gamma_iso(SmallGraph::path(4))),
            3.0
        );
        assert_eq!(proximity_bound(&ConstraintH::betti_cycle(3)), 2.0);
    }
}
