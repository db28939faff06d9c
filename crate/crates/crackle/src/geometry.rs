//! Neighbor search, geometric graphs, connected components, minimum
//! enclosing balls, and Čech complex construction.

use std::collections::HashMap;

use crate::distributions::Points;
use crate::error::{Error, Result};

/// Disjoint-set forest with path compression and union by size.
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, i: u32) -> u32 {
        let mut root = i;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = i;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra as usize] >= self.size[rb as usize] {
            self.parent[rb as usize] = ra;
            self.size[ra as usize] += self.size[rb as usize];
        } else {
            self.parent[ra as usize] = rb;
            self.size[rb as usize] += self.size[ra as usize];
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

/// Uniform grid with cell side `r`: each point only inspects its 3^d
/// neighboring cells.
struct CellGrid {
    cells: HashMap<Vec<i64>, Vec<u32>>,
    dim: usize,
    inv_r: f64,
}

impl CellGrid {
    fn build(points: Points<'_>, r: f64) -> Self {
        let dim = points.dim();
        let inv_r = 1.0 / r;
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        let mut key = vec![0i64; dim];
        for (i, p) in points.iter().enumerate() {
            for j in 0..dim {
                key[j] = (p[j] * inv_r).floor() as i64;
            }
            cells.entry(key.clone()).or_default().push(i as u32);
        }
        CellGrid { cells, dim, inv_r }
    }

    fn key_of(&self, p: &[f64], key: &mut [i64]) {
        for j in 0..self.dim {
            key[j] = (p[j] * self.inv_r).floor() as i64;
        }
    }

    /// Visits every point stored in the 3^d cells around `key`.
    fn for_each_nearby<F: FnMut(u32)>(&self, key: &[i64], mut f: F) {
        let mut offset = vec![-1i64; self.dim];
        let mut probe = vec![0i64; self.dim];
        loop {
            for j in 0..self.dim {
                probe[j] = key[j] + offset[j];
            }
            if let Some(bucket) = self.cells.get(&probe) {
                for &idx in bucket {
                    f(idx);
                }
            }
            // odometer increment over {-1, 0, 1}^d
            let mut j = 0;
            loop {
                if j == self.dim {
                    return;
                }
                offset[j] += 1;
                if offset[j] <= 1 {
                    break;
                }
                offset[j] = -1;
                j += 1;
            }
        }
    }
}

/// A geometric graph `G(X, r)`: vertices are the points, edges join pairs at
/// distance `<= r` (closed threshold).
pub struct GeometricGraph {
    pub num_vertices: usize,
    /// Edges `(i, j)` with `i < j`.
    pub edges: Vec<(u32, u32)>,
    pub radius: f64,
    /// Component id per vertex; equal ids mean same component.
    pub component_labels: Vec<u32>,
}

impl GeometricGraph {
    pub fn num_components(&self) -> usize {
        let mut seen: Vec<u32> = self.component_labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &(i, j) in &self.edges {
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

/// Builds `G(points, r)` with the grid accelerator and labels components by
/// union-find.
pub fn build_geometric_graph(points: Points<'_>, r: f64) -> Result<GeometricGraph> {
    if !(r > 0.0) {
        return Err(Error::domain("graph radius must be positive"));
    }
    let n = points.len();
    let grid = CellGrid::build(points, r);
    let mut edges = Vec::new();
    let mut uf = UnionFind::new(n);
    let r2 = r * r;
    let mut key = vec![0i64; points.dim()];
    for i in 0..n {
        let p = points.get(i);
        grid.key_of(p, &mut key);
        grid.for_each_nearby(&key, |j| {
            if (j as usize) > i && dist2(p, points.get(j as usize)) <= r2 {
                edges.push((i as u32, j));
                uf.union(i as u32, j);
            }
        });
    }
    edges.sort_unstable();
    let component_labels: Vec<u32> = (0..n as u32).map(|i| uf.find(i)).collect();
    Ok(GeometricGraph {
        num_vertices: n,
        edges,
        radius: r,
        component_labels,
    })
}

/// Connected components of `G(points, r)` as sorted index lists.
///
/// d = 1 uses a sort-and-scan over coordinates (components are maximal runs
/// with successive gaps `<= r`); higher dimensions use the cell grid without
/// materializing the edge list.
pub fn connected_components(points: Points<'_>, r: f64) -> Vec<Vec<u32>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    if points.dim() == 1 {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            points.get(a as usize)[0]
                .partial_cmp(&points.get(b as usize)[0])
                .unwrap()
        });
        let mut comps = Vec::new();
        let mut cur = vec![order[0]];
        for w in order.windows(2) {
            let gap = points.get(w[1] as usize)[0] - points.get(w[0] as usize)[0];
            if gap <= r {
                cur.push(w[1]);
            } else {
                cur.sort_unstable();
                comps.push(std::mem::replace(&mut cur, vec![w[1]]));
            }
        }
        cur.sort_unstable();
        comps.push(cur);
        return comps;
    }
    let grid = CellGrid::build(points, r);
    let mut uf = UnionFind::new(n);
    let r2 = r * r;
    let mut key = vec![0i64; points.dim()];
    for i in 0..n {
        let p = points.get(i);
        grid.key_of(p, &mut key);
        grid.for_each_nearby(&key, |j| {
            if (j as usize) > i && dist2(p, points.get(j as usize)) <= r2 {
                uf.union(i as u32, j);
            }
        });
    }
    let mut by_root: HashMap<u32, Vec<u32>> = HashMap::new();
    for i in 0..n as u32 {
        by_root.entry(uf.find(i)).or_default().push(i);
    }
    let mut comps: Vec<Vec<u32>> = by_root.into_values().collect();
    for c in &mut comps {
        c.sort_unstable();
    }
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

/// The connected components of `G(cloud, r)` of cardinality exactly `k`,
/// as sorted index sets.
pub fn isolated_components_of_size(points: Points<'_>, r: f64, k: usize) -> Result<Vec<Vec<u32>>> {
    if k < 1 {
        return Err(Error::domain("component size must be >= 1"));
    }
    Ok(connected_components(points, r)
        .into_iter()
        .filter(|c| c.len() == k)
        .collect())
}

/// Spatial index answering "is any point within distance r of x".
pub enum NeighborIndex {
    Sorted1D { xs: Vec<f64> },
    Grid { grid: CellGridOwned, coords: Vec<f64>, dim: usize },
}

/// Owned variant of the cell grid for `NeighborIndex`.
pub struct CellGridOwned {
    cells: HashMap<Vec<i64>, Vec<u32>>,
    inv_r: f64,
}

impl NeighborIndex {
    pub fn build(points: Points<'_>, r: f64) -> Self {
        if points.dim() == 1 {
            let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
            xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            NeighborIndex::Sorted1D { xs }
        } else {
            let g = CellGrid::build(points, r.max(1e-300));
            NeighborIndex::Grid {
                grid: CellGridOwned {
                    cells: g.cells,
                    inv_r: g.inv_r,
                },
                coords: points.coords().to_vec(),
                dim: points.dim(),
            }
        }
    }

    /// True iff some indexed point lies within `r` of `x`. The index must
    /// have been built with a radius `>= r`.
    pub fn has_neighbor_within(&self, x: &[f64], r: f64) -> bool {
        match self {
            NeighborIndex::Sorted1D { xs } => {
                let lo = xs.partition_point(|&v| v < x[0] - r);
                lo < xs.len() && xs[lo] <= x[0] + r
            }
            NeighborIndex::Grid { grid, coords, dim } => {
                let mut key = vec![0i64; *dim];
                for j in 0..*dim {
                    key[j] = (x[j] * grid.inv_r).floor() as i64;
                }
                let r2 = r * r;
                let mut offset = vec![-1i64; *dim];
                let mut probe = vec![0i64; *dim];
                loop {
                    for j in 0..*dim {
                        probe[j] = key[j] + offset[j];
                    }
                    if let Some(bucket) = grid.cells.get(&probe) {
                        for &idx in bucket {
                            let p = &coords[idx as usize * dim..(idx as usize + 1) * dim];
                            if dist2(p, x) <= r2 {
                                return true;
                            }
                        }
                    }
                    let mut j = 0;
                    loop {
                        if j == *dim {
                            return false;
                        }
                        offset[j] += 1;
                        if offset[j] <= 1 {
                            break;
                        }
                        offset[j] = -1;
                        j += 1;
                    }
                }
            }
        }
    }
}

/// A ball given by center and radius.
#[derive(Clone, Debug)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn empty(dim: usize) -> Self {
        Ball {
            center: vec![0.0; dim],
            radius: -1.0,
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        if self.radius < 0.0 {
            return false;
        }
        let slack = 1e-10 * self.radius.max(1.0);
        dist2(p, &self.center).sqrt() <= self.radius + slack
    }
}

/// Exact smallest enclosing ball of a point set (recursive move-to-front
/// Welzl). Duplicate points are removed before the recursion.
pub fn min_enclosing_ball(points: Points<'_>) -> Result<Ball> {
    if points.is_empty() {
        return Err(Error::domain("minimum enclosing ball of an empty set"));
    }
    let dim = points.dim();
    let mut unique: Vec<&[f64]> = Vec::with_capacity(points.len());
    for p in points.iter() {
        if !unique.iter().any(|q| q == &p) {
            unique.push(p);
        }
    }
    let mut support: Vec<&[f64]> = Vec::with_capacity(dim + 1);
    Ok(welzl(&mut unique, 0, &mut support, dim))
}

fn welzl<'a>(pts: &mut Vec<&'a [f64]>, from: usize, support: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    if from == pts.len() || support.len() == dim + 1 {
        return ball_from_support(support, dim);
    }
    let p = pts[from];
    let b = welzl(pts, from + 1, support, dim);
    if b.contains(p) {
        return b;
    }
    support.push(p);
    let b2 = welzl(pts, from + 1, support, dim);
    support.pop();
    // move-to-front keeps boundary points early in later calls
    pts[from..].rotate_right(1);
    b2
}

/// Smallest ball with every support point on its boundary: the circumcenter
/// in the affine hull of the support.
fn ball_from_support(support: &[&[f64]], dim: usize) -> Ball {
    match support.len() {
        0 => Ball::empty(dim),
        1 => Ball {
            center: support[0].to_vec(),
            radius: 0.0,
        },
        _ => {
            let x0 = support[0];
            let m = support.len() - 1;
            // Solve sum_j lambda_j <v_i, v_j> = |v_i|^2 / 2 for the offsets
            // v_i = x_i - x_0 (Gaussian elimination, partial pivoting).
            let mut a = vec![vec![0.0; m + 1]; m];
            for i in 0..m {
                let vi = support[i + 1];
                for j in 0..m {
                    let vj = support[j + 1];
                    let mut dot = 0.0;
                    for t in 0..dim {
                        dot += (vi[t] - x0[t]) * (vj[t] - x0[t]);
                    }
                    a[i][j] = dot;
                }
                let mut nrm = 0.0;
                for t in 0..dim {
                    let d = vi[t] - x0[t];
                    nrm += d * d;
                }
                a[i][m] = 0.5 * nrm;
            }
            for col in 0..m {
                let mut piv = col;
                for row in col + 1..m {
                    if a[row][col].abs() > a[piv][col].abs() {
                        piv = row;
                    }
                }
                if a[piv][col].abs() < 1e-30 {
                    // affinely dependent support; fall back to the diameter pair
                    return ball_from_support(&support[..2], dim);
                }
                a.swap(col, piv);
                for row in col + 1..m {
                    let factor = a[row][col] / a[col][col];
                    for t in col..=m {
                        a[row][t] -= factor * a[col][t];
                    }
                }
            }
            let mut lambda = vec![0.0; m];
            for row in (0..m).rev() {
                let mut acc = a[row][m];
                for t in row + 1..m {
                    acc -= a[row][t] * lambda[t];
                }
                lambda[row] = acc / a[row][row];
            }
            let mut center = x0.to_vec();
            for j in 0..m {
                let vj = support[j + 1];
                for t in 0..dim {
                    center[t] += lambda[j] * (vj[t] - x0[t]);
                }
            }
            let radius = dist2(&center, x0).sqrt();
            Ball { center, radius }
        }
    }
}

/// A simplicial complex with simplices grouped by dimension. Every simplex is
/// a strictly increasing vertex-id tuple; the complex is downward closed by
/// construction.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    pub simplices_by_dim: Vec<Vec<Vec<u32>>>,
    pub max_dim: usize,
}

impl SimplicialComplex {
    pub fn empty(max_dim: usize) -> Self {
        SimplicialComplex {
            simplices_by_dim: vec![Vec::new(); max_dim + 1],
            max_dim,
        }
    }

    /// Number of p-simplices (0 when p exceeds the stored range).
    pub fn count(&self, p: usize) -> usize {
        self.simplices_by_dim.get(p).map_or(0, Vec::len)
    }

    /// Euler characteristic `sum_p (-1)^p S_p`.
    pub fn euler_characteristic(&self) -> i64 {
        self.simplices_by_dim
            .iter()
            .enumerate()
            .map(|(p, s)| if p % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) })
            .sum()
    }
}

/// Builds the Čech complex at scale `r`: a p-simplex is included iff the
/// minimum enclosing ball of its vertices has radius `<= r/2` (for p = 1 this
/// reduces to pairwise distance `<= r`, so the 1-skeleton is the geometric
/// graph). Candidate simplices are grown by extending cliques of the graph.
pub fn cech_complex(points: Points<'_>, r: f64, max_dim: usize) -> Result<SimplicialComplex> {
    if !(r > 0.0) {
        return Err(Error::domain("Čech radius must be positive"));
    }
    let n = points.len();
    let mut complex = SimplicialComplex::empty(max_dim);
    if n == 0 {
        return Ok(complex);
    }
    complex.simplices_by_dim[0] = (0..n as u32).map(|i| vec![i]).collect();
    if max_dim == 0 {
        return Ok(complex);
    }
    let graph = build_geometric_graph(points, r)?;
    let adj = graph.adjacency();
    complex.simplices_by_dim[1] = graph.edges.iter().map(|&(i, j)| vec![i, j]).collect();

    let half = r / 2.0;
    let dim = points.dim();
    let mut buf: Vec<f64> = Vec::new();
    for p in 2..=max_dim {
        let (lower, rest) = {
            let (head, tail) = complex.simplices_by_dim.split_at_mut(p);
            (&head[p - 1], &mut tail[0])
        };
        for simplex in lower {
            let last = *simplex.last().unwrap();
            // extend by the neighbors of the last vertex that are adjacent to
            // every vertex of the simplex
            for &v in &adj[last as usize] {
                if v <= last {
                    continue;
                }
                if !simplex
                    .iter()
                    .all(|&u| adj[u as usize].binary_search(&v).is_ok())
                {
                    continue;
                }
                buf.clear();
                for &u in simplex {
                    buf.extend_from_slice(points.get(u as usize));
                }
                buf.extend_from_slice(points.get(v as usize));
                let ball = min_enclosing_ball(Points::new(&buf, dim))?;
                if ball.radius <= half {
                    let mut s = simplex.clone();
                    s.push(v);
                    rest.push(s);
                }
            }
        }
        if complex.simplices_by_dim[p].is_empty() {
            break;
        }
    }
    for level in &mut complex.simplices_by_dim {
        level.sort_unstable();
        level.dedup();
    }
    Ok(complex)
}
