//! Weighted networks, walk matrices, loop erasure, Fomin's determinant and
//! a truncated brute-force evaluation of the walk tuples it counts.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::numerics::linalg::{det_real, solve_real, symmetric_eigenvalues};
use crate::numerics::rng::RngStream;

/// Largest vertex count accepted by the brute-force enumeration.
pub const BRUTE_FORCE_MAX_VERTICES: usize = 64;

/// Undirected network with edge weights and boundary tuples A and B.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkNetwork {
    pub names: Vec<String>,
    /// symmetric step matrix, Q_uv = w(e_uv)
    #[serde(skip)]
    pub q: DMatrix<f64>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl WalkNetwork {
    pub fn new(
        names: Vec<String>,
        edges: &[(usize, usize, f64)],
        a: Vec<usize>,
        b: Vec<usize>,
    ) -> Result<Self> {
        let n = names.len();
        let mut q = DMatrix::zeros(n, n);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::argument(format!(
                    "edge ({u}, {v}) names a missing vertex"
                )));
            }
            if u == v {
                return Err(Error::argument(format!("self-loop at {}", names[u])));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::argument(format!(
                    "edge weight {w} must be nonnegative"
                )));
            }
            q[(u, v)] = w;
            q[(v, u)] = w;
        }
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::argument(
                "A and B must be nonempty tuples of equal length",
            ));
        }
        let mut seen = vec![false; n];
        for &v in a.iter().chain(&b) {
            if v >= n {
                return Err(Error::argument(format!("boundary vertex {v} is missing")));
            }
            if seen[v] {
                return Err(Error::argument(format!(
                    "boundary vertex {} is repeated",
                    names[v]
                )));
            }
            seen[v] = true;
        }
        Ok(Self { names, q, a, b })
    }

    /// Parses lines "u v weight", "A: a1 a2 ..." and "B: b1 b2 ..."; `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut id = |name: &str, names: &mut Vec<String>| {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut edges = Vec::new();
        let (mut a, mut b) = (None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::argument(format!("line {}: {what}: {raw:?}", lineno + 1));
            if let Some((tag, rest)) = line.split_once(':') {
                let list: Vec<usize> = rest.split_whitespace().map(|v| id(v, &mut names)).collect();
                match tag.trim() {
                    "A" => a = Some(list),
                    "B" => b = Some(list),
                    _ => return Err(bad("unknown boundary tag")),
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [u, v, w] = fields[..] else {
                return Err(bad("expected \"u v weight\""));
            };
            let w: f64 = w.parse().map_err(|_| bad("weight is not a number"))?;
            let (u, v) = (id(u, &mut names), id(v, &mut names));
            edges.push((u, v, w));
        }
        let a = a.ok_or_else(|| Error::argument("missing \"A:\" line"))?;
        let b = b.ok_or_else(|| Error::argument("missing \"B:\" line"))?;
        Self::new(names, &edges, a, b)
    }

    /// rows x cols grid with uniform weight; vertex (i, j) is named "i,j".
    pub fn grid(
        rows: usize,
        cols: usize,
        weight: f64,
        a: &[(usize, usize)],
        b: &[(usize, usize)],
    ) -> Result<Self> {
        let idx = |i: usize, j: usize| i * cols + j;
        let names = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| format!("{i},{j}")))
            .collect();
        let mut edges = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if j + 1 < cols {
                    edges.push((idx(i, j), idx(i, j + 1), weight));
                }
                if i + 1 < rows {
                    edges.push((idx(i, j), idx(i + 1, j), weight));
                }
            }
        }
        let pick = |pts: &[(usize, usize)]| pts.iter().map(|&(i, j)| idx(i, j)).collect();
        Self::new(names, &edges, pick(a), pick(b))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.q.row_iter().map(|r| r.sum()).fold(0.0, f64::max)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(symmetric_eigenvalues(&self.q)?
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs())))
    }

    fn neighbours(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.len())
            .map(|u| {
                (0..self.len())
                    .filter(|&v| self.q[(u, v)] > 0.0)
                    .map(|v| (v, self.q[(u, v)]))
                    .collect()
            })
            .collect()
    }
}

/// Full Green's function (I - Q)^{-1} = sum_m Q^m.
pub fn green_function(net: &WalkNetwork) -> Result<DMatrix<f64>> {
    if net.max_row_sum() >= 1.0 {
        let rho = net.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::Divergence(format!(
                "spectral radius of the step matrix is {rho} >= 1 (max row sum {})",
                net.max_row_sum()
            )));
        }
    }
    let n = net.len();
    let i_minus_q = DMatrix::identity(n, n) - &net.q;
    let mut g = DMatrix::zeros(n, n);
    for col in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == col { 1.0 } else { 0.0 });
        g.set_column(col, &solve_real(&i_minus_q, &e)?);
    }
    Ok(g)
}

/// W(a, b) restricted to rows A and columns B.
pub fn walk_matrix(net: &WalkNetwork) -> Result<DMatrix<f64>> {
    let g = green_function(net)?;
    Ok(DMatrix::from_fn(net.a.len(), net.b.len(), |i, j| {
        g[(net.a[i], net.b[j])]
    }))
}

/// sum_{m <= l} Q^m restricted to A x B, with the Neumann tail bound
/// q^{l+1} / (1 - q) for the max row sum q.
pub fn truncated_walk_matrix(net: &WalkNetwork, l: usize) -> (DMatrix<f64>, f64) {
    let n = net.len();
    let mut power = DMatrix::identity(n, n);
    let mut sum = power.clone();
    for _ in 0..l {
        power = &power * &net.q;
        sum += &power;
    }
    let q = net.max_row_sum();
    let bound = if q < 1.0 {
        q.powi(l as i32 + 1) / (1.0 - q)
    } else {
        f64::INFINITY
    };
    (
        DMatrix::from_fn(net.a.len(), net.b.len(), |i, j| sum[(net.a[i], net.b[j])]),
        bound,
    )
}

/// det(W_{A,B}).
pub fn fomin_determinant(net: &WalkNetwork) -> Result<f64> {
    det_real(&walk_matrix(net)?)
}

/// A walk as its vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Walk {
    pub vertices: Vec<usize>,
}

impl Walk {
    pub fn new(vertices: Vec<usize>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.vertices.iter().all(|v| seen.insert(*v))
    }

    /// w(pi) = product of the edge weights; errors on a non-edge step.
    pub fn weight(&self, net: &WalkNetwork) -> Result<f64> {
        self.vertices.windows(2).try_fold(1.0, |acc, e| {
            let w = net.q[(e[0], e[1])];
            if w > 0.0 {
                Ok(acc * w)
            } else {
                Err(Error::argument(format!(
                    "step {} -> {} is not an edge",
                    e[0], e[1]
                )))
            }
        })
    }
}

/// Chronological loop erasure: each return to a visited vertex removes the
/// loop it closes, which is the same as repeatedly removing the first loop.
pub fn loop_erase(walk: &Walk) -> Walk {
    let mut out: Vec<usize> = Vec::with_capacity(walk.vertices.len());
    for &v in &walk.vertices {
        if let Some(p) = out.iter().position(|&u| u == v) {
            out.truncate(p + 1);
        } else {
            out.push(v);
        }
    }
    Walk::new(out)
}

/// Truncated evaluation of the right side of Fomin's identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BruteForceRecord {
    pub value: f64,
    pub tail_bound: f64,
    pub l_max: usize,
}

/// Tail bound N q^{L+1} / (1 - q) (1 / (1 - q))^{N-1} on the weight of
/// tuples with some walk longer than L.
pub fn brute_force_tail_bound(q: f64, n: usize, l_max: usize) -> f64 {
    if q >= 1.0 {
        return f64::INFINITY;
    }
    n as f64 * q.powi(l_max as i32 + 1) / (1.0 - q) * (1.0 - q).powi(-(n as i32 - 1))
}

/// Smallest L with brute_force_tail_bound(q, n, L) <= tol.
pub fn brute_force_l_max(q: f64, n: usize, tol: f64) -> Result<usize> {
    if !(q < 1.0) {
        return Err(Error::argument(format!("max row sum {q} must be below 1")));
    }
    (0..10_000)
        .find(|&l| brute_force_tail_bound(q, n, l) <= tol)
        .ok_or_else(|| Error::argument("no L below 10000 reaches the tolerance"))
}

fn mask_of(path: &[u8]) -> u64 {
    path.iter().fold(0, |m, &v| m | 1 << v)
}

/// Weight of walks a -> b with at most l steps, keyed by
/// (vertices of the loop-erased part, vertices visited).
fn walk_masks(
    neighbours: &[Vec<(usize, f64)>],
    a: usize,
    b: usize,
    l: usize,
) -> BTreeMap<(u64, u64), f64> {
    let mut out = BTreeMap::new();
    let mut states: BTreeMap<(Vec<u8>, u64), f64> = BTreeMap::new();
    states.insert((vec![a as u8], 1 << a), 1.0);
    for step in 0..=l {
        for ((path, visited), &w) in &states {
            if *path.last().expect("nonempty") as usize == b {
                *out.entry((mask_of(path), *visited)).or_insert(0.0) += w;
            }
        }
        if step == l {
            break;
        }
        let mut next: BTreeMap<(Vec<u8>, u64), f64> = BTreeMap::new();
        for ((path, visited), &w) in &states {
            let u = *path.last().expect("nonempty") as usize;
            for &(v, q) in &neighbours[u] {
                let mut p = path.clone();
                match p.iter().position(|&x| x as usize == v) {
                    Some(k) => p.truncate(k + 1),
                    None => p.push(v as u8),
                }
                *next.entry((p, visited | 1 << v)).or_insert(0.0) += w * q;
            }
        }
        states = next;
    }
    out
}

/// Sum of prod w(pi_k) over tuples of walks a_k -> b_k with |pi_k| <= l_max
/// and LE(pi_i) disjoint from pi_j for i < j. Errors with an inconclusive
/// result when the tail bound exceeds `tolerance`.
pub fn brute_force_fomin(
    net: &WalkNetwork,
    l_max: usize,
    tolerance: f64,
) -> Result<BruteForceRecord> {
    if net.len() > BRUTE_FORCE_MAX_VERTICES {
        return Err(Error::argument(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_VERTICES} vertices (got {})",
            net.len()
        )));
    }
    let tail_bound = brute_force_tail_bound(net.max_row_sum(), net.a.len(), l_max);
    let neighbours = net.neighbours();
    // union of earlier loop-erased parts -> accumulated weight
    let mut partial: BTreeMap<u64, f64> = BTreeMap::from([(0, 1.0)]);
    for (&a, &b) in net.a.iter().zip(&net.b) {
        let walks = walk_masks(&neighbours, a, b, l_max);
        let mut next = BTreeMap::new();
        for (&used, &w0) in &partial {
            for (&(le, visited), &w) in &walks {
                if visited & used == 0 {
                    *next.entry(used | le).or_insert(0.0) += w0 * w;
                }
            }
        }
        partial = next;
    }
    let value = partial.values().sum();
    if !(tail_bound <= tolerance) {
        return Err(Error::Inconclusive(format!(
            "truncated sum {value} at L = {l_max} has tail bound {tail_bound:e} above {tolerance:e}"
        )));
    }
    Ok(BruteForceRecord {
        value,
        tail_bound,
        l_max,
    })
}

/// Outcome of comparing Fomin's determinant with the truncated enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FominRecord {
    pub det: f64,
    pub brute: f64,
    pub tail_bound: f64,
    pub l_max: usize,
    pub pass: bool,
}

pub fn fomin_check(net: &WalkNetwork, l_max: usize, tolerance: f64) -> Result<FominRecord> {
    let det = fomin_determinant(net)?;
    let brute = brute_force_fomin(net, l_max, tolerance)?;
    Ok(FominRecord {
        det,
        brute: brute.value,
        tail_bound: brute.tail_bound,
        l_max,
        pass: (det - brute.value).abs() <= brute.tail_bound,
    })
}

/// Random walk with steps chosen proportionally to the edge weights,
/// stopped on first reaching `targets`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Killing {
    pub targets: Vec<usize>,
    pub max_steps: usize,
}

/// Loop erasure of the weight-proportional walk from `a` stopped at the targets.
pub fn sample_lerw(
    net: &WalkNetwork,
    a: usize,
    killing: &Killing,
    rng: &mut RngStream,
) -> Result<Walk> {
    let neighbours = net.neighbours();
    let mut is_target = vec![false; net.len()];
    for &t in &killing.targets {
        is_target[t] = true;
    }
    let mut path = vec![a];
    let mut u = a;
    for _ in 0..killing.max_steps {
        if is_target[u] {
            return Ok(loop_erase(&Walk::new(path)));
        }
        let total: f64 = neighbours[u].iter().map(|&(_, w)| w).sum();
        if total == 0.0 {
            return Err(Error::argument(format!(
                "vertex {} has no edges",
                net.names[u]
            )));
        }
        let mut pick = rng.uniform() * total;
        let mut next = neighbours[u][neighbours[u].len() - 1].0;
        for &(v, w) in &neighbours[u] {
            if pick < w {
                next = v;
                break;
            }
            pick -= w;
        }
        path.push(next);
        u = next;
    }
    if is_target[u] {
        return Ok(loop_erase(&Walk::new(path)));
    }
    Err(Error::Divergence(format!(
        "walk did not reach a target within {} steps",
        killing.max_steps
    )))
}

/// Probability that the weight-proportional walk from `a` first hits each
/// target, by solving the harmonic equations off the targets.
pub fn hitting_distribution(net: &WalkNetwork, a: usize, targets: &[usize]) -> Result<Vec<f64>> {
    let n = net.len();
    let is_target: Vec<bool> = (0..n).map(|v| targets.contains(&v)).collect();
    let mut m = DMatrix::identity(n, n);
    for u in (0..n).filter(|&u| !is_target[u]) {
        let total: f64 = net.q.row(u).sum();
        for v in 0..n {
            m[(u, v)] -= net.q[(u, v)] / total;
        }
    }
    targets
        .iter()
        .map(|&t| {
            let rhs = DVector::from_fn(n, |r, _| if r == t { 1.0 } else { 0.0 });
            Ok(solve_real(&m, &rhs)?[a])
        })
        .collect()
}
