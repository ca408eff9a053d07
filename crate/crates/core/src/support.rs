//! Support sets B of point pairs: multiscale construction, density scans,
//! bounding radii and incidence graphs.
//!
//! A support is stored as unordered pairs with cached base lengths; the
//! ordered, symmetric view required by the theory is implicit (every pair
//! stands for both orientations), so symmetry can never be violated by
//! construction.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::deformation::MarkedSpectrum;
use crate::scalar::Scalar;
use crate::spaces::FiniteMetricSpace;
use crate::net::FarthestPointOrder;

/// Ordered-pair budget for `complete_support`.
pub const DEFAULT_PAIR_BUDGET: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum SupportError {
    #[error("density target must be > 2 (got {0})")]
    DensityTooLow(String),
    #[error("support requires a space with >= 2 points")]
    SpaceTooSmall,
    #[error("pair budget exceeded: {pairs} ordered pairs > budget {budget}")]
    PairBudget { pairs: usize, budget: usize },
    #[error("empty support")]
    EmptySupport,
    #[error("level {0} above largest pair length")]
    LevelAboveMax(String),
    #[error("t grid must be strictly decreasing and positive")]
    BadGrid,
    #[error("pair ({i},{j}) invalid for {n} points")]
    BadPair { i: usize, j: usize, n: usize },
    #[error("support/spectrum size mismatch: {support} pairs vs {spectrum} values")]
    SpectrumMismatch { support: usize, spectrum: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("support file lists ({i},{j}) without its reverse orientation")]
    MissingReverse { i: usize, j: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric set of off-diagonal point pairs with cached base lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet<T> {
    n_points: usize,
    /// Unordered pairs `(i, j)` with `i < j`, sorted lexicographically.
    pairs: Vec<(usize, usize)>,
    base_len: Vec<T>,
}

impl<T: Scalar> SupportSet<T> {
    /// Build from unordered pairs over `space`; pairs are normalized,
    /// deduplicated and sorted, base lengths cached from the space.
    pub fn from_unordered_pairs(
        space: &FiniteMetricSpace<T>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, SupportError> {
        let n = space.n();
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a >= n || b >= n || a == b {
                return Err(SupportError::BadPair { i: a, j: b, n });
            }
            set.insert((a.min(b), a.max(b)));
        }
        let pairs: Vec<(usize, usize)> = set.into_iter().collect();
        let base_len = pairs.iter().map(|&(i, j)| space.dist(i, j)).collect();
        Ok(SupportSet { n_points: n, pairs, base_len })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of unordered pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of ordered pairs (both orientations).
    pub fn len_ordered(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn base_len(&self, idx: usize) -> T {
        self.base_len[idx]
    }

    pub fn base_lens(&self) -> &[T] {
        &self.base_len
    }

    /// Index of an unordered pair, if present.
    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.pairs.binary_search(&key).ok()
    }

    /// Indices of pairs with base length >= t (the level set B_t).
    pub fn level_indices(&self, t: T) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&i| self.base_len[i] >= t)
            .collect()
    }

    pub fn min_len(&self) -> Option<T> {
        self.base_len
            .iter()
            .copied()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn max_len(&self) -> Option<T> {
        self.base_len
            .iter()
            .copied()
            .max_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Sorted ascending distinct base lengths.
    pub fn distinct_lens(&self) -> Vec<T> {
        let mut v = self.base_len.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    /// Sorted original point indices appearing in any pair (projection Y).
    pub fn projection(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for &(i, j) in &self.pairs {
            set.insert(i);
            set.insert(j);
        }
        set.into_iter().collect()
    }

    /// Projection Y_t of the level set B_t.
    pub fn projection_at(&self, t: T) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for (idx, &(i, j)) in self.pairs.iter().enumerate() {
            if self.base_len[idx] >= t {
                set.insert(i);
                set.insert(j);
            }
        }
        set.into_iter().collect()
    }
}

/// Target density for the multiscale net construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityTarget<T> {
    Finite(T),
    Infinite,
}

/// Result of [`build_multiscale_support`]: the support, the net scales used
/// (original length units) and the internal rescaling factor applied in the
/// infinite-density mode (1 otherwise).
#[derive(Debug, Clone)]
pub struct MultiscaleSupport<T> {
    pub support: SupportSet<T>,
    pub scales: Vec<T>,
    pub rescale_factor: T,
}

/// Union of per-scale supports B(k) over greedy farthest-point nets Y_k with
/// halving scales, pair threshold `delta_{k-1} * phi(delta_{k-1})`.
///
/// `phi = 2D` for a finite target D > 2. For the infinite target the space is
/// internally rescaled to diameter 1/4 and `phi(t) = max(4, ln(1/t))`.
pub fn build_multiscale_support<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    target: DensityTarget<T>,
    delta1: Option<T>,
) -> Result<MultiscaleSupport<T>, SupportError> {
    if space.n() < 2 {
        return Err(SupportError::SpaceTooSmall);
    }
    let two = T::one() + T::one();
    let four = two + two;
    let diam = space.diameter();
    let min_pos = space.min_positive_distance();

    // work in rescaled units: s * original distance
    let (scale, phi): (T, Box<dyn Fn(T) -> T>) = match target {
        DensityTarget::Finite(d) => {
            if !(d > two) {
                return Err(SupportError::DensityTooLow(format!("{d}")));
            }
            (T::one(), Box::new(move |_t| two * d))
        }
        DensityTarget::Infinite => {
            let s = T::one() / (four * diam);
            (s, Box::new(move |t: T| four.max((T::one() / t).ln())))
        }
    };
    let diam_s = scale * diam;
    let min_pos_s = scale * min_pos;

    // default delta_1 is the smallest value satisfying diam <= delta_1*phi(delta_1)/2
    let default_d1 = match target {
        DensityTarget::Finite(d) => diam_s / d,
        DensityTarget::Infinite => diam_s / two,
    };
    let mut d1 = match delta1 {
        Some(v) => (scale * v).max(default_d1),
        None => default_d1,
    };
    if matches!(target, DensityTarget::Infinite) {
        // phi needs t < 1/e so that t*phi(t) is decreasing
        let cap = T::one() / T::E();
        if d1 >= cap {
            d1 = default_d1;
        }
    }

    let fp = FarthestPointOrder::compute(space);
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut scales = Vec::new();
    let half = T::one() / two;

    let mut delta_k = d1;
    for k in 1.. {
        if k > 1 && delta_k < min_pos_s * half {
            break;
        }
        let delta_prev = delta_k * two; // delta_{k-1}, with delta_0 = 2*delta_1
        let threshold = delta_prev * phi(delta_prev) / scale; // original units
        let net = fp.net(delta_k / scale);
        for (a, &u) in net.iter().enumerate() {
            for &v in &net[a + 1..] {
                if space.dist(u, v) <= threshold {
                    set.insert((u.min(v), u.max(v)));
                }
            }
        }
        scales.push(delta_k / scale);
        delta_k = delta_k * half;
    }

    let support = SupportSet::from_unordered_pairs(space, set)?;
    Ok(MultiscaleSupport {
        support,
        scales,
        rescale_factor: scale,
    })
}

/// Degenerate baseline: every ordered off-diagonal pair.
pub fn complete_support<T: Scalar>(
    space: &FiniteMetricSpace<T>,
) -> Result<SupportSet<T>, SupportError> {
    let n = space.n();
    let ordered = n * (n - 1);
    if ordered > DEFAULT_PAIR_BUDGET {
        return Err(SupportError::PairBudget {
            pairs: ordered,
            budget: DEFAULT_PAIR_BUDGET,
        });
    }
    let pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
    SupportSet::from_unordered_pairs(space, pairs)
}

/// `sup_b |z| / |zb|` for one ordered pair `z = (x, x')`, with the
/// `|zb| = 0 => +inf` convention. `bail_below`: once the best achievable
/// denominator drops to or below this value the caller's infimum can no
/// longer be improved by `z`, so the scan may stop early (the returned value
/// is then only a lower bound, which the caller discards).
fn sup_ratio_for_z<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
    x: usize,
    x2: usize,
    bail_below: T,
) -> T {
    let z_len = space.dist(x, x2);
    let mut min_zb = T::infinity();
    for &(u, v) in support.pairs() {
        let a = space.dist(x, u).max(space.dist(x2, v));
        let b = space.dist(x, v).max(space.dist(x2, u));
        let m = a.min(b);
        if m < min_zb {
            min_zb = m;
            if min_zb <= bail_below {
                break;
            }
        }
    }
    if min_zb == T::zero() {
        T::infinity()
    } else {
        z_len / min_zb
    }
}

/// Exact density `dens(B) = inf_z sup_b |z|/|zb|` by full scan over all
/// ordered off-diagonal pairs z. Parallel over z; the pruning against the
/// running infimum never changes the result, only skips pairs that cannot
/// lower it. Deterministic for any worker count.
pub fn brute_density<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
) -> Result<T, SupportError> {
    if support.is_empty() {
        return Err(SupportError::EmptySupport);
    }
    let n = space.n();
    // by symmetry of B the reversed z gives the same sup; scan unordered z
    let zs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dens = zs
        .par_iter()
        .fold(
            || T::infinity(),
            |best, &(x, x2)| {
                let bail = space.dist(x, x2) / best; // |zb| <= bail => sup >= best
                let sup = sup_ratio_for_z(space, support, x, x2, bail);
                if sup < best {
                    sup
                } else {
                    best
                }
            },
        )
        .reduce(
            || T::infinity(),
            |a, b| if a < b { a } else { b },
        );
    Ok(dens)
}

/// Threshold mode: true iff `dens(B) >= threshold`, with early exit per z
/// once a witness pair reaches the threshold ratio.
pub fn verify_density_at_least<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
    threshold: T,
) -> Result<bool, SupportError> {
    if support.is_empty() {
        return Err(SupportError::EmptySupport);
    }
    let n = space.n();
    let zs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let ok = zs.par_iter().all(|&(x, x2)| {
        let z_len = space.dist(x, x2);
        let need = z_len / threshold; // some |zb| <= need suffices
        for &(u, v) in support.pairs() {
            let a = space.dist(x, u).max(space.dist(x2, v));
            let b = space.dist(x, v).max(space.dist(x2, u));
            if a.min(b) <= need {
                return true;
            }
        }
        false
    });
    Ok(ok)
}

/// Local density profile: density restricted to z with |z| <= t, for each t
/// of a strictly decreasing grid. Empty restriction reports +inf.
pub fn local_density_profile<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
    t_grid: &[T],
) -> Result<Vec<(T, T)>, SupportError> {
    if support.is_empty() {
        return Err(SupportError::EmptySupport);
    }
    if t_grid.is_empty()
        || t_grid.windows(2).any(|w| !(w[1] < w[0]))
        || !(t_grid[t_grid.len() - 1] > T::zero())
    {
        return Err(SupportError::BadGrid);
    }
    let n = space.n();
    let t_max = t_grid[0];
    let zs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| space.dist(i, j) <= t_max)
        .collect();
    // exact sup for every z in range; aggregation per grid entry is then a min
    let sups: Vec<(T, T)> = zs
        .par_iter()
        .map(|&(x, x2)| {
            let sup = sup_ratio_for_z(space, support, x, x2, T::neg_infinity());
            (space.dist(x, x2), sup)
        })
        .collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let mut dens = T::infinity();
            for &(z_len, sup) in &sups {
                if z_len <= t && sup < dens {
                    dens = sup;
                }
            }
            (t, dens)
        })
        .collect())
}

/// Bounding radius delta(t): covering radius of the level projection Y_t.
pub fn bounding_radius<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
    t: T,
) -> Result<T, SupportError> {
    let y_t = support.projection_at(t);
    if y_t.is_empty() {
        return Err(SupportError::LevelAboveMax(format!("{t}")));
    }
    let mut radius = T::zero();
    for x in 0..space.n() {
        let mut nearest = T::infinity();
        for &y in &y_t {
            let d = space.dist(x, y);
            if d < nearest {
                nearest = d;
            }
        }
        if nearest > radius {
            radius = nearest;
        }
    }
    Ok(radius)
}

/// Relative bounding radius: max of delta(t)/t over a window of small t.
/// Default window: the 20 smallest distinct base lengths of the support.
pub fn relative_bounding_radius<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    support: &SupportSet<T>,
    window: Option<&[T]>,
) -> Result<T, SupportError> {
    let default_window;
    let window = match window {
        Some(w) => w,
        None => {
            let lens = support.distinct_lens();
            let take = lens.len().min(20);
            default_window = lens[..take].to_vec();
            &default_window
        }
    };
    if window.is_empty() {
        return Err(SupportError::EmptySupport);
    }
    let mut nu = T::neg_infinity();
    for &t in window {
        let ratio = bounding_radius(space, support, t)? / t;
        if ratio > nu {
            nu = ratio;
        }
    }
    Ok(nu)
}

/// Incidence graph Gamma_t: vertices Y_t, edges B_t weighted by a marked
/// spectrum.
#[derive(Debug, Clone)]
pub struct IncidenceGraph<T> {
    pub level: T,
    /// Original point indices, sorted.
    pub vertices: Vec<usize>,
    /// Edges as local vertex indices `(u, v)` with weight, u < v.
    pub edges: Vec<(usize, usize, T)>,
    adj: Vec<Vec<(usize, T)>>,
    components: Vec<usize>,
    n_components: usize,
}

impl<T: Scalar> IncidenceGraph<T> {
    pub fn component_of(&self, local: usize) -> usize {
        self.components[local]
    }

    pub fn component_count(&self) -> usize {
        self.n_components
    }

    pub fn is_connected(&self) -> bool {
        self.n_components == 1
    }

    pub fn local_index(&self, original: usize) -> Option<usize> {
        self.vertices.binary_search(&original).ok()
    }

    pub fn degree(&self, local: usize) -> usize {
        self.adj[local].len()
    }

    /// Shortest-path distances from a local source; +inf across components.
    pub fn dijkstra(&self, source: usize) -> Vec<T> {
        use std::cmp::Ordering;
        use std::collections::BinaryHeap;

        struct Entry<T>(T, usize);
        impl<T: PartialOrd> PartialEq for Entry<T> {
            fn eq(&self, other: &Self) -> bool {
                self.0 == other.0 && self.1 == other.1
            }
        }
        impl<T: PartialOrd> Eq for Entry<T> {}
        impl<T: PartialOrd> PartialOrd for Entry<T> {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl<T: PartialOrd> Ord for Entry<T> {
            fn cmp(&self, other: &Self) -> Ordering {
                // min-heap on weight, ties by vertex index for determinism
                other
                    .0
                    .partial_cmp(&self.0)
                    .unwrap()
                    .then_with(|| other.1.cmp(&self.1))
            }
        }

        let n = self.vertices.len();
        let mut dist = vec![T::infinity(); n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = T::zero();
        heap.push(Entry(T::zero(), source));
        while let Some(Entry(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }
}

/// Build the incidence graph of level `t` with weights from `spectrum`.
pub fn incidence_graph<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
    t: T,
) -> Result<IncidenceGraph<T>, SupportError> {
    if spectrum.len() != support.len() {
        return Err(SupportError::SpectrumMismatch {
            support: support.len(),
            spectrum: spectrum.len(),
        });
    }
    let level = support.level_indices(t);
    if level.is_empty() {
        return Err(SupportError::LevelAboveMax(format!("{t}")));
    }
    let vertices = support.projection_at(t);
    let local = |orig: usize| vertices.binary_search(&orig).unwrap();
    let mut edges = Vec::with_capacity(level.len());
    let mut adj = vec![Vec::new(); vertices.len()];
    for idx in level {
        let (i, j) = support.pairs()[idx];
        let w = spectrum.value(idx);
        let (u, v) = (local(i), local(j));
        edges.push((u, v, w));
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    // connected components by BFS
    let mut components = vec![usize::MAX; vertices.len()];
    let mut n_components = 0;
    for start in 0..vertices.len() {
        if components[start] != usize::MAX {
            continue;
        }
        let label = n_components;
        n_components += 1;
        let mut queue = vec![start];
        components[start] = label;
        while let Some(u) = queue.pop() {
            for &(v, _) in &adj[u] {
                if components[v] == usize::MAX {
                    components[v] = label;
                    queue.push(v);
                }
            }
        }
    }
    Ok(IncidenceGraph {
        level: t,
        vertices,
        edges,
        adj,
        components,
        n_components,
    })
}

/// Support edge-list file: header `#support n=<points>`, then `i,j,len` for
/// every ordered pair (both orientations).
pub fn save_support<T: Scalar>(support: &SupportSet<T>, path: &Path) -> Result<(), SupportError> {
    let mut out = format!("#support n={}\n", support.n_points());
    for (idx, &(i, j)) in support.pairs().iter().enumerate() {
        let len = support.base_len(idx).format_full();
        out.push_str(&format!("{i},{j},{len}\n"));
        out.push_str(&format!("{j},{i},{len}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Load a support edge-list file. Both orientations must be present with
/// equal lengths.
pub fn load_support<T: Scalar>(path: &Path) -> Result<SupportSet<T>, SupportError> {
    let text = fs::read_to_string(path)?;
    parse_support(&text)
}

pub fn parse_support<T: Scalar>(text: &str) -> Result<SupportSet<T>, SupportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SupportError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let n: usize = header
        .strip_prefix("#support n=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or(SupportError::Parse {
            line: 1,
            msg: "expected header '#support n=<points>'".into(),
        })?;
    let mut entries: std::collections::BTreeMap<(usize, usize), T> = Default::default();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parse_idx = |s: Option<&str>| -> Result<usize, SupportError> {
            s.and_then(|v| v.trim().parse().ok()).ok_or(SupportError::Parse {
                line: lineno + 1,
                msg: "expected 'i,j,len'".into(),
            })
        };
        let i = parse_idx(it.next())?;
        let j = parse_idx(it.next())?;
        let len = it
            .next()
            .and_then(T::parse_decimal)
            .ok_or(SupportError::Parse {
                line: lineno + 1,
                msg: "bad length".into(),
            })?;
        if i >= n || j >= n || i == j {
            return Err(SupportError::BadPair { i, j, n });
        }
        entries.insert((i, j), len);
    }
    let mut pairs = Vec::new();
    let mut base_len = Vec::new();
    for (&(i, j), &len) in &entries {
        match entries.get(&(j, i)) {
            Some(&rev) if rev == len => {}
            _ => return Err(SupportError::MissingReverse { i, j }),
        }
        if i < j {
            pairs.push((i, j));
            base_len.push(len);
        }
    }
    Ok(SupportSet { n_points: n, pairs, base_len })
}

/// Export an incidence graph: header `#gamma t=<t>`, then `i,j,weight` for
/// both orientations of every edge (original point indices).
pub fn save_graph<T: Scalar>(graph: &IncidenceGraph<T>, path: &Path) -> Result<(), SupportError> {
    let mut out = format!("#gamma t={}\n", graph.level.format_full());
    for &(u, v, w) in &graph.edges {
        let (i, j) = (graph.vertices[u], graph.vertices[v]);
        let w = w.format_full();
        out.push_str(&format!("{i},{j},{w}\n"));
        out.push_str(&format!("{j},{i},{w}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
