//! Finite metric spaces: generators, validation and persistence.
//!
//! A [`FiniteMetricSpace`] stores an exact `n x n` distance matrix and is the
//! ground model for every other structure in the crate. Generators cover the
//! truncated Cantor spaces `P_{n,p}` and sampled circles; arbitrary matrices
//! load from the distance-matrix file format.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

/// Points above this count are refused by the generators unless a custom
/// budget is supplied. Keeps the O(n^2) matrix at desk scale.
pub const DEFAULT_POINT_BUDGET: usize = 20_000;

/// Relative tolerance for triangle-inequality validation of loaded matrices.
/// Generators are validated exactly.
pub const LOAD_TRIANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("diagonal entry ({i},{i}) must be zero")]
    NonzeroDiagonal { i: usize },
    #[error("distance ({i},{j}) must be positive for distinct points")]
    NonpositiveOffDiagonal { i: usize, j: usize },
    #[error("matrix is asymmetric at ({i},{j})")]
    Asymmetric { i: usize, j: usize },
    #[error("triangle inequality violated by points ({i},{j},{k})")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("point budget exceeded: {points} points > budget {budget} (reduce depth)")]
    PointBudget { points: usize, budget: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A finite metric space: `n` points with an exact pairwise distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace<T> {
    n: usize,
    dist: Vec<T>,
    labels: Option<Vec<String>>,
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Build from a row-major `n x n` matrix, validating all metric axioms.
    ///
    /// `triangle_tol` is the relative slack allowed in the triangle
    /// inequality; pass zero for exact validation.
    pub fn from_matrix(
        n: usize,
        dist: Vec<T>,
        labels: Option<Vec<String>>,
        triangle_tol: T,
    ) -> Result<Self, SpaceError> {
        assert_eq!(dist.len(), n * n, "matrix size mismatch");
        let space = FiniteMetricSpace { n, dist, labels };
        space.validate(triangle_tol)?;
        Ok(space)
    }

    fn validate(&self, triangle_tol: T) -> Result<(), SpaceError> {
        let n = self.n;
        for i in 0..n {
            if self.dist(i, i) != T::zero() {
                return Err(SpaceError::NonzeroDiagonal { i });
            }
            for j in 0..n {
                if i != j && !(self.dist(i, j) > T::zero()) {
                    return Err(SpaceError::NonpositiveOffDiagonal { i, j });
                }
                if self.dist(i, j) != self.dist(j, i) {
                    return Err(SpaceError::Asymmetric { i, j });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = self.dist(i, j);
                for k in 0..n {
                    let lhs = self.dist(i, k);
                    let rhs = dij + self.dist(j, k);
                    if lhs > rhs + triangle_tol * lhs {
                        return Err(SpaceError::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n + j]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for &v in &self.dist {
            if v > d {
                d = v;
            }
        }
        d
    }

    /// Smallest positive pairwise distance.
    pub fn min_positive_distance(&self) -> T {
        let mut m = T::infinity();
        for &v in &self.dist {
            if v > T::zero() && v < m {
                m = v;
            }
        }
        m
    }

    /// Sorted ascending list of distinct positive distance values.
    pub fn distinct_distances(&self) -> Vec<T> {
        let mut vals: Vec<T> = self.dist.iter().copied().filter(|v| *v > T::zero()).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        vals
    }

    /// Restriction of the space to a subset of point indices.
    pub fn restrict(&self, points: &[usize]) -> FiniteMetricSpace<T> {
        let m = points.len();
        let mut dist = Vec::with_capacity(m * m);
        for &i in points {
            for &j in points {
                dist.push(self.dist(i, j));
            }
        }
        let labels = self
            .labels
            .as_ref()
            .map(|ls| points.iter().map(|&i| ls[i].clone()).collect());
        FiniteMetricSpace { n: m, dist, labels }
    }
}

/// Parameters of a truncated Cantor space `P_{n,p}`: strings of length
/// `depth` over the alphabet `{0..n}` with distance `p^{-k}`, `k` the number
/// of leading coordinates two strings share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorSpec<T> {
    pub n: usize,
    pub p: T,
    pub depth: usize,
}

impl<T: Scalar> CantorSpec<T> {
    pub fn new(n: usize, p: T, depth: usize) -> Result<Self, SpaceError> {
        if n < 1 {
            return Err(SpaceError::InvalidSpec("cantor: n must be >= 1".into()));
        }
        if !(p > T::one()) {
            return Err(SpaceError::InvalidSpec("cantor: p must be > 1".into()));
        }
        if depth < 1 {
            return Err(SpaceError::InvalidSpec("cantor: depth must be >= 1".into()));
        }
        Ok(CantorSpec { n, p, depth })
    }

    pub fn point_count(&self) -> Option<usize> {
        (self.n + 1).checked_pow(self.depth as u32)
    }
}

/// Generate the truncated Cantor space for `spec` under the default budget.
pub fn gen_cantor<T: Scalar>(spec: &CantorSpec<T>) -> Result<FiniteMetricSpace<T>, SpaceError> {
    gen_cantor_with_budget(spec, DEFAULT_POINT_BUDGET)
}

/// Generate the truncated Cantor space with an explicit point budget.
pub fn gen_cantor_with_budget<T: Scalar>(
    spec: &CantorSpec<T>,
    budget: usize,
) -> Result<FiniteMetricSpace<T>, SpaceError> {
    let alphabet = spec.n + 1;
    let count = spec
        .point_count()
        .filter(|&c| c <= budget)
        .ok_or(SpaceError::PointBudget {
            points: spec.point_count().unwrap_or(usize::MAX),
            budget,
        })?;

    // digit strings, most significant coordinate first
    let mut digits = vec![0u8; count * spec.depth];
    for idx in 0..count {
        let mut rest = idx;
        for pos in (0..spec.depth).rev() {
            digits[idx * spec.depth + pos] = (rest % alphabet) as u8;
            rest /= alphabet;
        }
    }

    // p^{-k} for k = 0..depth; k = depth means identical strings (distance 0)
    let mut inv_pow = Vec::with_capacity(spec.depth + 1);
    for k in 0..=spec.depth {
        inv_pow.push(T::one() / spec.p.powi(k as i32));
    }

    let mut dist = vec![T::zero(); count * count];
    for i in 0..count {
        let di = &digits[i * spec.depth..(i + 1) * spec.depth];
        for j in (i + 1)..count {
            let dj = &digits[j * spec.depth..(j + 1) * spec.depth];
            let mut k = 0;
            while k < spec.depth && di[k] == dj[k] {
                k += 1;
            }
            let d = inv_pow[k];
            dist[i * count + j] = d;
            dist[j * count + i] = d;
        }
    }

    let labels = (0..count)
        .map(|idx| {
            digits[idx * spec.depth..(idx + 1) * spec.depth]
                .iter()
                .map(|d| {
                    std::char::from_digit(u32::from(*d), 36).expect("alphabet fits base36")
                })
                .collect()
        })
        .collect();

    Ok(FiniteMetricSpace {
        n: count,
        dist,
        labels: Some(labels),
    })
}

/// Equally spaced samples on the unit circle with the arc-length metric.
pub fn gen_circle<T: Scalar>(samples: usize) -> Result<FiniteMetricSpace<T>, SpaceError> {
    if samples < 3 {
        return Err(SpaceError::InvalidSpec("circle: samples must be >= 3".into()));
    }
    let n = samples;
    let two_pi = T::PI() + T::PI();
    let nn = T::from_usize(n).unwrap();
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            // arc step count, wrapped: identical k gives bit-identical d
            let k = (j - i).min(n - (j - i));
            let d = two_pi * T::from_usize(k).unwrap() / nn;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok(FiniteMetricSpace { n, dist, labels: None })
}

/// Save in the distance-matrix format: line 1 is `n`, then `n` comma-separated
/// rows, then optional `# i <label>` lines. Round trips bit-exactly.
pub fn save_space<T: Scalar>(space: &FiniteMetricSpace<T>, path: &Path) -> Result<(), SpaceError> {
    let mut out = String::new();
    out.push_str(&format!("{}\n", space.n));
    for i in 0..space.n {
        let row: Vec<String> = (0..space.n).map(|j| space.dist(i, j).format_full()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if let Some(labels) = &space.labels {
        for (i, label) in labels.iter().enumerate() {
            out.push_str(&format!("# {} {}\n", i, label));
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Load a distance-matrix file, validating all metric-space invariants.
pub fn load_space<T: Scalar>(path: &Path) -> Result<FiniteMetricSpace<T>, SpaceError> {
    let text = fs::read_to_string(path)?;
    parse_space(&text)
}

pub fn parse_space<T: Scalar>(text: &str) -> Result<FiniteMetricSpace<T>, SpaceError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(SpaceError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let n: usize = first.trim().parse().map_err(|_| SpaceError::Parse {
        line: 1,
        msg: format!("expected point count, got {first:?}"),
    })?;
    let mut dist = Vec::with_capacity(n * n);
    for row in 0..n {
        let (lineno, line) = lines.next().ok_or(SpaceError::Parse {
            line: row + 2,
            msg: "missing matrix row".into(),
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(SpaceError::Parse {
                line: lineno + 1,
                msg: format!("expected {n} entries, got {}", fields.len()),
            });
        }
        for field in fields {
            let v = T::parse_decimal(field).ok_or(SpaceError::Parse {
                line: lineno + 1,
                msg: format!("bad decimal {field:?}"),
            })?;
            dist.push(v);
        }
    }
    let mut labels: Vec<(usize, String)> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let rest = line.strip_prefix('#').ok_or(SpaceError::Parse {
            line: lineno + 1,
            msg: "unexpected trailing line".into(),
        })?;
        let rest = rest.trim_start();
        let (idx, label) = rest.split_once(' ').ok_or(SpaceError::Parse {
            line: lineno + 1,
            msg: "label line must be '# i <label>'".into(),
        })?;
        let idx: usize = idx.parse().map_err(|_| SpaceError::Parse {
            line: lineno + 1,
            msg: "bad label index".into(),
        })?;
        labels.push((idx, label.to_string()));
    }
    let labels = if labels.is_empty() {
        None
    } else {
        let mut ls = vec![String::new(); n];
        for (i, l) in labels {
            if i >= n {
                return Err(SpaceError::Parse {
                    line: 0,
                    msg: format!("label index {i} out of range"),
                });
            }
            ls[i] = l;
        }
        Some(ls)
    };
    FiniteMetricSpace::from_matrix(n, dist, labels, T::from_f64(LOAD_TRIANGLE_TOL).unwrap())
}

/// Witness returned when a space fails the R-uniformly-perfect check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfectWitness<T> {
    pub point: usize,
    pub radius: T,
}

/// Check R-uniform perfectness on the discrete radius set
/// `{distance values} ∩ (0, eps]`: every annulus `D_r(x) \ D_{r/R}(x)` must
/// be nonempty.
pub fn check_uniformly_perfect<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    r_const: T,
    eps: T,
) -> Result<Option<PerfectWitness<T>>, SpaceError> {
    if !(r_const >= T::one()) {
        return Err(SpaceError::InvalidSpec("uniformly perfect: R must be >= 1".into()));
    }
    if !(eps > T::zero()) {
        return Err(SpaceError::InvalidSpec("uniformly perfect: eps must be > 0".into()));
    }
    let mut radii: Vec<T> = space
        .distinct_distances()
        .into_iter()
        .filter(|&r| r <= eps)
        .collect();
    // eps itself is always tested, even when no distance value falls below it
    if radii.last() != Some(&eps) {
        radii.push(eps);
    }
    for x in 0..space.n() {
        for &r in &radii {
            let lo = r / r_const;
            let mut found = false;
            for y in 0..space.n() {
                let d = space.dist(x, y);
                if d > lo && d <= r {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(Some(PerfectWitness { point: x, radius: r }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = FiniteMetricSpace<f64>;

    #[test]
    fn cantor_single_coordinate() {
        let spec = CantorSpec::new(1, 2.0, 1).unwrap();
        let x = gen_cantor(&spec).unwrap();
        assert_eq!(x.n(), 2);
        assert_eq!(x.dist(0, 1), 1.0);
    }

    #[test]
    fn cantor_depth_two_ternary() {
        let spec = CantorSpec::new(2, 2.0, 2).unwrap();
        let x = gen_cantor(&spec).unwrap();
        assert_eq!(x.n(), 9);
        let labels = x.labels().unwrap();
        let find = |s: &str| labels.iter().position(|l| l == s).unwrap();
        assert_eq!(x.dist(find("00"), find("01")), 0.5);
        assert_eq!(x.dist(find("00"), find("10")), 1.0);
    }

    #[test]
    fn cantor_diameter_is_one() {
        for (n, depth) in [(1, 4), (2, 3), (3, 2)] {
            let x = gen_cantor(&CantorSpec::new(n, 2.0, depth).unwrap()).unwrap();
            assert_eq!(x.diameter(), 1.0);
        }
    }

    #[test]
    fn cantor_is_ultrametric() {
        // exhaustive for depth <= 4
        let x: FiniteMetricSpace<f64> = gen_cantor(&CantorSpec::new(1, 2.0, 4).unwrap()).unwrap();
        for i in 0..x.n() {
            for j in 0..x.n() {
                for k in 0..x.n() {
                    assert!(x.dist(i, k) <= x.dist(i, j).max(x.dist(j, k)));
                }
            }
        }
    }

    #[test]
    fn cantor_budget() {
        let spec = CantorSpec::new(2, 2.0, 12).unwrap();
        assert!(matches!(
            gen_cantor::<f64>(&spec),
            Err(SpaceError::PointBudget { .. })
        ));
    }

    #[test]
    fn circle_four_points() {
        let x: S = gen_circle(4).unwrap();
        let pi = std::f64::consts::PI;
        assert!((x.dist(0, 1) - pi / 2.0).abs() < 1e-15);
        assert!((x.dist(0, 2) - pi).abs() < 1e-15);
    }

    #[test]
    fn circle_three_points_equilateral() {
        let x: S = gen_circle(3).unwrap();
        let expect = 2.0 * std::f64::consts::PI / 3.0;
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((x.dist(i, j) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_min_distance() {
        let x: S = gen_circle(512).unwrap();
        let expect = 2.0 * std::f64::consts::PI / 512.0;
        assert!((x.min_positive_distance() - expect).abs() < 1e-15);
    }

    #[test]
    fn circle_rotation_invariance() {
        let x: S = gen_circle(12).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(x.dist(i, j), x.dist((i + 1) % 12, (j + 1) % 12));
            }
        }
    }

    #[test]
    fn round_trip_circle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("circle8.dm");
        let x: S = gen_circle(8).unwrap();
        save_space(&x, &path).unwrap();
        let y: S = load_space(&path).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn round_trip_cantor_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cantor.dm");
        let x = gen_cantor(&CantorSpec::new(2, 2.0, 2).unwrap()).unwrap();
        save_space(&x, &path).unwrap();
        let y: S = load_space(&path).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn triangle_violation_names_triple() {
        let text = "3\n0,1,5\n1,0,1\n5,1,0\n";
        match parse_space::<f64>(text) {
            Err(SpaceError::TriangleViolation { i, j, k }) => {
                assert_eq!((i.min(k), j), (0, 1));
                assert_eq!(i.max(k), 2);
            }
            other => panic!("expected triangle violation, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let text = "2\n0,1\n2,0\n";
        assert!(matches!(
            parse_space::<f64>(text),
            Err(SpaceError::Asymmetric { .. })
        ));
    }

    #[test]
    fn uniformly_perfect_cantor() {
        let x = gen_cantor(&CantorSpec::new(1, 2.0, 6).unwrap()).unwrap();
        let w = check_uniformly_perfect(&x, 2.0, 0.25).unwrap();
        assert!(w.is_none());
    }

    #[test]
    fn two_point_space_not_uniformly_perfect() {
        let x = gen_cantor(&CantorSpec::new(1, 2.0, 1).unwrap()).unwrap();
        let w = check_uniformly_perfect(&x, 1.5, 0.5).unwrap();
        assert!(w.is_some());
    }

    #[test]
    fn circle_uniformly_perfect() {
        let x: S = gen_circle(64).unwrap();
        let w = check_uniformly_perfect(&x, 2.0, 0.1).unwrap();
        assert!(w.is_none());
    }
}
