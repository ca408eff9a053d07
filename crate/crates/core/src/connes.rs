//! Connes metrics of (deformed) spectral geometries: exact shortest-path
//! computation on the support projection Y, an independent label-correcting
//! oracle for the dual formulation, two-sided brackets for general points,
//! and distances between metrics.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::SpectralGeometry;
use crate::scalar::Scalar;
use crate::support::{incidence_graph, SupportError};

#[derive(Debug, Error)]
pub enum ConnesError {
    #[error("point {0} is not in the support projection")]
    NotInProjection(usize),
    #[error("bounds require density > 2 (got {0})")]
    DensityTooLow(String),
    #[error("points must differ")]
    SamePoint,
    #[error("metrics live on different point sets")]
    PointSetMismatch,
    #[error("infinite entry in exactly one metric at ({i},{j}): incomparable")]
    Incomparable { i: usize, j: usize },
    #[error("nonpositive off-diagonal entry at ({i},{j})")]
    NonpositiveEntry { i: usize, j: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Support(#[from] SupportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric distance matrix on an index subset of the ground space; +inf
/// marks pairs in different components. `connected` is false iff any +inf
/// entry is present.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOnSubset<T> {
    /// Original point indices, sorted ascending.
    pub points: Vec<usize>,
    d: Vec<T>,
    pub connected: bool,
}

impl<T: Scalar> MetricOnSubset<T> {
    pub fn from_matrix(points: Vec<usize>, d: Vec<T>) -> Self {
        let connected = d.iter().all(|v| v.is_finite());
        MetricOnSubset { points, d, connected }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Entry by local indices.
    pub fn get(&self, a: usize, b: usize) -> T {
        self.d[a * self.points.len() + b]
    }

    pub fn local_index(&self, original: usize) -> Option<usize> {
        self.points.binary_search(&original).ok()
    }
}

/// All-pairs shortest-path metric of the level-t incidence graph (rho-bar_t).
pub fn graph_metric<T: Scalar>(
    geometry: &SpectralGeometry<T>,
    t: T,
) -> Result<MetricOnSubset<T>, ConnesError> {
    let graph = incidence_graph(geometry.support(), geometry.spectrum(), t)?;
    let n = graph.vertices.len();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|src| graph.dijkstra(src))
        .collect();
    let mut d = Vec::with_capacity(n * n);
    for row in rows {
        d.extend(row);
    }
    Ok(MetricOnSubset::from_matrix(graph.vertices, d))
}

/// Level below every edge length, so the incidence graph carries all of B.
fn all_edges_level<T: Scalar>(geometry: &SpectralGeometry<T>) -> T {
    let min_base = geometry.support().min_len().unwrap_or(T::one());
    let min_rho = geometry.spectrum().min_value().unwrap_or(T::one());
    let margin = T::one() - T::from_f64(1e-9).unwrap();
    min_base.min(min_rho) * margin
}

/// The Connes metric restricted to Y: graph metric with every support edge
/// included (the t -> 0 limit is attained on a finite support). Disconnected
/// supports yield +inf entries with `connected = false`.
pub fn connes_metric_on_y<T: Scalar>(
    geometry: &SpectralGeometry<T>,
) -> Result<MetricOnSubset<T>, ConnesError> {
    graph_metric(geometry, all_edges_level(geometry))
}

/// Dual formulation oracle: sup a(y) - a(y') subject to
/// |a(u) - a(v)| <= rho(u, v) on B, solved by Bellman-Ford label correction
/// (independent of the Dijkstra used by `graph_metric`). +inf when y, y'
/// lie in different components.
pub fn connes_oracle<T: Scalar>(
    geometry: &SpectralGeometry<T>,
    y: usize,
    y2: usize,
) -> Result<T, ConnesError> {
    let (vertices, row) = connes_oracle_from(geometry, y2)?;
    let dst = vertices
        .binary_search(&y)
        .map_err(|_| ConnesError::NotInProjection(y))?;
    Ok(row[dst])
}

/// One relaxation run gives the whole oracle row: sup a(y) - a(y2) for every
/// y in the projection (returned alongside the sorted projection indices).
pub fn connes_oracle_from<T: Scalar>(
    geometry: &SpectralGeometry<T>,
    y2: usize,
) -> Result<(Vec<usize>, Vec<T>), ConnesError> {
    let support = geometry.support();
    let vertices = support.projection();
    let src = vertices
        .binary_search(&y2)
        .map_err(|_| ConnesError::NotInProjection(y2))?;
    // the tight feasible a fixing a(y') = 0 is a(u) = shortest-path distance
    // from u to y'; iterate relaxations to the fixed point
    let n = vertices.len();
    let edges: Vec<(usize, usize, T)> = support
        .pairs()
        .iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            (
                vertices.binary_search(&i).unwrap(),
                vertices.binary_search(&j).unwrap(),
                geometry.spectrum().value(idx),
            )
        })
        .collect();
    let mut dist = vec![T::infinity(); n];
    dist[src] = T::zero();
    loop {
        let mut changed = false;
        for &(u, v, w) in &edges {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                changed = true;
            }
            if dist[v] + w < dist[u] {
                dist[u] = dist[v] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((vertices, dist))
}

/// Certified bracket for the Connes distance of arbitrary points by the
/// density bound: (dist, dist * (D+2)/(D-2)).
pub fn bound_interval<T: Scalar>(
    geometry: &SpectralGeometry<T>,
    x: usize,
    x2: usize,
    d_measured: T,
) -> Result<(T, T), ConnesError> {
    let two = T::one() + T::one();
    if !(d_measured > two) {
        return Err(ConnesError::DensityTooLow(format!("{d_measured}")));
    }
    if x == x2 {
        return Err(ConnesError::SamePoint);
    }
    let dist = geometry.space().dist(x, x2);
    Ok((dist, dist * (d_measured + two) / (d_measured - two)))
}

/// Lipschitz distance sup |ln(d2/d1)| over off-diagonal pairs. Entries
/// infinite in both metrics are skipped; infinite in exactly one is an error.
pub fn lipschitz_distance<T: Scalar>(
    d1: &MetricOnSubset<T>,
    d2: &MetricOnSubset<T>,
) -> Result<T, ConnesError> {
    if d1.points != d2.points {
        return Err(ConnesError::PointSetMismatch);
    }
    let n = d1.n();
    let mut out = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (d1.get(i, j), d2.get(i, j));
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    if !(a > T::zero()) || !(b > T::zero()) {
                        return Err(ConnesError::NonpositiveEntry { i, j });
                    }
                    let v = (b / a).ln().abs();
                    if v > out {
                        out = v;
                    }
                }
                (false, false) => {}
                _ => return Err(ConnesError::Incomparable { i, j }),
            }
        }
    }
    Ok(out)
}

/// Uniform distance max |d1 - d2|; +inf entries must match in location.
pub fn uniform_metric_distance<T: Scalar>(
    d1: &MetricOnSubset<T>,
    d2: &MetricOnSubset<T>,
) -> Result<T, ConnesError> {
    if d1.points != d2.points {
        return Err(ConnesError::PointSetMismatch);
    }
    let n = d1.n();
    let mut out = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (d1.get(i, j), d2.get(i, j));
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    let v = (a - b).abs();
                    if v > out {
                        out = v;
                    }
                }
                (false, false) => {}
                _ => return Err(ConnesError::Incomparable { i, j }),
            }
        }
    }
    Ok(out)
}

/// Metric export: `#subset` header listing original indices, then the
/// distance-matrix layout (count line, comma rows); +inf written as "inf".
pub fn save_metric<T: Scalar>(metric: &MetricOnSubset<T>, path: &Path) -> Result<(), ConnesError> {
    let mut out = String::from("#subset");
    for &p in &metric.points {
        out.push_str(&format!(" {p}"));
    }
    out.push('\n');
    let n = metric.n();
    out.push_str(&format!("{n}\n"));
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| metric.get(i, j).format_full()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_metric<T: Scalar>(path: &Path) -> Result<MetricOnSubset<T>, ConnesError> {
    let text = fs::read_to_string(path)?;
    parse_metric(&text)
}

pub fn parse_metric<T: Scalar>(text: &str) -> Result<MetricOnSubset<T>, ConnesError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ConnesError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let rest = header.strip_prefix("#subset").ok_or(ConnesError::Parse {
        line: 1,
        msg: "expected '#subset' header".into(),
    })?;
    let points: Vec<usize> = rest
        .split_whitespace()
        .map(|s| {
            s.parse().map_err(|_| ConnesError::Parse {
                line: 1,
                msg: format!("bad index '{s}'"),
            })
        })
        .collect::<Result<_, _>>()?;
    let (lineno, count_line) = lines.next().ok_or(ConnesError::Parse {
        line: 2,
        msg: "missing count line".into(),
    })?;
    let n: usize = count_line.trim().parse().map_err(|_| ConnesError::Parse {
        line: lineno + 1,
        msg: "bad point count".into(),
    })?;
    if n != points.len() {
        return Err(ConnesError::Parse {
            line: lineno + 1,
            msg: format!("count {n} != {} subset indices", points.len()),
        });
    }
    let mut d = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (lineno, row) = lines.next().ok_or(ConnesError::Parse {
            line: 0,
            msg: "missing matrix row".into(),
        })?;
        for cell in row.split(',') {
            let v = T::parse_decimal(cell).ok_or(ConnesError::Parse {
                line: lineno + 1,
                msg: format!("bad value '{cell}'"),
            })?;
            d.push(v);
        }
    }
    if d.len() != n * n {
        return Err(ConnesError::Parse {
            line: 0,
            msg: format!("expected {} entries, got {}", n * n, d.len()),
        });
    }
    Ok(MetricOnSubset::from_matrix(points, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::deformation::MarkedSpectrum;
    use crate::spaces::{gen_cantor, CantorSpec, FiniteMetricSpace};
    use crate::support::{
        brute_density, build_multiscale_support, complete_support, DensityTarget, SupportSet,
    };

    fn collinear3() -> Arc<FiniteMetricSpace<f64>> {
        Arc::new(
            FiniteMetricSpace::from_matrix(
                3,
                vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0],
                None,
                0.0,
            )
            .unwrap(),
        )
    }

    fn path_geometry() -> SpectralGeometry<f64> {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (1, 2)]).unwrap();
        SpectralGeometry::new(x, b)
    }

    fn triangle_geometry() -> SpectralGeometry<f64> {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let rho =
            MarkedSpectrum::from_values(&b, vec![1.0, 3.0, 1.0]).unwrap();
        SpectralGeometry::with_spectrum(x, b, rho).unwrap()
    }

    #[test]
    fn path_metric() {
        let g = path_geometry();
        let m = connes_metric_on_y(&g).unwrap();
        assert!(m.connected);
        let d02 = m.get(m.local_index(0).unwrap(), m.local_index(2).unwrap());
        assert_eq!(d02, 2.0);
    }

    #[test]
    fn triangle_detour_beats_direct_edge() {
        let g = triangle_geometry();
        let m = connes_metric_on_y(&g).unwrap();
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(connes_oracle(&g, 0, 2).unwrap(), 2.0);
    }

    #[test]
    fn oracle_single_edge() {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1)]).unwrap();
        let rho = MarkedSpectrum::from_values(&b, vec![5.0]).unwrap();
        let g = SpectralGeometry::with_spectrum(x, b, rho).unwrap();
        assert_eq!(connes_oracle(&g, 0, 1).unwrap(), 5.0);
        assert_eq!(connes_oracle(&g, 1, 0).unwrap(), 5.0);
    }

    #[test]
    fn oracle_matches_graph_metric_on_fixtures() {
        for g in [path_geometry(), triangle_geometry()] {
            let m = connes_metric_on_y(&g).unwrap();
            for (a, &ya) in m.points.iter().enumerate() {
                for (b, &yb) in m.points.iter().enumerate() {
                    let oracle = connes_oracle(&g, ya, yb).unwrap();
                    let gm = m.get(a, b);
                    assert!((oracle - gm).abs() <= 1e-9 * gm.max(1.0));
                }
            }
        }
    }

    #[test]
    fn complete_support_reproduces_input_metric() {
        let x = Arc::new(gen_cantor(&CantorSpec::new(1, 2.0, 3).unwrap()).unwrap());
        let b = complete_support(&x).unwrap();
        let g = SpectralGeometry::new(Arc::clone(&x), b);
        let m = connes_metric_on_y(&g).unwrap();
        for a in 0..x.n() {
            for c in 0..x.n() {
                assert_eq!(m.get(a, c), x.dist(a, c));
            }
        }
    }

    #[test]
    fn scaled_spectrum_scales_metric() {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (1, 2)]).unwrap();
        let g1 = SpectralGeometry::new(Arc::clone(&x), b.clone());
        let rho2 = MarkedSpectrum::scaled(&b, 2.0);
        let g2 = SpectralGeometry::with_spectrum(x, b, rho2).unwrap();
        let m1 = connes_metric_on_y(&g1).unwrap();
        let m2 = connes_metric_on_y(&g2).unwrap();
        for i in 0..m1.n() {
            for j in 0..m1.n() {
                assert_eq!(m2.get(i, j), 2.0 * m1.get(i, j));
            }
        }
        assert_eq!(lipschitz_distance(&m1, &m2).unwrap(), 2.0f64.ln());
        assert_eq!(lipschitz_distance(&m1, &m1).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_support_flags() {
        // two separate edges on a 4-point space
        let x = Arc::new(
            FiniteMetricSpace::from_matrix(
                4,
                vec![
                    0.0, 1.0, 2.0, 3.0, //
                    1.0, 0.0, 1.0, 2.0, //
                    2.0, 1.0, 0.0, 1.0, //
                    3.0, 2.0, 1.0, 0.0,
                ],
                None,
                0.0,
            )
            .unwrap(),
        );
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (2, 3)]).unwrap();
        let g = SpectralGeometry::new(x, b);
        let m = connes_metric_on_y(&g).unwrap();
        assert!(!m.connected);
        let (a, c) = (m.local_index(0).unwrap(), m.local_index(2).unwrap());
        assert_eq!(m.get(a, c), f64::INFINITY);
        assert_eq!(connes_oracle(&g, 0, 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sandwich_on_multiscale_cantor() {
        let x: Arc<FiniteMetricSpace<f64>> =
            Arc::new(gen_cantor(&CantorSpec::new(1, 2.0, 4).unwrap()).unwrap());
        let ms = build_multiscale_support(&x, DensityTarget::Finite(4.0), None).unwrap();
        let d = brute_density(&x, &ms.support).unwrap();
        assert!(d > 2.0);
        let g = SpectralGeometry::new(Arc::clone(&x), ms.support.clone());
        let m = connes_metric_on_y(&g).unwrap();
        // (D+2)/(D-2) -> 1 as the measured density grows without bound
        let factor = if d.is_finite() { (d + 2.0) / (d - 2.0) } else { 1.0 };
        for (a, &ya) in m.points.iter().enumerate() {
            for (b, &yb) in m.points.iter().enumerate() {
                if a == b {
                    continue;
                }
                let lower = x.dist(ya, yb);
                let got = m.get(a, b);
                assert!(got >= lower - 1e-12);
                assert!(
                    got <= factor * lower + 1e-12,
                    "d={d} y=({ya},{yb}) dist={lower} d_M={got} factor={factor}"
                );
            }
        }
        // edge exactness
        for (idx, &(i, j)) in ms.support.pairs().iter().enumerate() {
            let got = m.get(m.local_index(i).unwrap(), m.local_index(j).unwrap());
            assert!((got - ms.support.base_len(idx)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bound_interval_cases() {
        let g = path_geometry();
        let (lo, hi) = bound_interval(&g, 0, 2, 6.0).unwrap();
        assert_eq!(lo, 2.0);
        assert_eq!(hi, 4.0);
        assert!(matches!(
            bound_interval(&g, 0, 2, 2.0),
            Err(ConnesError::DensityTooLow(_))
        ));
    }

    #[test]
    fn uniform_metric_distance_cases() {
        let g = path_geometry();
        let m = connes_metric_on_y(&g).unwrap();
        assert_eq!(uniform_metric_distance(&m, &m).unwrap(), 0.0);
        let mut shifted = m.clone();
        let n = shifted.n();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    shifted.d[i * n + j] += 0.1;
                }
            }
        }
        let got = uniform_metric_distance(&m, &shifted).unwrap();
        assert!((got - 0.1).abs() < 1e-15);
    }

    #[test]
    fn metric_round_trip_including_inf() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.metric");
        let m = MetricOnSubset::from_matrix(
            vec![1, 4],
            vec![0.0, f64::INFINITY, f64::INFINITY, 0.0],
        );
        save_metric(&m, &path).unwrap();
        let back: MetricOnSubset<f64> = load_metric(&path).unwrap();
        assert_eq!(m, back);
        assert!(!back.connected);
    }
}
