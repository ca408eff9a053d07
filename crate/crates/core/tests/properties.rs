//! Randomized invariants over small line spaces with random supports and
//! deformed spectra: closure laws, distance comparisons, eigenvalue-count
//! monotonicity, and file round trips.

use std::sync::Arc;

use proptest::prelude::*;
use specgeom::connes::{connes_metric_on_y, load_metric, save_metric};
use specgeom::deformation::{
    compact_open_distance, load_spectrum, regularize, save_spectrum, uniform_distance,
    MarkedSpectrum,
};
use specgeom::geometry::{commutator_norm, dim_e, lipschitz_constant, SpectralGeometry};
use specgeom::spaces::{load_space, save_space, FiniteMetricSpace};
use specgeom::support::{load_support, save_support, SupportSet};

/// Points on a line from positive gaps; the induced metric is |x_i - x_j|.
fn line_space(gaps: &[f64]) -> Arc<FiniteMetricSpace<f64>> {
    let mut coords = vec![0.0f64];
    let mut acc = 0.0;
    for &g in gaps {
        acc += g;
        coords.push(acc);
    }
    let n = coords.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = (coords[i] - coords[j]).abs();
        }
    }
    Arc::new(FiniteMetricSpace::from_matrix(n, dist, None, 1e-12).unwrap())
}

/// Support = spanning path plus a random extra subset of pairs, so the
/// incidence graph is always connected.
fn random_support(
    space: &FiniteMetricSpace<f64>,
    extra_mask: &[bool],
) -> SupportSet<f64> {
    let n = space.n();
    let mut pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let mut k = 0;
    for i in 0..n {
        for j in (i + 2)..n {
            if extra_mask.get(k).copied().unwrap_or(false) {
                pairs.push((i, j));
            }
            k += 1;
        }
    }
    SupportSet::from_unordered_pairs(space, pairs).unwrap()
}

fn deformed(support: &SupportSet<f64>, factors: &[f64]) -> MarkedSpectrum<f64> {
    let values = support
        .base_lens()
        .iter()
        .enumerate()
        .map(|(idx, &b)| b * factors[idx % factors.len()])
        .collect();
    MarkedSpectrum::from_values(support, values).unwrap()
}

prop_compose! {
    fn geometry_input()(
        gaps in prop::collection::vec(0.05f64..1.0, 2..=6),
        extra_mask in prop::collection::vec(any::<bool>(), 15),
        factors in prop::collection::vec(0.5f64..2.0, 1..=8),
    ) -> (Arc<FiniteMetricSpace<f64>>, SupportSet<f64>, MarkedSpectrum<f64>) {
        let x = line_space(&gaps);
        let b = random_support(&x, &extra_mask);
        let rho = deformed(&b, &factors);
        (x, b, rho)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularize_is_idempotent((_x, b, rho) in geometry_input()) {
        let once = regularize(&b, &rho).unwrap();
        let twice = regularize(&b, &once).unwrap();
        // path sums re-associate across passes, so allow ulp-level slack
        for idx in 0..b.len() {
            let (a, c) = (once.value(idx), twice.value(idx));
            prop_assert!((a - c).abs() <= 1e-13 * a.max(1.0));
        }
    }

    #[test]
    fn regularize_is_nonincreasing((_x, b, rho) in geometry_input()) {
        let reg = regularize(&b, &rho).unwrap();
        for idx in 0..b.len() {
            prop_assert!(reg.value(idx) <= rho.value(idx));
            prop_assert!(reg.value(idx) > 0.0);
        }
    }

    #[test]
    fn regularize_commutes_with_scaling(
        (_x, b, rho) in geometry_input(),
        lambda in 0.1f64..10.0,
    ) {
        let scaled = MarkedSpectrum::from_values(
            &b,
            rho.values().iter().map(|&v| lambda * v).collect(),
        ).unwrap();
        let a = regularize(&b, &scaled).unwrap();
        let c = regularize(&b, &rho).unwrap();
        for idx in 0..b.len() {
            let want = lambda * c.value(idx);
            prop_assert!((a.value(idx) - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn regularize_preserves_pointwise_order((_x, b, rho) in geometry_input()) {
        // rho2 = pointwise larger deformation of rho
        let bigger = MarkedSpectrum::from_values(
            &b,
            rho.values().iter().enumerate()
                .map(|(i, &v)| v * (1.0 + 0.5 * ((i % 3) as f64)))
                .collect(),
        ).unwrap();
        let r1 = regularize(&b, &rho).unwrap();
        let r2 = regularize(&b, &bigger).unwrap();
        for idx in 0..b.len() {
            prop_assert!(r1.value(idx) <= r2.value(idx) + 1e-15);
        }
    }

    #[test]
    fn commutator_bounded_by_lipschitz(
        gaps in prop::collection::vec(0.05f64..1.0, 2..=6),
        extra_mask in prop::collection::vec(any::<bool>(), 15),
        values in prop::collection::vec(-5.0f64..5.0, 7),
    ) {
        // base spectrum: rho = d(i,j), so |a_i - a_j|/rho <= Lip(a)
        let x = line_space(&gaps);
        let b = random_support(&x, &extra_mask);
        let a: Vec<f64> = values[..x.n()].to_vec();
        let g = SpectralGeometry::new(Arc::clone(&x), b);
        let cn = commutator_norm(&g, &a).unwrap();
        let lip = lipschitz_constant(&x, &a).unwrap();
        prop_assert!(cn <= lip * (1.0 + 1e-12));
    }

    #[test]
    fn uniform_dominates_compact_open((_x, b, rho) in geometry_input()) {
        let base = MarkedSpectrum::base(&b);
        let uni = uniform_distance(&b, &rho, &base).unwrap();
        for t in [b.min_len().unwrap(), b.max_len().unwrap()] {
            let co = compact_open_distance(&b, &rho, &base, t).unwrap();
            prop_assert!(co <= uni * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dim_e_is_nonincreasing_in_t((x, b, rho) in geometry_input()) {
        let g = SpectralGeometry::with_spectrum(x, b, rho).unwrap();
        let mut ts: Vec<f64> = g.spectrum().values().to_vec();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let counts: Vec<usize> = ts.iter().map(|&t| dim_e(&g, t)).collect();
        for w in counts.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert_eq!(counts[0], 2 * g.support().len());
    }

    #[test]
    fn connes_metric_below_rho_on_pairs((x, b, rho) in geometry_input()) {
        let g = SpectralGeometry::with_spectrum(x, b, rho).unwrap();
        let m = connes_metric_on_y(&g).unwrap();
        for (idx, &(i, j)) in g.support().pairs().iter().enumerate() {
            let a = m.local_index(i).unwrap();
            let c = m.local_index(j).unwrap();
            prop_assert!(m.get(a, c) <= g.spectrum().value(idx) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn file_round_trips((x, b, rho) in geometry_input()) {
        let dir = tempfile::tempdir().unwrap();
        let sp = dir.path().join("space.csv");
        save_space(&x, &sp).unwrap();
        let x2: FiniteMetricSpace<f64> = load_space(&sp).unwrap();
        prop_assert_eq!(x2.n(), x.n());
        for i in 0..x.n() {
            for j in 0..x.n() {
                prop_assert_eq!(x2.dist(i, j), x.dist(i, j));
            }
        }

        let bp = dir.path().join("support.csv");
        save_support(&b, &bp).unwrap();
        let b2: SupportSet<f64> = load_support(&bp).unwrap();
        prop_assert_eq!(&b2, &b);

        let rp = dir.path().join("spectrum.csv");
        save_spectrum(&b, &rho, &rp).unwrap();
        let rho2 = load_spectrum(&b, &rp).unwrap();
        prop_assert_eq!(&rho2, &rho);

        let g = SpectralGeometry::with_spectrum(x, b, rho).unwrap();
        let m = connes_metric_on_y(&g).unwrap();
        let mp = dir.path().join("metric.csv");
        save_metric(&m, &mp).unwrap();
        let m2: specgeom::Metric = load_metric(&mp).unwrap();
        prop_assert_eq!(&m2.points, &m.points);
        for a in 0..m.points.len() {
            for c in 0..m.points.len() {
                prop_assert_eq!(m2.get(a, c), m.get(a, c));
            }
        }
    }
}
