//! Marked spectra of bounded deformations: validation, regularization,
//! the simple-regular perturbation algorithm, and topology monitors.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::support::{incidence_graph, SupportError, SupportSet};

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("spectrum has {got} values but support has {want} pairs")]
    LengthMismatch { got: usize, want: usize },
    #[error("nonpositive spectrum value at pair index {0}")]
    Nonpositive(usize),
    #[error("no support pair with base length >= {0}")]
    EmptyLevel(String),
    #[error("spectrum is not regular; regularize first")]
    NotRegular,
    #[error("h must lie in (0,1), got {0}")]
    BadH(String),
    #[error("p must be positive, got {0}")]
    BadP(String),
    #[error("weight vector has {got} entries, expected {want}")]
    WeightMismatch { got: usize, want: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("spectrum file pair ({i},{j}) not in support")]
    UnknownPair { i: usize, j: usize },
    #[error("spectrum file missing value for pair ({i},{j})")]
    MissingPair { i: usize, j: usize },
    #[error(transparent)]
    Support(#[from] SupportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric positive edge lengths on a support, stored per unordered pair
/// in the support's pair order. Both orientations share the value, so
/// symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSpectrum<T> {
    values: Vec<T>,
}

impl<T: Scalar> MarkedSpectrum<T> {
    /// The undeformed spectrum: rho = base lengths.
    pub fn base(support: &SupportSet<T>) -> Self {
        MarkedSpectrum {
            values: support.base_lens().to_vec(),
        }
    }

    /// rho = lambda * base lengths.
    pub fn scaled(support: &SupportSet<T>, lambda: T) -> Self {
        MarkedSpectrum {
            values: support.base_lens().iter().map(|&v| lambda * v).collect(),
        }
    }

    /// Explicit values aligned with the support's pair order.
    pub fn from_values(support: &SupportSet<T>, values: Vec<T>) -> Result<Self, DeformError> {
        if values.len() != support.len() {
            return Err(DeformError::LengthMismatch {
                got: values.len(),
                want: support.len(),
            });
        }
        if let Some(idx) = values.iter().position(|&v| !(v > T::zero())) {
            return Err(DeformError::Nonpositive(idx));
        }
        Ok(MarkedSpectrum { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, pair_idx: usize) -> T {
        self.values[pair_idx]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn min_value(&self) -> Option<T> {
        self.values
            .iter()
            .copied()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

fn check_aligned<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
) -> Result<(), DeformError> {
    if spectrum.len() != support.len() {
        return Err(DeformError::LengthMismatch {
            got: spectrum.len(),
            want: support.len(),
        });
    }
    Ok(())
}

/// Tight boundedness constants: c = min rho/base, C = max rho/base.
pub fn validate_bounded<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
) -> Result<(T, T), DeformError> {
    check_aligned(support, spectrum)?;
    let mut c = T::infinity();
    let mut cc = T::neg_infinity();
    for idx in 0..support.len() {
        let v = spectrum.value(idx);
        if !(v > T::zero()) {
            return Err(DeformError::Nonpositive(idx));
        }
        let ratio = v / support.base_len(idx);
        if ratio < c {
            c = ratio;
        }
        if ratio > cc {
            cc = ratio;
        }
    }
    Ok((c, cc))
}

/// Shortest-path closure: each rho(b) replaced by the graph distance between
/// b's endpoints in the all-edges incidence graph. Idempotent; pointwise
/// nonincreasing (the direct edge is itself a path).
pub fn regularize<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
) -> Result<MarkedSpectrum<T>, DeformError> {
    check_aligned(support, spectrum)?;
    if support.is_empty() {
        return Ok(spectrum.clone());
    }
    let t_all = support.min_len().unwrap();
    let graph = incidence_graph(support, spectrum, t_all)?;
    let mut dist_from = vec![None; graph.vertices.len()];
    let mut values = Vec::with_capacity(support.len());
    for &(i, j) in support.pairs().iter() {
        let u = graph.local_index(i).unwrap();
        let v = graph.local_index(j).unwrap();
        if dist_from[u].is_none() {
            dist_from[u] = Some(graph.dijkstra(u));
        }
        let d = dist_from[u].as_ref().unwrap()[v];
        values.push(d);
    }
    Ok(MarkedSpectrum { values })
}

/// True iff rho equals its shortest-path closure exactly.
pub fn is_regular<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
) -> Result<bool, DeformError> {
    let reg = regularize(support, spectrum)?;
    Ok(reg.values == spectrum.values)
}

/// True iff values on distinct unordered pairs are pairwise distinct
/// (exact comparison).
pub fn is_simple<T: Scalar>(spectrum: &MarkedSpectrum<T>) -> bool {
    let mut v = spectrum.values.clone();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.windows(2).all(|w| w[0] != w[1])
}

/// Output of [`perturb_simple_regular`]: the perturbed spectrum, the pair
/// indices in processing order (rho nonincreasing, ties by index), and the
/// epsilon sequence in that order.
#[derive(Debug, Clone)]
pub struct Perturbation<T> {
    pub spectrum: MarkedSpectrum<T>,
    pub order: Vec<usize>,
    pub epsilons: Vec<T>,
}

/// Approximate a regular spectrum by a simple regular one: process pairs in
/// rho-nonincreasing order, subtract `h * eps_i` with
/// `eps_i = min(rho^2 / (2(1+rho)), gap/2, eps_{i-1}/3)` where `gap` is the
/// distance to the next smaller distinct rho value (infinite if none).
/// The geometric 1/3 decay keeps the tail sum below each eps, so the output
/// stays regular and simple, and `sup |1/rho_h - 1/rho| < h`.
pub fn perturb_simple_regular<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
    h: T,
) -> Result<Perturbation<T>, DeformError> {
    check_aligned(support, spectrum)?;
    if !(h > T::zero() && h < T::one()) {
        return Err(DeformError::BadH(format!("{h}")));
    }
    if !is_regular(support, spectrum)? {
        return Err(DeformError::NotRegular);
    }
    let two = T::one() + T::one();
    let three = two + T::one();
    let mut order: Vec<usize> = (0..spectrum.len()).collect();
    order.sort_by(|&a, &b| {
        spectrum
            .value(b)
            .partial_cmp(&spectrum.value(a))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut values = spectrum.values.clone();
    let mut epsilons = Vec::with_capacity(order.len());
    let mut prev_eps = T::infinity();
    for (pos, &idx) in order.iter().enumerate() {
        let rho = spectrum.value(idx);
        // gap to the next smaller distinct value past this tie group
        let gap = order[pos + 1..]
            .iter()
            .map(|&k| spectrum.value(k))
            .find(|&v| v < rho)
            .map(|v| rho - v)
            .unwrap_or(T::infinity());
        let cap1 = rho * rho / (two * (T::one() + rho));
        let eps = cap1.min(gap / two).min(prev_eps / three);
        values[idx] = rho - h * eps;
        epsilons.push(eps);
        prev_eps = eps;
    }
    Ok(Perturbation {
        spectrum: MarkedSpectrum { values },
        order,
        epsilons,
    })
}

/// Max of |1/rho1 - 1/rho2| over pairs of base length >= t.
pub fn compact_open_distance<T: Scalar>(
    support: &SupportSet<T>,
    s1: &MarkedSpectrum<T>,
    s2: &MarkedSpectrum<T>,
    t: T,
) -> Result<T, DeformError> {
    check_aligned(support, s1)?;
    check_aligned(support, s2)?;
    let level = support.level_indices(t);
    if level.is_empty() {
        return Err(DeformError::EmptyLevel(format!("{t}")));
    }
    let mut out = T::zero();
    for idx in level {
        let d = (T::one() / s1.value(idx) - T::one() / s2.value(idx)).abs();
        if d > out {
            out = d;
        }
    }
    Ok(out)
}

/// Max of |1/rho1 - 1/rho2| over all support pairs.
pub fn uniform_distance<T: Scalar>(
    support: &SupportSet<T>,
    s1: &MarkedSpectrum<T>,
    s2: &MarkedSpectrum<T>,
) -> Result<T, DeformError> {
    check_aligned(support, s1)?;
    check_aligned(support, s2)?;
    let mut out = T::zero();
    for idx in 0..support.len() {
        let d = (T::one() / s1.value(idx) - T::one() / s2.value(idx)).abs();
        if d > out {
            out = d;
        }
    }
    Ok(out)
}

/// Weighted sum over ordered pairs of |1/rho1 - 1/rho2| * xi^p.
/// Default weights xi(b) = rho2(b).
pub fn weak_lp_distance<T: Scalar>(
    support: &SupportSet<T>,
    s1: &MarkedSpectrum<T>,
    s2: &MarkedSpectrum<T>,
    p: T,
    xi: Option<&[T]>,
) -> Result<T, DeformError> {
    check_aligned(support, s1)?;
    check_aligned(support, s2)?;
    if !(p > T::zero()) {
        return Err(DeformError::BadP(format!("{p}")));
    }
    if let Some(w) = xi {
        if w.len() != support.len() {
            return Err(DeformError::WeightMismatch {
                got: w.len(),
                want: support.len(),
            });
        }
    }
    let two = T::one() + T::one();
    let mut sum = T::zero();
    for idx in 0..support.len() {
        let d = (T::one() / s1.value(idx) - T::one() / s2.value(idx)).abs();
        let w = match xi {
            Some(w) => w[idx],
            None => s2.value(idx),
        };
        // both orientations contribute
        sum = sum + two * d * w.powf(p);
    }
    Ok(sum)
}

/// Spectrum file: header `#spectrum`, then `i,j,rho` over unordered pairs
/// (i < j); the loader symmetrizes by aligning to the support's pair order.
pub fn save_spectrum<T: Scalar>(
    support: &SupportSet<T>,
    spectrum: &MarkedSpectrum<T>,
    path: &Path,
) -> Result<(), DeformError> {
    check_aligned(support, spectrum)?;
    let mut out = String::from("#spectrum\n");
    for (idx, &(i, j)) in support.pairs().iter().enumerate() {
        let v = spectrum.value(idx).format_full();
        out.push_str(&format!("{i},{j},{v}\n"));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_spectrum<T: Scalar>(
    support: &SupportSet<T>,
    path: &Path,
) -> Result<MarkedSpectrum<T>, DeformError> {
    let text = fs::read_to_string(path)?;
    parse_spectrum(support, &text)
}

pub fn parse_spectrum<T: Scalar>(
    support: &SupportSet<T>,
    text: &str,
) -> Result<MarkedSpectrum<T>, DeformError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "#spectrum" => {}
        _ => {
            return Err(DeformError::Parse {
                line: 1,
                msg: "expected header '#spectrum'".into(),
            })
        }
    }
    let mut values: Vec<Option<T>> = vec![None; support.len()];
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let bad = || DeformError::Parse {
            line: lineno + 1,
            msg: "expected 'i,j,rho'".into(),
        };
        let i: usize = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let j: usize = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let v = it.next().and_then(T::parse_decimal).ok_or_else(bad)?;
        let idx = support
            .find(i, j)
            .ok_or(DeformError::UnknownPair { i, j })?;
        values[idx] = Some(v);
    }
    for (idx, v) in values.iter().enumerate() {
        if v.is_none() {
            let (i, j) = support.pairs()[idx];
            return Err(DeformError::MissingPair { i, j });
        }
    }
    MarkedSpectrum::from_values(support, values.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::FiniteMetricSpace;

    fn collinear3() -> FiniteMetricSpace<f64> {
        FiniteMetricSpace::from_matrix(
            3,
            vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0],
            None,
            0.0,
        )
        .unwrap()
    }

    // triangle with a slack long edge: rho = (1, 3, 1) on (0,1),(0,2),(1,2)
    fn triangle() -> (FiniteMetricSpace<f64>, SupportSet<f64>, MarkedSpectrum<f64>) {
        let x = FiniteMetricSpace::from_matrix(
            3,
            vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0],
            None,
            0.0,
        )
        .unwrap();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let rho = MarkedSpectrum::from_values(&b, vec![1.0, 3.0, 1.0]).unwrap();
        (x, b, rho)
    }

    #[test]
    fn validate_bounded_cases() {
        let (_, b, _) = triangle();
        let base = MarkedSpectrum::base(&b);
        assert_eq!(validate_bounded(&b, &base).unwrap(), (1.0, 1.0));
        let tripled = MarkedSpectrum::scaled(&b, 3.0);
        assert_eq!(validate_bounded(&b, &tripled).unwrap(), (3.0, 3.0));
        let mut v = base.values().to_vec();
        v[0] *= 2.0;
        let bumped = MarkedSpectrum::from_values(&b, v).unwrap();
        assert_eq!(validate_bounded(&b, &bumped).unwrap(), (1.0, 2.0));
    }

    #[test]
    fn regularize_triangle_detour() {
        let (_, b, rho) = triangle();
        let reg = regularize(&b, &rho).unwrap();
        let idx = b.find(0, 2).unwrap();
        assert_eq!(reg.value(idx), 2.0);
        assert_eq!(reg.value(b.find(0, 1).unwrap()), 1.0);
        assert_eq!(reg.value(b.find(1, 2).unwrap()), 1.0);
        // idempotence
        assert_eq!(regularize(&b, &reg).unwrap(), reg);
        assert!(is_regular(&b, &reg).unwrap());
        assert!(!is_regular(&b, &rho).unwrap());
    }

    #[test]
    fn regularize_base_is_fixed_point() {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let base = MarkedSpectrum::base(&b);
        assert_eq!(regularize(&b, &base).unwrap(), base);
    }

    #[test]
    fn regularize_commutes_with_scaling() {
        let (_, b, rho) = triangle();
        let lam = 2.5;
        let scaled = MarkedSpectrum::from_values(&b, rho.values().iter().map(|v| v * lam).collect())
            .unwrap();
        let lhs = regularize(&b, &scaled).unwrap();
        let rhs = regularize(&b, &rho).unwrap();
        for i in 0..b.len() {
            assert!((lhs.value(i) - lam * rhs.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_detection() {
        let (_, b, _) = triangle();
        let distinct = MarkedSpectrum::from_values(&b, vec![1.0, 3.0, 2.0]).unwrap();
        assert!(is_simple(&distinct));
        let tied = MarkedSpectrum::from_values(&b, vec![1.0, 3.0, 1.0]).unwrap();
        assert!(!is_simple(&tied));
    }

    #[test]
    fn perturb_hand_example() {
        // rho values (2, 1, 1): eps_1 = min(4/6, 1/2) = 1/2, then /3 decay caps
        let (_, b, _) = triangle();
        let rho = MarkedSpectrum::from_values(&b, vec![1.0, 2.0, 1.0]).unwrap();
        let rho = regularize(&b, &rho).unwrap();
        assert_eq!(rho.values(), &[1.0, 2.0, 1.0]);
        let p = perturb_simple_regular(&b, &rho, 0.5).unwrap();
        assert_eq!(p.epsilons[0], 0.5);
        assert!(p.epsilons[1] <= p.epsilons[0] / 3.0);
        assert!(p.epsilons[2] <= p.epsilons[1] / 3.0);
        assert!(is_simple(&p.spectrum));
        assert!(is_regular(&b, &p.spectrum).unwrap());
        assert!(uniform_distance(&b, &rho, &p.spectrum).unwrap() < 0.5);
    }

    #[test]
    fn perturb_single_pair() {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 2)]).unwrap();
        let rho = MarkedSpectrum::base(&b);
        let p = perturb_simple_regular(&b, &rho, 0.25).unwrap();
        assert!(is_simple(&p.spectrum));
        assert!(p.spectrum.value(0) < 2.0 && p.spectrum.value(0) > 0.0);
        assert_eq!(p.spectrum.value(0), 2.0 - 0.25 * p.epsilons[0]);
    }

    #[test]
    fn perturb_rejects_irregular_and_bad_h() {
        let (_, b, rho) = triangle();
        assert!(matches!(
            perturb_simple_regular(&b, &rho, 0.5),
            Err(DeformError::NotRegular)
        ));
        let reg = regularize(&b, &rho).unwrap();
        assert!(matches!(
            perturb_simple_regular(&b, &reg, 1.0),
            Err(DeformError::BadH(_))
        ));
    }

    #[test]
    fn perturb_uniform_bound_shrinks_with_h() {
        let (_, b, rho) = triangle();
        let reg = regularize(&b, &rho).unwrap();
        for h in [0.5, 0.1, 0.01, 0.001] {
            let p = perturb_simple_regular(&b, &reg, h).unwrap();
            let d = uniform_distance(&b, &reg, &p.spectrum).unwrap();
            assert!(d < h, "h={h} d={d}");
        }
    }

    #[test]
    fn compact_open_filters_small_pairs() {
        let (_, b, _) = triangle();
        let base = MarkedSpectrum::base(&b);
        // change only the unit-length pairs; at t=2 they are filtered out
        let mut v = base.values().to_vec();
        for (idx, &(i, j)) in b.pairs().iter().enumerate() {
            if !(i == 0 && j == 2) {
                v[idx] += 0.5;
            }
        }
        let other = MarkedSpectrum::from_values(&b, v).unwrap();
        assert_eq!(compact_open_distance(&b, &base, &other, 2.0).unwrap(), 0.0);
        assert!(compact_open_distance(&b, &base, &other, 0.5).unwrap() > 0.0);
        let u = uniform_distance(&b, &base, &other).unwrap();
        assert!(compact_open_distance(&b, &base, &other, 0.5).unwrap() <= u);
    }

    #[test]
    fn compact_open_delta_formula() {
        let x = collinear3();
        let b = SupportSet::from_unordered_pairs(&x, [(0, 1)]).unwrap();
        let one = MarkedSpectrum::from_values(&b, vec![1.0]).unwrap();
        let delta = 0.25;
        let shifted = MarkedSpectrum::from_values(&b, vec![1.0 + delta]).unwrap();
        let got = compact_open_distance(&b, &one, &shifted, 1.0).unwrap();
        assert!((got - delta / (1.0 + delta)).abs() < 1e-15);
    }

    #[test]
    fn weak_lp_cases() {
        let (_, b, _) = triangle();
        let base = MarkedSpectrum::base(&b);
        assert_eq!(weak_lp_distance(&b, &base, &base, 2.0, None).unwrap(), 0.0);
        let mut v = base.values().to_vec();
        let k = b.find(0, 2).unwrap();
        v[k] = 4.0;
        let other = MarkedSpectrum::from_values(&b, v).unwrap();
        let mut xi = vec![0.0; b.len()];
        xi[k] = 1.0;
        let got = weak_lp_distance(&b, &base, &other, 1.0, Some(&xi)).unwrap();
        let expect = 2.0 * (1.0 / 2.0 - 1.0 / 4.0);
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.spec");
        let (_, b, rho) = triangle();
        save_spectrum(&b, &rho, &path).unwrap();
        let back = load_spectrum(&b, &path).unwrap();
        assert_eq!(rho, back);
    }
}
