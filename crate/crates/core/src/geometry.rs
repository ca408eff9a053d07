//! Canonical finite spectral geometries M(B, m): eigenvalue spectrum of ds,
//! subspace dimension counting, commutator norms, and the rebuild on the
//! Connes metric.
//!
//! The Hilbert space is never materialized; everything downstream reduces to
//! combinatorics on (support, multiplicity, marked spectrum).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::connes::{self, ConnesError};
use crate::deformation::{DeformError, MarkedSpectrum};
use crate::scalar::Scalar;
use crate::spaces::{FiniteMetricSpace, SpaceError};
use crate::support::{SupportError, SupportSet};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("multiplicity vector has {got} entries, expected {want}")]
    MultMismatch { got: usize, want: usize },
    #[error("multiplicity must be >= 1 (pair index {0})")]
    MultZero(usize),
    #[error("function vector has {got} entries, expected {want} points")]
    FunctionMismatch { got: usize, want: usize },
    #[error("incidence graph disconnected: Connes metric infinite between components")]
    Disconnected,
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Support(#[from] SupportError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Connes(#[from] ConnesError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Finite spectral geometry M(B, m): support, symmetric multiplicity, marked
/// spectrum. Multiplicity and spectrum are stored per unordered support pair
/// and apply to both orientations.
#[derive(Debug, Clone)]
pub struct SpectralGeometry<T> {
    space: Arc<FiniteMetricSpace<T>>,
    support: SupportSet<T>,
    mult: Vec<u32>,
    spectrum: MarkedSpectrum<T>,
}

impl<T: Scalar> SpectralGeometry<T> {
    /// m = 1 everywhere, rho = base lengths.
    pub fn new(space: Arc<FiniteMetricSpace<T>>, support: SupportSet<T>) -> Self {
        let spectrum = MarkedSpectrum::base(&support);
        let mult = vec![1; support.len()];
        SpectralGeometry { space, support, mult, spectrum }
    }

    pub fn with_spectrum(
        space: Arc<FiniteMetricSpace<T>>,
        support: SupportSet<T>,
        spectrum: MarkedSpectrum<T>,
    ) -> Result<Self, GeometryError> {
        if spectrum.len() != support.len() {
            return Err(DeformError::LengthMismatch {
                got: spectrum.len(),
                want: support.len(),
            }
            .into());
        }
        let mult = vec![1; support.len()];
        Ok(SpectralGeometry { space, support, mult, spectrum })
    }

    pub fn with_mult(mut self, mult: Vec<u32>) -> Result<Self, GeometryError> {
        if mult.len() != self.support.len() {
            return Err(GeometryError::MultMismatch {
                got: mult.len(),
                want: self.support.len(),
            });
        }
        if let Some(idx) = mult.iter().position(|&m| m == 0) {
            return Err(GeometryError::MultZero(idx));
        }
        self.mult = mult;
        Ok(self)
    }

    pub fn space(&self) -> &FiniteMetricSpace<T> {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<FiniteMetricSpace<T>> {
        Arc::clone(&self.space)
    }

    pub fn support(&self) -> &SupportSet<T> {
        &self.support
    }

    pub fn spectrum(&self) -> &MarkedSpectrum<T> {
        &self.spectrum
    }

    pub fn set_spectrum(&mut self, spectrum: MarkedSpectrum<T>) -> Result<(), GeometryError> {
        if spectrum.len() != self.support.len() {
            return Err(DeformError::LengthMismatch {
                got: spectrum.len(),
                want: self.support.len(),
            }
            .into());
        }
        self.spectrum = spectrum;
        Ok(())
    }

    pub fn mult(&self, pair_idx: usize) -> u32 {
        self.mult[pair_idx]
    }

    pub fn mults(&self) -> &[u32] {
        &self.mult
    }
}

/// Eigenvalues of ds: +-rho(b) with multiplicity m(b) per ordered pair,
/// represented as (signed value, multiplicity) entries sorted by absolute
/// value descending (positive entry before its mirror).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueList<T> {
    pub entries: Vec<(T, u32)>,
}

impl<T: Scalar> EigenvalueList<T> {
    /// Total eigenvalue count with multiplicity (= sum of m over ordered pairs
    /// per sign, i.e. dim of the finite Hilbert shadow).
    pub fn count(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m as usize).sum()
    }

    /// mu_0 >= mu_1 >= ... : absolute values expanded with multiplicity,
    /// nonincreasing (the spectrum of |ds|).
    pub fn abs_expanded(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.count());
        for &(v, m) in &self.entries {
            for _ in 0..m {
                out.push(v.abs());
            }
        }
        // entries are sorted by |value| desc already; expansion preserves it
        out
    }
}

/// Eigenvalue multiset of ds: per unordered pair, +rho and -rho each carry
/// multiplicity m (one orientation each).
pub fn spectrum_of_ds<T: Scalar>(geometry: &SpectralGeometry<T>) -> EigenvalueList<T> {
    let mut entries: Vec<(T, u32)> = Vec::with_capacity(2 * geometry.support.len());
    for idx in 0..geometry.support.len() {
        let rho = geometry.spectrum.value(idx);
        let m = geometry.mult[idx];
        entries.push((rho, m));
        entries.push((-rho, m));
    }
    entries.sort_by(|a, b| {
        b.0.abs()
            .partial_cmp(&a.0.abs())
            .unwrap()
            .then(b.0.partial_cmp(&a.0).unwrap())
    });
    EigenvalueList { entries }
}

/// dim E_t = sum of m(b) over ordered pairs with rho(b) >= t.
pub fn dim_e<T: Scalar>(geometry: &SpectralGeometry<T>, t: T) -> usize {
    (0..geometry.support.len())
        .filter(|&idx| geometry.spectrum.value(idx) >= t)
        .map(|idx| 2 * geometry.mult[idx] as usize)
        .sum()
}

/// ||[D, pi(a)]|| = sup over support pairs of |a(y) - a(y')| / rho(y, y').
pub fn commutator_norm<T: Scalar>(
    geometry: &SpectralGeometry<T>,
    a: &[T],
) -> Result<T, GeometryError> {
    if a.len() != geometry.space.n() {
        return Err(GeometryError::FunctionMismatch {
            got: a.len(),
            want: geometry.space.n(),
        });
    }
    let mut out = T::zero();
    for (idx, &(i, j)) in geometry.support.pairs().iter().enumerate() {
        let r = (a[i] - a[j]).abs() / geometry.spectrum.value(idx);
        if r > out {
            out = r;
        }
    }
    Ok(out)
}

/// Exact Lipschitz constant of a value-vector over the whole space.
pub fn lipschitz_constant<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    a: &[T],
) -> Result<T, GeometryError> {
    if a.len() != space.n() {
        return Err(GeometryError::FunctionMismatch { got: a.len(), want: space.n() });
    }
    let mut out = T::zero();
    for i in 0..space.n() {
        for j in (i + 1)..space.n() {
            let r = (a[i] - a[j]).abs() / space.dist(i, j);
            if r > out {
                out = r;
            }
        }
    }
    Ok(out)
}

/// Rebuild the geometry on its own Connes metric: new ground space (Y, d_M),
/// same pairs and multiplicities reindexed to Y, base lengths refreshed to
/// d_M values (= rho on support pairs, so ds is unchanged).
pub fn rebuild_on_connes<T: Scalar>(
    geometry: &SpectralGeometry<T>,
) -> Result<SpectralGeometry<T>, GeometryError> {
    let metric = connes::connes_metric_on_y(geometry)?;
    if !metric.connected {
        return Err(GeometryError::Disconnected);
    }
    let y = &metric.points;
    let ny = y.len();
    let mut dist = vec![T::zero(); ny * ny];
    for a in 0..ny {
        for b in 0..ny {
            dist[a * ny + b] = metric.get(a, b);
        }
    }
    let labels = geometry
        .space
        .labels()
        .map(|ls| y.iter().map(|&i| ls[i].clone()).collect());
    // shortest-path metrics satisfy the triangle inequality up to rounding
    let tol = T::from_f64(1e-12).unwrap();
    let new_space = Arc::new(FiniteMetricSpace::from_matrix(ny, dist, labels, tol)?);
    let local = |orig: usize| y.binary_search(&orig).unwrap();
    let pairs: Vec<(usize, usize)> = geometry
        .support
        .pairs()
        .iter()
        .map(|&(i, j)| (local(i), local(j)))
        .collect();
    let support = SupportSet::from_unordered_pairs(&new_space, pairs)?;
    // reindexing preserves pair order (monotone index map), so mult and
    // spectrum vectors carry over positionally
    let spectrum = MarkedSpectrum::from_values(&support, geometry.spectrum.values().to_vec())?;
    SpectralGeometry::with_spectrum(new_space, support, spectrum)?
        .with_mult(geometry.mult.clone())
}

/// Eigenvalue CSV: `abs_value,signed_value,multiplicity`, sorted descending
/// by absolute value.
pub fn save_eigenvalues<T: Scalar>(
    eigen: &EigenvalueList<T>,
    path: &Path,
) -> Result<(), GeometryError> {
    let mut out = String::from("abs_value,signed_value,multiplicity\n");
    for &(v, m) in &eigen.entries {
        out.push_str(&format!(
            "{},{},{m}\n",
            v.abs().format_full(),
            v.format_full()
        ));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
