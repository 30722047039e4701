//! Discrete angular measures on the nonnegative L2 unit sphere.
//!
//! A transformed-linear vector `X = A ∘ Z` built from independent unit
//! Fréchet(α = 2) noise has a purely atomic angular measure: one atom per
//! column of `A⁽⁰⁾ = max(A, 0)`, located at the normalized column and
//! carrying its squared norm as mass. Marginalizing keeps the squared norm of
//! the retained coordinates, and pairwise TPDFs read off the same value from
//! any measure that contains the pair.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Atoms closer than this (L2) are the same point.
pub const MERGE_TOLERANCE: f64 = 1e-10;

const SPHERE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAngularMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl DiscreteAngularMeasure {
    /// Builds a measure from explicit atoms, merging coincident points.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut measure = Self {
            dim,
            atoms: Vec::with_capacity(atoms.len()),
        };
        for atom in atoms {
            if atom.point.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "atom has {} coordinates, expected {dim}",
                    atom.point.len()
                )));
            }
            if atom.point.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::InvalidArgument("atom coordinates must be nonnegative".into()));
            }
            if (l2(&atom.point) - 1.0).abs() > SPHERE_TOLERANCE {
                return Err(Error::InvalidArgument("atom is not on the unit sphere".into()));
            }
            if !(atom.mass > 0.0) || !atom.mass.is_finite() {
                return Err(Error::InvalidArgument("atom mass must be positive and finite".into()));
            }
            measure.push(atom);
        }
        if measure.atoms.is_empty() {
            return Err(Error::DegenerateMeasure("measure has no atoms".into()));
        }
        Ok(measure)
    }

    fn push(&mut self, atom: Atom) {
        let existing = self.atoms.iter_mut().find(|a| {
            a.point
                .iter()
                .zip(&atom.point)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
                <= MERGE_TOLERANCE
        });
        match existing {
            Some(a) => a.mass += atom.mass,
            None => self.atoms.push(atom),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// True when both measures have the same atoms (in any order) with
    /// points and masses agreeing within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.atoms.len() != other.atoms.len() {
            return false;
        }
        let mut used = vec![false; other.atoms.len()];
        self.atoms.iter().all(|a| {
            let hit = other.atoms.iter().enumerate().find(|(k, b)| {
                !used[*k]
                    && (a.mass - b.mass).abs() <= tol
                    && a.point.iter().zip(&b.point).all(|(x, y)| (x - y).abs() <= tol)
            });
            match hit {
                Some((k, _)) => {
                    used[k] = true;
                    true
                }
                None => false,
            }
        })
    }
}

/// Angular measure of `A ∘ Z` for a `p × q` coefficient matrix.
pub fn angular_from_coefficients(a: &DMatrix<f64>) -> Result<DiscreteAngularMeasure> {
    let p = a.nrows();
    if p == 0 {
        return Err(Error::InvalidArgument("coefficient matrix has no rows".into()));
    }
    let mut measure = DiscreteAngularMeasure {
        dim: p,
        atoms: Vec::new(),
    };
    for col in a.column_iter() {
        let positive: Vec<f64> = col.iter().map(|&v| v.max(0.0)).collect();
        let norm = l2(&positive);
        if norm > 0.0 {
            measure.push(Atom {
                point: positive.iter().map(|v| v / norm).collect(),
                mass: norm * norm,
            });
        }
    }
    if measure.atoms.is_empty() {
        return Err(Error::DegenerateMeasure(
            "every column of the coefficient matrix is nonpositive".into(),
        ));
    }
    Ok(measure)
}

/// Angular measure of the sub-vector indexed by `keep` (0-based, strictly
/// increasing, `1 ≤ keep.len() < p`).
pub fn marginalize(h: &DiscreteAngularMeasure, keep: &[usize]) -> Result<DiscreteAngularMeasure> {
    let p = h.dim;
    if keep.is_empty() || keep.len() >= p {
        return Err(Error::InvalidArgument(format!(
            "must keep between 1 and {} of {p} coordinates",
            p - 1
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep[keep.len() - 1] >= p {
        return Err(Error::InvalidArgument(
            "kept indices must be strictly increasing and in range".into(),
        ));
    }
    let mut out = DiscreteAngularMeasure {
        dim: keep.len(),
        atoms: Vec::new(),
    };
    for atom in &h.atoms {
        let sub: Vec<f64> = keep.iter().map(|&i| atom.point[i]).collect();
        let norm = l2(&sub);
        if norm > 0.0 {
            out.push(Atom {
                point: sub.iter().map(|v| v / norm).collect(),
                mass: atom.mass * norm * norm,
            });
        }
    }
    if out.atoms.is_empty() {
        return Err(Error::DegenerateMeasure(
            "all atoms are orthogonal to the kept coordinates".into(),
        ));
    }
    Ok(out)
}

/// `σ(X_i, X_j) = ∫ w_i w_j dH(w)` (0-based indices).
pub fn tpdf_from_angular(h: &DiscreteAngularMeasure, i: usize, j: usize) -> Result<f64> {
    if i >= h.dim || j >= h.dim {
        return Err(Error::InvalidArgument(format!(
            "index out of range for dimension {}",
            h.dim
        )));
    }
    Ok(h.atoms.iter().map(|a| a.mass * a.point[i] * a.point[j]).sum())
}

/// Tail pairwise dependence matrix.
pub fn tpdm(h: &DiscreteAngularMeasure) -> DMatrix<f64> {
    let p = h.dim;
    let mut m = DMatrix::zeros(p, p);
    for atom in &h.atoms {
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] += atom.mass * atom.point[i] * atom.point[j];
            }
        }
    }
    m
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn identity_gives_unit_atoms() {
        let h = angular_from_coefficients(&DMatrix::identity(2, 2)).unwrap();
        let expected = DiscreteAngularMeasure::new(
            2,
            vec![
                Atom { point: vec![1.0, 0.0], mass: 1.0 },
                Atom { point: vec![0.0, 1.0], mass: 1.0 },
            ],
        )
        .unwrap();
        assert!(h.approx_eq(&expected, 0.0));
        assert_eq!(tpdf_from_angular(&h, 0, 1).unwrap(), 0.0);
        assert_eq!(tpdm(&h), DMatrix::identity(2, 2));
    }

    #[test]
    fn perfect_dependence() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let h = angular_from_coefficients(&a).unwrap();
        assert_eq!(h.atoms().len(), 1);
        assert!((h.atoms()[0].point[0] - R).abs() < 1e-15);
        assert!((h.atoms()[0].mass - 2.0).abs() < 1e-15);
        assert!((tpdf_from_angular(&h, 0, 1).unwrap() - 1.0).abs() < 1e-15);
        let m = tpdm(&h);
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-15));

        let marg = marginalize(&h, &[0]).unwrap();
        assert_eq!(marg.atoms().len(), 1);
        assert_eq!(marg.atoms()[0].point, vec![1.0]);
        assert!((marg.atoms()[0].mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_entries_are_zeroed() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 1.0]);
        let h = angular_from_coefficients(&a).unwrap();
        let id = angular_from_coefficients(&DMatrix::identity(2, 2)).unwrap();
        assert!(h.approx_eq(&id, 0.0));
    }

    #[test]
    fn ar1_like_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.9, 1.0]);
        let h = angular_from_coefficients(&a).unwrap();
        assert!((tpdf_from_angular(&h, 0, 1).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_atom_drops() {
        let h = angular_from_coefficients(&DMatrix::identity(2, 2)).unwrap();
        let m = marginalize(&h, &[0]).unwrap();
        assert_eq!(m.atoms(), &[Atom { point: vec![1.0], mass: 1.0 }]);
        let only_second = DiscreteAngularMeasure::new(
            2,
            vec![Atom { point: vec![0.0, 1.0], mass: 1.0 }],
        )
        .unwrap();
        assert!(matches!(
            marginalize(&only_second, &[0]),
            Err(Error::DegenerateMeasure(_))
        ));
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        assert!(matches!(angular_from_coefficients(&a), Err(Error::DegenerateMeasure(_))));
        let h = angular_from_coefficients(&DMatrix::identity(3, 3)).unwrap();
        assert!(marginalize(&h, &[]).is_err());
        assert!(marginalize(&h, &[0, 1, 2]).is_err());
        assert!(marginalize(&h, &[1, 0]).is_err());
        assert!(tpdf_from_angular(&h, 0, 3).is_err());
        assert!(DiscreteAngularMeasure::new(2, vec![Atom { point: vec![1.0, 1.0], mass: 1.0 }]).is_err());
        assert!(DiscreteAngularMeasure::new(2, vec![Atom { point: vec![1.0, 0.0], mass: 0.0 }]).is_err());
    }

    #[test]
    fn proportional_columns_merge() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let h = angular_from_coefficients(&a).unwrap();
        assert_eq!(h.atoms().len(), 1);
        assert!((h.total_mass() - 10.0).abs() < 1e-12);
    }
}
