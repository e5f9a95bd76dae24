//! Conceptor matrices and their Boolean algebra.
//!
//! A conceptor for a sample matrix `Z` (columns are observations, `k` of
//! them) at aperture `α > 0` is
//!
//! ```text
//! C = R (R + α⁻² I)⁻¹,   R = (1/k) Z Zᵀ
//! ```
//!
//! `C` is symmetric positive semi-definite and shares eigenvectors with `R`;
//! an eigenvalue `σ` of `R` maps to `σ / (σ + α⁻²) ∈ [0, 1)`. Applying the
//! *negated* conceptor `I − C` to a vector shrinks its component along the
//! i-th principal direction of the sample by `α⁻² / (σᵢ + α⁻²)` — directions
//! rich in sample variance are suppressed, directions the sample does not
//! occupy pass through almost unchanged. That spectral shaping is what makes
//! `I − C` usable as a soft debiasing map.
//!
//! Conceptors support Boolean combination: `¬C = I − C`,
//! `C ∧ B = (C⁻¹ + B⁻¹ − I)⁻¹` (extended to singular inputs below), and
//! `C ∨ B = ¬(¬C ∧ ¬B)`. Aperture can be rescaled after the fact with
//! [`aperture_adapt`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::embedding::EmbeddingTable;
use crate::linalg::{
    intersection_projector, pinv_sym, range_projector, recompose, spectral_map, sym_eigen_desc,
    symmetrize,
};
use crate::{Error, Result};

/// Eigenvalues of a conceptor are clamped to at most this value, keeping
/// `I − C` invertible.
pub const EIGEN_MAX: f64 = 1.0 - 1e-12;

/// Validation slack: eigenvalues may undershoot zero by this much (float
/// noise from eigendecomposition round trips).
const EIGEN_LOW_TOL: f64 = 1e-10;

/// Validation slack above [`EIGEN_MAX`] when re-checking stored matrices.
const EIGEN_HIGH_TOL: f64 = 1e-13;

/// Entrywise symmetry tolerance accepted when validating a stored matrix.
const SYMMETRY_TOL: f64 = 1e-9;

/// A conceptor matrix with the aperture and sample count it was built from.
#[derive(Debug, Clone)]
pub struct Conceptor {
    matrix: DMatrix<f64>,
    alpha: f64,
    sample_count: u64,
}

impl Conceptor {
    /// Reassemble a conceptor from stored parts, validating the type
    /// invariants: square, finite, symmetric within `1e-9`, eigenvalues in
    /// `[-1e-10, 1 - 1e-12]` (with recomputation slack), `alpha > 0`,
    /// `sample_count ≥ 1`. The matrix is stored exactly as given.
    pub fn from_parts(matrix: DMatrix<f64>, alpha: f64, sample_count: u64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidConceptor {
                message: format!(
                    "matrix is {}x{}, not square",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidConceptor {
                message: "dimension must be positive".into(),
            });
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidAperture { alpha });
        }
        if sample_count == 0 {
            return Err(Error::InvalidConceptor {
                message: "sample count must be at least 1".into(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "conceptor matrix".into(),
            });
        }
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidConceptor {
                        message: format!(
                            "matrix is asymmetric at ({i},{j}): {} vs {}",
                            matrix[(i, j)],
                            matrix[(j, i)]
                        ),
                    });
                }
            }
        }
        let (values, _) = sym_eigen_desc(&matrix);
        for &v in values.iter() {
            if !(-EIGEN_LOW_TOL..=EIGEN_MAX + EIGEN_HIGH_TOL).contains(&v) {
                return Err(Error::InvalidConceptor {
                    message: format!("eigenvalue {v} outside [0, {EIGEN_MAX}]"),
                });
            }
        }
        Ok(Conceptor {
            matrix,
            alpha,
            sample_count,
        })
    }

    /// The conceptor matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Aperture the conceptor is computed at.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of sample columns behind this conceptor. Boolean combinations
    /// carry a nominal count: `or` adds the operands' counts (it corresponds
    /// to pooling the samples), `and` keeps the smaller one.
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    /// Vector dimension the conceptor acts on.
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues, descending. Each lies in `[0, 1)` up to float noise.
    pub fn eigenvalues(&self) -> DVector<f64> {
        sym_eigen_desc(&self.matrix).0
    }

    /// Logical negation `¬C`, represented without materializing `I − C`.
    pub fn negate(&self) -> NegatedConceptor {
        NegatedConceptor {
            inner: self.clone(),
        }
    }
}

/// The negation `N = I − C` of a conceptor.
///
/// The original `C` is kept as the representation, so `N + C = I` holds
/// exactly and double negation returns `C` unchanged.
#[derive(Debug, Clone)]
pub struct NegatedConceptor {
    inner: Conceptor,
}

impl NegatedConceptor {
    /// The conceptor being negated.
    pub fn inner(&self) -> &Conceptor {
        &self.inner
    }

    /// Double negation: the original conceptor, bit for bit.
    pub fn negate(&self) -> Conceptor {
        self.inner.clone()
    }

    /// Vector dimension the map acts on.
    pub fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    /// Aperture of the underlying conceptor.
    pub fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    /// Materialize `I − C`.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dimension(), self.dimension()) - &self.inner.matrix
    }

    /// Apply the soft debiasing map `x ↦ (I − C) x` to every vector of a
    /// table. Rows are processed in parallel; output order is table order.
    pub fn apply_debias(&self, table: &EmbeddingTable) -> Result<EmbeddingTable> {
        if table.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: table.dimension(),
                context: "debiasing map vs embedding table".into(),
            });
        }
        let n = self.matrix();
        Ok(table.map_vectors(|v| {
            let x = DVector::from_column_slice(v);
            let y = &n * x;
            y.iter().copied().collect()
        }))
    }
}

/// Compute the conceptor of a sample matrix (columns are observations).
pub fn compute_conceptor(z: &DMatrix<f64>, alpha: f64) -> Result<Conceptor> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidAperture { alpha });
    }
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::EmptyInput {
            context: "conceptor sample matrix".into(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "conceptor sample matrix".into(),
        });
    }
    let k = z.ncols() as f64;
    let r = symmetrize(&(z * z.transpose() / k));
    let beta = alpha.powi(-2);
    let (sigmas, u) = sym_eigen_desc(&r);
    let lambdas = DVector::from_iterator(
        sigmas.len(),
        sigmas.iter().map(|&s| {
            let s = s.max(0.0); // R is PSD; clip eigensolver noise
            (s / (s + beta)).min(EIGEN_MAX)
        }),
    );
    Ok(Conceptor {
        matrix: recompose(&lambdas, &u),
        alpha,
        sample_count: z.ncols() as u64,
    })
}

/// Clamp a Boolean-combination result back into the valid eigenvalue band.
fn clamp_spectrum(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |v| v.clamp(0.0, EIGEN_MAX))
}

fn check_compatible(a: &Conceptor, b: &Conceptor) -> Result<()> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
            context: "conceptor combination".into(),
        });
    }
    if a.alpha != b.alpha {
        return Err(Error::ApertureMismatch {
            left: a.alpha,
            right: b.alpha,
        });
    }
    Ok(())
}

/// Logical AND of two conceptors.
///
/// For invertible inputs this is `(C⁻¹ + B⁻¹ − I)⁻¹`. Singular inputs use
/// the standard extension: restrict to the intersection of the ranges
/// (projector `P`, computed by the Anderson–Duffin formula), apply the
/// formula with pseudo-inverses there, and leave the orthogonal complement
/// at zero:
///
/// ```text
/// C ∧ B = P · ( P (C† + B† − I) P )† · P
/// ```
///
/// In particular `and(0, B) = 0`: intersecting with an empty range yields
/// the zero conceptor.
pub fn and(a: &Conceptor, b: &Conceptor) -> Result<Conceptor> {
    check_compatible(a, b)?;
    let d = a.dimension();
    let p = intersection_projector(&range_projector(&a.matrix), &range_projector(&b.matrix));
    let core = &p * (pinv_sym(&a.matrix) + pinv_sym(&b.matrix) - DMatrix::identity(d, d)) * &p;
    let raw = &p * pinv_sym(&symmetrize(&core)) * &p;
    Ok(Conceptor {
        matrix: clamp_spectrum(&symmetrize(&raw)),
        alpha: a.alpha,
        sample_count: a.sample_count.min(b.sample_count),
    })
}

/// Logical OR of two conceptors: the De Morgan combination `¬(¬C ∧ ¬B)`.
///
/// Computed through the equivalent pooled-correlation identity. Each
/// conceptor `C = R(R + βI)⁻¹` determines its correlation matrix
/// `R = β C (I − C)⁻¹`, and the De Morgan combination equals the conceptor
/// of `R_C + R_B`. Expanding the inverses shows the two expressions are the
/// same matrix; the pooled form needs a single spectral reconstruction
/// instead of a chain of three, so identities like `or(C, 0) = C` hold to
/// near machine precision. `or` pools the two samples, so the sample count
/// of the result is the sum of the operands'.
pub fn or(a: &Conceptor, b: &Conceptor) -> Result<Conceptor> {
    check_compatible(a, b)?;
    let beta = a.alpha.powi(-2);
    // Eigenvalues stay strictly below 1, so λ/(1−λ) never overflows.
    let correlation = |c: &Conceptor| {
        spectral_map(&c.matrix, |v| {
            let v = v.clamp(0.0, EIGEN_MAX);
            beta * v / (1.0 - v)
        })
    };
    let pooled = symmetrize(&(correlation(a) + correlation(b)));
    let (sigmas, u) = sym_eigen_desc(&pooled);
    let lambdas = DVector::from_iterator(
        sigmas.len(),
        sigmas.iter().map(|&s| {
            let s = s.max(0.0);
            (s / (s + beta)).min(EIGEN_MAX)
        }),
    );
    Ok(Conceptor {
        matrix: recompose(&lambdas, &u),
        alpha: a.alpha,
        sample_count: a.sample_count + b.sample_count,
    })
}

/// OR-combine a non-empty sequence of conceptors, left to right.
pub fn or_many(conceptors: &[Conceptor]) -> Result<Conceptor> {
    let (first, rest) = conceptors.split_first().ok_or_else(|| Error::EmptyInput {
        context: "or_many needs at least one conceptor".into(),
    })?;
    let mut acc = first.clone();
    for c in rest {
        acc = or(&acc, c)?;
    }
    Ok(acc)
}

/// Rescale the aperture of a conceptor by `γ > 0` without revisiting the
/// sample: eigenvalues map as `λ ↦ λ / (λ + γ⁻² (1 − λ))`, which is exactly
/// the conceptor of the same sample at aperture `γ·α`. The stored alpha is
/// updated accordingly.
pub fn aperture_adapt(c: &Conceptor, gamma: f64) -> Result<Conceptor> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidGamma { gamma });
    }
    let g2 = gamma.powi(-2);
    let mapped = spectral_map(&c.matrix, |v| {
        let v = v.clamp(0.0, EIGEN_MAX);
        (v / (v + g2 * (1.0 - v))).min(EIGEN_MAX)
    });
    Ok(Conceptor {
        matrix: symmetrize(&mapped),
        alpha: c.alpha * gamma,
        sample_count: c.sample_count,
    })
}

/// One principal direction of the sample: its variance `σ` and the factor
/// the negated conceptor scales that direction by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageEntry {
    /// Eigenvalue of `(1/k) Z Zᵀ` (sample variance along the direction).
    pub sigma: f64,
    /// `α⁻² / (σ + α⁻²) = 1 − λ`: scaling applied by `I − C`.
    pub gain: f64,
}

/// Per-direction shrinkage profile of the debiasing map for a sample.
#[derive(Debug, Clone)]
pub struct ShrinkageSpectrum {
    entries: Vec<ShrinkageEntry>,
    alpha: f64,
}

impl ShrinkageSpectrum {
    /// Entries sorted by decreasing `sigma`; gains are non-decreasing and lie
    /// in `(0, 1]`.
    pub fn entries(&self) -> &[ShrinkageEntry] {
        &self.entries
    }

    /// Aperture the spectrum was computed at.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Spectrum of shrinkage gains `α⁻² / (σᵢ + α⁻²)` for a sample matrix.
pub fn shrinkage_spectrum(z: &DMatrix<f64>, alpha: f64) -> Result<ShrinkageSpectrum> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidAperture { alpha });
    }
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::EmptyInput {
            context: "shrinkage spectrum sample matrix".into(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "shrinkage spectrum sample matrix".into(),
        });
    }
    let k = z.ncols() as f64;
    let r = symmetrize(&(z * z.transpose() / k));
    let beta = alpha.powi(-2);
    let (sigmas, _) = sym_eigen_desc(&r);
    let entries = sigmas
        .iter()
        .map(|&s| {
            let s = s.max(0.0);
            ShrinkageEntry {
                sigma: s,
                gain: beta / (s + beta),
            }
        })
        .collect();
    Ok(ShrinkageSpectrum { entries, alpha })
}

const MAGIC: &[u8; 4] = b"CONC";
const FORMAT_VERSION: u8 = 1;

/// Write a conceptor to the binary container format.
///
/// Layout (all little-endian): magic `CONC`, version byte `0x01`, `u32`
/// dimension, `f64` alpha, `u64` sample count, then the matrix row-major as
/// `d·d` `f64`s. Round trip through [`load_conceptor`] is bit-exact.
pub fn save_conceptor(c: &Conceptor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let d = c.dimension();
    let mut buf = Vec::with_capacity(4 + 1 + 4 + 8 + 8 + d * d * 8);
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&c.alpha.to_le_bytes());
    buf.extend_from_slice(&c.sample_count.to_le_bytes());
    for i in 0..d {
        for j in 0..d {
            buf.extend_from_slice(&c.matrix[(i, j)].to_le_bytes());
        }
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Read a conceptor written by [`save_conceptor`], validating the container
/// and the conceptor invariants.
pub fn load_conceptor(path: impl AsRef<Path>) -> Result<Conceptor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let header_len = 4 + 1 + 4 + 8 + 8;
    if bytes.len() < header_len {
        return Err(Error::ConceptorFormat {
            path: path.into(),
            message: format!(
                "truncated header: expected at least {header_len} bytes, got {}",
                bytes.len()
            ),
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::ConceptorFormat {
            path: path.into(),
            message: format!("bad magic {:?}, expected \"CONC\"", &bytes[0..4]),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::ConceptorFormat {
            path: path.into(),
            message: format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                bytes[4]
            ),
        });
    }
    let d = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let alpha = f64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let sample_count = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
    let matrix_len = d
        .checked_mul(d)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::ConceptorFormat {
            path: path.into(),
            message: format!("dimension {d} overflows the matrix size"),
        })?;
    let expected = header_len + matrix_len;
    if bytes.len() != expected {
        return Err(Error::ConceptorFormat {
            path: path.into(),
            message: format!("expected {expected} bytes total, got {}", bytes.len()),
        });
    }
    let matrix = DMatrix::from_fn(d, d, |i, j| {
        let off = header_len + (i * d + j) * 8;
        f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
    });
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::ConceptorFormat {
            path: path.into(),
            message: format!("stored alpha {alpha} is not a positive real"),
        });
    }
    Conceptor::from_parts(matrix, alpha, sample_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use tempfile::tempdir;

    fn random_matrix(rng: &mut StdRng, d: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, k, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn zero_conceptor(d: usize, alpha: f64) -> Conceptor {
        compute_conceptor(&DMatrix::zeros(d, 1), alpha).unwrap()
    }

    fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn rank_one_sample_hand_case() {
        // Single sample (1, 0)ᵀ at α = 1: R = diag(1, 0), C = diag(1/2, 0).
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = compute_conceptor(&z, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(frob_diff(c.matrix(), &expected) < 1e-14);
        assert_eq!(c.sample_count(), 1);
    }

    #[test]
    fn zero_sample_gives_zero_conceptor() {
        let c = zero_conceptor(3, 2.0);
        assert!(c.matrix().norm() == 0.0);
    }

    #[test]
    fn rejects_bad_aperture_and_empty_sample() {
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(
            compute_conceptor(&z, 0.0),
            Err(Error::InvalidAperture { .. })
        ));
        assert!(matches!(
            compute_conceptor(&z, f64::NAN),
            Err(Error::InvalidAperture { .. })
        ));
        assert!(compute_conceptor(&DMatrix::zeros(2, 0), 1.0).is_err());
    }

    #[test]
    fn eigenvalues_match_spectral_formula() {
        let mut rng = StdRng::seed_from_u64(7);
        for &k in &[3usize, 12] {
            let z = random_matrix(&mut rng, 6, k); // k < d covers rank deficiency
            let alpha = 1.7;
            let c = compute_conceptor(&z, alpha).unwrap();
            let r = &z * z.transpose() / k as f64;
            let (sigmas, _) = sym_eigen_desc(&r);
            let beta = alpha.powi(-2);
            let lambdas = c.eigenvalues();
            for (l, s) in lambdas.iter().zip(sigmas.iter()) {
                let expected = s.max(0.0) / (s.max(0.0) + beta);
                assert!((l - expected).abs() < 1e-10, "λ={l} vs {expected}");
            }
        }
    }

    #[test]
    fn negation_is_exact_involution() {
        let mut rng = StdRng::seed_from_u64(8);
        let z = random_matrix(&mut rng, 5, 9);
        let c = compute_conceptor(&z, 2.0).unwrap();
        let back = c.negate().negate();
        assert_eq!(c.matrix(), back.matrix(), "double negation must be exact");
        // N + C = I by construction of the materialized matrix.
        let n = c.negate().matrix();
        let sum = n + c.matrix();
        assert!(frob_diff(&sum, &DMatrix::identity(5, 5)) < 1e-12);
    }

    #[test]
    fn and_of_half_identities() {
        // C = B = I/2 ⇒ C⁻¹ + B⁻¹ − I = 3I ⇒ and = I/3.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        let c = Conceptor::from_parts(m.clone(), 1.0, 4).unwrap();
        let b = Conceptor::from_parts(m, 1.0, 4).unwrap();
        let got = and(&c, &b).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0]));
        assert!(frob_diff(got.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn and_with_zero_is_zero() {
        let mut rng = StdRng::seed_from_u64(9);
        let z = random_matrix(&mut rng, 4, 7);
        let b = compute_conceptor(&z, 2.0).unwrap();
        let zero = zero_conceptor(4, 2.0);
        let got = and(&zero, &b).unwrap();
        assert!(got.matrix().norm() < 1e-12, "and(0, B) must be 0");
        let got = and(&b, &zero).unwrap();
        assert!(got.matrix().norm() < 1e-12, "and(B, 0) must be 0");
    }

    #[test]
    fn and_of_invertible_matches_literal_formula() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..10 {
            let z = random_matrix(&mut rng, 4, 9); // k > d ⇒ full rank a.s.
            let c = compute_conceptor(&z, 1.3).unwrap();
            let got = and(&c, &c).unwrap();
            // (2 C⁻¹ − I)⁻¹ computed with plain inverses.
            let inv = c.matrix().clone().try_inverse().expect("invertible");
            let literal = (2.0 * inv - DMatrix::identity(4, 4))
                .try_inverse()
                .expect("invertible");
            assert!(
                frob_diff(got.matrix(), &literal) < 1e-8,
                "and(C,C) diverged from closed form by {}",
                frob_diff(got.matrix(), &literal)
            );
        }
    }

    #[test]
    fn or_with_zero_is_identity_on_the_other() {
        let mut rng = StdRng::seed_from_u64(11);
        let z = random_matrix(&mut rng, 5, 8);
        let c = compute_conceptor(&z, 2.0).unwrap();
        let zero = zero_conceptor(5, 2.0);
        let got = or(&c, &zero).unwrap();
        assert!(
            frob_diff(got.matrix(), c.matrix()) < 1e-10,
            "or(C, 0) must return C, off by {}",
            frob_diff(got.matrix(), c.matrix())
        );
    }

    #[test]
    fn or_diagonal_hand_case() {
        // C = diag(1/2, 0), B = diag(0, 1/2) at α = 1 come from R_C = diag(1,0),
        // R_B = diag(0,1); OR pools the correlations: R = I ⇒ C∨B = I/2.
        let c = Conceptor::from_parts(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0])),
            1.0,
            1,
        )
        .unwrap();
        let b = Conceptor::from_parts(
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.5])),
            1.0,
            1,
        )
        .unwrap();
        let got = or(&c, &b).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        assert!(frob_diff(got.matrix(), &expected) < 1e-12);
        assert_eq!(got.sample_count(), 2);
    }

    /// Independent oracle for OR: fold the operands back to their correlation
    /// matrices R = β C (I − C)⁻¹ and build the conceptor of R_C + R_B.
    fn or_oracle(c: &Conceptor, b: &Conceptor) -> DMatrix<f64> {
        let beta = c.alpha().powi(-2);
        let to_r = |m: &DMatrix<f64>| -> DMatrix<f64> {
            let d = m.nrows();
            let inv = spectral_map(&(DMatrix::identity(d, d) - m), |v| 1.0 / v);
            beta * m * inv
        };
        let r = symmetrize(&(to_r(c.matrix()) + to_r(b.matrix())));
        spectral_map(&r, |s| s.max(0.0) / (s.max(0.0) + beta))
    }

    #[test]
    fn or_matches_correlation_addition_oracle() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..10 {
            let z1 = random_matrix(&mut rng, 5, 7);
            let z2 = random_matrix(&mut rng, 5, 4);
            let c = compute_conceptor(&z1, 2.0).unwrap();
            let b = compute_conceptor(&z2, 2.0).unwrap();
            let got = or(&c, &b).unwrap();
            let expected = or_oracle(&c, &b);
            assert!(
                frob_diff(got.matrix(), &expected) < 1e-8,
                "De Morgan OR diverged from R-addition oracle by {}",
                frob_diff(got.matrix(), &expected)
            );
        }
    }

    #[test]
    fn or_commutes_and_associates() {
        let mut rng = StdRng::seed_from_u64(13);
        let cs: Vec<Conceptor> = (0..3)
            .map(|_| compute_conceptor(&random_matrix(&mut rng, 4, 6), 1.5).unwrap())
            .collect();
        let ab = or(&cs[0], &cs[1]).unwrap();
        let ba = or(&cs[1], &cs[0]).unwrap();
        assert!(frob_diff(ab.matrix(), ba.matrix()) < 1e-8);
        let left = or(&ab, &cs[2]).unwrap();
        let right = or(&cs[0], &or(&cs[1], &cs[2]).unwrap()).unwrap();
        assert!(frob_diff(left.matrix(), right.matrix()) < 1e-8);
    }

    #[test]
    fn or_many_matches_pairwise_folds() {
        let mut rng = StdRng::seed_from_u64(14);
        let cs: Vec<Conceptor> = (0..3)
            .map(|_| compute_conceptor(&random_matrix(&mut rng, 4, 5), 2.0).unwrap())
            .collect();
        let single = or_many(&cs[..1]).unwrap();
        assert_eq!(single.matrix(), cs[0].matrix());
        let folded = or_many(&cs).unwrap();
        let manual = or(&or(&cs[0], &cs[1]).unwrap(), &cs[2]).unwrap();
        assert!(frob_diff(folded.matrix(), manual.matrix()) < 1e-12);
        assert!(or_many(&[]).is_err());
    }

    #[test]
    fn combination_rejects_mixed_apertures_and_dims() {
        let mut rng = StdRng::seed_from_u64(15);
        let c1 = compute_conceptor(&random_matrix(&mut rng, 4, 5), 1.0).unwrap();
        let c2 = compute_conceptor(&random_matrix(&mut rng, 4, 5), 2.0).unwrap();
        assert!(matches!(or(&c1, &c2), Err(Error::ApertureMismatch { .. })));
        assert!(matches!(and(&c1, &c2), Err(Error::ApertureMismatch { .. })));
        let c3 = compute_conceptor(&random_matrix(&mut rng, 3, 5), 1.0).unwrap();
        assert!(matches!(or(&c1, &c3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn aperture_identity_and_scalar_case() {
        let mut rng = StdRng::seed_from_u64(16);
        let c = compute_conceptor(&random_matrix(&mut rng, 5, 8), 2.0).unwrap();
        let same = aperture_adapt(&c, 1.0).unwrap();
        assert!(frob_diff(same.matrix(), c.matrix()) < 1e-12);
        assert_eq!(same.alpha(), 2.0);

        // λ = 1/2, γ = 10: 0.5 / (0.5 + 0.01·0.5) = 100/101.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5]));
        let c = Conceptor::from_parts(m, 1.0, 1).unwrap();
        let adapted = aperture_adapt(&c, 10.0).unwrap();
        assert!((adapted.matrix()[(0, 0)] - 100.0 / 101.0).abs() < 1e-14);
        assert!((adapted.alpha() - 10.0).abs() < 1e-15);
        assert!(matches!(
            aperture_adapt(&c, 0.0),
            Err(Error::InvalidGamma { .. })
        ));
    }

    #[test]
    fn or_equals_aperture_adapted_union() {
        // Pooling two equal-size samples and widening the aperture by √2
        // must agree with OR of the per-sample conceptors.
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..5 {
            let z1 = random_matrix(&mut rng, 5, 6);
            let z2 = random_matrix(&mut rng, 5, 6);
            let mut pooled = DMatrix::zeros(5, 12);
            pooled.view_mut((0, 0), (5, 6)).copy_from(&z1);
            pooled.view_mut((0, 6), (5, 6)).copy_from(&z2);
            let alpha = 2.0;
            let c1 = compute_conceptor(&z1, alpha).unwrap();
            let c2 = compute_conceptor(&z2, alpha).unwrap();
            let union = compute_conceptor(&pooled, alpha).unwrap();
            let adapted = aperture_adapt(&union, 2.0f64.sqrt()).unwrap();
            let ored = or(&c1, &c2).unwrap();
            assert!(
                frob_diff(adapted.matrix(), ored.matrix()) < 1e-8,
                "union+aperture vs OR differ by {}",
                frob_diff(adapted.matrix(), ored.matrix())
            );
        }
    }

    #[test]
    fn apply_debias_diagonal_action() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]));
        let c = Conceptor::from_parts(m, 1.0, 1).unwrap();
        let mut table = EmbeddingTable::new(2);
        table.insert("w", vec![2.0, 3.0]).unwrap();
        let debiased = c.negate().apply_debias(&table).unwrap();
        assert_eq!(debiased.get("w").unwrap(), &[1.0, 3.0]);
    }

    #[test]
    fn apply_debias_checks_dimension() {
        let c = zero_conceptor(3, 1.0);
        let table = EmbeddingTable::new(2);
        let err = c.negate().apply_debias(&table).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains('2'), "got: {msg}");
    }

    #[test]
    fn apply_debias_scales_principal_components() {
        // Component i of the debiased sample must shrink by exactly
        // α⁻²/(σᵢ + α⁻²) relative to the original, in the eigenbasis of R.
        let mut rng = StdRng::seed_from_u64(18);
        let d = 6;
        let z = random_matrix(&mut rng, d, 4);
        let alpha = 2.0;
        let c = compute_conceptor(&z, alpha).unwrap();
        let spectrum = shrinkage_spectrum(&z, alpha).unwrap();
        let r = &z * z.transpose() / 4.0;
        let (_, u) = sym_eigen_desc(&r);

        let mut table = EmbeddingTable::new(d);
        for (j, col) in z.column_iter().enumerate() {
            table
                .insert(format!("w{j}"), col.iter().copied().collect())
                .unwrap();
        }
        let debiased = c.negate().apply_debias(&table).unwrap();
        for (j, _) in z.column_iter().enumerate() {
            let original = DVector::from_column_slice(table.get(&format!("w{j}")).unwrap());
            let shrunk = DVector::from_column_slice(debiased.get(&format!("w{j}")).unwrap());
            let orig_coords = u.transpose() * original;
            let new_coords = u.transpose() * shrunk;
            for (i, entry) in spectrum.entries().iter().enumerate() {
                let expected = entry.gain * orig_coords[i];
                assert!(
                    (new_coords[i] - expected).abs() < 1e-6,
                    "component {i} of sample {j}: {} vs {}",
                    new_coords[i],
                    expected
                );
            }
        }
    }

    #[test]
    fn apply_debias_is_linear() {
        let mut rng = StdRng::seed_from_u64(19);
        let c = compute_conceptor(&random_matrix(&mut rng, 3, 5), 1.0).unwrap();
        let n = c.negate();
        let mut table = EmbeddingTable::new(3);
        let a = vec![0.3, -0.7, 1.1];
        let b = vec![-0.2, 0.5, 0.9];
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        table.insert("a", a).unwrap();
        table.insert("b", b).unwrap();
        table.insert("sum", sum).unwrap();
        let out = n.apply_debias(&table).unwrap();
        let (da, db, ds) = (
            out.get("a").unwrap(),
            out.get("b").unwrap(),
            out.get("sum").unwrap(),
        );
        for i in 0..3 {
            assert!((da[i] + db[i] - ds[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn shrinkage_spectrum_hand_case_and_consistency() {
        // σ = (1, 0) at α = 1 ⇒ gains (1/2, 1).
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s = shrinkage_spectrum(&z, 1.0).unwrap();
        assert!((s.entries()[0].sigma - 1.0).abs() < 1e-14);
        assert!((s.entries()[0].gain - 0.5).abs() < 1e-14);
        assert!((s.entries()[1].gain - 1.0).abs() < 1e-14);

        // Gains must be exactly the eigenvalues of I − C.
        let mut rng = StdRng::seed_from_u64(20);
        let z = random_matrix(&mut rng, 5, 7);
        let c = compute_conceptor(&z, 2.0).unwrap();
        let s = shrinkage_spectrum(&z, 2.0).unwrap();
        let n = c.negate().matrix();
        let (n_eigs, _) = sym_eigen_desc(&n); // descending = gains ascending σ
        let mut gains: Vec<f64> = s.entries().iter().map(|e| e.gain).collect();
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (g, ne) in gains.iter().zip(n_eigs.iter()) {
            assert!((g - ne).abs() < 1e-10, "gain {g} vs eig(I−C) {ne}");
        }
        // Zero sample: every gain is exactly 1.
        let s = shrinkage_spectrum(&DMatrix::zeros(3, 2), 2.0).unwrap();
        assert!(s.entries().iter().all(|e| e.gain == 1.0));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let mut rng = StdRng::seed_from_u64(21);
        let c = compute_conceptor(&random_matrix(&mut rng, 5, 9), 1.7).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.conc");
        save_conceptor(&c, &path).unwrap();
        let back = load_conceptor(&path).unwrap();
        assert_eq!(back.alpha().to_bits(), c.alpha().to_bits());
        assert_eq!(back.sample_count(), c.sample_count());
        for (a, b) in c.matrix().iter().zip(back.matrix().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Second save must produce identical bytes.
        let path2 = dir.path().join("c2.conc");
        save_conceptor(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.conc");

        std::fs::write(&path, b"NOPE").unwrap();
        let err = load_conceptor(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "got: {err}");

        std::fs::write(&path, b"NOPExxxxxxxxxxxxxxxxxxxxxxxxx").unwrap();
        let err = load_conceptor(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "got: {err}");

        // Valid header claiming d=2 but body cut short.
        let c = zero_conceptor(2, 1.0);
        save_conceptor(&c, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, &bytes).unwrap();
        let err = load_conceptor(&path).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("expected") && msg.contains("got"),
            "got: {msg}"
        );

        // Dimension that overflows when squared.
        let mut bytes = vec![];
        bytes.extend_from_slice(b"CONC");
        bytes.push(1);
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_conceptor(&path).unwrap_err();
        assert!(err.to_string().contains("overflow"), "got: {err}");
    }

    #[test]
    fn from_parts_validates_invariants() {
        // Asymmetric.
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.5]);
        assert!(Conceptor::from_parts(m, 1.0, 1).is_err());
        // Eigenvalue at 1 (identity) exceeds the cap.
        let m = DMatrix::identity(2, 2);
        assert!(Conceptor::from_parts(m, 1.0, 1).is_err());
        // Negative definite part.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.2, 0.5]));
        assert!(Conceptor::from_parts(m, 1.0, 1).is_err());
        // Bad alpha / sample count.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.5]));
        assert!(Conceptor::from_parts(m.clone(), -1.0, 1).is_err());
        assert!(Conceptor::from_parts(m.clone(), 1.0, 0).is_err());
        assert!(Conceptor::from_parts(m, 1.0, 3).is_ok());
    }

    #[test]
    fn eq1_objective_is_minimized_by_closed_form() {
        // J(C) = (1/k)‖Z − CZ‖² + α⁻²‖C‖²; the computed C must beat nearby
        // perturbations. (The full gradient-descent check lives in the
        // acceptance suite; this is a fast smoke version.)
        let mut rng = StdRng::seed_from_u64(22);
        let z = random_matrix(&mut rng, 4, 8);
        let alpha = 2.0f64;
        let c = compute_conceptor(&z, alpha).unwrap();
        let objective = |m: &DMatrix<f64>| -> f64 {
            let resid = &z - m * &z;
            resid.norm_squared() / z.ncols() as f64 + alpha.powi(-2) * m.norm_squared()
        };
        let base = objective(c.matrix());
        for _ in 0..5 {
            let dir = random_matrix(&mut rng, 4, 4);
            let dir = &dir / dir.norm();
            let perturbed = c.matrix() + 1e-3 * dir;
            assert!(
                objective(&perturbed) > base,
                "perturbation must increase the objective"
            );
        }
    }
}
