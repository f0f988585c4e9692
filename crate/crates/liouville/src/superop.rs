//! Dense operator and superoperator algebra on a d-dimensional Hilbert space.
//!
//! Superoperators are d²×d² complex matrices acting on column-vectorized
//! operators: `vec(ρ)[i + j·d] = ρ[i,j]` (column stacking), so that
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`. The vectorization convention is fixed
//! here because every superoperator matrix in the crate depends on it.
//!
//! The exact, non-perturbative eigendecomposition of a generator
//! ([`spectral_decompose`]) is the oracle against which all perturbative
//! results are checked.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{c64, Eig, Eigh, Inverse, SVD, UPLO};

use crate::error::{Error, Result};
use crate::Tolerances;

/// Dense complex linear map on the system Hilbert space.
///
/// A plain matrix alias; invariants (finite entries, Hermiticity where
/// required) are enforced at the operations that need them.
pub type HilbertOperator = Array2<c64>;

pub const I: c64 = c64::new(0.0, 1.0);
pub const ONE: c64 = c64::new(1.0, 0.0);
pub const ZERO: c64 = c64::new(0.0, 0.0);

// ---------------------------------------------------------------------------
// Small matrix helpers
// ---------------------------------------------------------------------------

/// Conjugate transpose.
pub fn dagger(a: &Array2<c64>) -> Array2<c64> {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &Array2<c64>) -> c64 {
    a.diag().iter().copied().sum()
}

/// Hilbert-Schmidt inner product `tr(A† B)`.
pub fn hs_inner(a: &Array2<c64>, b: &Array2<c64>) -> c64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_norm(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Max-entry deviation of `A` from its conjugate transpose.
pub fn hermiticity_deviation(a: &Array2<c64>) -> f64 {
    let ad = dagger(a);
    (&ad - a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Column-stacking vectorization: `vec(ρ)[i + j·d] = ρ[i,j]`.
pub fn vectorize(a: &Array2<c64>) -> Array1<c64> {
    let d = a.nrows();
    Array1::from_shape_fn(d * d, |mu| a[[mu % d, mu / d]])
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &ArrayView1<c64>, dim: usize) -> Array2<c64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

fn kron(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// SuperOperator
// ---------------------------------------------------------------------------

/// A linear map on operators, stored as a d²×d² matrix acting on
/// column-vectorized operators. Units are inverse time for Liouvillian
/// blocks.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    dim: usize,
    matrix: Array2<c64>,
}

impl SuperOperator {
    pub fn zeros(dim: usize) -> Self {
        SuperOperator {
            dim,
            matrix: Array2::zeros((dim * dim, dim * dim)),
        }
    }

    pub fn from_matrix(dim: usize, matrix: Array2<c64>) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "superoperator matrix must be {n}x{n} for dim {dim}, got {r}x{c}",
                n = dim * dim,
                r = matrix.nrows(),
                c = matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput(
                "superoperator matrix has non-finite entries".into(),
            ));
        }
        Ok(SuperOperator { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.matrix
    }

    pub fn apply(&self, op: &Array2<c64>) -> Array2<c64> {
        let v = vectorize(op);
        let w = self.matrix.dot(&v);
        devectorize(&w.view(), self.dim)
    }

    pub fn apply_vec(&self, v: &ArrayView1<c64>) -> Array1<c64> {
        self.matrix.dot(v)
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn scaled(&self, s: c64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix.mapv(|z| z * s),
        }
    }

    pub fn add(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn norm(&self) -> f64 {
        frobenius_norm(&self.matrix)
    }

    /// Residual of trace preservation: the vectorized identity functional
    /// applied from the left, `max_ν |Σ_i [S]_{(i,i),ν}|`. Zero for a
    /// physical generator.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for nu in 0..d * d {
            let mut acc = ZERO;
            for i in 0..d {
                acc += self.matrix[[i + i * d, nu]];
            }
            worst = worst.max(acc.norm());
        }
        worst
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_residual() <= tol
    }
}

/// Superoperator of left multiplication, `ρ ↦ Aρ`, i.e. `I ⊗ A`.
pub fn spre(a: &Array2<c64>) -> SuperOperator {
    let d = a.nrows();
    SuperOperator {
        dim: d,
        matrix: kron(&Array2::eye(d), a),
    }
}

/// Superoperator of right multiplication, `ρ ↦ ρB`, i.e. `Bᵀ ⊗ I`.
pub fn spost(b: &Array2<c64>) -> SuperOperator {
    let d = b.nrows();
    SuperOperator {
        dim: d,
        matrix: kron(&b.t().to_owned(), &Array2::eye(d)),
    }
}

/// The map `ρ ↦ -i[H, ρ]` without Hermiticity validation.
pub(crate) fn commutator_generator(h: &Array2<c64>) -> SuperOperator {
    spre(h).sub(&spost(h)).scaled(-I)
}

/// Free Liouvillian `ρ ↦ -i[H, ρ]` of a Hermitian Hamiltonian.
///
/// In the energy basis, `|ω_i><ω_j|` is an eigen-operator with eigenvalue
/// `-i ω_ij`.
pub fn free_liouvillian(h: &Array2<c64>, tol: &Tolerances) -> Result<SuperOperator> {
    let dev = hermiticity_deviation(h);
    if dev > tol.hermiticity {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: tol.hermiticity,
        });
    }
    Ok(commutator_generator(h))
}

/// Lindblad dissipator `ρ ↦ rate·(LρL† - ½{L†L, ρ})`. Trace-preserving by
/// construction.
pub fn lindblad_dissipator(l: &Array2<c64>, rate: f64) -> Result<SuperOperator> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidInput(format!(
            "dissipator rate must be nonnegative, got {rate}"
        )));
    }
    let ld = dagger(l);
    let ldl = ld.dot(l);
    let half = c64::new(0.5, 0.0);
    let sandwich = spre(l).compose(&spost(&ld));
    let anti = spre(&ldl).scaled(half).add(&spost(&ldl).scaled(half));
    Ok(sandwich.sub(&anti).scaled(c64::new(rate, 0.0)))
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// Hermitian, unit-trace operator. Positivity is deliberately *not*
/// required: auditing its violation is the point of this crate.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Array2<c64>,
}

impl DensityMatrix {
    pub fn new(matrix: Array2<c64>, tol: &Tolerances) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidDensityMatrix("matrix is not square".into()));
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > tol.hermiticity {
            return Err(Error::InvalidDensityMatrix(format!(
                "Hermiticity deviation {dev:.3e} exceeds {:.3e}",
                tol.hermiticity
            )));
        }
        let tr = trace(&matrix);
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} deviates from 1 beyond {:.3e}",
                tol.trace
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Pure state `|k><k|` in the computational basis.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = Array2::zeros((dim, dim));
        m[[k, k]] = ONE;
        DensityMatrix { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = Array2::eye(dim).mapv(|z: c64| z / dim as f64);
        DensityMatrix { matrix: m }
    }

    /// Symmetrize and renormalize an approximately Hermitian matrix,
    /// returning the state together with the removed Hermiticity residue.
    pub fn hermitized(matrix: Array2<c64>) -> (Self, f64) {
        let ad = dagger(&matrix);
        let residue = frobenius_norm(&(&matrix - &ad)) / 2.0;
        let mut sym = (&matrix + &ad).mapv(|z| z * 0.5);
        let tr = trace(&sym);
        if tr.norm() > 0.0 {
            sym.mapv_inplace(|z| z / tr);
        }
        (DensityMatrix { matrix: sym }, residue)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<c64> {
        self.matrix
    }
}

// ---------------------------------------------------------------------------
// Energy basis and Bohr frequencies
// ---------------------------------------------------------------------------

/// A resonance between two distinct Bohr-frequency pairs. Collisions with
/// the diagonal (degenerate energies, `ω_ij ≈ 0` for i ≠ j) are recorded
/// with `pair_b = (j, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    pub pair_a: (usize, usize),
    pub pair_b: (usize, usize),
    pub frequency: f64,
}

/// Energy eigenbasis of a Hamiltonian with its Bohr-frequency table.
#[derive(Debug, Clone)]
pub struct EnergyBasis {
    energies: Vec<f64>,
    /// Unitary whose columns are the energy eigenvectors; `X_E = U† X U`.
    transform: Array2<c64>,
    bohr: Vec<(usize, usize, f64)>,
    resonances: Vec<Resonance>,
}

impl EnergyBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn transform(&self) -> &Array2<c64> {
        &self.transform
    }

    /// All ordered pairs `(i, j, ω_ij = ω_i - ω_j)` with `i ≠ j`.
    pub fn bohr_frequencies(&self) -> &[(usize, usize, f64)] {
        &self.bohr
    }

    pub fn bohr_frequency(&self, i: usize, j: usize) -> f64 {
        self.energies[i] - self.energies[j]
    }

    /// Sorted, deduplicated set of Bohr frequencies including 0.
    pub fn bohr_set(&self, tol: f64) -> Vec<f64> {
        let mut all: Vec<f64> = self.bohr.iter().map(|&(_, _, w)| w).collect();
        all.push(0.0);
        all.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for w in all {
            if out.last().is_none_or(|&p| (w - p).abs() > tol) {
                out.push(w);
            }
        }
        out
    }

    pub fn resonances(&self) -> &[Resonance] {
        &self.resonances
    }

    pub fn is_resonant(&self) -> bool {
        !self.resonances.is_empty()
    }

    pub fn resonance_description(&self) -> String {
        self.resonances
            .iter()
            .map(|r| {
                format!(
                    "ω({},{}) = ω({},{}) = {:.6e}",
                    r.pair_a.0, r.pair_a.1, r.pair_b.0, r.pair_b.1, r.frequency
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Transform an operator from the input basis to the energy basis.
    pub fn to_energy_basis(&self, op: &Array2<c64>) -> Array2<c64> {
        let ud = dagger(&self.transform);
        ud.dot(op).dot(&self.transform)
    }

    pub fn from_energy_basis(&self, op: &Array2<c64>) -> Array2<c64> {
        let ud = dagger(&self.transform);
        self.transform.dot(op).dot(&ud)
    }

    /// Transform a superoperator from the input basis to the energy basis:
    /// `S_E = (Uᵀ ⊗ U†) S (Ū ⊗ U)`.
    pub fn superop_to_energy_basis(&self, s: &SuperOperator) -> SuperOperator {
        let u = &self.transform;
        let ut = u.t().to_owned();
        let ud = dagger(u);
        let uc = u.mapv(|z| z.conj());
        let fwd = kron(&ut, &ud);
        let bwd = kron(&uc, u);
        SuperOperator {
            dim: self.dim(),
            matrix: fwd.dot(s.matrix()).dot(&bwd),
        }
    }

    /// The Hamiltonian expressed in its own energy basis: `diag(ω_i)`.
    pub fn energy_hamiltonian(&self) -> Array2<c64> {
        let d = self.dim();
        Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j {
                c64::new(self.energies[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Free Liouvillian in the energy basis (diagonal superoperator with
    /// entries `-i ω_ij`).
    pub fn free_liouvillian(&self) -> SuperOperator {
        let d = self.dim();
        let mut m = Array2::zeros((d * d, d * d));
        for i in 0..d {
            for j in 0..d {
                let mu = i + j * d;
                m[[mu, mu]] = -I * (self.energies[i] - self.energies[j]);
            }
        }
        SuperOperator { dim: d, matrix: m }
    }
}

/// Diagonalize a Hermitian Hamiltonian, sort energies ascending, and flag
/// any off-diagonal Bohr-frequency degeneracy (resonance).
///
/// Downstream perturbative operations refuse to run while the resonance
/// flag is set, because the perturbation theory assumes a non-degenerate
/// off-diagonal spectrum of the free Liouvillian.
pub fn bohr_spectrum(h: &Array2<c64>, tol: &Tolerances) -> Result<EnergyBasis> {
    let dev = hermiticity_deviation(h);
    if dev > tol.hermiticity {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: tol.hermiticity,
        });
    }
    let (energies, vectors) = h.eigh(UPLO::Lower)?;
    // LAPACK returns ascending eigenvalues; keep the pairing explicit anyway.
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let d = energies.len();
    let sorted: Vec<f64> = order.iter().map(|&k| energies[k]).collect();
    let transform = Array2::from_shape_fn((d, d), |(i, j)| vectors[[i, order[j]]]);

    let mut bohr = Vec::with_capacity(d * (d - 1));
    for i in 0..d {
        for j in 0..d {
            if i != j {
                bohr.push((i, j, sorted[i] - sorted[j]));
            }
        }
    }
    let scale = bohr
        .iter()
        .map(|&(_, _, w)| w.abs())
        .fold(1.0f64, f64::max);
    let eps = tol.resonance * scale;

    let mut resonances = Vec::new();
    for (a, &(i, j, wa)) in bohr.iter().enumerate() {
        if wa.abs() <= eps {
            resonances.push(Resonance {
                pair_a: (i, j),
                pair_b: (j, j),
                frequency: wa,
            });
        }
        for &(k, l, wb) in bohr.iter().skip(a + 1) {
            if (wa - wb).abs() <= eps {
                resonances.push(Resonance {
                    pair_a: (i, j),
                    pair_b: (k, l),
                    frequency: wa,
                });
            }
        }
    }

    Ok(EnergyBasis {
        energies: sorted,
        transform,
        bohr,
        resonances,
    })
}

// ---------------------------------------------------------------------------
// Spectral decomposition
// ---------------------------------------------------------------------------

/// One eigen-branch of a superoperator: eigenvalue, right eigen-operator,
/// and the left eigen-operator defining the functional `X ↦ tr(left† X)`.
#[derive(Debug, Clone)]
pub struct SpectralBranch {
    pub eigenvalue: c64,
    pub right: Array2<c64>,
    pub left: Array2<c64>,
}

impl SpectralBranch {
    /// The left functional applied to an operator, `<o*, X> = tr(left† X)`.
    pub fn overlap(&self, x: &Array2<c64>) -> c64 {
        hs_inner(&self.left, x)
    }
}

/// Biorthonormal right/left eigen-system of a superoperator.
///
/// Branches are ordered by `(Re f, Im f, index)`. Right eigen-operators
/// have unit Hilbert-Schmidt norm with the largest-magnitude entry (first
/// occurrence row-major in the working basis) rotated real positive; left
/// eigen-operators are rescaled so `<o*_j, o_i> = δ_ij`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub dim: usize,
    pub branches: Vec<SpectralBranch>,
    /// Indices of branches whose eigenvalues cluster within the degeneracy
    /// tolerance; only groups with more than one member are listed.
    pub degenerate_groups: Vec<Vec<usize>>,
}

impl SpectralDecomposition {
    /// Rebuild the superoperator as `Σ_k f_k o_k o*_k`.
    pub fn reconstruct(&self) -> SuperOperator {
        let d = self.dim;
        let mut m = Array2::<c64>::zeros((d * d, d * d));
        for b in &self.branches {
            let v = vectorize(&b.right);
            let w = vectorize(&b.left).mapv(|z| z.conj());
            for r in 0..d * d {
                for c in 0..d * d {
                    m[[r, c]] += b.eigenvalue * v[r] * w[c];
                }
            }
        }
        SuperOperator { dim: d, matrix: m }
    }

    /// Max deviation of `<o*_j, o_i>` from `δ_ij`.
    pub fn biorthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, bj) in self.branches.iter().enumerate() {
            for (i, bi) in self.branches.iter().enumerate() {
                let ov = bj.overlap(&bi.right);
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((ov - target).norm());
            }
        }
        worst
    }

    /// The unique branch with `|f| <= tol` for a trace-preserving
    /// dissipative generator.
    pub fn stationary_branch(&self, tol: f64) -> Result<&SpectralBranch> {
        let hits: Vec<&SpectralBranch> = self
            .branches
            .iter()
            .filter(|b| b.eigenvalue.norm() <= tol)
            .collect();
        match hits.len() {
            1 => Ok(hits[0]),
            0 => Err(Error::NonUniqueSteadyState(
                "no zero-eigenvalue branch found".into(),
            )),
            n => Err(Error::NonUniqueSteadyState(format!(
                "{n} zero-eigenvalue branches found"
            ))),
        }
    }

    /// Exact steady state: the stationary branch normalized to unit trace.
    pub fn steady_state(&self, tol: f64) -> Result<DensityMatrix> {
        let branch = self.stationary_branch(tol)?;
        let tr = trace(&branch.right);
        if tr.norm() < 1e-14 {
            return Err(Error::NonUniqueSteadyState(
                "stationary branch is traceless".into(),
            ));
        }
        let m = branch.right.mapv(|z| z / tr);
        Ok(DensityMatrix::hermitized(m).0)
    }
}

/// Rotate the phase of `op` so its largest-magnitude entry (first
/// occurrence row-major) is real positive, and scale to unit Frobenius
/// norm. Returns the factor that divided the operator.
fn phase_normalize(op: &mut Array2<c64>) -> c64 {
    let mut best = ZERO;
    let mut mag = -1.0f64;
    for z in op.iter() {
        let n = z.norm();
        if n > mag {
            mag = n;
            best = *z;
        }
    }
    let norm = frobenius_norm(op);
    if mag <= 0.0 || norm == 0.0 {
        return ONE;
    }
    let scale = (best / mag) * norm;
    op.mapv_inplace(|z| z / scale);
    scale
}

/// Full biorthonormal spectral decomposition of a superoperator.
///
/// Fails explicitly for defective or ill-conditioned eigenproblems rather
/// than returning silent garbage: the eigenvector condition number is
/// estimated by SVD and the reconstruction residual is verified.
pub fn spectral_decompose(s: &SuperOperator, tol: &Tolerances) -> Result<SpectralDecomposition> {
    let n = s.dim * s.dim;
    let (values, vectors) = s.matrix.eig()?;
    let (_, sv, _) = vectors.svd(false, false)?;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > tol.condition_max {
        return Err(Error::IllConditioned {
            condition,
            limit: tol.condition_max,
        });
    }
    let winv = vectors.inv()?;

    let mut indexed: Vec<usize> = (0..n).collect();
    indexed.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
            .then(a.cmp(&b))
    });

    let mut branches = Vec::with_capacity(n);
    for &k in &indexed {
        let mut right = devectorize(&vectors.column(k), s.dim);
        let scale = phase_normalize(&mut right);
        // Keep w·v = 1 bilinear: the right column was divided by `scale`,
        // so the matching row of V⁻¹ is multiplied by it.
        let w: Array1<c64> = winv.row(k).mapv(|z| z * scale);
        let left = devectorize(&w.mapv(|z| z.conj()).view(), s.dim);
        branches.push(SpectralBranch {
            eigenvalue: values[k],
            right,
            left,
        });
    }

    let scale = branches
        .iter()
        .map(|b| b.eigenvalue.norm())
        .fold(1.0f64, f64::max);
    let eps = tol.cluster * scale;
    let mut group_of: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in (a + 1)..n {
            if (branches[a].eigenvalue - branches[b].eigenvalue).norm() <= eps {
                let (ga, gb) = (find_root(&mut group_of, a), find_root(&mut group_of, b));
                if ga != gb {
                    group_of[gb.max(ga)] = ga.min(gb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for k in 0..n {
        let root = find_root(&mut group_of, k);
        groups.entry(root).or_default().push(k);
    }
    let degenerate_groups: Vec<Vec<usize>> =
        groups.into_values().filter(|g| g.len() > 1).collect();

    let dec = SpectralDecomposition {
        dim: s.dim,
        branches,
        degenerate_groups,
    };

    let rebuilt = dec.reconstruct();
    let denom = s.norm().max(1e-300);
    let residual = rebuilt.sub(s).norm() / denom;
    if residual > tol.eigen_residual {
        return Err(Error::Defective(format!(
            "reconstruction residual {residual:.3e} exceeds {:.3e}",
            tol.eigen_residual
        )));
    }
    Ok(dec)
}

fn find_root(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn complex_matrix(d: usize) -> impl Strategy<Value = Array2<c64>> {
        proptest::collection::vec(
            (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| c64::new(r, i)),
            d * d,
        )
        .prop_map(move |v| Array2::from_shape_vec((d, d), v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn vectorize_roundtrip(d in 2usize..=8, seed in 0u64..1000) {
            let a = Array2::from_shape_fn((d, d), |(i, j)| {
                let x = (seed as f64) * 0.001 + (i * d + j) as f64;
                c64::new(x.sin(), x.cos())
            });
            let back = devectorize(&vectorize(&a).view(), d);
            prop_assert_eq!(a, back);
        }

        #[test]
        fn random_lindblad_generators_preserve_trace(d in 2usize..=5, m in complex_matrix(4)) {
            let op = Array2::from_shape_fn((d, d), |(i, j)| m[[i % 4, j % 4]]);
            let gen = lindblad_dissipator(&op, 0.9).unwrap();
            prop_assert!(gen.trace_preservation_residual() < 1e-10 * (1.0 + gen.norm()));
        }
    }

    #[test]
    fn random_stable_generators_decompose_biorthonormally() {
        // random stable generators, d <= 5: biorthonormality to 1e-8 and
        // reconstruction to 1e-8 relative
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        for d in 2..=5usize {
            let h = {
                let a = Array2::from_shape_fn((d, d), |_| c64::new(unit(), unit()));
                let ad = dagger(&a);
                (&a + &ad).mapv(|z| z * 0.5)
            };
            let jump = Array2::from_shape_fn((d, d), |_| c64::new(unit(), unit()));
            let l = free_liouvillian(&h, &Tolerances::default())
                .unwrap()
                .add(&lindblad_dissipator(&jump, 0.6).unwrap());
            let dec = spectral_decompose(&l, &Tolerances::default()).unwrap();
            assert!(dec.biorthonormality_residual() < 1e-8, "d = {d}");
            let rel = dec.reconstruct().sub(&l).norm() / l.norm();
            assert!(rel < 1e-8, "d = {d}: {rel}");
        }
    }
}
