//! Degenerate canonical perturbation theory of a stationary Liouvillian.
//!
//! The generator is handled as ordered blocks `L0 + c²·L2 + c⁴·L4` with the
//! coupling bookkeeping scalar `c` explicit in the type; blocks are stored
//! per unit coupling and order counting is never inferred from magnitudes.
//!
//! Perturbation theory here is always degenerate: the kernel of the free
//! Liouvillian is the whole diagonal subspace (energy-basis projectors).
//! Off-diagonal sectors get their full second-order corrections from `L2`
//! alone. On the diagonal subspace the second-order Pauli matrix must be
//! diagonalized exactly, and the second-order corrections to its branch
//! operators require fourth-order information: the Pauli projection of `L4`
//! plus the `L2` block folded once through the off-diagonal resolvent
//! (`-P L2 L0⁻¹ Q L2 P`). Those nominally fourth-order terms act at second
//! order because the smallest eigenvalue splittings in the degenerate
//! subspace are themselves second order. Without `L4` the diagonal sector
//! is accurate only to zeroth order, and the result is flagged as such.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, Inverse};

use crate::error::{Error, Result};
use crate::superop::{trace, DensityMatrix, EnergyBasis, SuperOperator, I, ONE, ZERO};
use crate::Tolerances;

// ---------------------------------------------------------------------------
// Perturbative Liouvillian
// ---------------------------------------------------------------------------

/// Ordered perturbative blocks of a stationary Liouvillian in the energy
/// basis, with the physical generator `L0 + c²·L2 + c⁴·L4`.
#[derive(Debug, Clone)]
pub struct PerturbativeLiouvillian {
    basis: EnergyBasis,
    l0: SuperOperator,
    l2: SuperOperator,
    l4: Option<SuperOperator>,
    coupling: f64,
    resonance_override: bool,
}

impl PerturbativeLiouvillian {
    /// Build from blocks already expressed in the energy basis of `basis`.
    ///
    /// `L0` is derived from the stored energies. Both perturbative blocks
    /// must be trace-preserving; a resonant Bohr spectrum is refused unless
    /// explicitly overridden with [`Self::with_resonance_override`].
    pub fn new(
        basis: EnergyBasis,
        l2: SuperOperator,
        l4: Option<SuperOperator>,
        coupling: f64,
        tol: &Tolerances,
    ) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "coupling must be a nonnegative real, got {coupling}"
            )));
        }
        let d = basis.dim();
        if l2.dim() != d || l4.as_ref().is_some_and(|b| b.dim() != d) {
            return Err(Error::InvalidInput(
                "perturbative block dimension does not match the energy basis".into(),
            ));
        }
        for (name, block) in std::iter::once(("L2", &l2)).chain(l4.iter().map(|b| ("L4", b))) {
            let residual = block.trace_preservation_residual();
            let bound = tol.trace * block.norm().max(1.0);
            if residual > bound {
                return Err(Error::InvalidInput(format!(
                    "{name} block is not trace-preserving: residual {residual:.3e}"
                )));
            }
        }
        let l0 = basis.free_liouvillian();
        Ok(PerturbativeLiouvillian {
            basis,
            l0,
            l2,
            l4,
            coupling,
            resonance_override: false,
        })
    }

    /// Accept a resonant Bohr spectrum at the caller's responsibility.
    /// Vanishing denominators still fail individually.
    pub fn with_resonance_override(mut self) -> Self {
        self.resonance_override = true;
        self
    }

    pub fn basis(&self) -> &EnergyBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn l0(&self) -> &SuperOperator {
        &self.l0
    }

    pub fn l2(&self) -> &SuperOperator {
        &self.l2
    }

    pub fn l4(&self) -> Option<&SuperOperator> {
        self.l4.as_ref()
    }

    /// The physical generator `L0 + c²·L2 + c⁴·L4`.
    pub fn assembled(&self) -> SuperOperator {
        let c2 = c64::new(self.coupling * self.coupling, 0.0);
        let mut s = self.l0.add(&self.l2.scaled(c2));
        if let Some(l4) = &self.l4 {
            s = s.add(&l4.scaled(c2 * c2));
        }
        s
    }

    /// The truncated generator `L0 + c²·L2` (the order-2 master equation).
    pub fn assembled_truncated(&self) -> SuperOperator {
        let c2 = c64::new(self.coupling * self.coupling, 0.0);
        self.l0.add(&self.l2.scaled(c2))
    }

    fn refuse_resonance(&self) -> Result<()> {
        if self.basis.is_resonant() && !self.resonance_override {
            return Err(Error::Resonance(self.basis.resonance_description()));
        }
        Ok(())
    }

    /// Second-order eigenvalue and eigen-operator corrections for the
    /// off-diagonal sector `(i, j)`, per unit `c²`.
    ///
    /// `f2 = <ω_i| L2{|ω_i><ω_j|} |ω_j>`; the correction operator has a zero
    /// entry at `(i, j)` (intermediate normalization) and quotient entries
    /// with denominator `-i(ω_ij - ω_i'j')` elsewhere, including the
    /// degenerate-subspace components with denominator `-i·ω_ij`.
    pub fn offdiag_corrections(&self, i: usize, j: usize) -> Result<OffDiagonalCorrection> {
        let d = self.dim();
        if i == j || i >= d || j >= d {
            return Err(Error::InvalidInput(format!(
                "({i}, {j}) is not an off-diagonal index pair for dim {d}"
            )));
        }
        self.refuse_resonance()?;
        let mut target = Array2::<c64>::zeros((d, d));
        target[[i, j]] = ONE;
        let image = self.l2.apply(&target);
        let f2 = image[[i, j]];
        let w_ij = self.basis.bohr_frequency(i, j);
        let scale = self
            .basis
            .energies()
            .iter()
            .fold(1.0f64, |m, e| m.max(e.abs()));
        let mut o2 = Array2::<c64>::zeros((d, d));
        for ip in 0..d {
            for jp in 0..d {
                if (ip, jp) == (i, j) {
                    continue;
                }
                let denom = -I * (w_ij - self.basis.bohr_frequency(ip, jp));
                if denom.norm() < 1e-12 * scale {
                    return Err(Error::Resonance(format!(
                        "vanishing denominator between sectors ({i},{j}) and ({ip},{jp})"
                    )));
                }
                o2[[ip, jp]] = image[[ip, jp]] / denom;
            }
        }
        Ok(OffDiagonalCorrection { f2, o2 })
    }

    /// Off-diagonal components of the second-order correction to a
    /// degenerate-subspace operator `diag(v)`: `-L0⁻¹ Q L2 {diag(v)}`.
    fn degenerate_offdiag_correction(&self, diag: &Array1<c64>) -> Array2<c64> {
        let d = self.dim();
        let op = Array2::from_shape_fn((d, d), |(r, c)| if r == c { diag[r] } else { ZERO });
        let image = self.l2.apply(&op);
        Array2::from_shape_fn((d, d), |(r, c)| {
            if r == c {
                ZERO
            } else {
                image[[r, c]] / (I * self.basis.bohr_frequency(r, c))
            }
        })
    }

    /// Second-order Pauli matrix `W2` of the `L2` block, per unit `c²`.
    pub fn pauli_w2(&self) -> PauliMatrix {
        pauli_projection(&self.l2, &self.basis, PauliOrder::Two)
    }

    /// The `L2` block folded once through the off-diagonal resolvent,
    /// `-P L2 L0⁻¹ Q L2 P`, per unit `c⁴`.
    ///
    /// This is the part of the effective fourth-order Pauli matrix that is
    /// already determined by the second-order master equation.
    pub fn second_order_fold(&self) -> PauliMatrix {
        let d = self.dim();
        let mut entries = Array2::<c64>::zeros((d, d));
        for j in 0..d {
            let mut basis_vec = Array1::<c64>::zeros(d);
            basis_vec[j] = ONE;
            let resolvent = self.degenerate_offdiag_correction(&basis_vec);
            let image = self.l2.apply(&resolvent);
            for i in 0..d {
                entries[[i, j]] = image[[i, i]];
            }
        }
        PauliMatrix::new(PauliOrder::Four, entries)
    }

    /// Effective fourth-order Pauli matrix: the Pauli projection of `L4`
    /// plus [`Self::second_order_fold`]. `None` when no `L4` block was
    /// supplied, in which case diagonal-sector corrections are unavailable.
    pub fn effective_w4(&self) -> Option<PauliMatrix> {
        let l4 = self.l4.as_ref()?;
        let projected = pauli_projection(l4, &self.basis, PauliOrder::Four);
        let fold = self.second_order_fold();
        Some(PauliMatrix::new(
            PauliOrder::Four,
            &projected.entries + &fold.entries,
        ))
    }

    /// Assemble the perturbative spectrum at the requested order.
    ///
    /// Order 0 reproduces the exact spectrum of `L0`. Order 2 yields
    /// eigenvalues `-iω_ij + c²·f2` off the degenerate subspace and
    /// `c²·eig(W2)` on it; eigen-operators are corrected to second order,
    /// with the diagonal-sector correction applied only when `L4` is
    /// present. Per-branch flags record which corrections were applied.
    pub fn assemble_spectrum(&self, order: PerturbOrder, tol: &Tolerances) -> Result<PerturbativeSpectrum> {
        let d = self.dim();
        let c2 = c64::new(self.coupling * self.coupling, 0.0);
        let mut branches = Vec::with_capacity(d * d);

        match order {
            PerturbOrder::Zero => {
                for k in 0..d {
                    let mut op = Array2::<c64>::zeros((d, d));
                    op[[k, k]] = ONE;
                    branches.push(PerturbativeBranch {
                        sector: Sector::Degenerate(k),
                        eigenvalue: ZERO,
                        right: op.clone(),
                        left0: op,
                        accuracy: BranchAccuracy::Order0,
                    });
                }
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            continue;
                        }
                        let mut op = Array2::<c64>::zeros((d, d));
                        op[[i, j]] = ONE;
                        branches.push(PerturbativeBranch {
                            sector: Sector::OffDiagonal(i, j),
                            eigenvalue: -I * self.basis.bohr_frequency(i, j),
                            right: op.clone(),
                            left0: op,
                            accuracy: BranchAccuracy::Order0,
                        });
                    }
                }
                Ok(PerturbativeSpectrum {
                    dim: d,
                    coupling: self.coupling,
                    branches,
                    diagonal_sector_full_order: true,
                })
            }
            PerturbOrder::Two => {
                self.refuse_resonance()?;
                let w2 = self.pauli_w2();
                let mut degenerate = diagonalize_pauli(&w2, tol)?;
                let w4 = self.effective_w4();
                if let Some(w4) = &w4 {
                    degenerate = degenerate_correction(w4, &degenerate, tol)?;
                }
                let diag_accuracy = if w4.is_some() {
                    BranchAccuracy::Order2
                } else {
                    BranchAccuracy::Order2DiagonalOrder0
                };
                for (k, b) in degenerate.iter().enumerate() {
                    let mut op = Array2::from_shape_fn((d, d), |(r, c)| {
                        if r == c {
                            b.right[r]
                        } else {
                            ZERO
                        }
                    });
                    let qcorr = self.degenerate_offdiag_correction(&b.right);
                    op = &op + &qcorr.mapv(|z| z * c2);
                    if let Some(o2d) = &b.o2_diag {
                        for r in 0..d {
                            op[[r, r]] += c2 * o2d[r];
                        }
                    }
                    let left0 = Array2::from_shape_fn((d, d), |(r, c)| {
                        if r == c {
                            b.left[r].conj()
                        } else {
                            ZERO
                        }
                    });
                    branches.push(PerturbativeBranch {
                        sector: Sector::Degenerate(k),
                        eigenvalue: c2 * b.f2,
                        right: op,
                        left0,
                        accuracy: diag_accuracy,
                    });
                }
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            continue;
                        }
                        let corr = self.offdiag_corrections(i, j)?;
                        let mut op = corr.o2.mapv(|z| z * c2);
                        op[[i, j]] = ONE;
                        let mut left0 = Array2::<c64>::zeros((d, d));
                        left0[[i, j]] = ONE;
                        branches.push(PerturbativeBranch {
                            sector: Sector::OffDiagonal(i, j),
                            eigenvalue: -I * self.basis.bohr_frequency(i, j) + c2 * corr.f2,
                            right: op,
                            left0,
                            accuracy: BranchAccuracy::Order2,
                        });
                    }
                }
                Ok(PerturbativeSpectrum {
                    dim: d,
                    coupling: self.coupling,
                    branches,
                    diagonal_sector_full_order: w4.is_some(),
                })
            }
        }
    }

    /// Perturbative steady state at the requested order.
    ///
    /// Order 0 is the diagonal state built from the null vector of `W2`.
    /// Order 2 adds `c²` off-diagonal corrections from `L2` and, when `L4`
    /// is supplied, `c²` diagonal corrections through the effective
    /// fourth-order Pauli matrix. The result is trace-renormalized and
    /// Hermitized, with the removed residue reported.
    pub fn steady_state(&self, order: PerturbOrder, tol: &Tolerances) -> Result<SteadyState> {
        let d = self.dim();
        let w2 = self.pauli_w2();
        let branches = diagonalize_pauli(&w2, tol)?;
        let scale = branches
            .iter()
            .map(|b| b.f2.norm())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let zero_candidates: Vec<usize> = (0..branches.len())
            .filter(|&k| branches[k].f2.norm() <= 1e-8 * scale)
            .collect();
        if zero_candidates.len() != 1 {
            return Err(Error::NonUniqueSteadyState(format!(
                "{} stationary Pauli branches (need exactly 1)",
                zero_candidates.len()
            )));
        }
        let zb = &branches[zero_candidates[0]];
        let total: c64 = zb.right.iter().copied().sum();
        if total.norm() < 1e-12 {
            return Err(Error::NonUniqueSteadyState(
                "stationary Pauli branch is traceless".into(),
            ));
        }
        let rho0_diag = zb.right.mapv(|z| z / total);

        let mut matrix = Array2::from_shape_fn((d, d), |(r, c)| {
            if r == c {
                rho0_diag[r]
            } else {
                ZERO
            }
        });
        let mut accuracy = BranchAccuracy::Order0;
        if let PerturbOrder::Two = order {
            self.refuse_resonance()?;
            let c2 = c64::new(self.coupling * self.coupling, 0.0);
            let qcorr = self.degenerate_offdiag_correction(&rho0_diag);
            matrix = &matrix + &qcorr.mapv(|z| z * c2);
            accuracy = BranchAccuracy::Order2DiagonalOrder0;
            if let Some(w4) = self.effective_w4() {
                let normalized_zb = DegenerateBranch {
                    f2: zb.f2,
                    right: rho0_diag.clone(),
                    left: zb.left.mapv(|z| z * total),
                    o2_diag: None,
                };
                let mut all: Vec<DegenerateBranch> = branches
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        if k == zero_candidates[0] {
                            normalized_zb.clone()
                        } else {
                            b.clone()
                        }
                    })
                    .collect();
                all = degenerate_correction(&w4, &all, tol)?;
                let o2d = all[zero_candidates[0]]
                    .o2_diag
                    .as_ref()
                    .expect("correction fills o2_diag")
                    .clone();
                for r in 0..d {
                    matrix[[r, r]] += c2 * o2d[r];
                }
                accuracy = BranchAccuracy::Order2;
            }
        }

        let tr = trace(&matrix);
        matrix.mapv_inplace(|z| z / tr);
        let (state, residue) = DensityMatrix::hermitized(matrix);
        Ok(SteadyState {
            state,
            accuracy,
            hermitization_residue: residue,
        })
    }
}

/// Second-order corrections for one off-diagonal sector, per unit `c²`.
#[derive(Debug, Clone)]
pub struct OffDiagonalCorrection {
    pub f2: c64,
    pub o2: Array2<c64>,
}

// ---------------------------------------------------------------------------
// Pauli matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliOrder {
    Two,
    Four,
}

/// Degenerate-subspace projection of a Liouvillian block: the map from
/// diagonal density-matrix entries to diagonal entries, `[[W]]_ij =
/// <ω_i| block{|ω_j><ω_j|} |ω_i>`. Entries are expected real for physical
/// generators; the worst imaginary part is reported rather than dropped.
#[derive(Debug, Clone)]
pub struct PauliMatrix {
    pub order: PauliOrder,
    pub entries: Array2<c64>,
    pub imag_residue: f64,
}

impl PauliMatrix {
    pub fn new(order: PauliOrder, entries: Array2<c64>) -> Self {
        let imag_residue = entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        PauliMatrix {
            order,
            entries,
            imag_residue,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Trace preservation restricted to the diagonal subspace: worst
    /// absolute column sum.
    pub fn column_sum_residual(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|j| (0..d).map(|i| self.entries[[i, j]]).sum::<c64>().norm())
            .fold(0.0, f64::max)
    }
}

/// Project a Liouvillian block (in the energy basis) onto the degenerate
/// subspace.
pub fn pauli_projection(
    block: &SuperOperator,
    basis: &EnergyBasis,
    order: PauliOrder,
) -> PauliMatrix {
    let d = basis.dim();
    let mut entries = Array2::<c64>::zeros((d, d));
    for j in 0..d {
        let mut proj = Array2::<c64>::zeros((d, d));
        proj[[j, j]] = ONE;
        let image = block.apply(&proj);
        for i in 0..d {
            entries[[i, j]] = image[[i, i]];
        }
    }
    PauliMatrix::new(order, entries)
}

// ---------------------------------------------------------------------------
// Degenerate-subspace diagonalization
// ---------------------------------------------------------------------------

/// One branch of the diagonalized degenerate subspace: second-order
/// eigenvalue (per unit `c²`), right/left vectors of diagonal entries with
/// `left_j · right_i = δ_ij` (bilinear), and the second-order diagonal
/// correction once a fourth-order Pauli matrix is available.
#[derive(Debug, Clone)]
pub struct DegenerateBranch {
    pub f2: c64,
    pub right: Array1<c64>,
    pub left: Array1<c64>,
    pub o2_diag: Option<Array1<c64>>,
}

/// Diagonalize the second-order Pauli matrix into a biorthonormal branch
/// system.
///
/// The stationary branch (f2 = 0) is rescaled to a unit-1-norm, nonnegative
/// vector when it is elementwise sign-definite — the steady-state
/// candidate, whose left vector is then the all-ones functional for a
/// trace-preserving `W2`. Near-degenerate eigenvalue splittings are a hard
/// error: the perturbation theory implemented here has no prescription for
/// them.
pub fn diagonalize_pauli(w2: &PauliMatrix, tol: &Tolerances) -> Result<Vec<DegenerateBranch>> {
    let d = w2.dim();
    let (values, vectors) = w2.entries.eig()?;
    let scale = values.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let threshold = tol.pauli_gap * scale;
    for i in 0..d {
        for j in (i + 1)..d {
            let gap = (values[i] - values[j]).norm();
            if gap <= threshold || scale == 0.0 {
                return Err(Error::DegenerateSplitting {
                    i,
                    j,
                    gap,
                    threshold,
                });
            }
        }
    }
    let winv = vectors.inv()?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
            .then(a.cmp(&b))
    });

    let mut branches = Vec::with_capacity(d);
    for &k in &order {
        let mut right: Array1<c64> = vectors.column(k).to_owned();
        let mut left: Array1<c64> = winv.row(k).to_owned();
        let f2 = values[k];

        let is_zero = f2.norm() <= 1e-8 * scale.max(1e-300);
        let imag_max = right.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let re_min = right.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let re_max = right.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let sign_definite = imag_max <= 1e-10 && (re_min >= -1e-12 || re_max <= 1e-12);

        if is_zero && sign_definite {
            let total: c64 = right.iter().copied().sum();
            if total.norm() > 1e-12 {
                right.mapv_inplace(|z| c64::new((z / total).re.max(0.0), 0.0));
                left.mapv_inplace(|z| z * total);
            }
        } else {
            // phase convention: largest entry real positive, unit 2-norm
            let mut best = ONE;
            let mut mag = -1.0f64;
            for z in right.iter() {
                if z.norm() > mag {
                    mag = z.norm();
                    best = *z;
                }
            }
            let norm = right.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let factor = (best / mag) * norm;
            right.mapv_inplace(|z| z / factor);
            left.mapv_inplace(|z| z * factor);
        }
        branches.push(DegenerateBranch {
            f2,
            right,
            left,
            o2_diag: None,
        });
    }
    Ok(branches)
}

/// Fill the second-order diagonal-sector corrections from a fourth-order
/// Pauli matrix:
/// `o2_diag_i = Σ_{j≠i} (left_j · W4 right_i) / (f2_i - f2_j) · right_j`,
/// per unit `c²`.
pub fn degenerate_correction(
    w4: &PauliMatrix,
    branches: &[DegenerateBranch],
    tol: &Tolerances,
) -> Result<Vec<DegenerateBranch>> {
    let d = branches.len();
    let scale = branches
        .iter()
        .map(|b| b.f2.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let threshold = tol.pauli_gap * scale;
    let mut out = branches.to_vec();
    for i in 0..d {
        let wri = w4.entries.dot(&branches[i].right);
        let mut corr = Array1::<c64>::zeros(branches[i].right.len());
        for j in 0..d {
            if j == i {
                continue;
            }
            let gap = branches[i].f2 - branches[j].f2;
            if gap.norm() <= threshold {
                return Err(Error::DegenerateSplitting {
                    i,
                    j,
                    gap: gap.norm(),
                    threshold,
                });
            }
            let amplitude: c64 = branches[j]
                .left
                .iter()
                .zip(wri.iter())
                .map(|(l, r)| l * r)
                .sum();
            let coeff = amplitude / gap;
            corr = corr + branches[j].right.mapv(|z| z * coeff);
        }
        out[i].o2_diag = Some(corr);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Assembled spectrum and steady state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbOrder {
    Zero,
    Two,
}

/// Sector label of a perturbative branch: an off-diagonal coherence sector
/// `(i, j)` or the k-th branch of the diagonalized degenerate subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    OffDiagonal(usize, usize),
    Degenerate(usize),
}

/// Which corrections a branch carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchAccuracy {
    /// Free-theory branch.
    Order0,
    /// Second order, except the diagonal-sector components which remain at
    /// zeroth order (no fourth-order Pauli data supplied).
    Order2DiagonalOrder0,
    /// Full second order.
    Order2,
}

#[derive(Debug, Clone)]
pub struct PerturbativeBranch {
    pub sector: Sector,
    /// Physical eigenvalue with the coupling folded in.
    pub eigenvalue: c64,
    /// Physical eigen-operator including the `c²` corrections, in
    /// intermediate normalization (unit zeroth-order component, corrections
    /// orthogonal to it).
    pub right: Array2<c64>,
    /// Zeroth-order left eigen-operator (functional `X ↦ tr(left0† X)`).
    pub left0: Array2<c64>,
    pub accuracy: BranchAccuracy,
}

#[derive(Debug, Clone)]
pub struct PerturbativeSpectrum {
    pub dim: usize,
    pub coupling: f64,
    pub branches: Vec<PerturbativeBranch>,
    /// False when the degenerate sector lacked fourth-order data and its
    /// operators are only zeroth-order accurate.
    pub diagonal_sector_full_order: bool,
}

impl PerturbativeSpectrum {
    pub fn eigenvalues(&self) -> Vec<c64> {
        self.branches.iter().map(|b| b.eigenvalue).collect()
    }

    pub fn branch(&self, sector: Sector) -> Option<&PerturbativeBranch> {
        self.branches.iter().find(|b| b.sector == sector)
    }
}

/// A perturbative steady state together with its accuracy flag and the
/// Hermiticity residue removed by symmetrization.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityMatrix,
    pub accuracy: BranchAccuracy,
    pub hermitization_residue: f64,
}

/// Check the Hermiticity-conjugation symmetry `f2_ij = conj(f2_ji)` and
/// `o2_ij = (o2_ji)†` of the off-diagonal corrections; returns the worst
/// deviation. Zero (to rounding) for any Hermiticity-preserving `L2`.
pub fn conjugation_symmetry_residual(p: &PerturbativeLiouvillian) -> Result<f64> {
    let d = p.dim();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i >= j {
                continue;
            }
            let a = p.offdiag_corrections(i, j)?;
            let b = p.offdiag_corrections(j, i)?;
            worst = worst.max((a.f2 - b.f2.conj()).norm());
            let adj = crate::superop::dagger(&b.o2);
            worst = worst.max(hermiticity_residual_between(&a.o2, &adj));
        }
    }
    Ok(worst)
}

fn hermiticity_residual_between(a: &Array2<c64>, b: &Array2<c64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
