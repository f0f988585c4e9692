//! Laplace-domain treatment of time-nonlocal master equations.
//!
//! The memory kernel is represented as `K̂(s) = L0 + c²·K̂₂(s)` (plus an
//! optional fourth-order block) for `Re s` to the right of a declared
//! abscissa of convergence. Resolvent poles satisfy the self-consistency
//! condition `s* = eigenvalue of K̂(s*)`; since the zeroth-order kernel is
//! the free Liouvillian, poles are perturbations of the free eigenvalues
//! `-iω_ij` and those are the natural search seeds. Only rational
//! (exponential-memory) kernels ship as built-ins; arbitrary kernels enter
//! through the callable interface.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig};

use crate::error::{Error, Result};
use crate::perturb::{pauli_projection, PauliMatrix, PauliOrder};
use crate::superop::{devectorize, vectorize, EnergyBasis, SuperOperator};

type KernelFn = Box<dyn Fn(c64) -> SuperOperator + Send + Sync>;

/// `K̂(s) = L0 + c²·K̂₂(s) [+ c⁴·K̂₄(s)]` on `Re s > abscissa`.
pub struct LaplaceKernel {
    free: SuperOperator,
    k2: KernelFn,
    k4: Option<KernelFn>,
    coupling: f64,
    abscissa: f64,
}

impl std::fmt::Debug for LaplaceKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceKernel")
            .field("dim", &self.free.dim())
            .field("coupling", &self.coupling)
            .field("abscissa", &self.abscissa)
            .finish()
    }
}

impl LaplaceKernel {
    pub fn new(
        free: SuperOperator,
        k2: impl Fn(c64) -> SuperOperator + Send + Sync + 'static,
        k4: Option<KernelFn>,
        coupling: f64,
        abscissa: f64,
    ) -> Self {
        LaplaceKernel {
            free,
            k2: Box::new(k2),
            k4,
            coupling,
            abscissa,
        }
    }

    /// s-independent perturbation: the Markovian case, whose poles are
    /// exactly the eigenvalues of the constant generator.
    pub fn constant(free: SuperOperator, perturbation: SuperOperator, coupling: f64) -> Self {
        LaplaceKernel::new(
            free,
            move |_| perturbation.clone(),
            None,
            coupling,
            f64::NEG_INFINITY,
        )
    }

    /// Exponential memory with a single decay scale:
    /// `K̂₂(s) = κ/(s + κ) · L2`, abscissa `-κ`. At `s = 0` this equals the
    /// time-local block.
    pub fn exponential_memory(
        free: SuperOperator,
        l2: SuperOperator,
        kappa: f64,
        coupling: f64,
    ) -> Self {
        LaplaceKernel::new(
            free,
            move |s| l2.scaled(kappa / (s + kappa)),
            None,
            coupling,
            -kappa,
        )
    }

    /// Exponential memory retarding each Bohr-rotating source sector:
    /// the column of vec-index `(i, j)` carries the factor
    /// `κ/(s + iω_ij + κ)`, so that `K̂₂(-iω_ij)` reproduces the time-local
    /// `L2` on sector `(i, j)` exactly and the pole corrections agree with
    /// the time-local second-order eigenvalues through `O(c⁴)`.
    pub fn sector_resonant_memory(
        free: SuperOperator,
        l2: SuperOperator,
        kappa: f64,
        coupling: f64,
        basis: &EnergyBasis,
    ) -> Self {
        let d = basis.dim();
        let bohr: Vec<f64> = {
            let mut all = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    all[i + j * d] = basis.bohr_frequency(i, j);
                }
            }
            all
        };
        LaplaceKernel::new(
            free,
            move |s| {
                let n = d * d;
                let mut m = Array2::<c64>::zeros((n, n));
                for col in 0..n {
                    let factor = kappa / (s + c64::new(0.0, bohr[col]) + kappa);
                    for row in 0..n {
                        m[[row, col]] = l2.matrix()[[row, col]] * factor;
                    }
                }
                SuperOperator::from_matrix(d, m).expect("shape preserved")
            },
            None,
            coupling,
            -kappa,
        )
    }

    pub fn dim(&self) -> usize {
        self.free.dim()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    /// The second-order block alone, per unit coupling.
    pub fn second_order_at(&self, s: c64) -> SuperOperator {
        (self.k2)(s)
    }

    pub fn eval(&self, s: c64) -> SuperOperator {
        let c2 = c64::new(self.coupling * self.coupling, 0.0);
        let mut m = self.free.add(&(self.k2)(s).scaled(c2));
        if let Some(k4) = &self.k4 {
            m = m.add(&k4(s).scaled(c2 * c2));
        }
        m
    }
}

/// A converged resolvent pole: location `s*`, the eigen-operator of
/// `K̂(s*)` at eigenvalue `s*`, and the self-consistency residual
/// `‖K̂(s*)ô - s*·ô‖`.
#[derive(Debug, Clone)]
pub struct KernelPole {
    pub location: c64,
    pub eigen_operator: Array2<c64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PoleSearchOptions {
    pub max_iterations: usize,
    /// Convergence: `|Δs| ≤ tol · max(1, |s|)`.
    pub tol: f64,
    /// Residual gate on the converged pole, relative to `max(1, ‖K̂‖)`.
    pub residual_tol: f64,
    /// Track the eigenvalue whose eigenvector has the largest overlap with
    /// this operator instead of the one nearest `s`; resolves degenerate
    /// seeds (for example a kernel block acting identically on several
    /// sectors).
    pub track_operator: Option<Array2<c64>>,
}

impl Default for PoleSearchOptions {
    fn default() -> Self {
        PoleSearchOptions {
            max_iterations: 200,
            tol: 1e-10,
            residual_tol: 1e-9,
            track_operator: None,
        }
    }
}

impl PoleSearchOptions {
    pub fn tracking(op: Array2<c64>) -> Self {
        PoleSearchOptions {
            track_operator: Some(op),
            ..Default::default()
        }
    }
}

fn select_eigenvalue(
    values: &Array1<c64>,
    vectors: &Array2<c64>,
    s: c64,
    opts: &PoleSearchOptions,
) -> Result<(c64, Array1<c64>)> {
    if let Some(target) = &opts.track_operator {
        let tv = vectorize(target);
        let mut best = 0usize;
        let mut overlap = -1.0f64;
        for k in 0..values.len() {
            let column = vectors.column(k);
            let dot: c64 = tv.iter().zip(column.iter()).map(|(a, b)| a.conj() * b).sum();
            let norm = column.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let ov = dot.norm() / norm.max(1e-300);
            if ov > overlap {
                overlap = ov;
                best = k;
            }
        }
        return Ok((values[best], vectors.column(best).to_owned()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| (values[a] - s).norm().total_cmp(&(values[b] - s).norm()));
    let d1 = (values[order[0]] - s).norm();
    if order.len() > 1 {
        let d2 = (values[order[1]] - s).norm();
        let scale = values.iter().map(|v| v.norm()).fold(1.0f64, f64::max);
        if (d2 - d1).abs() <= 1e-12 * scale
            && (values[order[0]] - values[order[1]]).norm() > 1e-12 * scale
        {
            return Err(Error::PoleSearch(format!(
                "eigenvalue tracking is ambiguous at s = {s}: {} and {} are equally near",
                values[order[0]], values[order[1]]
            )));
        }
    }
    Ok((values[order[0]], vectors.column(order[0]).to_owned()))
}

/// Locate a resolvent pole by self-consistent iteration on
/// `s = eigenvalue(K̂(s))` from the given seed: a damped fixed-point step
/// followed by secant acceleration on `F(s) = eigenvalue(K̂(s)) - s`.
pub fn pole_search(
    kernel: &LaplaceKernel,
    s_start: c64,
    opts: &PoleSearchOptions,
) -> Result<KernelPole> {
    let d = kernel.dim();
    let eigen_at = |s: c64| -> Result<(c64, Array1<c64>)> {
        let m = kernel.eval(s);
        let (values, vectors) = m.matrix().eig()?;
        select_eigenvalue(&values, &vectors, s, opts)
    };

    let mut trace: Vec<c64> = vec![s_start];
    let mut s_prev = s_start;
    let (lambda0, _) = eigen_at(s_prev)?;
    let mut f_prev = lambda0 - s_prev;
    let mut converged = f_prev.norm() <= opts.tol * s_prev.norm().max(1.0);
    let mut s = if converged {
        s_prev
    } else {
        // short probe step: the secant update then acts like a damped
        // Newton iteration on F(s) = eigenvalue(K̂(s)) - s, which converges
        // to repelling poles as well as attracting ones
        s_prev + f_prev * 1e-3
    };
    let mut iterations = 1usize;

    while !converged && iterations < opts.max_iterations {
        trace.push(s);
        let (lambda, _) = eigen_at(s)?;
        let f = lambda - s;
        if f.norm() <= opts.tol * s.norm().max(1.0) {
            converged = true;
            break;
        }
        let denom = f - f_prev;
        let mut step = if denom.norm() > 1e-300 {
            -f * (s - s_prev) / denom
        } else {
            f
        };
        // cap runaway secant jumps at the problem scale
        let cap = 1.0 + s.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        s_prev = s;
        f_prev = f;
        s += step;
        iterations += 1;
        if step.norm() <= opts.tol * s.norm().max(1.0) {
            converged = true;
        }
    }
    if !converged {
        let tail: Vec<String> = trace.iter().rev().take(6).map(|z| format!("{z}")).collect();
        return Err(Error::PoleSearch(format!(
            "no convergence within {} iterations from seed {s_start}; last iterates: {}",
            opts.max_iterations,
            tail.join(" <- ")
        )));
    }

    let m = kernel.eval(s);
    let (values, vectors) = m.matrix().eig()?;
    let (_, column) = select_eigenvalue(&values, &vectors, s, opts)?;
    let norm = column.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let column = column.mapv(|z| z / norm);
    let image = m.matrix().dot(&column);
    let residual = (&image - &column.mapv(|z| z * s))
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let gate = opts.residual_tol * m.norm().max(1.0);
    if residual > gate {
        return Err(Error::PoleSearch(format!(
            "pole at {s} has self-consistency residual {residual:.3e} above {gate:.3e}"
        )));
    }
    Ok(KernelPole {
        location: s,
        eigen_operator: devectorize(&column.view(), d),
        residual,
        iterations,
    })
}

/// Pauli projection of the second-order kernel block at the degenerate
/// seed `s = 0`, feeding the time-local degenerate machinery unchanged.
pub fn nonlocal_degenerate_sector(
    kernel: &LaplaceKernel,
    basis: &EnergyBasis,
) -> Result<PauliMatrix> {
    if kernel.abscissa >= 0.0 {
        return Err(Error::KernelDivergence {
            abscissa: kernel.abscissa,
        });
    }
    let k2 = kernel.second_order_at(c64::new(0.0, 0.0));
    if k2.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::KernelDivergence {
            abscissa: kernel.abscissa,
        });
    }
    Ok(pauli_projection(&k2, basis, PauliOrder::Two))
}
