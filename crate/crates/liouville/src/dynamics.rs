//! Time evolution and the measurement machinery for order-of-accuracy
//! claims: adaptive integration, interaction-picture Neumann series,
//! spectral propagation, positivity audits, log-log slope estimation, and
//! the indeterminacy demonstration for traceless diagonal perturbations.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eigh, UPLO};

use crate::error::{Error, Result};
use crate::perturb::PerturbativeLiouvillian;
use crate::superop::{
    commutator_generator, dagger, devectorize, frobenius_norm, hermiticity_deviation, spost, spre,
    trace, vectorize, DensityMatrix, SpectralDecomposition, SuperOperator, ONE, ZERO,
};

// ---------------------------------------------------------------------------
// Time-dependent generators
// ---------------------------------------------------------------------------

enum Dependence {
    Constant(SuperOperator),
    Callable(Box<dyn Fn(f64) -> SuperOperator + Send + Sync>),
}

impl std::fmt::Debug for Dependence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dependence::Constant(_) => write!(f, "Constant"),
            Dependence::Callable(_) => write!(f, "Callable"),
        }
    }
}

/// A (possibly time-dependent) Liouvillian `t ↦ 𝓛(t)` with its free
/// Hamiltonian part, an optional declared late-time asymptote `𝓛(∞)`, and
/// the timescale hint `f2_max` (largest second-order rate magnitude, units
/// inverse time).
#[derive(Debug)]
pub struct TimeDependentGenerator {
    hamiltonian: Array2<c64>,
    dependence: Dependence,
    asymptote: Option<SuperOperator>,
    f2_max: f64,
}

impl TimeDependentGenerator {
    /// A stationary generator; the asymptote is the generator itself.
    pub fn stationary(hamiltonian: Array2<c64>, generator: SuperOperator, f2_max: f64) -> Self {
        TimeDependentGenerator {
            hamiltonian,
            asymptote: Some(generator.clone()),
            dependence: Dependence::Constant(generator),
            f2_max,
        }
    }

    pub fn time_dependent(
        hamiltonian: Array2<c64>,
        liouvillian: impl Fn(f64) -> SuperOperator + Send + Sync + 'static,
        asymptote: Option<SuperOperator>,
        f2_max: f64,
    ) -> Self {
        TimeDependentGenerator {
            hamiltonian,
            dependence: Dependence::Callable(Box::new(liouvillian)),
            asymptote,
            f2_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &Array2<c64> {
        &self.hamiltonian
    }

    pub fn f2_max(&self) -> f64 {
        self.f2_max
    }

    pub fn asymptote(&self) -> Option<&SuperOperator> {
        self.asymptote.as_ref()
    }

    pub fn at(&self, t: f64) -> SuperOperator {
        match &self.dependence {
            Dependence::Constant(s) => s.clone(),
            Dependence::Callable(f) => f(t),
        }
    }

    fn apply_vec(&self, t: f64, v: &Array1<c64>) -> Array1<c64> {
        match &self.dependence {
            Dependence::Constant(s) => s.matrix().dot(v),
            Dependence::Callable(f) => f(t).matrix().dot(v),
        }
    }
}

// ---------------------------------------------------------------------------
// Adaptive integration (Dormand–Prince 5(4))
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Local error tolerance per step (used as both absolute and relative).
    pub tol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Store every n-th accepted step in the trajectory (the final state is
    /// always stored).
    pub store_stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-9,
            initial_step: None,
            max_steps: 50_000_000,
            store_stride: 1,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegrateOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array2<c64>>,
    /// Worst |tr ρ - 1| along the stored trajectory.
    pub trace_drift: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array2<c64> {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// CSV export: column `t`, then Re/Im of each density-matrix entry in
    /// row-major order.
    pub fn to_csv(&self) -> String {
        let d = self.states[0].nrows();
        let mut out = String::from("t");
        for i in 0..d {
            for j in 0..d {
                out.push_str(&format!(",re_{i}_{j},im_{i}_{j}"));
            }
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for i in 0..d {
                for j in 0..d {
                    out.push_str(&format!(",{},{}", state[[i, j]].re, state[[i, j]].im));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
pub(crate) const DP_C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
pub(crate) const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rk45_core(
    gen: &TimeDependentGenerator,
    rho0: &Array2<c64>,
    t_end: f64,
    opts: &IntegrateOptions,
    mut on_accept: impl FnMut(f64, &Array1<c64>),
) -> Result<usize> {
    if t_end < 0.0 {
        return Err(Error::InvalidInput("t_end must be nonnegative".into()));
    }
    let mut y = vectorize(rho0);
    let mut t = 0.0f64;
    on_accept(t, &y);
    if t_end == 0.0 {
        return Ok(0);
    }

    let scale = gen.at(0.0).norm().max(1e-12);
    let mut h = opts.initial_step.unwrap_or((0.01 / scale).min(t_end));
    let h_min = t_end * 1e-15;
    let mut k1 = gen.apply_vec(t, &y);
    let mut steps = 0usize;

    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::InvalidInput(format!(
                "integration exceeded {} steps",
                opts.max_steps
            )));
        }
        h = h.min(t_end - t);
        let mut k = vec![k1.clone()];
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    ys = ys + kj.mapv(|z| z * (a * h));
                }
            }
            k.push(gen.apply_vec(t + DP_C[stage] * h, &ys));
        }
        // 5th-order solution (stage 7 was evaluated at it: FSAL)
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let b = DP_A[5][j];
            if b != 0.0 {
                y5 = y5 + kj.mapv(|z| z * (b * h));
            }
        }
        let mut y4 = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let b = DP_B4[j];
            if b != 0.0 {
                y4 = y4 + kj.mapv(|z| z * (b * h));
            }
        }
        let err_norm = {
            let mut acc = 0.0f64;
            for (e, yv) in (&y5 - &y4).iter().zip(y5.iter()) {
                let sc = opts.tol + opts.tol * yv.norm();
                acc += (e.norm() / sc).powi(2);
            }
            (acc / y5.len() as f64).sqrt()
        };
        if err_norm <= 1.0 {
            t += h;
            y = y5;
            k1 = k.pop().expect("seven stages"); // FSAL: k7 = f(t+h, y5)
            steps += 1;
            on_accept(t, &y);
        }
        let factor = if err_norm > 0.0 {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < h_min && t < t_end {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
    }
    Ok(steps)
}

/// Adaptive time-ordered integration of `dρ/dt = 𝓛(t)ρ`.
pub fn integrate(
    gen: &TimeDependentGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if opts.tol <= 0.0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let d = gen.dim();
    let stride = opts.store_stride.max(1);
    let mut times = Vec::new();
    let mut states: Vec<Array2<c64>> = Vec::new();
    let mut drift = 0.0f64;
    let mut count = 0usize;
    let mut last: Option<(f64, Array1<c64>)> = None;
    let steps = rk45_core(gen, rho0.matrix(), t_end, opts, |t, y| {
        let tr: c64 = (0..d).map(|i| y[i + i * d]).sum();
        drift = drift.max((tr - ONE).norm());
        if count.is_multiple_of(stride) {
            times.push(t);
            states.push(devectorize(&y.view(), d));
        } else {
            last = Some((t, y.clone()));
        }
        count += 1;
    })?;
    if let Some((t, y)) = last {
        if times.last().is_none_or(|&stored| stored < t) {
            times.push(t);
            states.push(devectorize(&y.view(), d));
        }
    }
    Ok(Trajectory {
        times,
        states,
        trace_drift: drift,
        steps,
    })
}

/// Integrate and keep only the final state (no trajectory storage).
pub fn evolve(
    gen: &TimeDependentGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<(Array2<c64>, f64)> {
    let d = gen.dim();
    let mut last = vectorize(rho0.matrix());
    let mut drift = 0.0f64;
    rk45_core(gen, rho0.matrix(), t_end, opts, |_, y| {
        let tr: c64 = (0..d).map(|i| y[i + i * d]).sum();
        drift = drift.max((tr - ONE).norm());
        last = y.clone();
    })?;
    Ok((devectorize(&last.view(), d), drift))
}

// ---------------------------------------------------------------------------
// Neumann series in the interaction picture
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NeumannOptions {
    /// Number of quadrature intervals for the base grid; a doubled grid is
    /// combined by Richardson extrapolation of the iterated trapezoid rule.
    pub resolution: usize,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        NeumannOptions { resolution: 400 }
    }
}

#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub state: Array2<c64>,
    /// Set when `t · f2_max > 1`: the truncated series is secular and only
    /// trustworthy for `t ≪ 1/f2_max`.
    pub secular_warning: bool,
    pub trace_deviation: f64,
}

/// Short-time solution from the interaction-picture Neumann series with the
/// requested number of nested integrals (order 0, 1 or 2), rotated back to
/// the original picture.
pub fn neumann_propagate(
    gen: &TimeDependentGenerator,
    rho0: &DensityMatrix,
    t: f64,
    order: usize,
    opts: &NeumannOptions,
) -> Result<NeumannResult> {
    if order > 2 {
        return Err(Error::InvalidInput(format!(
            "Neumann order must be 0, 1 or 2, got {order}"
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidInput("time must be nonnegative".into()));
    }
    let d = gen.dim();
    let n2 = d * d;
    let h = gen.hamiltonian();
    let dev = hermiticity_deviation(h);
    if dev > 1e-8 {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: 1e-8,
        });
    }
    let (energies, u) = h.eigh(UPLO::Lower)?;
    let l0 = commutator_generator(h);

    let unitary = |tau: f64| -> Array2<c64> {
        // e^{-iHτ} = U e^{-iετ} U†
        let phases = Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j {
                (-c64::new(0.0, 1.0) * energies[i] * tau).exp()
            } else {
                ZERO
            }
        });
        u.dot(&phases).dot(&dagger(&u))
    };
    let frame = |tau: f64| -> SuperOperator {
        // G0(τ)ρ = e^{-iHτ} ρ e^{+iHτ}
        let w = unitary(tau);
        spre(&w).compose(&spost(&dagger(&w)))
    };
    let interaction_block = |tau: f64| -> Array2<c64> {
        let delta = gen.at(tau).sub(&l0);
        frame(-tau)
            .compose(&delta)
            .compose(&frame(tau))
            .matrix()
            .clone()
    };

    let series_on_grid = |n: usize| -> Array2<c64> {
        let step = t / n as f64;
        let mut first = Array2::<c64>::zeros((n2, n2));
        let mut second = Array2::<c64>::zeros((n2, n2));
        let mut cumulative = Array2::<c64>::zeros((n2, n2));
        let mut prev: Option<Array2<c64>> = None;
        for k in 0..=n {
            let dk = interaction_block(step * k as f64);
            let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
            if order >= 1 {
                first = &first + &dk.mapv(|z| z * (weight * step));
            }
            if order >= 2 {
                if let Some(p) = &prev {
                    cumulative = &cumulative + &(p + &dk).mapv(|z| z * (0.5 * step));
                }
                second = &second + &dk.dot(&cumulative).mapv(|z| z * (weight * step));
            }
            prev = Some(dk);
        }
        let mut m = Array2::<c64>::eye(n2);
        if order >= 1 {
            m = &m + &first;
        }
        if order >= 2 {
            m = &m + &second;
        }
        m
    };

    let propagator = if order == 0 || t == 0.0 {
        Array2::<c64>::eye(n2)
    } else {
        let n = opts.resolution.max(8);
        let coarse = series_on_grid(n);
        let fine = series_on_grid(2 * n);
        (&fine.mapv(|z| z * 4.0) - &coarse).mapv(|z| z / 3.0)
    };

    let rho_i = propagator.dot(&vectorize(rho0.matrix()));
    let rotated = frame(t).apply_vec(&rho_i.view());
    let state = devectorize(&rotated.view(), d);
    let trace_deviation = (trace(&state) - ONE).norm();
    Ok(NeumannResult {
        state,
        secular_warning: t * gen.f2_max() > 1.0,
        trace_deviation,
    })
}

// ---------------------------------------------------------------------------
// Spectral propagation
// ---------------------------------------------------------------------------

/// Propagate with a complete spectral decomposition:
/// `ρ(t) = Σ_k e^{f_k t} o_k <o*_k, ρ0>`. An infinite time returns the
/// stationary-branch projection.
pub fn spectral_propagate(
    dec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<Array2<c64>> {
    let d = dec.dim;
    if dec.branches.len() != d * d {
        return Err(Error::IncompleteDecomposition {
            got: dec.branches.len(),
            need: d * d,
        });
    }
    let scale = dec
        .branches
        .iter()
        .map(|b| b.eigenvalue.norm())
        .fold(1.0f64, f64::max);
    let mut out = Array2::<c64>::zeros((d, d));
    for b in &dec.branches {
        let weight = b.overlap(rho0.matrix());
        let gain = if t.is_infinite() {
            if b.eigenvalue.norm() <= 1e-12 * scale {
                ONE
            } else if b.eigenvalue.re < 0.0 {
                ZERO
            } else {
                return Err(Error::InvalidInput(
                    "t = ∞ requested for a non-decaying branch with f ≠ 0".into(),
                ));
            }
        } else {
            (b.eigenvalue * t).exp()
        };
        out = &out + &b.right.mapv(|z| z * (gain * weight));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Positivity audit
// ---------------------------------------------------------------------------

/// Positivity diagnostics of a state: the smallest eigenvalue and the worst
/// pairwise residual `r_ij = ρ_ii ρ_jj - ρ_ij ρ_ji` (a necessary positivity
/// condition; its real part is the meaningful quantity).
#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub min_eigenvalue: f64,
    pub worst_pair: (usize, usize),
    pub worst_pair_residual: c64,
    pub trace_deviation: f64,
}

impl PositivityReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.min_eigenvalue >= -tolerance && self.worst_pair_residual.re >= -tolerance
    }
}

pub fn positivity_audit(rho: &Array2<c64>) -> Result<PositivityReport> {
    let d = rho.nrows();
    if d != rho.ncols() || d == 0 {
        return Err(Error::InvalidInput("state must be square".into()));
    }
    let trace_deviation = (trace(rho) - ONE).norm();
    if trace_deviation > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "trace deviates from 1 by {trace_deviation:.3e}; not a normalized state"
        )));
    }
    let herm = (rho + &dagger(rho)).mapv(|z| z * 0.5);
    let (eigs, _) = herm.eigh(UPLO::Lower)?;
    let min_eigenvalue = eigs.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut worst_pair = (0, 0);
    let mut worst = c64::new(f64::INFINITY, 0.0);
    for i in 0..d {
        for j in (i + 1)..d {
            let r = rho[[i, i]] * rho[[j, j]] - rho[[i, j]] * rho[[j, i]];
            if r.re < worst.re {
                worst = r;
                worst_pair = (i, j);
            }
        }
    }
    Ok(PositivityReport {
        min_eigenvalue,
        worst_pair,
        worst_pair_residual: worst,
        trace_deviation,
    })
}

// ---------------------------------------------------------------------------
// Order scan
// ---------------------------------------------------------------------------

/// Least-squares slope of `log(magnitude)` against `log(c)` on a strictly
/// geometric coupling grid.
#[derive(Debug, Clone)]
pub struct OrderScanResult {
    pub grid: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub slope: f64,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
}

pub fn geometric_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    let ratio = (max / min).powf(1.0 / (points.saturating_sub(1)) as f64);
    (0..points).map(|k| min * ratio.powi(k as i32)).collect()
}

pub fn order_scan(family: impl Fn(f64) -> Result<f64>, grid: &[f64]) -> Result<OrderScanResult> {
    let magnitudes: Vec<f64> = grid.iter().map(|&c| family(c)).collect::<Result<_>>()?;
    order_scan_values(grid, &magnitudes)
}

pub fn order_scan_values(grid: &[f64], magnitudes: &[f64]) -> Result<OrderScanResult> {
    if grid.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "order scan needs at least 5 grid points, got {}",
            grid.len()
        )));
    }
    if grid.len() != magnitudes.len() {
        return Err(Error::InvalidInput(
            "grid and magnitude lengths differ".into(),
        ));
    }
    let ratio = grid[1] / grid[0];
    for w in grid.windows(2) {
        if !(w[0] > 0.0 && w[1] > 0.0) || ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "grid must be strictly geometric with positive entries".into(),
            ));
        }
    }
    for (&c, &m) in grid.iter().zip(magnitudes) {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "observable must be a positive norm; got {m} at c = {c}"
            )));
        }
    }
    let xs: Vec<f64> = grid.iter().map(|c| c.ln()).collect();
    let ys: Vec<f64> = magnitudes.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let fit_residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderScanResult {
        grid: grid.to_vec(),
        magnitudes: magnitudes.to_vec(),
        slope,
        fit_residual,
    })
}

// ---------------------------------------------------------------------------
// Indeterminacy demonstration
// ---------------------------------------------------------------------------

/// Drift profile `s(t) = 1 - e^{-κ c² t}` of the injected perturbation;
/// `s(0) = 0` and `|ds/dt| ≤ κ c²`.
#[derive(Debug, Clone)]
pub struct DriftProfile {
    pub kappa: f64,
}

impl Default for DriftProfile {
    fn default() -> Self {
        DriftProfile { kappa: 1.0 }
    }
}

impl DriftProfile {
    fn s(&self, c2: f64, t: f64) -> f64 {
        1.0 - (-self.kappa * c2 * t).exp()
    }

    fn s_dot(&self, c2: f64, t: f64) -> f64 {
        self.kappa * c2 * (-self.kappa * c2 * t).exp()
    }
}

/// Comparison of a solution trajectory `ρ(t)` against the shifted
/// trajectory `ρ'(t) = ρ(t) + s(t)·c²·δ` for a traceless diagonal shape δ.
///
/// Both trajectories satisfy the master equation up to terms of two orders
/// higher than their state difference: the residual difference
/// `r'(t) - r(t) = c²(ṡ(t)·δ - s(t)·𝓛δ)` is evaluated in closed form,
/// while the base trajectory satisfies the equation to the integrator
/// tolerance by construction.
#[derive(Debug, Clone)]
pub struct IndeterminacyReport {
    pub times: Vec<f64>,
    /// `‖r'(t) - r(t)‖_F` at the trajectory samples.
    pub residual_difference: Vec<f64>,
    pub max_residual_difference: f64,
    /// `‖ρ'(t_end) - ρ(t_end)‖_F = s(t_end)·c²·‖δ‖`.
    pub state_difference_end: f64,
    /// Residual level of the base trajectory (its integrator tolerance).
    pub base_residual_bound: f64,
}

pub fn indeterminacy_demo(
    p: &PerturbativeLiouvillian,
    traj: &Trajectory,
    delta_shape: &Array2<c64>,
    drift: &DriftProfile,
    base_residual_bound: f64,
) -> Result<IndeterminacyReport> {
    let d = p.dim();
    if delta_shape.nrows() != d || delta_shape.ncols() != d {
        return Err(Error::InvalidInput(
            "perturbation shape dimension mismatch".into(),
        ));
    }
    let offdiag: f64 = delta_shape
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    if offdiag > 1e-12 {
        return Err(Error::InvalidInput(
            "perturbation shape must be diagonal in the energy basis".into(),
        ));
    }
    if trace(delta_shape).norm() > 1e-12 {
        return Err(Error::InvalidInput(
            "perturbation shape must be traceless".into(),
        ));
    }
    let c2 = p.coupling() * p.coupling();
    let generator = p.assembled();
    let l_delta = generator.apply(delta_shape);
    let delta_norm = frobenius_norm(delta_shape);

    let mut residual_difference = Vec::with_capacity(traj.times.len());
    let mut max_rd = 0.0f64;
    for &t in &traj.times {
        let s = drift.s(c2, t);
        let s_dot = drift.s_dot(c2, t);
        let diff = delta_shape.mapv(|z| z * (c2 * s_dot)) - l_delta.mapv(|z| z * (c2 * s));
        let norm = frobenius_norm(&diff);
        max_rd = max_rd.max(norm);
        residual_difference.push(norm);
    }
    let t_end = traj.final_time();
    let state_difference_end = drift.s(c2, t_end) * c2 * delta_norm;
    Ok(IndeterminacyReport {
        times: traj.times.clone(),
        residual_difference,
        max_residual_difference: max_rd,
        state_difference_end,
        base_residual_bound,
    })
}

/// Default traceless diagonal perturbation shape `(|0><0| - |d-1><d-1|)/√2`.
pub fn default_delta_shape(dim: usize) -> Array2<c64> {
    let mut m = Array2::<c64>::zeros((dim, dim));
    let w = c64::new(1.0 / 2.0f64.sqrt(), 0.0);
    m[[0, 0]] = w;
    m[[dim - 1, dim - 1]] = -w;
    m
}
