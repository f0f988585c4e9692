//! Exactly solvable benchmark: a damped oscillator bilinearly coupled to an
//! Ohmic bath (ħ = k_B = 1 throughout, Heisenberg bound det σ ≥ 1/4).
//!
//! Late-time master-equation coefficients are evaluated in two modes:
//! `Exact` keeps the full damping-strength dependence, `TruncatedSecondOrder`
//! keeps only the leading order in γ₀ (the damping kernel, and hence γ₀, is
//! second order in the system-bath coupling). Inserting truncated
//! coefficients into the exact stationary-covariance formula is the
//! mixed-order procedure whose uncancelled log(Λ) term drives the cutoff
//! scan: Heisenberg violation at large cutoff and negative position variance
//! beyond it.

use ndarray_linalg::c64;

use crate::dynamics::{DP_A, DP_B4, DP_C};
use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// ---------------------------------------------------------------------------
// Complex digamma / harmonic number
// ---------------------------------------------------------------------------

/// Asymptotic-series coefficients `B_{2n}/(2n)` for n = 1..8.
const DIGAMMA_ASYMPTOTIC: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// Complex digamma by upward recurrence into the asymptotic-series region
/// (Re w ≥ 13), then an 8-term Bernoulli expansion.
fn digamma(z: c64) -> c64 {
    let mut w = z;
    let mut acc = c64::new(0.0, 0.0);
    while w.re < 13.0 {
        acc -= 1.0 / w;
        w += 1.0;
    }
    let inv2 = 1.0 / (w * w);
    let mut series = c64::new(0.0, 0.0);
    let mut power = inv2;
    for coeff in DIGAMMA_ASYMPTOTIC {
        series += coeff * power;
        power *= inv2;
    }
    acc + w.ln() - 0.5 / w - series
}

/// Harmonic number `H(z) = ψ(z+1) + γ`, analytically continued; exact zero
/// at the origin. Asymptotically logarithmic.
pub fn harmonic_number(z: c64) -> Result<c64> {
    if z.re == 0.0 && z.im == 0.0 {
        return Ok(c64::new(0.0, 0.0));
    }
    if z.im.abs() < 1e-12 && z.re < -0.5 {
        let nearest = z.re.round();
        if (z.re - nearest).abs() < 1e-12 {
            return Err(Error::FunctionPole(format!(
                "harmonic number has a pole at z = {nearest}"
            )));
        }
    }
    Ok(digamma(z + 1.0) + EULER_GAMMA)
}

// ---------------------------------------------------------------------------
// Ohmic specification and late-time coefficients
// ---------------------------------------------------------------------------

/// Ohmic-bath parameters: damping strength γ₀ (second order in the
/// coupling), temperature T, cutoff Λ, bare frequency Ω, mass M.
#[derive(Debug, Clone, Copy)]
pub struct OhmicSpec {
    pub gamma0: f64,
    pub temperature: f64,
    pub cutoff: f64,
    pub frequency: f64,
    pub mass: f64,
}

impl OhmicSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidInput("gamma0 must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidInput("temperature must be nonnegative".into()));
        }
        if !(self.frequency > 0.0 && self.mass > 0.0) {
            return Err(Error::InvalidInput(
                "frequency and mass must be positive".into(),
            ));
        }
        if self.gamma0 >= self.frequency {
            return Err(Error::InvalidInput(format!(
                "underdamped regime required: gamma0 = {} must be below frequency = {}",
                self.gamma0, self.frequency
            )));
        }
        if self.cutoff < 10.0 * self.frequency {
            return Err(Error::InvalidInput(format!(
                "cutoff = {} must be at least 10x the frequency = {}",
                self.cutoff, self.frequency
            )));
        }
        Ok(())
    }

    pub fn omega_tilde(&self) -> f64 {
        (self.frequency * self.frequency - self.gamma0 * self.gamma0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMode {
    Exact,
    TruncatedSecondOrder,
}

/// Late-time master-equation coefficients (terms of order 1/Λ neglected).
#[derive(Debug, Clone, Copy)]
pub struct QbmCoefficients {
    pub omega_r: f64,
    pub gamma: f64,
    pub d_pp: f64,
    pub d_xp: f64,
    pub omega_tilde: f64,
    pub i0: c64,
    pub mode: CoefficientMode,
}

/// The auxiliary integral
/// `I₀ = (2/π)(i + γ₀/Ω̃)·[H(Λ/2πT) - H((γ₀ + iΩ̃)/2πT)]`,
/// with the T = 0 limit taken analytically as `H(a/2πT) - H(b/2πT) →
/// ln(a/b)` to avoid catastrophic cancellation at tiny temperatures.
fn auxiliary_integral(gamma0: f64, omega_tilde: f64, temperature: f64, cutoff: f64) -> Result<c64> {
    let b = c64::new(gamma0, omega_tilde);
    let prefactor = (2.0 / std::f64::consts::PI) * (c64::new(0.0, 1.0) + gamma0 / omega_tilde);
    let diff = if temperature == 0.0 {
        (cutoff / b).ln()
    } else {
        let scale = 2.0 * std::f64::consts::PI * temperature;
        harmonic_number(c64::new(cutoff / scale, 0.0))? - harmonic_number(b / scale)?
    };
    Ok(prefactor * diff)
}

/// Exact-mode late-time coefficients: `Ω_R = Ω`, `Γ = γ₀`,
/// `D_xp = γ₀·Im I₀`, `D_pp = 2γ₀T + γ₀·Im[(γ₀ + iΩ̃)·I₀]`.
pub fn late_time_coefficients(spec: &OhmicSpec) -> Result<QbmCoefficients> {
    spec.validate()?;
    let omega_tilde = spec.omega_tilde();
    let i0 = auxiliary_integral(spec.gamma0, omega_tilde, spec.temperature, spec.cutoff)?;
    let d_xp = spec.gamma0 * i0.im;
    let d_pp =
        2.0 * spec.gamma0 * spec.temperature + spec.gamma0 * (c64::new(spec.gamma0, omega_tilde) * i0).im;
    Ok(QbmCoefficients {
        omega_r: spec.frequency,
        gamma: spec.gamma0,
        d_pp,
        d_xp,
        omega_tilde,
        i0,
        mode: CoefficientMode::Exact,
    })
}

/// Second-order-truncated coefficients: every coefficient keeps only its
/// leading O(γ₀) term, with γ₀ set to zero inside I₀ and Ω̃ → Ω (done
/// symbolically, not by numeric differencing):
/// `Γ = γ₀`, `D_xp = γ₀·Im I₀⁰`, `D_pp = 2γ₀T + γ₀·Ω·Re I₀⁰`.
pub fn truncated_coefficients(spec: &OhmicSpec) -> Result<QbmCoefficients> {
    spec.validate()?;
    let omega = spec.frequency;
    let i0 = auxiliary_integral(0.0, omega, spec.temperature, spec.cutoff)?;
    let d_xp = spec.gamma0 * i0.im;
    let d_pp = 2.0 * spec.gamma0 * spec.temperature + spec.gamma0 * omega * i0.re;
    Ok(QbmCoefficients {
        omega_r: omega,
        gamma: spec.gamma0,
        d_pp,
        d_xp,
        omega_tilde: omega,
        i0,
        mode: CoefficientMode::TruncatedSecondOrder,
    })
}

// ---------------------------------------------------------------------------
// Gaussian states and the covariance sector
// ---------------------------------------------------------------------------

/// Phase-space mean and symmetric covariance of a Gaussian state.
/// Physicality (det σ ≥ 1/4) is *not* enforced; auditing it is the point.
#[derive(Debug, Clone, Copy)]
pub struct GaussianState {
    pub mean: (f64, f64),
    pub sigma_xx: f64,
    pub sigma_xp: f64,
    pub sigma_pp: f64,
}

impl GaussianState {
    pub fn centered(sigma_xx: f64, sigma_xp: f64, sigma_pp: f64) -> Self {
        GaussianState {
            mean: (0.0, 0.0),
            sigma_xx,
            sigma_xp,
            sigma_pp,
        }
    }

    pub fn det(&self) -> f64 {
        self.sigma_xx * self.sigma_pp - self.sigma_xp * self.sigma_xp
    }

    pub fn heisenberg_ok(&self) -> bool {
        self.det() >= 0.25
    }
}

/// Stationary covariance of the damped oscillator:
/// `σ_xx = (D_pp/2Γ - D_xp)/(M Ω_R²)`, `σ_xp = 0`, `σ_pp = M·D_pp/(2Γ)`.
pub fn stationary_covariance(q: &QbmCoefficients, mass: f64) -> Result<GaussianState> {
    if q.gamma <= 0.0 {
        return Err(Error::InvalidInput(
            "no relaxation: dissipation coefficient must be positive".into(),
        ));
    }
    let sigma_pp = mass * q.d_pp / (2.0 * q.gamma);
    let sigma_xx = (q.d_pp / (2.0 * q.gamma) - q.d_xp) / (mass * q.omega_r * q.omega_r);
    Ok(GaussianState::centered(sigma_xx, 0.0, sigma_pp))
}

fn covariance_rhs(q: &QbmCoefficients, mass: f64, y: &[f64; 3]) -> [f64; 3] {
    let [sxx, sxp, spp] = *y;
    let k = mass * q.omega_r * q.omega_r;
    [
        2.0 * sxp / mass,
        spp / mass - k * sxx - 2.0 * q.gamma * sxp - q.d_xp,
        -2.0 * k * sxp - 4.0 * q.gamma * spp + 2.0 * mass * q.d_pp,
    ]
}

/// Integrate the second-moment flow
/// `dσ_xx/dt = 2σ_xp/M`,
/// `dσ_xp/dt = σ_pp/M - MΩ_R²σ_xx - 2Γσ_xp - D_xp`,
/// `dσ_pp/dt = -2MΩ_R²σ_xp - 4Γσ_pp + 2M·D_pp`.
/// Its fixed point reproduces [`stationary_covariance`] identically. The
/// mean is outside the covariance sector and carried through unchanged.
pub fn covariance_flow(
    q: &QbmCoefficients,
    mass: f64,
    sigma0: &GaussianState,
    t_end: f64,
    tol: f64,
) -> Result<Vec<(f64, GaussianState)>> {
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let mut out = Vec::new();
    let mut collect = |t: f64, y: &[f64; 3]| {
        out.push((
            t,
            GaussianState {
                mean: sigma0.mean,
                sigma_xx: y[0],
                sigma_xp: y[1],
                sigma_pp: y[2],
            },
        ));
    };
    rk45_three(
        |y| covariance_rhs(q, mass, y),
        [sigma0.sigma_xx, sigma0.sigma_xp, sigma0.sigma_pp],
        t_end,
        tol,
        &mut collect,
    )?;
    Ok(out)
}

/// Final state of [`covariance_flow`] without trajectory storage.
pub fn covariance_relax(
    q: &QbmCoefficients,
    mass: f64,
    sigma0: &GaussianState,
    t_end: f64,
    tol: f64,
) -> Result<GaussianState> {
    let mut last = [sigma0.sigma_xx, sigma0.sigma_xp, sigma0.sigma_pp];
    rk45_three(
        |y| covariance_rhs(q, mass, y),
        last,
        t_end,
        tol,
        &mut |_, y| last = *y,
    )?;
    Ok(GaussianState {
        mean: sigma0.mean,
        sigma_xx: last[0],
        sigma_xp: last[1],
        sigma_pp: last[2],
    })
}

/// Dormand-Prince 5(4) on a 3-component real state, sharing the tableau
/// with `dynamics`.
fn rk45_three(
    rhs: impl Fn(&[f64; 3]) -> [f64; 3],
    y0: [f64; 3],
    t_end: f64,
    tol: f64,
    on_accept: &mut impl FnMut(f64, &[f64; 3]),
) -> Result<()> {
    if t_end < 0.0 {
        return Err(Error::InvalidInput("t_end must be nonnegative".into()));
    }
    let mut y = y0;
    let mut t = 0.0;
    on_accept(t, &y);
    if t_end == 0.0 {
        return Ok(());
    }
    let mut h = (t_end / 100.0).min(0.1);
    let h_min = t_end * 1e-15;
    let axpy = |y: &[f64; 3], k: &[[f64; 3]; 7], row: &[f64], h: f64| -> [f64; 3] {
        let mut out = *y;
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                for c in 0..3 {
                    out[c] += h * a * k[j][c];
                }
            }
        }
        out
    };
    loop {
        h = h.min(t_end - t);
        let mut k = [[0.0f64; 3]; 7];
        k[0] = rhs(&y);
        for stage in 0..6 {
            let ys = axpy(&y, &k, &DP_A[stage][..=stage.min(5)], h);
            k[stage + 1] = rhs(&ys);
        }
        let _ = DP_C; // time-independent right-hand side
        let y5 = axpy(&y, &k, &DP_A[5], h);
        let y4 = axpy(&y, &k, &DP_B4, h);
        let mut err = 0.0f64;
        for c in 0..3 {
            let sc = tol + tol * y5[c].abs();
            err += ((y5[c] - y4[c]) / sc).powi(2);
        }
        let err = (err / 3.0).sqrt();
        if err <= 1.0 {
            t += h;
            y = y5;
            on_accept(t, &y);
            if t >= t_end {
                return Ok(());
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < h_min {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
    }
}

// ---------------------------------------------------------------------------
// Cutoff scan
// ---------------------------------------------------------------------------

/// One row of the cutoff scan: exact and mixed-order position variances,
/// the mixed-order covariance determinant, and the physicality flags.
#[derive(Debug, Clone, Copy)]
pub struct CutoffRow {
    pub cutoff: f64,
    pub sxx_exact: f64,
    pub sxx_mixed: f64,
    pub det_mixed: f64,
    pub heisenberg_ok: bool,
    pub positive_ok: bool,
}

/// Scan the cutoff frequency: the exact column is cutoff-stable (the log Λ
/// sensitivities of the two diffusion coefficients cancel in the position
/// uncertainty), while the mixed-order column — truncated coefficients
/// inserted into the exact stationary formula — retains a negative log Λ
/// term that eventually breaks the Heisenberg bound and then the positivity
/// of the variance itself.
pub fn cutoff_scan(spec: &OhmicSpec, lambda_grid: &[f64]) -> Result<Vec<CutoffRow>> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidInput("cutoff grid is empty".into()));
    }
    for w in lambda_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput("cutoff grid must be ascending".into()));
        }
    }
    if lambda_grid[0] < 10.0 * spec.frequency {
        return Err(Error::InvalidInput(format!(
            "cutoff grid must start at or above 10x the frequency ({})",
            10.0 * spec.frequency
        )));
    }
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for &cutoff in lambda_grid {
        let at = OhmicSpec { cutoff, ..*spec };
        let exact = late_time_coefficients(&at)?;
        let mixed = truncated_coefficients(&at)?;
        let sxx_exact = stationary_covariance(&exact, spec.mass)?.sigma_xx;
        let mixed_state = stationary_covariance(&mixed, spec.mass)?;
        rows.push(CutoffRow {
            cutoff,
            sxx_exact,
            sxx_mixed: mixed_state.sigma_xx,
            det_mixed: mixed_state.det(),
            heisenberg_ok: mixed_state.heisenberg_ok(),
            positive_ok: mixed_state.sigma_xx > 0.0,
        });
    }
    Ok(rows)
}

/// CSV export with shortest round-trip decimals.
pub fn cutoff_scan_csv(rows: &[CutoffRow]) -> String {
    let mut out = String::from("lambda,sxx_exact,sxx_mixed,det_mixed,heisenberg_ok,positive_ok\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cutoff, r.sxx_exact, r.sxx_mixed, r.det_mixed, r.heisenberg_ok, r.positive_ok
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{geometric_grid, order_scan};
    use approx::assert_abs_diff_eq;
    use rand_core::{RngCore, SeedableRng};

    fn spec(gamma0: f64, temperature: f64, cutoff: f64) -> OhmicSpec {
        OhmicSpec {
            gamma0,
            temperature,
            cutoff,
            frequency: 1.0,
            mass: 1.0,
        }
    }

    #[test]
    fn harmonic_number_at_origin_is_exactly_zero() {
        let h0 = harmonic_number(c64::new(0.0, 0.0)).unwrap();
        assert_eq!(h0, c64::new(0.0, 0.0));
    }

    #[test]
    fn harmonic_number_small_integers() {
        let h1 = harmonic_number(c64::new(1.0, 0.0)).unwrap();
        let h2 = harmonic_number(c64::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h1.re, 1.0, epsilon = 1e-14);
        assert!(h1.im.abs() < 1e-14);
        assert_abs_diff_eq!(h2.re, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn harmonic_number_matches_reference_value() {
        // arbitrary-precision digamma reference at z = 2.5 + 1.3i
        let h = harmonic_number(c64::new(2.5, 1.3)).unwrap();
        assert_abs_diff_eq!(h.re, 1.764_537_341_392_175, epsilon = 1e-13);
        assert_abs_diff_eq!(h.im, 0.406_125_506_403_850_2, epsilon = 1e-13);
    }

    #[test]
    fn harmonic_number_recurrence_identity() {
        let z = c64::new(2.5, 1.3);
        let lhs = harmonic_number(z).unwrap() - harmonic_number(z - 1.0).unwrap();
        let rhs = 1.0 / z;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn harmonic_number_recurrence_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mut checked = 0;
        while checked < 1000 {
            let re = (unit() - 0.5) * 200.0;
            let im = (unit() - 0.5) * 200.0;
            let z = c64::new(re, im);
            if z.norm() > 100.0 || z.norm() < 1e-3 {
                continue;
            }
            // skip the pole lines of H(z) and H(z-1)
            if im.abs() < 1e-6 && re < 0.5 && (re - re.round()).abs() < 1e-6 {
                continue;
            }
            let lhs = harmonic_number(z).unwrap() - harmonic_number(z - 1.0).unwrap();
            let rhs = 1.0 / z;
            let err = (lhs - rhs).norm() / rhs.norm().max(1.0);
            assert!(err < 1e-12, "z = {z}: recurrence error {err}");
            checked += 1;
        }
    }

    #[test]
    fn harmonic_number_large_argument_asymptotics() {
        // H(10⁶) - ln(10⁶) - γ = 1/(2·10⁶) + O(10⁻¹²)
        let z = c64::new(1e6, 0.0);
        let h = harmonic_number(z).unwrap();
        let tail = h.re - 1e6f64.ln() - EULER_GAMMA;
        assert_abs_diff_eq!(tail, 0.5e-6, epsilon = 1e-9);
    }

    #[test]
    fn harmonic_number_rejects_negative_integers() {
        assert!(harmonic_number(c64::new(-3.0, 0.0)).is_err());
        assert!(harmonic_number(c64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn late_time_coefficients_golden_values() {
        // frozen from an arbitrary-precision digamma evaluation of I₀ at
        // γ₀ = 0.1, T = 1, Λ = 100, Ω = M = 1
        let q = late_time_coefficients(&spec(0.1, 1.0, 100.0)).unwrap();
        assert_abs_diff_eq!(q.i0.re, 0.372_050_159_641_197_1, epsilon = 1e-12);
        assert_abs_diff_eq!(q.i0.im, 2.098_447_019_736_088_5, epsilon = 1e-12);
        assert_abs_diff_eq!(q.d_xp, 0.209_844_701_973_608_85, epsilon = 1e-12);
        assert_abs_diff_eq!(q.d_pp, 0.258_002_993_679_011_25, epsilon = 1e-12);
        assert_abs_diff_eq!(q.omega_tilde, 0.994_987_437_106_62, epsilon = 1e-14);
        assert_eq!(q.omega_r, 1.0);
        assert_eq!(q.gamma, 0.1);
    }

    #[test]
    fn late_time_coefficients_zero_temperature_golden_values() {
        let q = late_time_coefficients(&spec(0.05, 0.0, 1000.0)).unwrap();
        assert_abs_diff_eq!(q.d_xp, 0.217_457_259_158_712_64, epsilon = 1e-12);
        assert_abs_diff_eq!(q.d_pp, 0.070_214_136_018_185_03, epsilon = 1e-12);
    }

    #[test]
    fn diffusion_scales_out_with_damping() {
        // overall γ₀ prefactors: both coefficients vanish proportionally
        let q = late_time_coefficients(&spec(1e-12, 0.5, 100.0)).unwrap();
        assert!(q.d_xp.abs() < 1e-11);
        assert!(q.d_pp.abs() < 1e-11);
        let q2 = late_time_coefficients(&spec(2e-12, 0.5, 100.0)).unwrap();
        assert_abs_diff_eq!(q2.d_xp / q.d_xp, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn anomalous_diffusion_log_cutoff_growth() {
        // at T = 0, raising Λ by 10x adds exactly γ₀·(2/π)·ln 10 to D_xp
        let g0 = 0.08;
        let a = late_time_coefficients(&spec(g0, 0.0, 200.0)).unwrap();
        let b = late_time_coefficients(&spec(g0, 0.0, 2000.0)).unwrap();
        let expected = g0 * (2.0 / std::f64::consts::PI) * 10f64.ln();
        assert_abs_diff_eq!(b.d_xp - a.d_xp, expected, epsilon = 1e-12);
        // at T > 0 the same growth holds up to O(T/Λ)
        let a = late_time_coefficients(&spec(g0, 0.3, 2000.0)).unwrap();
        let b = late_time_coefficients(&spec(g0, 0.3, 20000.0)).unwrap();
        assert_abs_diff_eq!(b.d_xp - a.d_xp, expected, epsilon = 1e-3);
    }

    #[test]
    fn truncated_equals_exact_in_the_weak_damping_limit() {
        let s = spec(1e-10, 0.7, 500.0);
        let exact = late_time_coefficients(&s).unwrap();
        let trunc = truncated_coefficients(&s).unwrap();
        assert_abs_diff_eq!(trunc.d_xp / exact.d_xp, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(trunc.d_pp / exact.d_pp, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn truncated_dxp_is_gamma_times_frozen_i0() {
        let s = spec(0.07, 0.4, 300.0);
        let trunc = truncated_coefficients(&s).unwrap();
        assert_abs_diff_eq!(trunc.d_xp, s.gamma0 * trunc.i0.im, epsilon = 1e-15);
        assert_eq!(trunc.mode, CoefficientMode::TruncatedSecondOrder);
    }

    #[test]
    fn coefficient_truncation_error_is_second_order_in_damping() {
        let grid = geometric_grid(1e-3, 1e-2, 7);
        for pick in ["dxp", "dpp"] {
            let scan = order_scan(
                |g0| {
                    let s = spec(g0, 0.5, 200.0);
                    let exact = late_time_coefficients(&s)?;
                    let trunc = truncated_coefficients(&s)?;
                    Ok(match pick {
                        "dxp" => (exact.d_xp - trunc.d_xp).abs(),
                        _ => (exact.d_pp - trunc.d_pp).abs(),
                    })
                },
                &grid,
            )
            .unwrap();
            assert!(
                scan.slope > 1.8 && scan.slope < 2.2,
                "{pick}: slope {}",
                scan.slope
            );
        }
    }

    #[test]
    fn stationary_covariance_analytic_zero_temperature_anchor() {
        // σ_xx at T = 0 collapses to atan2(Ω̃, γ₀)/(π M Ω̃): the log Λ terms
        // cancel exactly, independent of the cutoff
        for (g0, cutoff) in [(0.05, 1e2), (0.05, 1e4), (0.2, 1e3)] {
            let s = spec(g0, 0.0, cutoff);
            let q = late_time_coefficients(&s).unwrap();
            let sigma = stationary_covariance(&q, s.mass).unwrap();
            let theta = s.omega_tilde().atan2(g0);
            let anchor = theta / (std::f64::consts::PI * s.mass * s.omega_tilde());
            assert_abs_diff_eq!(sigma.sigma_xx, anchor, epsilon = 1e-12);
            assert_eq!(sigma.sigma_xp, 0.0);
        }
    }

    #[test]
    fn stationary_covariance_ground_state_limit() {
        // T = 0, γ₀ → 0: σ_xx → 1/(2MΩ), σ_pp → MΩ/2
        let s = spec(1e-6, 0.0, 100.0);
        let q = late_time_coefficients(&s).unwrap();
        let sigma = stationary_covariance(&q, s.mass).unwrap();
        assert_abs_diff_eq!(sigma.sigma_xx, 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(sigma.sigma_pp, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn stationary_covariance_high_temperature_equipartition() {
        let s = spec(0.05, 100.0, 10_000.0);
        let q = late_time_coefficients(&s).unwrap();
        let sigma = stationary_covariance(&q, s.mass).unwrap();
        let equipartition = s.temperature / (s.mass * s.frequency * s.frequency);
        assert!(
            (sigma.sigma_xx / equipartition - 1.0).abs() < 0.02,
            "σ_xx = {} vs T/MΩ² = {equipartition}",
            sigma.sigma_xx
        );
    }

    #[test]
    fn stationary_covariance_requires_relaxation() {
        let mut q = late_time_coefficients(&spec(0.1, 0.0, 100.0)).unwrap();
        q.gamma = 0.0;
        assert!(stationary_covariance(&q, 1.0).is_err());
    }

    #[test]
    fn covariance_flow_symplectic_without_dissipation() {
        // Γ = D_pp = D_xp = 0: purely harmonic flow conserves det σ
        let q = QbmCoefficients {
            omega_r: 1.3,
            gamma: 0.0,
            d_pp: 0.0,
            d_xp: 0.0,
            omega_tilde: 1.3,
            i0: c64::new(0.0, 0.0),
            mode: CoefficientMode::Exact,
        };
        let sigma0 = GaussianState::centered(0.9, 0.2, 0.7);
        let flow = covariance_flow(&q, 1.0, &sigma0, 7.0, 1e-10).unwrap();
        let d0 = sigma0.det();
        for (_, s) in flow.iter().step_by(50) {
            assert_abs_diff_eq!(s.det(), d0, epsilon = 1e-7);
        }
    }

    #[test]
    fn covariance_flow_fixed_point_is_stationary_covariance() {
        let s = spec(0.1, 0.8, 300.0);
        let q = late_time_coefficients(&s).unwrap();
        let target = stationary_covariance(&q, s.mass).unwrap();
        // starting at the fixed point the trajectory stays there
        let flow = covariance_flow(&q, s.mass, &target, 30.0, 1e-10).unwrap();
        for (_, st) in flow.iter().step_by(100) {
            assert_abs_diff_eq!(st.sigma_xx, target.sigma_xx, epsilon = 1e-8);
            assert_abs_diff_eq!(st.sigma_pp, target.sigma_pp, epsilon = 1e-8);
            assert!(st.sigma_xp.abs() < 1e-8);
        }
    }

    #[test]
    fn covariance_flow_converges_from_random_initial_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for (g0, temp) in [(0.05, 0.0), (0.15, 1.2), (0.3, 0.4), (0.08, 3.0)] {
            let s = spec(g0, temp, 500.0);
            let q = late_time_coefficients(&s).unwrap();
            let target = stationary_covariance(&q, s.mass).unwrap();
            for _ in 0..10 {
                let sigma0 =
                    GaussianState::centered(0.1 + 3.0 * unit(), unit() - 0.5, 0.1 + 3.0 * unit());
                let relaxed =
                    covariance_relax(&q, s.mass, &sigma0, 50.0 / g0, 1e-10).unwrap();
                let err = ((relaxed.sigma_xx - target.sigma_xx) / target.sigma_xx)
                    .abs()
                    .max(((relaxed.sigma_pp - target.sigma_pp) / target.sigma_pp).abs());
                assert!(err < 1e-6, "γ₀={g0} T={temp}: relative error {err}");
            }
        }
    }

    #[test]
    fn cutoff_scan_exact_column_is_flat_and_mixed_column_drifts() {
        let s = spec(0.05, 0.0, 100.0);
        let grid: Vec<f64> = (0..7).map(|k| 100.0 * 10f64.powf(k as f64 / 2.0)).collect();
        let rows = cutoff_scan(&s, &grid).unwrap();
        let first = rows.first().unwrap().sxx_exact;
        for r in &rows {
            assert!((r.sxx_exact / first - 1.0).abs() < 1e-10);
            assert!(r.sxx_mixed < r.sxx_exact, "mixed underestimates");
        }
        // mixed column decreases logarithmically
        assert!(rows.last().unwrap().sxx_mixed < rows.first().unwrap().sxx_mixed);
    }

    #[test]
    fn cutoff_scan_csv_format() {
        let s = spec(0.05, 0.0, 100.0);
        let rows = cutoff_scan(&s, &[100.0, 1000.0]).unwrap();
        let csv = cutoff_scan_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,sxx_exact,sxx_mixed,det_mixed,heisenberg_ok,positive_ok"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("100,"));
        assert!(first.ends_with(",false,true") || first.ends_with(",true,true"));
    }

    #[test]
    fn cutoff_scan_rejects_bad_grids() {
        let s = spec(0.05, 0.0, 100.0);
        assert!(cutoff_scan(&s, &[5.0, 100.0]).is_err());
        assert!(cutoff_scan(&s, &[100.0, 50.0]).is_err());
    }

    #[test]
    fn ohmic_spec_validation() {
        assert!(spec(0.1, 0.0, 100.0).validate().is_ok());
        assert!(spec(1.5, 0.0, 100.0).validate().is_err()); // overdamped
        assert!(spec(0.1, 0.0, 5.0).validate().is_err()); // cutoff too low
        assert!(spec(-0.1, 0.0, 100.0).validate().is_err());
    }
}
