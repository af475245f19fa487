//! The Λ-type emitter, its coupling to a detector mode, and closed-form
//! reference results for the isolated emitter.
//!
//! Level order is fixed as `g = 0`, `a = 1`, `e = 2`. The laser drives
//! `g ↔ e` with `Ω σ_eg + h.c.`, a second coherent field drives `g ↔ a` with
//! `Ω_r σ_ga + h.c.`, and `e` decays to `g` and `a` with rates `γ1`, `γ2`.
//! Everything is written in the frame rotating at the laser frequency.
//!
//! The closed-form functions below use plain complex arithmetic only and never
//! touch the Liouvillian code, so they can serve as independent references.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouville::{Collapse, LindbladModel};
use crate::qops::{annihilation, embed, transition, Operator, SpaceLayout};

pub const G: usize = 0;
pub const A: usize = 1;
pub const E: usize = 2;
pub const EMITTER_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams {
    /// Laser Rabi frequency on `g ↔ e`.
    pub omega: f64,
    /// Rabi frequency of the `g ↔ a` drive.
    pub omega_r: f64,
    /// Decay rate `e → g`.
    pub gamma1: f64,
    /// Decay rate `e → a`.
    pub gamma2: f64,
    /// Emitter-laser detuning.
    pub delta_e: f64,
}

impl LambdaParams {
    /// Resonant drive with `γ1 = γ2 = 1`.
    pub fn resonant(omega: f64, omega_r: f64) -> Self {
        Self { omega, omega_r, gamma1: 1.0, gamma2: 1.0, delta_e: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("gamma1", self.gamma1)?;
        check_positive("gamma2", self.gamma2)?;
        check_nonneg("omega", self.omega)?;
        check_nonneg("omega_r", self.omega_r)?;
        check_finite("delta_e", self.delta_e)
    }

    /// Common factor applied to every rate and frequency.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            omega: self.omega * factor,
            omega_r: self.omega_r * factor,
            gamma1: self.gamma1 * factor,
            gamma2: self.gamma2 * factor,
            delta_e: self.delta_e * factor,
        }
    }

    /// `γ*` for equal decay rates (`Ω²/γ`); for unequal rates the
    /// `e → a` equivalent rate.
    pub fn gamma_star(&self) -> f64 {
        equivalent_decay_rates(self.omega, self.gamma1, self.gamma2).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Emitter-detector coupling.
    pub g: f64,
    /// Detector linewidth (detection bandwidth).
    pub kappa: f64,
    /// Detector-laser detuning.
    pub delta_s: f64,
    /// Fock cutoff: the mode keeps levels `0..=n_max`.
    pub n_max: usize,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("kappa", self.kappa)?;
        check_nonneg("g", self.g)?;
        check_finite("delta_s", self.delta_s)?;
        if self.n_max < 2 {
            return Err(Error::param("n_max", "Fock cutoff must be at least 2"));
        }
        Ok(())
    }

    /// Coupling used for passive-detector runs: `min(10⁻³, κ/10)`.
    pub fn passive_coupling(kappa: f64) -> f64 {
        (1e-3f64).min(kappa / 10.0)
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    check_finite(name, v)?;
    if v < 0.0 {
        return Err(Error::param(name, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    check_finite(name, v)?;
    if v <= 0.0 {
        return Err(Error::param(name, format!("must be > 0, got {v}")));
    }
    Ok(())
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `σ_ij` on the three-level emitter.
pub fn sigma(i: usize, j: usize) -> Operator {
    transition(i, j, EMITTER_DIM).expect("level index below 3")
}

/// Lowering operator of the detected transition, `σ_ae = |a⟩⟨e|`.
pub fn lambda_lowering() -> Operator {
    sigma(A, E)
}

pub fn build_lambda_emitter(p: &LambdaParams) -> Result<LindbladModel> {
    p.validate()?;
    let drive = sigma(E, G).scale(re(p.omega)).add(&sigma(G, A).scale(re(p.omega_r)))?;
    let h = sigma(E, E).scale(re(p.delta_e)).add(&drive)?.add(&drive.adjoint())?;
    LindbladModel::new(
        h,
        vec![Collapse { rate: p.gamma1, op: sigma(G, E) }, Collapse { rate: p.gamma2, op: sigma(A, E) }],
    )
}

/// Extend `model` by a damped harmonic mode `s` coupled through
/// `Δ_s s†s + g (lowering · s† + h.c.)` and dissipating with `κ D[s]`.
///
/// `lowering` acts on the emitter space. The detector becomes the last
/// subsystem of the returned layout.
pub fn attach_detector_mode(model: &LindbladModel, lowering: &Operator, d: &DetectorParams) -> Result<LindbladModel> {
    d.validate()?;
    if lowering.layout() != model.layout() {
        return Err(Error::LayoutMismatch {
            left: model.layout().subsystem_dims().to_vec(),
            right: lowering.layout().subsystem_dims().to_vec(),
        });
    }
    let mode = annihilation(d.n_max)?;
    let emitter_slots = model.layout().num_subsystems();
    let layout = model.layout().extend(mode.layout());

    let lift = |op: &Operator| -> Operator {
        let id = Operator::identity(mode.layout());
        op.kron(&id)
    };
    let s = embed(&mode, emitter_slots, &layout)?;
    let sd = s.adjoint();
    let a = lift(lowering);

    let mut h = lift(model.hamiltonian());
    h = h.add(&sd.matmul(&s)?.scale(re(d.delta_s)))?;
    let coupling = a.matmul(&sd)?.scale(re(d.g));
    h = h.add(&coupling)?.add(&coupling.adjoint())?;

    let mut collapses: Vec<Collapse> =
        model.collapses().iter().map(|c| Collapse { rate: c.rate, op: lift(&c.op) }).collect();
    collapses.push(Collapse { rate: d.kappa, op: s });
    debug_assert_eq!(h.layout(), &layout);
    LindbladModel::new(h, collapses)
}

pub fn build_emitter_detector(p: &LambdaParams, d: &DetectorParams) -> Result<LindbladModel> {
    let emitter = build_lambda_emitter(p)?;
    attach_detector_mode(&emitter, &lambda_lowering(), d)
}

/// Detector annihilation operator on a layout whose last subsystem is the mode.
pub fn detector_annihilation(layout: &SpaceLayout) -> Result<Operator> {
    let slot = layout.num_subsystems() - 1;
    let n_max = layout.subsystem_dims()[slot] - 1;
    embed(&annihilation(n_max)?, slot, layout)
}

/// The six independent elements of the emitter steady state for
/// `γ1 = γ2 = γ`, `Δ_e = 0`; `ρ_ij = ⟨i|ρ|j⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSteadyState {
    pub gg: Complex64,
    pub aa: Complex64,
    pub ee: Complex64,
    pub ge: Complex64,
    pub ae: Complex64,
    pub ga: Complex64,
}

impl ClosedFormSteadyState {
    /// Full 3×3 matrix in the `(g, a, e)` basis.
    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        match (i, j) {
            (G, G) => self.gg,
            (A, A) => self.aa,
            (E, E) => self.ee,
            (G, E) => self.ge,
            (A, E) => self.ae,
            (G, A) => self.ga,
            (E, G) => self.ge.conj(),
            (E, A) => self.ae.conj(),
            (A, G) => self.ga.conj(),
            _ => panic!("level index out of range"),
        }
    }
}

fn equal_decay(p: &LambdaParams) -> Result<f64> {
    p.validate()?;
    if p.gamma1 != p.gamma2 {
        return Err(Error::NotApplicable("requires gamma1 == gamma2".into()));
    }
    if p.delta_e != 0.0 {
        return Err(Error::NotApplicable("requires delta_e == 0".into()));
    }
    Ok(p.gamma1)
}

pub fn steady_state_closed_form(p: &LambdaParams) -> Result<ClosedFormSteadyState> {
    let gamma = equal_decay(p)?;
    let (w, r) = (p.omega, p.omega_r);
    let (w2, r2) = (w * w, r * r);
    let g2 = gamma * gamma;
    let m = w2 * w2 + 2.0 * r2 * (2.0 * g2 + w2 + 2.0 * r2);
    if m == 0.0 {
        return Err(Error::NotApplicable("both drives vanish; steady state not unique".into()));
    }
    Ok(ClosedFormSteadyState {
        gg: re(r2 * (2.0 * g2 + w2 + 2.0 * r2) / m),
        aa: re((w2 * w2 + r2 * (2.0 * g2 - w2 + 2.0 * r2)) / m),
        ee: re(2.0 * w2 * r2 / m),
        ge: Complex64::new(0.0, 2.0 * gamma * w * r2 / m),
        ae: re((-w2 * w * r + 2.0 * w * r2 * r) / m),
        ga: Complex64::new(0.0, -gamma * w2 * r / m),
    })
}

/// Steady excited-state population `2Ω²Ω_r² / (Ω⁴ + 2Ω_r²(2γ² + Ω² + 2Ω_r²))`.
pub fn excited_population_closed_form(omega: f64, omega_r: f64, gamma: f64) -> f64 {
    let (w2, r2) = (omega * omega, omega_r * omega_r);
    2.0 * w2 * r2 / (w2 * w2 + 2.0 * r2 * (2.0 * gamma * gamma + w2 + 2.0 * r2))
}

/// Ground-manifold rates after adiabatic elimination of `e`:
/// `γ*_i = 4 γ_i |Ω|² / (γ1 + γ2)²`.
pub fn equivalent_decay_rates(omega: f64, gamma1: f64, gamma2: f64) -> (f64, f64) {
    let s = gamma1 + gamma2;
    let k = 4.0 * omega * omega / (s * s);
    (k * gamma1, k * gamma2)
}

/// Closed-form spectral decomposition at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParts {
    /// Weight of the `δ(ω)` component, including the `γ` prefactor.
    pub coherent_weight: f64,
    pub narrow: f64,
    pub broad: f64,
    /// Whether the parameters lie in the regime the expression was derived for.
    pub in_regime: bool,
}

/// Narrow/broad integrated intensities of a closed-form spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedParts {
    pub narrow: f64,
    pub broad: f64,
}

fn lorentz(omega: f64, center: f64, width: f64) -> f64 {
    width / ((omega - center).powi(2) + width * width)
}

/// Spectrum of `e → a` for `Ω_r ≪ γ*` (single line of half-width `γ*`).
pub fn spectrum_weak_closed_form(omega: f64, p: &LambdaParams) -> Result<SpectrumParts> {
    let gamma = equal_decay(p)?;
    if p.omega == 0.0 {
        return Err(Error::param("omega", "closed-form spectrum divides by omega"));
    }
    let rho = steady_state_closed_form(p)?;
    let (w, r) = (p.omega, p.omega_r);
    let gs = w * w / gamma;
    let i = Complex64::new(0.0, 1.0);
    let narrow_amp = (-i * rho.ge * w * w + rho.ae * gamma * r) / w;
    let narrow = (narrow_amp * lorentz(omega, 0.0, gs)).re;
    let o2 = omega * omega;
    let g2 = gamma * gamma;
    let broad = (rho.ae * w * r / (o2 + g2) - 2.0 * i * rho.ge * w.powi(3) / gamma * (g2 - o2) / (g2 + o2).powi(2)).re;
    Ok(SpectrumParts { coherent_weight: gamma * rho.ae.norm_sqr(), narrow, broad, in_regime: r <= gs / 3.0 })
}

/// Spectrum of `e → a` for `Ω_r ≫ γ*` (triplet at `0, ±2Ω_r`).
pub fn spectrum_strong_closed_form(omega: f64, p: &LambdaParams) -> Result<SpectrumParts> {
    let gamma = equal_decay(p)?;
    if p.omega == 0.0 {
        return Err(Error::param("omega", "closed-form spectrum divides by omega"));
    }
    let rho = steady_state_closed_form(p)?;
    let (w, r) = (p.omega, p.omega_r);
    let gs = w * w / gamma;
    let i = Complex64::new(0.0, 1.0);
    let shape = 2.0 * lorentz(omega, 0.0, gs) + lorentz(omega, 2.0 * r, gs) + lorentz(omega, -2.0 * r, gs);
    let narrow = (-i / 4.0 * rho.ge * w * shape).re;
    let broad = (rho.ae * w * r / (omega * omega + gamma * gamma)).re;
    Ok(SpectrumParts { coherent_weight: gamma * rho.ae.norm_sqr(), narrow, broad, in_regime: r >= 3.0 * gs })
}

/// Integrals over all ω of the weak-regime narrow and broad parts.
pub fn weak_integrated(p: &LambdaParams) -> Result<IntegratedParts> {
    let gamma = equal_decay(p)?;
    let rho = steady_state_closed_form(p)?;
    let (w, r) = (p.omega, p.omega_r);
    let i = Complex64::new(0.0, 1.0);
    let pi = std::f64::consts::PI;
    // ∫ γ*/(ω²+γ*²) = π, ∫ 1/(ω²+γ²) = π/γ, ∫ (γ²−ω²)/(γ²+ω²)² = 0
    let narrow = ((-i * rho.ge * w * w + rho.ae * gamma * r) / w).re * pi;
    let broad = (rho.ae * w * r).re * pi / gamma;
    Ok(IntegratedParts { narrow, broad })
}

/// Integrals over all ω of the strong-regime narrow and broad parts.
pub fn strong_integrated(p: &LambdaParams) -> Result<IntegratedParts> {
    let gamma = equal_decay(p)?;
    let rho = steady_state_closed_form(p)?;
    let (w, r) = (p.omega, p.omega_r);
    let i = Complex64::new(0.0, 1.0);
    let pi = std::f64::consts::PI;
    let narrow = (-i / 4.0 * rho.ge * w).re * 4.0 * pi;
    let broad = (rho.ae * w * r).re * pi / gamma;
    Ok(IntegratedParts { narrow, broad })
}

/// Printed weak-excitation g²: sine coefficient `(Ω² − 2Ω_r)/(2γΩ_r)`.
pub fn g2_closed_form(tau: f64, p: &LambdaParams) -> Result<f64> {
    let c = g2_printed_coefficient(p)?;
    Ok(g2_with_sine_coefficient(tau, p, c))
}

pub fn g2_printed_coefficient(p: &LambdaParams) -> Result<f64> {
    let gamma = equal_decay(p)?;
    if p.omega_r == 0.0 {
        return Err(Error::param("omega_r", "sine coefficient is singular at omega_r = 0"));
    }
    Ok((p.omega * p.omega - 2.0 * p.omega_r) / (2.0 * gamma * p.omega_r))
}

/// `1 − [cos(2Ω_rτ) + c·sin(2Ω_rτ)] e^{−γ*τ}` for an arbitrary coefficient `c`.
pub fn g2_with_sine_coefficient(tau: f64, p: &LambdaParams, c: f64) -> f64 {
    let gs = p.gamma_star();
    let x = 2.0 * p.omega_r * tau;
    1.0 - (x.cos() + c * x.sin()) * (-gs * tau).exp()
}

/// Least-squares sine coefficient matching a sampled g² trace to
/// [`g2_with_sine_coefficient`]; returns `(c, max |residual|)`.
pub fn fit_g2_sine_coefficient(delays: &[f64], values: &[f64], p: &LambdaParams) -> (f64, f64) {
    let gs = p.gamma_star();
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &v) in delays.iter().zip(values) {
        let env = (-gs * t).exp();
        let x = 2.0 * p.omega_r * t;
        let basis = -x.sin() * env;
        let target = v - (1.0 - x.cos() * env);
        num += basis * target;
        den += basis * basis;
    }
    let c = if den > 0.0 { num / den } else { 0.0 };
    let resid =
        delays.iter().zip(values).map(|(&t, &v)| (v - g2_with_sine_coefficient(t, p, c)).abs()).fold(0.0, f64::max);
    (c, resid)
}

/// Resonance-fluorescence g² of a weakly driven two-level emitter,
/// `(1 − e^{−γ_t τ/2})²`.
pub fn g2_two_level_reference(tau: f64, gamma_t: f64) -> Result<f64> {
    check_positive("gamma_t", gamma_t)?;
    Ok((1.0 - (-0.5 * gamma_t * tau).exp()).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{build_liouvillian, lindblad_rhs, steady_state};
    use crate::qops::CMatrix;

    fn closed_matrix(c: &ClosedFormSteadyState) -> CMatrix {
        CMatrix::from_fn(3, 3, |i, j| c.element(i, j))
    }

    fn log_grid() -> Vec<f64> {
        (0..5).map(|k| 10f64.powf(-4.0 + 0.75 * k as f64)).collect()
    }

    #[test]
    fn closed_form_is_stationary_on_grid() {
        for &w in &log_grid() {
            for &r in &log_grid() {
                let p = LambdaParams::resonant(w, r);
                let model = build_lambda_emitter(&p).unwrap();
                let c = steady_state_closed_form(&p).unwrap();
                let d = lindblad_rhs(&model, &closed_matrix(&c)).unwrap();
                let worst = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(worst < 1e-10, "Ω={w} Ω_r={r}: {worst}");
                let pops = c.gg.re + c.aa.re + c.ee.re;
                assert!((pops - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn main_text_population_matches_closed_form() {
        for &w in &log_grid() {
            for &r in &log_grid() {
                let c = steady_state_closed_form(&LambdaParams::resonant(w, r)).unwrap();
                let v = excited_population_closed_form(w, r, 1.0);
                assert!((c.ee.re - v).abs() <= 1e-15 * v.max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn dark_state_without_ground_drive() {
        let c = steady_state_closed_form(&LambdaParams::resonant(1e-2, 0.0)).unwrap();
        assert_eq!(c.aa.re, 1.0);
        assert_eq!(c.gg.re + c.ee.re + c.ge.norm() + c.ae.norm() + c.ga.norm(), 0.0);
        let model = build_lambda_emitter(&LambdaParams::resonant(1e-2, 0.0)).unwrap();
        let ss = steady_state(&build_liouvillian(&model)).unwrap();
        assert!((ss.get(A, A).re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_reference_values() {
        // Ω = 1e-2, Ω_r = 1e-3: M = 1e-8 + 2e-6 (2 + 1e-4 + 2e-6) = 4.010204e-6
        let c = steady_state_closed_form(&LambdaParams::resonant(1e-2, 1e-3)).unwrap();
        let m = 1e-8 + 2e-6 * (2.0 + 1e-4 + 2e-6);
        assert!((c.ee.re - 2e-10 / m).abs() < 1e-18);
        assert!((c.ee.re - 4.98728e-5).abs() < 1e-9);
        assert_eq!(c.ae.im, 0.0);
        assert_eq!(c.ge.re, 0.0);
        assert!(steady_state_closed_form(&LambdaParams { gamma2: 2.0, ..LambdaParams::resonant(1e-2, 1e-3) }).is_err());
    }

    #[test]
    fn undriven_emitter_is_diagonal() {
        let model = build_lambda_emitter(&LambdaParams::resonant(0.0, 0.0)).unwrap();
        let h = model.hamiltonian().matrix();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
        }
        // any diagonal state on {g, a} is stationary
        let rho = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(0.3), re(0.7), re(0.0)]));
        let d = lindblad_rhs(&model, &rho).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn hamiltonian_hermitian_for_random_params() {
        for k in 0..20 {
            let x = k as f64;
            let p = LambdaParams {
                omega: 0.1 + 0.37 * x,
                omega_r: 0.05 * x,
                gamma1: 1.0 + 0.1 * x,
                gamma2: 0.5 + 0.2 * x,
                delta_e: -1.0 + 0.3 * x,
            };
            let m = build_lambda_emitter(&p).unwrap();
            assert!(m.hamiltonian().hermiticity_defect() < 1e-15);
        }
    }

    #[test]
    fn equivalent_rates() {
        let (a, b) = equivalent_decay_rates(1e-2, 1.0, 1.0);
        assert!((a - 1e-4).abs() < 1e-18 && (b - 1e-4).abs() < 1e-18);
        assert_eq!(equivalent_decay_rates(0.0, 1.0, 1.0), (0.0, 0.0));
        let (a, b) = equivalent_decay_rates(0.3, 3.0, 1.0);
        assert!((a / b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weak_closed_form_shape_and_ratio() {
        let p = LambdaParams::resonant(1e-2, 1e-5);
        let gs = p.gamma_star();
        let peak = spectrum_weak_closed_form(0.0, &p).unwrap();
        let half = spectrum_weak_closed_form(gs, &p).unwrap();
        assert!((half.narrow / peak.narrow - 0.5).abs() < 1e-12);
        assert!(peak.in_regime);
        let ints = weak_integrated(&p).unwrap();
        // printed ratio is Ω²/γ² in magnitude; the broad part enters with negative sign
        let ratio = ints.broad / ints.narrow;
        let w2 = p.omega * p.omega;
        let r2 = p.omega_r * p.omega_r;
        let exact = w2 * (2.0 * r2 - w2) / (w2 + 2.0 * r2);
        assert!((ratio - exact).abs() < 1e-10);
        // magnitude matches Ω²/γ² up to the O(Ω_r²/Ω²) term
        assert!((ratio.abs() - w2).abs() / w2 < 5.0 * r2 / w2);
    }

    #[test]
    fn strong_closed_form_triplet() {
        let p = LambdaParams::resonant(1e-2, 1e-3);
        let gs = p.gamma_star();
        let center = spectrum_strong_closed_form(0.0, &p).unwrap().narrow;
        let side = spectrum_strong_closed_form(2.0 * p.omega_r, &p).unwrap().narrow;
        // central weight is twice a sideband's; peaks are well separated
        assert!((center / side - 2.0).abs() < 0.01);
        let near = spectrum_strong_closed_form(2.0 * p.omega_r + 0.1 * gs, &p).unwrap().narrow;
        assert!(near < side);
        let ints = strong_integrated(&p).unwrap();
        let expect = (2.0 * p.omega_r.powi(2) - p.omega.powi(2)) / 2.0;
        assert!((ints.broad / ints.narrow - expect).abs() < 1e-10);
        assert!(spectrum_strong_closed_form(0.0, &LambdaParams::resonant(0.0, 1e-3)).is_err());
    }

    #[test]
    fn g2_closed_form_limits() {
        let p = LambdaParams::resonant(1e-2, 1e-3);
        assert!(g2_closed_form(0.0, &p).unwrap().abs() < 1e-15);
        assert!((g2_closed_form(1e7, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!(g2_closed_form(1.0, &LambdaParams::resonant(1e-2, 0.0)).is_err());
        // first maximum of the printed curve: tan(2Ω_rτ) = (2Ω_r c − γ*)/(2Ω_r + γ* c)
        let c = g2_printed_coefficient(&p).unwrap();
        let (gs, w) = (p.gamma_star(), 2.0 * p.omega_r);
        let mut x = ((w * c - gs) / (w + gs * c)).atan();
        while x <= 0.0 {
            x += std::f64::consts::PI;
        }
        let expected = x / w;
        let grid: Vec<f64> = (0..4000).map(|k| k as f64 * 1.0).collect();
        let (imax, _) = grid
            .iter()
            .map(|&t| g2_closed_form(t, &p).unwrap())
            .enumerate()
            .fold((0, f64::MIN), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let t_peak = grid[imax];
        assert!((t_peak - expected).abs() <= 1.0, "{t_peak} vs {expected}");
    }

    #[test]
    fn sine_fit_recovers_coefficient() {
        let p = LambdaParams::resonant(1e-2, 1e-3);
        let delays: Vec<f64> = (0..500).map(|k| k as f64 * 50.0).collect();
        let values: Vec<f64> = delays.iter().map(|&t| g2_with_sine_coefficient(t, &p, 0.049)).collect();
        let (c, resid) = fit_g2_sine_coefficient(&delays, &values, &p);
        assert!((c - 0.049).abs() < 1e-12);
        assert!(resid < 1e-12);
    }

    #[test]
    fn two_level_reference() {
        assert_eq!(g2_two_level_reference(0.0, 2.0).unwrap(), 0.0);
        let t = 2.0 * 2f64.ln() / 3.0;
        assert!((g2_two_level_reference(t, 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((g2_two_level_reference(1e3, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(g2_two_level_reference(1.0, 0.0).is_err());
    }

    #[test]
    fn detector_layout_and_decoupling() {
        let p = LambdaParams::resonant(1e-2, 1e-2);
        let d = DetectorParams { g: 0.0, kappa: 1.0, delta_s: 0.0, n_max: 3 };
        let m = build_emitter_detector(&p, &d).unwrap();
        assert_eq!(m.layout().subsystem_dims(), &[3, 4]);
        let ss = steady_state(&build_liouvillian(&m)).unwrap();
        let emitter = ss.partial_trace_keep(0).unwrap();
        let alone = steady_state(&build_liouvillian(&build_lambda_emitter(&p).unwrap())).unwrap();
        let diff = (emitter.matrix() - alone.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert!(DetectorParams { n_max: 1, ..d }.validate().is_err());
        assert!(DetectorParams { kappa: 0.0, ..d }.validate().is_err());
    }
}
