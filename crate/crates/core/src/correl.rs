//! Two-time correlations from the quantum regression theorem, emission
//! spectra, and photon statistics.
//!
//! For stationary expectation values the regression theorem gives
//! `⟨X(t) Y(t+τ)⟩ = Tr[Y · exp(Lτ)(ρ_ss X)]`. Spectra are computed from the
//! Laplace transform of that expression, i.e. one linear solve per frequency,
//! with the coherent `δ(ω)` part removed analytically.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouville::{
    build_liouvillian, stack, steady_state_graded, steady_state_with, trace_of_product, trace_row, unstack, CVector,
    DensityMatrix, LindbladModel, Propagator, SteadyStateOptions, Superoperator,
};
use crate::qops::{annihilation, embed, CMatrix, Operator, I};

/// Transform convention recorded alongside every spectrum.
pub const SPECTRUM_CONVENTION: &str = "S(w) = Re int_0^inf dtau e^{i w tau} [<A+(0) A(tau)> - |<A>|^2]; \
coherent part reported as bare weight |<A>|^2 of delta(w); w relative to the laser, in units of the emitter linewidth";

/// A steady state together with the generator that produced it.
#[derive(Debug, Clone)]
pub struct Stationary {
    propagator: Propagator,
    rho: DensityMatrix,
}

impl Stationary {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        Self::with_options(model, SteadyStateOptions::default())
    }

    pub fn with_options(model: &LindbladModel, opts: SteadyStateOptions) -> Result<Self> {
        let l = build_liouvillian(model);
        let rho = steady_state_with(&l, opts)?;
        Ok(Self { propagator: Propagator::from_superoperator(l), rho })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn liouvillian(&self) -> &Superoperator {
        self.propagator.superoperator()
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    fn check(&self, op: &Operator) -> Result<()> {
        if op.layout() != self.rho.layout() {
            return Err(Error::LayoutMismatch {
                left: self.rho.layout().subsystem_dims().to_vec(),
                right: op.layout().subsystem_dims().to_vec(),
            });
        }
        Ok(())
    }
}

/// Samples of a two-time correlation on a delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub delays: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Divisor applied to the raw correlation, if normalized.
    pub normalization: Option<f64>,
}

impl CorrelationTrace {
    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Incoherent spectrum on a frequency grid plus the coherent delta weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub frequencies: Vec<f64>,
    pub incoherent: Vec<f64>,
    pub coherent_weight: f64,
    /// `π · C_inc(0)`: the integral of the incoherent part over all ω.
    pub total_incoherent: f64,
    /// Largest `|Im|` of the two-sided transform relative to its largest magnitude.
    pub imag_residue: f64,
    pub convention: &'static str,
}

fn check_delays(delays: &[f64]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::param("delays", "empty grid"));
    }
    if delays[0] != 0.0 {
        return Err(Error::param("delays", "grid must start at 0"));
    }
    if delays.windows(2).any(|w| !(w[1] > w[0])) || delays.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("delays", "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `Tr[obs · exp(Lτ) x0]` for every delay, stepping between consecutive delays
/// and reusing the step propagator when the spacing repeats.
pub(crate) fn propagate_trace(p: &Propagator, x0: &CMatrix, obs: &CMatrix, delays: &[f64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(delays.len());
    let mut x = stack(x0);
    // Time actually propagated; a cached step is reused while it lands on the
    // next delay up to rounding in the delay values.
    let mut clock = 0.0;
    let mut cached: Option<(f64, CMatrix)> = None;
    let obs_row = stack(&obs.transpose());
    for &t in delays {
        let dt = t - clock;
        if dt > 0.0 {
            let step = match &cached {
                Some((h, m)) if (h - dt).abs() <= 1e-12 * t => {
                    clock += h;
                    m
                }
                _ => {
                    clock = t;
                    cached = Some((dt, p.exp(dt)?));
                    &cached.as_ref().unwrap().1
                }
            };
            x = step * &x;
        }
        // Tr(obs X) = Σ_ij obs_ij X_ji = vec(objᵀ) · vec(X)
        out.push(obs_row.iter().zip(x.iter()).map(|(a, b)| a * b).sum());
    }
    Ok(out)
}

/// `C(τ) = lim_t ⟨A(t) B(t+τ)⟩ = Tr[B · exp(Lτ)(ρ_ss A)]`.
pub fn two_time_correlation(
    model: &LindbladModel,
    a: &Operator,
    b: &Operator,
    delays: &[f64],
) -> Result<CorrelationTrace> {
    let st = Stationary::new(model)?;
    two_time_correlation_with(&st, a, b, delays)
}

pub fn two_time_correlation_with(
    st: &Stationary,
    a: &Operator,
    b: &Operator,
    delays: &[f64],
) -> Result<CorrelationTrace> {
    st.check(a)?;
    st.check(b)?;
    check_delays(delays)?;
    let x0 = st.rho.matrix() * a.matrix();
    let values = propagate_trace(&st.propagator, &x0, b.matrix(), delays)?;
    Ok(CorrelationTrace { delays: delays.to_vec(), values, normalization: None })
}

/// Normalized `g²(τ) = ⟨A†(0) A†(τ) A(τ) A(0)⟩ / ⟨A†A⟩²`.
pub fn g2_emitter(model: &LindbladModel, lowering: &Operator, delays: &[f64]) -> Result<CorrelationTrace> {
    let st = Stationary::new(model)?;
    g2_emitter_with(&st, lowering, delays)
}

pub fn g2_emitter_with(st: &Stationary, lowering: &Operator, delays: &[f64]) -> Result<CorrelationTrace> {
    st.check(lowering)?;
    check_delays(delays)?;
    let a = lowering.matrix();
    let n_op = a.adjoint() * a;
    let n = trace_of_product(&n_op, st.rho.matrix()).re;
    if !(n > 1e-30) {
        return Err(Error::ZeroPopulation(format!("<A+A> = {n:e}")));
    }
    let x0 = a * st.rho.matrix() * a.adjoint();
    let raw = propagate_trace(&st.propagator, &x0, &n_op, delays)?;
    let norm = n * n;
    Ok(CorrelationTrace {
        delays: delays.to_vec(),
        values: raw.into_iter().map(|z| z / norm).collect(),
        normalization: Some(norm),
    })
}

/// `L − |ρ_ss⟩⟨I|`: invertible, and equal to `L` on traceless inputs.
fn deflated(l: &Superoperator, rho: &DensityMatrix) -> CMatrix {
    let n = l.hilbert_dim();
    let r = rho.stack();
    let t = trace_row(n);
    l.matrix() - &r * t.transpose()
}

/// Incoherent emission spectrum of `lowering` on the grid `omegas`.
pub fn emission_spectrum(model: &LindbladModel, lowering: &Operator, omegas: &[f64]) -> Result<SpectrumResult> {
    let st = Stationary::new(model)?;
    emission_spectrum_with(&st, lowering, omegas)
}

pub fn emission_spectrum_with(st: &Stationary, lowering: &Operator, omegas: &[f64]) -> Result<SpectrumResult> {
    st.check(lowering)?;
    if omegas.iter().any(|w| !w.is_finite()) {
        return Err(Error::param("omegas", "non-finite frequency"));
    }
    let rho = st.rho.matrix();
    let a = lowering.matrix();
    let ad = a.adjoint();
    let mean_a = trace_of_product(a, rho);
    let mean_ad = mean_a.conj();

    // positive delays: ⟨A†(0)A(τ)⟩ starts from ρA†; negative: ⟨A†(τ)A(0)⟩ from Aρ
    let x0 = stack(&(rho * &ad - rho * mean_ad));
    let y0 = stack(&(a * rho - rho * mean_a));
    let obs_pos = stack(&a.transpose());
    let obs_neg = stack(&ad.transpose());
    let base = deflated(st.liouvillian(), &st.rho);
    let dim = base.nrows();

    let c0 = trace_of_product(&(&ad * a), rho) - mean_ad * mean_a;

    let solved: Vec<(Complex64, Complex64)> = omegas
        .par_iter()
        .map(|&w| {
            let shift = I * w;
            let mut m = base.clone();
            for k in 0..dim {
                m[(k, k)] += shift;
            }
            let pos = m.clone().lu().solve(&(-&x0)).ok_or(Error::SingularResolvent { omega: w })?;
            let mut mneg = base.clone();
            for k in 0..dim {
                mneg[(k, k)] -= shift;
            }
            let neg = mneg.lu().solve(&(-&y0)).ok_or(Error::SingularResolvent { omega: w })?;
            Ok((dot(&obs_pos, &pos), dot(&obs_neg, &neg)))
        })
        .collect::<Result<_>>()?;

    let incoherent: Vec<f64> = solved.iter().map(|(p, _)| p.re).collect();
    let two_sided: Vec<Complex64> = solved.iter().map(|(p, n)| p + n).collect();
    let scale = two_sided.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = two_sided.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(SpectrumResult {
        frequencies: omegas.to_vec(),
        incoherent,
        coherent_weight: mean_a.norm_sqr(),
        total_incoherent: std::f64::consts::PI * c0.re,
        imag_residue: if scale > 0.0 { imag / scale } else { 0.0 },
        convention: SPECTRUM_CONVENTION,
    })
}

fn dot(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// One Liouvillian eigenmode's contribution to the incoherent correlation,
/// `C_inc(τ) = Σ_k weight_k · exp(eigenvalue_k τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    pub eigenvalue: Complex64,
    pub weight: Complex64,
}

impl SpectralMode {
    /// This mode's share of `∫ S_inc dω`.
    pub fn integrated_intensity(&self) -> f64 {
        if self.eigenvalue.re < 0.0 {
            std::f64::consts::PI * self.weight.re
        } else {
            0.0
        }
    }

    /// This mode's contribution to the one-sided spectrum at `omega`.
    pub fn spectrum_at(&self, omega: f64) -> f64 {
        (-self.weight / (self.eigenvalue + I * omega)).re
    }
}

/// Eigenmode decomposition of the incoherent emission correlation of `lowering`.
pub fn spectral_modes(st: &Stationary, lowering: &Operator) -> Result<Vec<SpectralMode>> {
    st.check(lowering)?;
    let rho = st.rho.matrix();
    let a = lowering.matrix();
    let ad = a.adjoint();
    let mean_ad = trace_of_product(&ad, rho);
    let x0 = stack(&(rho * &ad - rho * mean_ad));

    let (values, v) = st.liouvillian().eigen()?;
    let c = v.clone().lu().solve(&x0).ok_or(Error::EigenFailure)?;
    let obs = stack(&a.transpose());
    // the stationary mode carries no incoherent weight
    let zero_mode = (0..values.len()).min_by(|&i, &j| values[i].norm().total_cmp(&values[j].norm())).unwrap_or(0);
    Ok((0..values.len())
        .filter(|&k| k != zero_mode)
        .map(|k| {
            let proj: Complex64 = obs.iter().zip(v.column(k).iter()).map(|(o, x)| o * x).sum();
            SpectralMode { eigenvalue: values[k], weight: c[k] * proj }
        })
        .collect())
}

/// Integrated intensities of modes slower / faster than `rate_cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarrowBroad {
    pub narrow: f64,
    pub broad: f64,
}

pub fn split_intensities(modes: &[SpectralMode], rate_cutoff: f64) -> NarrowBroad {
    let mut out = NarrowBroad { narrow: 0.0, broad: 0.0 };
    for m in modes {
        if -m.eigenvalue.re < rate_cutoff {
            out.narrow += m.integrated_intensity();
        } else {
            out.broad += m.integrated_intensity();
        }
    }
    out
}

/// `⟨s†s†ss⟩ / ⟨s†s⟩²` in the steady state of a model containing a bosonic mode.
pub fn detector_g2_zero(model: &LindbladModel, detector_slot: usize) -> Result<f64> {
    detector_g2_zero_with(model, detector_slot, SteadyStateOptions::default())
}

pub fn detector_g2_zero_with(model: &LindbladModel, detector_slot: usize, opts: SteadyStateOptions) -> Result<f64> {
    let dims = model.layout().subsystem_dims();
    if detector_slot >= dims.len() {
        return Err(Error::IndexOutOfRange { index: detector_slot, bound: dims.len() });
    }
    let n_max = dims[detector_slot] - 1;
    if n_max < 3 {
        return Err(Error::param("n_max", format!("Fock cutoff {n_max} is below 3")));
    }
    let s = embed(&annihilation(n_max)?, detector_slot, model.layout())?;
    let l = build_liouvillian(model);
    let sm = s.matrix();
    let sd = sm.adjoint();
    let number = &sd * sm;
    let pairs = &sd * &sd * sm * sm;
    let rough = steady_state_with(&l, opts)?;
    let n1 = trace_of_product(&number, rough.matrix()).re;
    if !(n1 > 0.0) {
        return Err(Error::ZeroPopulation(format!("<s+s> = {n1:e}")));
    }
    // Fock sector n scaled by <s+s>^(n/2) so that two-photon elements are resolved.
    let eps = n1.sqrt().clamp(1e-150, 1.0);
    let stride: usize = dims[detector_slot + 1..].iter().product();
    let scale: Vec<f64> = (0..model.dim()).map(|i| eps.powi(((i / stride) % dims[detector_slot]) as i32)).collect();
    let graded = SteadyStateOptions { check_kernel: false, ..opts };
    let rho = steady_state_graded(&l, &scale, graded)?;
    let n1 = trace_of_product(&number, rho.matrix()).re;
    let n2 = trace_of_product(&pairs, rho.matrix()).re;
    Ok(n2 / (n1 * n1))
}

/// [`detector_g2_zero`] at cutoffs `n_max` and `n_max + 1`; fails if they
/// differ by more than `rel_tol`. Returns the value at `n_max`.
pub fn detector_g2_zero_converged<F>(build: F, n_max: usize, rel_tol: f64) -> Result<f64>
where
    F: Fn(usize) -> Result<LindbladModel>,
{
    let lo_model = build(n_max)?;
    let slot = lo_model.layout().num_subsystems() - 1;
    let lo = detector_g2_zero(&lo_model, slot)?;
    let hi = detector_g2_zero(&build(n_max + 1)?, slot)?;
    let rel = (hi - lo).abs() / lo.abs().max(f64::MIN_POSITIVE);
    if rel > rel_tol {
        return Err(Error::NotConverged(format!(
            "g2(0) changes by {:.3}% from cutoff {n_max} to {}",
            100.0 * rel,
            n_max + 1
        )));
    }
    Ok(lo)
}

/// Integral of the piecewise-linear interpolant of `(xs, ys)` over `[lo, hi]`.
pub(crate) fn integrate_between(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..xs.len().saturating_sub(1) {
        let (x0, x1) = (xs[k], xs[k + 1]);
        let a = x0.max(lo);
        let b = x1.min(hi);
        if b <= a {
            continue;
        }
        let f = |x: f64| ys[k] + (ys[k + 1] - ys[k]) * (x - x0) / (x1 - x0);
        acc += 0.5 * (f(a) + f(b)) * (b - a);
    }
    acc
}

/// Trapezoid integral of the incoherent spectrum over its grid.
pub fn integrate_grid(result: &SpectrumResult) -> f64 {
    let xs = &result.frequencies;
    integrate_between(xs, &result.incoherent, xs[0], xs[xs.len() - 1])
}

/// Full width `2W` of the smallest interval `[−W, W]` holding `mass` of the
/// incoherent spectral weight (`total_incoherent`).
pub fn spectrum_bandwidth(result: &SpectrumResult, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::param("mass", "must lie in (0, 1)"));
    }
    let xs = &result.frequencies;
    if xs.len() < 2 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("frequencies", "grid must be strictly increasing"));
    }
    let ys = &result.incoherent;
    let target = mass * result.total_incoherent;
    let w_max = xs[0].abs().min(xs[xs.len() - 1].abs());
    if xs[0] >= 0.0 || integrate_between(xs, ys, -w_max, w_max) < target {
        return Err(Error::GridTooNarrow(format!(
            "grid holds {:.4} of the incoherent weight, {mass} requested",
            integrate_between(xs, ys, -w_max, w_max) / result.total_incoherent
        )));
    }
    let (mut lo, mut hi) = (0.0, w_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if integrate_between(xs, ys, -mid, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(2.0 * hi)
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// `n` logarithmically spaced points on `[a, b]`, `0 < a < b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    linear_grid(la, lb, n).into_iter().map(f64::exp).collect()
}

/// Symmetric grid on `[−span, span]`, dense around each of `centers`:
/// offsets from `min_offset` to `span` at `per_decade` points per decade on
/// both sides of every center, plus the centers themselves.
pub fn log_dense_grid(centers: &[f64], min_offset: f64, span: f64, per_decade: usize) -> Vec<f64> {
    let decades = (span / min_offset).log10().max(0.0);
    let n = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    let offsets = log_grid(min_offset, 2.0 * span, n);
    let mut pts = vec![-span, span];
    for &c in centers {
        for sign in [-1.0, 1.0] {
            let c = c * sign;
            pts.push(c);
            for &o in &offsets {
                pts.push(c - o);
                pts.push(c + o);
            }
        }
    }
    pts.retain(|x| x.abs() <= span);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
    pts
}

/// Lorentzian `amplitude · w² / ((x − center)² + w²) + offset` fitted by
/// Levenberg-Marquardt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzFit {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

pub fn fit_lorentzian(xs: &[f64], ys: &[f64], guess_center: f64, guess_width: f64) -> Result<LorentzFit> {
    if xs.len() != ys.len() || xs.len() < 5 {
        return Err(Error::param("fit", "need at least 5 matching samples"));
    }
    let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let model = |p: &[f64; 4], x: f64| {
        let d = x - p[1];
        p[0] * p[2] * p[2] / (d * d + p[2] * p[2]) + p[3]
    };
    let cost = |p: &[f64; 4]| -> f64 { xs.iter().zip(ys).map(|(&x, &y)| ((model(p, x) - y) / scale).powi(2)).sum() };
    let peak = ys.iter().copied().fold(f64::MIN, f64::max);
    let mut p = [peak, guess_center, guess_width, 0.0];
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = nalgebra::Matrix4::<f64>::zeros();
        let mut jtr = nalgebra::Vector4::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let d = x - p[1];
            let w2 = p[2] * p[2];
            let den = d * d + w2;
            let shape = w2 / den;
            let j = nalgebra::Vector4::new(
                shape,
                p[0] * w2 * 2.0 * d / (den * den),
                p[0] * 2.0 * p[2] * d * d / (den * den),
                1.0,
            ) / scale;
            let r = (y - model(&p, x)) / scale;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] *= 1.0 + lambda;
                a[(k, k)] += 1e-300;
            }
            let Some(step) = a.lu().solve(&jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs(), p[3] + step[3]];
            let ct = cost(&trial);
            if ct < c {
                let rel = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(LorentzFit {
        amplitude: p[0],
        center: p[1],
        half_width: p[2],
        offset: p[3],
        rms_residual: (c / xs.len() as f64).sqrt() * scale,
    })
}

/// Indices of strict local maxima of `ys`.
pub fn local_maxima(ys: &[f64]) -> Vec<usize> {
    (1..ys.len().saturating_sub(1)).filter(|&k| ys[k] > ys[k - 1] && ys[k] >= ys[k + 1]).collect()
}

/// Unstacked resolvent solution; exposed for cross-checks.
pub fn resolvent_apply(st: &Stationary, x0: &CMatrix, omega: f64) -> Result<CMatrix> {
    let mut m = deflated(st.liouvillian(), &st.rho);
    for k in 0..m.nrows() {
        m[(k, k)] += I * omega;
    }
    let x = m.lu().solve(&(-stack(x0))).ok_or(Error::SingularResolvent { omega })?;
    Ok(unstack(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{evolve, Collapse};
    use crate::models::{build_lambda_emitter, lambda_lowering, sigma, LambdaParams, A, E};
    use crate::qops::{transition, SpaceLayout};

    fn lambda(w: f64, r: f64) -> LindbladModel {
        build_lambda_emitter(&LambdaParams::resonant(w, r)).unwrap()
    }

    #[test]
    fn identity_correlation_is_one() {
        let m = lambda(0.1, 0.05);
        let id = Operator::identity(m.layout());
        let c = two_time_correlation(&m, &id, &id, &[0.0, 1.0, 10.0, 100.0]).unwrap();
        for v in c.values {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_gives_excited_population() {
        let m = lambda(0.1, 0.05);
        let st = Stationary::new(&m).unwrap();
        let c = two_time_correlation_with(&st, &sigma(E, A), &sigma(A, E), &[0.0]).unwrap();
        assert!((c.values[0].re - st.state().get(E, E).re).abs() < 1e-15);
    }

    #[test]
    fn correlation_factorizes_at_long_delay() {
        let p = LambdaParams::resonant(1e-2, 1e-5);
        let m = build_lambda_emitter(&p).unwrap();
        let st = Stationary::new(&m).unwrap();
        let t = 60.0 / p.gamma_star();
        let c = two_time_correlation_with(&st, &sigma(E, A), &sigma(A, E), &[0.0, t]).unwrap();
        let mean = st.state().get(E, A); // ⟨σ_ae⟩ = ρ_ea
        assert!((c.values[1] - mean.norm_sqr()).norm() < 1e-8);
    }

    #[test]
    fn regression_matches_conditioned_evolution() {
        let m = lambda(0.3, 0.1);
        let st = Stationary::new(&m).unwrap();
        let a = sigma(E, A);
        let b = sigma(A, E);
        let delays = [0.0, 0.5, 1.3, 7.0, 20.0];
        let c = two_time_correlation_with(&st, &a, &b, &delays).unwrap();
        // conditioned state ρ_ss A is not a density matrix: propagate its Hermitian parts
        let x0 = st.state().matrix() * a.matrix();
        for (k, &t) in delays.iter().enumerate() {
            let direct = st.propagator().propagate(&x0, t).unwrap();
            let v = trace_of_product(b.matrix(), &direct);
            assert!((v - c.values[k]).norm() < 1e-12);
        }
        let _ = evolve; // evolve is exercised in liouville tests
    }

    #[test]
    fn g2_starts_at_zero_and_relaxes() {
        let m = lambda(0.2, 0.1);
        let g = g2_emitter(&m, &lambda_lowering(), &[0.0, 1.0, 5000.0]).unwrap();
        assert!(g.values[0].norm() <= 1e-15);
        assert!((g.values[2].re - 1.0).abs() < 1e-4);
        assert!(g.max_imag() < 1e-10);
    }

    #[test]
    fn g2_requires_population() {
        // without the ground-state drive everything is shelved in |a⟩
        let m = lambda(0.1, 0.0);
        assert!(matches!(g2_emitter(&m, &lambda_lowering(), &[0.0]), Err(Error::ZeroPopulation(_))));
    }

    #[test]
    fn delay_grid_validation() {
        let m = lambda(0.2, 0.1);
        let lo = lambda_lowering();
        assert!(g2_emitter(&m, &lo, &[1.0, 2.0]).is_err());
        assert!(g2_emitter(&m, &lo, &[0.0, 2.0, 1.0]).is_err());
        assert!(g2_emitter(&m, &lo, &[]).is_err());
    }

    #[test]
    fn spectrum_sum_rule_and_reality() {
        let m = lambda(0.3, 0.1);
        let st = Stationary::new(&m).unwrap();
        let grid = log_dense_grid(&[0.0, 0.2], 1e-4, 400.0, 60);
        let s = emission_spectrum_with(&st, &lambda_lowering(), &grid).unwrap();
        let expected = std::f64::consts::PI * (st.state().get(E, E).re - st.state().get(E, A).norm_sqr());
        assert!((s.total_incoherent - expected).abs() < 1e-14);
        let integral = integrate_grid(&s);
        assert!((integral / expected - 1.0).abs() < 0.01, "{integral} vs {expected}");
        assert!(s.imag_residue < 1e-10, "{}", s.imag_residue);
        assert!((s.coherent_weight - st.state().get(E, A).norm_sqr()).abs() < 1e-16);
    }

    #[test]
    fn modes_reconstruct_spectrum() {
        let m = lambda(0.3, 0.1);
        let st = Stationary::new(&m).unwrap();
        let modes = spectral_modes(&st, &lambda_lowering()).unwrap();
        let grid = [-0.5, -0.1, 0.0, 0.03, 0.2, 1.0];
        let s = emission_spectrum_with(&st, &lambda_lowering(), &grid).unwrap();
        for (k, &w) in grid.iter().enumerate() {
            let from_modes: f64 = modes.iter().map(|m| m.spectrum_at(w)).sum();
            assert!((from_modes - s.incoherent[k]).abs() < 1e-9 * s.incoherent[k].abs().max(1e-3));
        }
        let total: f64 = modes.iter().map(|m| m.integrated_intensity()).sum();
        assert!((total - s.total_incoherent).abs() < 1e-10);
    }

    #[test]
    fn coherent_drive_gives_poissonian_detector() {
        // a damped mode driven by a classical field: H = F (s + s†), κ D[s]
        let n_max = 12;
        let layout = SpaceLayout::single(n_max + 1).unwrap();
        let s = annihilation(n_max).unwrap();
        let h = s.add(&s.adjoint()).unwrap().scale(Complex64::new(0.05, 0.0));
        let m = LindbladModel::new(h, vec![Collapse { rate: 1.0, op: s }]).unwrap();
        assert_eq!(m.layout(), &layout);
        let g2 = detector_g2_zero(&m, 0).unwrap();
        assert!((g2 - 1.0).abs() < 1e-8, "{g2}");
    }

    #[test]
    fn detector_cutoff_guard() {
        let s = annihilation(2).unwrap();
        let m = LindbladModel::new(Operator::zeros(s.layout()), vec![Collapse { rate: 1.0, op: s }]).unwrap();
        assert!(detector_g2_zero(&m, 0).is_err());
        assert!(detector_g2_zero(&m, 1).is_err());
    }

    #[test]
    fn lorentzian_bandwidth_quantile() {
        // synthetic Lorentzian of half-width 1, unit area
        let xs = log_dense_grid(&[0.0], 1e-3, 1e5, 1000);
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / (x * x + 1.0)).collect();
        let res = SpectrumResult {
            frequencies: xs,
            incoherent: ys,
            coherent_weight: 0.0,
            total_incoherent: std::f64::consts::PI,
            imag_residue: 0.0,
            convention: SPECTRUM_CONVENTION,
        };
        let w = spectrum_bandwidth(&res, 0.99).unwrap() / 2.0;
        let exact = (0.99 * std::f64::consts::FRAC_PI_2).tan();
        assert!((w / exact - 1.0).abs() < 1e-3, "{w} vs {exact}");
        let narrow =
            SpectrumResult { frequencies: linear_grid(-10.0, 10.0, 101), incoherent: vec![0.0; 101], ..res.clone() };
        assert!(matches!(spectrum_bandwidth(&narrow, 0.99), Err(Error::GridTooNarrow(_))));
    }

    #[test]
    fn lorentz_fit_recovers_parameters() {
        let xs = linear_grid(-5.0, 7.0, 301);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * 0.49 / ((x - 1.0f64).powi(2) + 0.49) + 0.01).collect();
        let f = fit_lorentzian(&xs, &ys, 0.5, 1.5).unwrap();
        assert!((f.half_width - 0.7).abs() < 1e-8);
        assert!((f.center - 1.0).abs() < 1e-8);
        assert!((f.amplitude - 3.0).abs() < 1e-8);
    }

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let g = log_grid(1e-3, 1.0, 4);
        assert!((g[1] - 1e-2).abs() < 1e-15 && (g[3] - 1.0).abs() < 1e-15);
        let d = log_dense_grid(&[0.0, 1.0], 1e-3, 5.0, 10);
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        assert!(d.contains(&0.0) && d.contains(&1.0) && d.contains(&-1.0));
        assert_eq!(d[0], -5.0);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let m = lambda(0.1, 0.1);
        let wrong = transition(0, 1, 2).unwrap();
        assert!(matches!(emission_spectrum(&m, &wrong, &[0.0]), Err(Error::LayoutMismatch { .. })));
    }
}
