//! Angular-momentum algebra and hyperfine emitter builders.
//!
//! Zeeman sublevels are ordered by ascending `m` (`−F, …, +F`) everywhere.
//! A hyperfine model places the ground manifold first, then the excited
//! manifold, in a single subsystem of dimension `(2F_g+1) + (2F_e+1)`.
//!
//! The ground-state Zeeman coupling is `H_B = Ω_B · √2 · F_x`, which makes
//! the coupling between adjacent sublevels of an `F = 1` manifold exactly
//! `Ω_B`. With that normalization the dressed ground triplet is split by
//! `√2 Ω_B`, placing emission sidebands at `±√2 Ω_B` and `±2√2 Ω_B`.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::liouville::{Collapse, LindbladModel};
use crate::models::{attach_detector_mode, DetectorParams};
use crate::qops::{CMatrix, Operator, SpaceLayout, ZERO};

/// A non-negative or negative multiple of 1/2, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        let t = (2.0 * x).round();
        if !x.is_finite() || (2.0 * x - t).abs() > 1e-9 || t.abs() > i32::MAX as f64 {
            return Err(Error::QuantumNumbers(format!("{x} is not a multiple of 1/2")));
        }
        Ok(HalfInt(t as i32))
    }

    /// `2j + 1`.
    pub fn multiplicity(self) -> usize {
        (self.0 + 1).max(0) as usize
    }

    /// `−j, −j+1, …, j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..self.multiplicity() as i32).map(move |k| HalfInt(2 * k - j))
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: i32 = num.trim().parse().map_err(|_| Error::QuantumNumbers(s.to_string()))?;
            match den.trim() {
                "2" => Ok(HalfInt(n)),
                "1" => Ok(HalfInt(2 * n)),
                _ => Err(Error::QuantumNumbers(s.to_string())),
            }
        } else {
            let x: f64 = s.parse().map_err(|_| Error::QuantumNumbers(s.to_string()))?;
            HalfInt::from_f64(x)
        }
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

/// Largest `j` evaluated with exact rational arithmetic.
pub const EXACT_J_LIMIT: HalfInt = HalfInt::int(20);

fn check_jm(j: HalfInt, m: HalfInt) -> Result<()> {
    if j.0 < 0 {
        return Err(Error::QuantumNumbers(format!("negative j = {j}")));
    }
    if (j.0 - m.0) % 2 != 0 {
        return Err(Error::QuantumNumbers(format!("j = {j} and m = {m} differ by a half-integer")));
    }
    if m.0.abs() > j.0 {
        return Err(Error::QuantumNumbers(format!("|m| = |{m}| exceeds j = {j}")));
    }
    Ok(())
}

fn factorials() -> &'static [BigInt] {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![BigInt::one()];
        for n in 1..=4 * 20 + 8 {
            let next = &t[n - 1] * BigInt::from(n);
            t.push(next);
        }
        t
    })
}

/// Wigner 3-j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Returns 0 when the triangle condition or `m1 + m2 + m3 = 0` fails.
/// Evaluated exactly (rational Racah sum, one final square root) while all
/// `j ≤ 20`, and in log-gamma form above.
pub fn wigner_3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> Result<f64> {
    let exact = j1.max(j2).max(j3) <= EXACT_J_LIMIT;
    wigner_3j_impl([j1, j2, j3], [m1, m2, m3], exact)
}

fn wigner_3j_impl(j: [HalfInt; 3], m: [HalfInt; 3], exact: bool) -> Result<f64> {
    let [j1, j2, j3] = j;
    let [m1, m2, m3] = m;
    check_jm(j1, m1)?;
    check_jm(j2, m2)?;
    check_jm(j3, m3)?;
    if m1.0 + m2.0 + m3.0 != 0 {
        return Ok(0.0);
    }
    let (a, b, c) = (j1.0, j2.0, j3.0);
    if (a + b + c) % 2 != 0 || c > a + b || c < (a - b).abs() {
        return Ok(0.0);
    }
    // all combinations below are integers once the checks pass
    let h = |t: i32| t / 2;
    let t1 = h(a + b - c);
    let t2 = h(a - b + c);
    let t3 = h(-a + b + c);
    let big = h(a + b + c) + 1;
    let pm = [h(a + m1.0), h(a - m1.0), h(b + m2.0), h(b - m2.0), h(c + m3.0), h(c - m3.0)];
    // k-dependent factorial arguments: k, c−b+k+m1, c−a+k−m2, a+b−c−k, a−k−m1, b−k+m2
    let o1 = h(c - b + m1.0);
    let o2 = h(c - a - m2.0);
    let u1 = t1;
    let u2 = h(a - m1.0);
    let u3 = h(b + m2.0);
    let k_min = 0.max(-o1).max(-o2);
    let k_max = u1.min(u2).min(u3);
    let phase_exp = h(a - b - m3.0);
    let phase = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };

    if exact {
        let f = factorials();
        let fi = |n: i32| &f[n as usize];
        let mut sum = BigRational::zero();
        for k in k_min..=k_max {
            let den = fi(k) * fi(o1 + k) * fi(o2 + k) * fi(u1 - k) * fi(u2 - k) * fi(u3 - k);
            let term = BigRational::new(BigInt::one(), den);
            if k % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        if sum.is_zero() {
            return Ok(0.0);
        }
        let mut num = fi(t1) * fi(t2) * fi(t3);
        for p in pm {
            num *= fi(p);
        }
        let prefactor = BigRational::new(num, fi(big).clone());
        let sign = if sum.is_negative() { -1.0 } else { 1.0 };
        let square = prefactor * &sum * &sum;
        let v = square.to_f64().ok_or_else(|| Error::QuantumNumbers("3-j overflow".into()))?;
        Ok(phase * sign * v.sqrt())
    } else {
        use statrs::function::gamma::ln_gamma;
        let lf = |n: i32| ln_gamma(n as f64 + 1.0);
        let log_pre = 0.5 * (lf(t1) + lf(t2) + lf(t3) - lf(big) + pm.iter().map(|&p| lf(p)).sum::<f64>());
        let logs: Vec<f64> = (k_min..=k_max)
            .map(|k| -(lf(k) + lf(o1 + k) + lf(o2 + k) + lf(u1 - k) + lf(u2 - k) + lf(u3 - k)))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 =
            logs.iter().zip(k_min..).map(|(l, k)| if k % 2 == 0 { (l - top).exp() } else { -(l - top).exp() }).sum();
        Ok(phase * s * (log_pre + top).exp())
    }
}

/// Clebsch-Gordan coefficient `⟨j1 m1; j2 m2 | J M⟩`.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> Result<f64> {
    let w = wigner_3j(j1, j2, j, m1, m2, -m)?;
    let e = (j1.0 - j2.0 + m.0) / 2;
    let phase = if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(phase * ((j.0 + 1) as f64).sqrt() * w)
}

/// Laser coupling `V = (−1)^{F_e − m_e + 1} (F_e 1 F_g; −m_e q m_g) Ω_L`
/// between `|F_g, m_g⟩` and `|F_e, m_e⟩`; zero unless `m_e = m_g + q`.
pub fn dipole_coupling(
    f_e: HalfInt,
    m_e: HalfInt,
    f_g: HalfInt,
    m_g: HalfInt,
    q: i32,
    omega_l: f64,
) -> Result<Complex64> {
    if !(-1..=1).contains(&q) {
        return Err(Error::QuantumNumbers(format!("polarization q = {q}")));
    }
    let w = wigner_3j(f_e, HalfInt::ONE, f_g, -m_e, HalfInt::int(q), m_g)?;
    let e = (f_e.0 - m_e.0) / 2 + 1;
    let phase = if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(Complex64::new(phase * w * omega_l, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl FromStr for SpinAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(SpinAxis::X),
            "y" | "Y" => Ok(SpinAxis::Y),
            "z" | "Z" => Ok(SpinAxis::Z),
            _ => Err(Error::param("axis", format!("unknown axis `{s}`"))),
        }
    }
}

/// Angular-momentum component on the `|F, m⟩` basis, ascending `m`, built
/// from `F₊|m⟩ = √(F(F+1) − m(m+1)) |m+1⟩`.
pub fn spin_matrix(f: HalfInt, axis: SpinAxis) -> Result<Operator> {
    if f.0 < 1 {
        return Err(Error::QuantumNumbers(format!("F = {f} must be at least 1/2")));
    }
    let n = f.multiplicity();
    let ff = f.value();
    let mut plus = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let m = -ff + k as f64;
        plus[(k + 1, k)] = Complex64::new((ff * (ff + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let m = match axis {
        SpinAxis::X => (&plus + &minus) * Complex64::new(0.5, 0.0),
        SpinAxis::Y => (&plus - &minus) * Complex64::new(0.0, -0.5),
        SpinAxis::Z => CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(-ff + i as f64, 0.0) } else { ZERO }),
    };
    Operator::new(SpaceLayout::single(n)?, m)
}

/// Parameters of an `F_g → F_e` emitter driven by a circularly or linearly
/// polarized laser and a transverse magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineSpec {
    pub f_g: HalfInt,
    pub f_e: HalfInt,
    /// Reduced optical Rabi frequency `⟨F_e‖d‖F_g⟩ E`.
    pub omega_l: f64,
    pub q_laser: i32,
    pub omega_b: f64,
    pub gamma: f64,
    pub delta_e: f64,
}

impl HyperfineSpec {
    /// `F_g = 1 → F_e = 0` with σ⁺ drive, given the coupling `V` of
    /// `|1,−1⟩ ↔ |0,0⟩` directly.
    pub fn rb87(v_eg: f64, omega_b: f64) -> Self {
        let mut s = HyperfineSpec {
            f_g: HalfInt::ONE,
            f_e: HalfInt::ZERO,
            omega_l: 1.0,
            q_laser: 1,
            omega_b,
            gamma: 1.0,
            delta_e: 0.0,
        };
        s.omega_l = v_eg * 3f64.sqrt();
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.f_g.0 < 0 || self.f_e.0 < 0 {
            return Err(Error::QuantumNumbers("negative F".into()));
        }
        if (self.f_g.0 - self.f_e.0).abs() > 2 || (self.f_g.0 - self.f_e.0) % 2 != 0 {
            return Err(Error::QuantumNumbers(format!(
                "F_g = {} → F_e = {} is not dipole allowed",
                self.f_g, self.f_e
            )));
        }
        if self.f_g.0 == 0 && self.f_e.0 == 0 {
            return Err(Error::QuantumNumbers("0 → 0 is not dipole allowed".into()));
        }
        if !(-1..=1).contains(&self.q_laser) {
            return Err(Error::param("q_laser", "must be -1, 0 or 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma", "must be positive"));
        }
        if !(self.omega_l >= 0.0 && self.omega_l.is_finite()) {
            return Err(Error::param("omega_l", "must be non-negative"));
        }
        for (name, v) in [("omega_b", self.omega_b), ("delta_e", self.delta_e)] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn ground_dim(&self) -> usize {
        self.f_g.multiplicity()
    }

    pub fn excited_dim(&self) -> usize {
        self.f_e.multiplicity()
    }

    pub fn dim(&self) -> usize {
        self.ground_dim() + self.excited_dim()
    }

    pub fn ground_index(&self, m: HalfInt) -> Result<usize> {
        check_jm(self.f_g, m)?;
        Ok(((m.0 + self.f_g.0) / 2) as usize)
    }

    pub fn excited_index(&self, m: HalfInt) -> Result<usize> {
        check_jm(self.f_e, m)?;
        Ok(self.ground_dim() + ((m.0 + self.f_e.0) / 2) as usize)
    }

    fn ground_m(&self, k: usize) -> HalfInt {
        HalfInt(2 * k as i32 - self.f_g.0)
    }

    fn excited_m(&self, k: usize) -> HalfInt {
        HalfInt(2 * k as i32 - self.f_e.0)
    }

    /// Spontaneous-emission jump operator for photon polarization `q`:
    /// `Σ ⟨F_g m_g; 1 q | F_e m_e⟩ |F_g, m_g⟩⟨F_e, m_e|`, to be used with rate `Γ`.
    pub fn decay_operator(&self, q: i32) -> Result<Operator> {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for ke in 0..self.excited_dim() {
            let me = self.excited_m(ke);
            let mg = me - HalfInt::int(q);
            if mg.0.abs() > self.f_g.0 {
                continue;
            }
            let c = clebsch_gordan(self.f_g, mg, HalfInt::ONE, HalfInt::int(q), self.f_e, me)?;
            m[(self.ground_index(mg)?, self.ground_dim() + ke)] = Complex64::new(c, 0.0);
        }
        Operator::new(SpaceLayout::single(n)?, m)
    }

    /// `|F_g, m_g⟩⟨F_e, m_e|` on the emitter space.
    pub fn transition_lowering(&self, m_g: HalfInt, m_e: HalfInt) -> Result<Operator> {
        let i = self.ground_index(m_g)?;
        let j = self.excited_index(m_e)?;
        crate::qops::transition(i, j, self.dim())
    }

    /// Adiabatically eliminated ground-state rates `4 Γ_i V² / Γ²` out of the
    /// laser-coupled ground sublevel, one per ground sublevel `i`.
    pub fn equivalent_ground_rates(&self) -> Result<Vec<f64>> {
        let model = build_hyperfine_model(self)?;
        let mut out = vec![0.0; self.ground_dim()];
        for kg in 0..self.ground_dim() {
            let mg = self.ground_m(kg);
            let me = mg + HalfInt::int(self.q_laser);
            if me.0.abs() > self.f_e.0 {
                continue;
            }
            let v = dipole_coupling(self.f_e, me, self.f_g, mg, self.q_laser, self.omega_l)?.norm();
            let ke = self.excited_index(me)?;
            let rates = branching(&model, ke, self.ground_dim());
            for (i, r) in rates.iter().enumerate() {
                out[i] += 4.0 * r * v * v / (self.gamma * self.gamma);
            }
        }
        Ok(out)
    }
}

/// Decay rates from level `from` into each of the first `targets` levels,
/// `Σ_k γ_k |⟨i|o_k|from⟩|²`.
pub fn branching(model: &LindbladModel, from: usize, targets: usize) -> Vec<f64> {
    (0..targets).map(|i| model.collapses().iter().map(|c| c.rate * c.op.matrix()[(i, from)].norm_sqr()).sum()).collect()
}

/// General `F_g → F_e` emitter: laser couplings from [`dipole_coupling`] for
/// `q_laser`, ground Zeeman term `Ω_B √2 F_x`, and one jump operator per
/// photon polarization at rate `Γ`.
pub fn build_hyperfine_model(spec: &HyperfineSpec) -> Result<LindbladModel> {
    spec.validate()?;
    let n = spec.dim();
    let ng = spec.ground_dim();
    let layout = SpaceLayout::single(n)?;
    let mut h = CMatrix::zeros(n, n);
    for ke in 0..spec.excited_dim() {
        h[(ng + ke, ng + ke)] = Complex64::new(spec.delta_e, 0.0);
    }
    for kg in 0..ng {
        let mg = spec.ground_m(kg);
        let me = mg + HalfInt::int(spec.q_laser);
        if me.0.abs() > spec.f_e.0 {
            continue;
        }
        let v = dipole_coupling(spec.f_e, me, spec.f_g, mg, spec.q_laser, spec.omega_l)?;
        let ke = spec.excited_index(me)?;
        h[(ke, kg)] += v;
        h[(kg, ke)] += v.conj();
    }
    if spec.f_g.0 > 0 && spec.omega_b != 0.0 {
        let fx = spin_matrix(spec.f_g, SpinAxis::X)?;
        let c = Complex64::new(spec.omega_b * 2f64.sqrt(), 0.0);
        for i in 0..ng {
            for j in 0..ng {
                h[(i, j)] += c * fx.matrix()[(i, j)];
            }
        }
    }
    let mut collapses = Vec::new();
    for q in -1..=1 {
        let op = spec.decay_operator(q)?;
        if op.frobenius_norm() > 0.0 {
            collapses.push(Collapse { rate: spec.gamma, op });
        }
    }
    LindbladModel::new(Operator::new(layout, h)?, collapses)
}

/// The `F_g = 1 → F_e = 0` emitter, levels `|1,−1⟩, |1,0⟩, |1,1⟩, |0,0⟩`.
pub fn build_rb87_model(spec: &HyperfineSpec) -> Result<LindbladModel> {
    if spec.f_g != HalfInt::ONE || spec.f_e != HalfInt::ZERO {
        return Err(Error::param("spec", "expected F_g = 1, F_e = 0"));
    }
    build_hyperfine_model(spec)
}

/// Detector coupled to the transition `|F_e, m_e⟩ → |F_g, m_g⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorAttachment {
    pub m_g: HalfInt,
    pub m_e: HalfInt,
    pub detector: DetectorParams,
}

pub fn attach_detector(model: &LindbladModel, spec: &HyperfineSpec, att: &DetectorAttachment) -> Result<LindbladModel> {
    if model.layout().num_subsystems() != 1 || model.dim() != spec.dim() {
        return Err(Error::param("model", "not a bare hyperfine emitter for this spec"));
    }
    let lowering = spec
        .transition_lowering(att.m_g, att.m_e)
        .map_err(|e| Error::param("transition", format!("unknown transition: {e}")))?;
    let dm = (att.m_e - att.m_g).0;
    if dm.abs() > 2 {
        return Err(Error::param("transition", "not a dipole transition"));
    }
    attach_detector_mode(model, &lowering, &att.detector)
}
