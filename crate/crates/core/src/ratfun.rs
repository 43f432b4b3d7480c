//! Real-coefficient polynomials and rational functions in the Laplace
//! variable `s`, with pointwise complex evaluation and state-space
//! realization.
//!
//! Every transfer function in the crate (bus blocks `g(s)`, control blocks
//! `k(s)`, generation sensitivities) is carried as a [`RationalFunction`].
//! Values are kept in reduced form (no common numerator/denominator roots)
//! with a monic denominator, so structural properties such as poles at the
//! origin are visible directly in the coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Two roots are treated as common when `|r1 - r2| <= ROOT_MATCH_TOL * (1 + |r1|)`.
pub const ROOT_MATCH_TOL: f64 = 1e-8;

/// Poles with real part inside `±STABILITY_TOL` are classified as marginal.
pub const STABILITY_TOL: f64 = 1e-9;

/// Evaluation closer than `POLE_PROXIMITY_TOL * (1 + |p|)` to a pole `p` is refused.
pub const POLE_PROXIMITY_TOL: f64 = 1e-12;

// Trailing coefficients below this fraction of the largest one are dropped.
const TRIM_TOL: f64 = 1e-13;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Polynomial with real coefficients stored in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        while let Some(&last) = coeffs.last() {
            if last == 0.0 || last.abs() <= TRIM_TOL * scale {
                coeffs.pop();
            } else {
                break;
            }
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `c0 + c1 s`
    pub fn linear(c0: f64, c1: f64) -> Self {
        Polynomial::new(vec![c0, c1])
    }

    /// Monic polynomial with the given roots. Imaginary parts of the
    /// expanded coefficients are discarded, so complex roots should come in
    /// conjugate pairs.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        Polynomial::new(c.into_iter().map(|z| z.re).collect::<Vec<_>>())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `s^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Index of the lowest-order nonzero coefficient, i.e. the multiplicity
    /// of the root at the origin.
    pub fn lowest_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|&c| c != 0.0)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect::<Vec<_>>())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * a).collect::<Vec<_>>())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect::<Vec<_>>(),
        )
    }

    /// Euclidean division; panics if `divisor` is zero.
    pub fn div_rem(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let Some(nd) = self.degree() else {
            return (Polynomial::zero(), Polynomial::zero());
        };
        if nd < dd {
            return (Polynomial::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; nd - dd + 1];
        let lead = divisor.leading();
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (i, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + i] -= q * dc;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        (Polynomial::new(quot), Polynomial::new(rem))
    }

    /// All complex roots with multiplicity. Roots at the origin are split off
    /// exactly; the remainder comes from the companion-matrix eigenvalues,
    /// polished with a few Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(low) = self.lowest_order() else {
            return Vec::new();
        };
        let mut roots = vec![Complex64::new(0.0, 0.0); low];
        let reduced = Polynomial::new(self.coeffs[low..].to_vec());
        let n = reduced.degree().unwrap_or(0);
        match n {
            0 => {}
            1 => roots.push(Complex64::new(-reduced.coeffs[0] / reduced.coeffs[1], 0.0)),
            _ => {
                // substitute s = αt so the scaled coefficients are balanced
                let alpha = (reduced.coeffs[0] / reduced.leading()).abs().powf(1.0 / n as f64);
                let alpha = if alpha.is_finite() && alpha > 0.0 { alpha } else { 1.0 };
                let scaled: Vec<f64> = reduced
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * alpha.powi(k as i32))
                    .collect();
                let lead = scaled[n];
                let mut companion = DMatrix::<f64>::zeros(n, n);
                for i in 1..n {
                    companion[(i, i - 1)] = 1.0;
                }
                for i in 0..n {
                    companion[(i, n - 1)] = -scaled[i] / lead;
                }
                let unit = eigenvalues(&companion).unwrap_or_else(|| durand_kerner(&scaled));
                let deriv = reduced.derivative();
                for r in unit {
                    roots.push(polish_root(&reduced, &deriv, r * alpha));
                }
            }
        }
        roots
    }
}

/// Eigenvalues of a general real matrix, or `None` if the QR iteration
/// fails to converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let b = balance(m);
    let cap = 100 * m.nrows().max(10);
    if let Some(schur) = nalgebra::Schur::try_new(b.clone(), f64::EPSILON, cap) {
        return Some(schur.complex_eigenvalues().iter().copied().collect());
    }
    // complex shifts break the symmetric spectra that stall the real iteration
    let bc = b.map(|v| Complex64::new(v, 0.0));
    nalgebra::Schur::try_new(bc, f64::EPSILON, cap).and_then(|schur| schur.eigenvalues().map(|e| e.iter().copied().collect()))
}

/// Diagonal similarity with power-of-two scalings that equalizes row and
/// column norms.
fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let mut done = true;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * (c + r) {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    a
}

/// Simultaneous Weierstrass iteration for the roots of `Σ c_k t^k`.
fn durand_kerner(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[n];
    let eval = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a / lead);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn polish_root(p: &Polynomial, dp: &Polynomial, mut r: Complex64) -> Complex64 {
    let mut best = p.eval(r).norm();
    for _ in 0..3 {
        let d = dp.eval(r);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - p.eval(r) / d;
        let val = p.eval(cand).norm();
        if !(val < best) {
            break;
        }
        best = val;
        r = cand;
    }
    r
}

/// Limit of a rational function as `s -> 0` along the positive real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroLimit {
    Finite(f64),
    Unbounded,
}

impl ZeroLimit {
    pub fn finite(self) -> Option<f64> {
        match self {
            ZeroLimit::Finite(v) => Some(v),
            ZeroLimit::Unbounded => None,
        }
    }
}

/// Ratio of real polynomials in `s`, reduced and with a monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
    poles: Vec<Complex64>,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroFunction);
        }
        let (num, den) = reduce(num, den);
        let lead = den.leading();
        let num = num.scale(1.0 / lead);
        let den = den.scale(1.0 / lead);
        let poles = den.roots();
        Ok(RationalFunction { num, den, poles })
    }

    /// Convenience constructor from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(c: f64) -> Self {
        RationalFunction::new(Polynomial::constant(c), Polynomial::constant(1.0))
            .expect("constant denominator is nonzero")
    }

    pub fn polynomial(p: Polynomial) -> Self {
        RationalFunction::new(p, Polynomial::constant(1.0)).expect("constant denominator is nonzero")
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg(den) - deg(num)`; negative for improper functions. Zero function
    /// reports `i64::MAX`.
    pub fn relative_degree(&self) -> i64 {
        match self.num.degree() {
            None => i64::MAX,
            Some(dn) => self.den.degree().unwrap_or(0) as i64 - dn as i64,
        }
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        RationalFunction::new(num, self.den.mul(&other.den)).expect("product of monic denominators")
    }

    pub fn sub(&self, other: &RationalFunction) -> RationalFunction {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RationalFunction {
        self.scale(-1.0)
    }

    pub fn scale(&self, a: f64) -> RationalFunction {
        RationalFunction::new(self.num.scale(a), self.den.clone()).expect("nonzero denominator")
    }

    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        RationalFunction::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("product of monic denominators")
    }

    pub fn inv(&self) -> Result<RationalFunction> {
        if self.num.is_zero() {
            return Err(Error::ZeroFunction);
        }
        RationalFunction::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, other: &RationalFunction) -> Result<RationalFunction> {
        Ok(self.mul(&other.inv()?))
    }

    /// Positive-feedback composition `a / (1 - a b)`.
    pub fn feedback(a: &RationalFunction, b: &RationalFunction) -> Result<RationalFunction> {
        let num = a.num.mul(&b.den);
        let den = a.den.mul(&b.den).sub(&a.num.mul(&b.num));
        if den.is_zero() {
            return Err(Error::DegenerateFeedback);
        }
        RationalFunction::new(num, den)
    }

    /// Distance from `s` to the nearest pole, or `None` without poles.
    pub fn pole_distance(&self, s: Complex64) -> Option<(f64, Complex64)> {
        self.poles
            .iter()
            .map(|&p| ((s - p).norm(), p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        if let Some((d, p)) = self.pole_distance(s) {
            if d <= POLE_PROXIMITY_TOL * (1.0 + p.norm()) {
                return Err(Error::NearPole { s, distance: d });
            }
        }
        Ok(self.num.eval(s) / self.den.eval(s))
    }

    /// Value at `s = jω`.
    pub fn eval_jw(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Exact limit as `s -> 0`, read off the lowest-order coefficients.
    pub fn limit_at_zero(&self) -> ZeroLimit {
        let Some(ln) = self.num.lowest_order() else {
            return ZeroLimit::Finite(0.0);
        };
        let ld = self.den.lowest_order().unwrap_or(0);
        if ln > ld {
            ZeroLimit::Finite(0.0)
        } else if ln == ld {
            ZeroLimit::Finite(self.num.coeff(ln) / self.den.coeff(ld))
        } else {
            ZeroLimit::Unbounded
        }
    }

    /// Real part on the imaginary axis as a ratio of real polynomials in ω:
    /// `Re f(jω) = P(ω) / Q(ω)` with `Q(ω) = |den(jω)|² ≥ 0`. Both are even.
    pub fn axis_real_part(&self) -> (Polynomial, Polynomial) {
        let n_j = rotate(&self.num, J);
        let d_j = rotate(&self.den, J);
        let d_mj = rotate(&self.den, -J);
        let p = cmul(&n_j, &d_mj);
        let q = cmul(&d_j, &d_mj);
        (
            Polynomial::new(p.iter().map(|z| z.re).collect::<Vec<_>>()),
            Polynomial::new(q.iter().map(|z| z.re).collect::<Vec<_>>()),
        )
    }

    /// Bounded-analytic test on the closed right half-plane: proper, with
    /// every pole strictly inside the left half-plane.
    pub fn hinf_certificate(&self) -> HinfCertificate {
        if !self.is_proper() {
            return HinfCertificate::Improper {
                excess: (-self.relative_degree()) as usize,
            };
        }
        if let Some(&p) = self
            .poles
            .iter()
            .filter(|p| p.re >= STABILITY_TOL)
            .max_by(|a, b| a.re.total_cmp(&b.re))
        {
            return HinfCertificate::UnstablePole(p);
        }
        if let Some(&p) = self.poles.iter().find(|p| p.re > -STABILITY_TOL) {
            return HinfCertificate::MarginalPole(p);
        }
        let mut peak = self.high_frequency_gain();
        let mut peak_omega = f64::INFINITY;
        if let ZeroLimit::Finite(v) = self.limit_at_zero() {
            if v.abs() >= peak {
                peak = v.abs();
                peak_omega = 0.0;
            }
        }
        // stationary points of |f(jω)|² = P(ω)/Q(ω) are the real roots of
        // P'Q - PQ'; a coarse sweep backs up the root finder
        let p = axis_magnitude_squared(&self.num);
        let q = axis_magnitude_squared(&self.den);
        let stationary = p.derivative().mul(&q).sub(&p.mul(&q.derivative()));
        let mut candidates: Vec<f64> = stationary
            .roots()
            .into_iter()
            .filter(|r| r.re > 0.0 && r.im.abs() <= 1e-6 * (1.0 + r.re))
            .map(|r| r.re)
            .collect();
        candidates.extend((0..=400).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 400.0)));
        for w in candidates {
            let v = self.num.eval(Complex64::new(0.0, w)) / self.den.eval(Complex64::new(0.0, w));
            if v.norm() > peak {
                peak = v.norm();
                peak_omega = w;
            }
        }
        HinfCertificate::Stable { peak, peak_omega }
    }

    pub fn is_hinf_stable(&self) -> bool {
        self.hinf_certificate().is_stable()
    }

    fn high_frequency_gain(&self) -> f64 {
        match self.relative_degree() {
            0 => (self.num.leading() / self.den.leading()).abs(),
            _ => 0.0,
        }
    }
}

/// `|p(jω)|²` as a real polynomial in `ω`.
fn axis_magnitude_squared(p: &Polynomial) -> Polynomial {
    let mut re = vec![0.0; p.coeffs().len()];
    let mut im = vec![0.0; p.coeffs().len()];
    for (k, &c) in p.coeffs().iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            re[k] = sign * c;
        } else {
            im[k] = sign * c;
        }
    }
    let (re, im) = (Polynomial::new(re), Polynomial::new(im));
    re.mul(&re).add(&im.mul(&im))
}

fn rotate(p: &Polynomial, unit: Complex64) -> Vec<Complex64> {
    let mut pow = Complex64::new(1.0, 0.0);
    p.coeffs()
        .iter()
        .map(|&c| {
            let v = pow * c;
            pow *= unit;
            v
        })
        .collect()
}

fn cmul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn reduce(num: Polynomial, den: Polynomial) -> (Polynomial, Polynomial) {
    if num.is_zero() {
        return (num, Polynomial::constant(1.0));
    }
    // common factor s^k is removed exactly
    let k = num.lowest_order().unwrap_or(0).min(den.lowest_order().unwrap_or(0));
    // remaining origin roots stay exact: only one side can still have them
    let kn = num.lowest_order().unwrap_or(0) - k;
    let kd = den.lowest_order().unwrap_or(0) - k;
    let shift = |p: Polynomial, by: usize| {
        let mut c = vec![0.0; by];
        c.extend_from_slice(p.coeffs());
        Polynomial::new(c)
    };
    let num = Polynomial::new(num.coeffs()[k + kn..].to_vec());
    let den = Polynomial::new(den.coeffs()[k + kd..].to_vec());
    let (num, den) = cancel_common_roots(num, den);
    (shift(num, kn), shift(den, kd))
}

/// Divide out roots shared by `num` and `den` (neither has a root at 0).
fn cancel_common_roots(mut num: Polynomial, mut den: Polynomial) -> (Polynomial, Polynomial) {
    if num.degree().unwrap_or(0) == 0 || den.degree().unwrap_or(0) == 0 {
        return (num, den);
    }

    let num_roots = num.roots();
    let den_roots = den.roots();
    let mut used = vec![false; num_roots.len()];
    let mut common = Vec::new();
    for &r in &den_roots {
        let tol = ROOT_MATCH_TOL * (1.0 + r.norm());
        let best = num_roots
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, z)| (i, (z - r).norm()))
            .filter(|(_, d)| *d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = best {
            used[i] = true;
            common.push(r);
        }
    }
    if common.is_empty() {
        return (num, den);
    }
    // keep the common set closed under conjugation so the factor is real
    let mut factor_roots: Vec<Complex64> = Vec::new();
    for &r in &common {
        if r.im.abs() <= ROOT_MATCH_TOL * (1.0 + r.norm()) {
            factor_roots.push(Complex64::new(r.re, 0.0));
        } else if r.im > 0.0 {
            let has_conj = common
                .iter()
                .any(|c| (c - r.conj()).norm() <= ROOT_MATCH_TOL * (1.0 + r.norm()));
            if has_conj {
                factor_roots.push(r);
                factor_roots.push(r.conj());
            }
        }
    }
    if factor_roots.is_empty() {
        return (num, den);
    }
    let factor = Polynomial::from_roots(&factor_roots);
    num = num.div_rem(&factor).0;
    den = den.div_rem(&factor).0;
    (num, den)
}

/// Outcome of the bounded-analytic (𝓗∞) test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HinfCertificate {
    /// Proper with all poles in the open left half-plane. `peak` is the
    /// largest `|f(jω)|` found on a log sweep including the limits.
    Stable { peak: f64, peak_omega: f64 },
    Improper { excess: usize },
    UnstablePole(Complex64),
    MarginalPole(Complex64),
}

impl HinfCertificate {
    pub fn is_stable(&self) -> bool {
        matches!(self, HinfCertificate::Stable { .. })
    }
}

/// Continuous-time realization `ẋ = Ax + Bu`, `y = Cx + Du + E u̇`.
///
/// The `E` term carries a single derivative of the input so that blocks
/// improper by one degree (for example `1 + γs`) can be realized exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: Option<DMatrix<f64>>,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols().max(self.d.ncols())
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows().max(self.d.nrows())
    }

    /// Transfer matrix `C (sI - A)^{-1} B + D + E s`.
    pub fn eval(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let mut out = self.d.map(|v| Complex64::new(v, 0.0));
        if n > 0 {
            let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
                let a = Complex64::new(-self.a[(i, j)], 0.0);
                if i == j {
                    a + s
                } else {
                    a
                }
            });
            let b = self.b.map(|v| Complex64::new(v, 0.0));
            let x = m.lu().solve(&b).ok_or(Error::SingularMatrix)?;
            out += self.c.map(|v| Complex64::new(v, 0.0)) * x;
        }
        if let Some(e) = &self.e {
            out += e.map(|v| Complex64::new(v, 0.0) * s);
        }
        Ok(out)
    }

    /// Derivative-feedthrough coefficient, zero when absent.
    pub fn derivative_gain(&self) -> DMatrix<f64> {
        self.e
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.outputs(), self.inputs()))
    }
}

/// Controllable-canonical realization of a SISO rational function. Functions
/// improper by one degree populate the derivative feedthrough.
pub fn realize(f: &RationalFunction) -> Result<StateSpace> {
    let rd = f.relative_degree();
    if rd < -1 {
        return Err(Error::ImproperRealization((-rd) as usize));
    }
    let den = f.den();
    let n = den.degree().unwrap_or(0);
    let (quot, rem) = f.num().div_rem(den);
    let d = DMatrix::from_element(1, 1, quot.coeff(0));
    let e = (quot.coeff(1) != 0.0).then(|| DMatrix::from_element(1, 1, quot.coeff(1)));

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeff(j);
    }
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(n - 1, 0)] = 1.0;
    }
    let c = DMatrix::from_fn(1, n, |_, j| rem.coeff(j));
    Ok(StateSpace { a, b, c, d, e })
}
