//! Coefficient algebra of the BDF-k formulas.
//!
//! For an order `k` the backward differentiation formula and the matching
//! extrapolation read
//!
//! ```text
//!     u'(t_n) ≈ (1/s) Σ_{j=0}^{k}   δ_j u^{n-j}
//!     u(t_n)  ≈       Σ_{j=0}^{k-1} γ_j u^{n-1-j}
//! ```
//!
//! with `δ(z) = (1 - z) δ̃(z)`. Everything here is computed in exact rational
//! arithmetic; conversion to `f64` happens through [`BdfTable`], which is what
//! the flow integrators consume.
//!
//! The quadratic identity
//!
//! ```text
//!     Σ δ_j a_{n-j}² - 2 (Σ δ_j a_{n-j}) (Σ γ_j a_{n-1-j})
//!         = Σ_{j=1}^{k} Σ_{ℓ=0}^{k-j} β_{jℓ} s^{2j} (d_t^j a_{n-ℓ})²
//! ```
//!
//! holds for every sequence; the `β_{jℓ}` are obtained by matching the
//! coefficients of every monomial `a_{n-m} a_{n-p}` (see [`beta_coefficients`]).

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::BdfError;

pub type Rational = BigRational;

/// Largest order for which the coefficient algebra is provided.
pub const MAX_ORDER: usize = 6;

/// Key `(j, ℓ)` of a coefficient `β_{jℓ}`: `j` is the difference order, `ℓ` the lag.
pub type BetaKey = (usize, usize);

/// All coefficient families of one BDF order.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfScheme {
    k: usize,
    delta: Vec<Rational>,
    tilde_delta: Vec<Rational>,
    gamma: Vec<Rational>,
    beta: BTreeMap<BetaKey, Rational>,
}

impl BdfScheme {
    /// Coefficients of order `k` including the identity coefficients `β`.
    pub fn new(k: usize) -> Result<Self, BdfError> {
        let mut scheme = bdf_coefficients(k)?;
        scheme.beta = beta_coefficients(k)?;
        Ok(scheme)
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> &[Rational] {
        &self.delta
    }

    pub fn tilde_delta(&self) -> &[Rational] {
        &self.tilde_delta
    }

    pub fn gamma(&self) -> &[Rational] {
        &self.gamma
    }

    /// Non-zero identity coefficients; empty when built by [`bdf_coefficients`].
    pub fn beta(&self) -> &BTreeMap<BetaKey, Rational> {
        &self.beta
    }

    pub fn has_beta(&self) -> bool {
        !self.beta.is_empty()
    }

    /// Floating-point view of the scheme.
    pub fn table(&self) -> BdfTable {
        BdfTable {
            k: self.k,
            delta: self.delta.iter().map(to_f64).collect(),
            tilde_delta: self.tilde_delta.iter().map(to_f64).collect(),
            gamma: self.gamma.iter().map(to_f64).collect(),
            beta: self
                .beta
                .iter()
                .map(|(&(order, lag), v)| BetaTerm {
                    order,
                    lag,
                    value: to_f64(v),
                })
                .collect(),
        }
    }
}

/// One non-zero `β_{jℓ}` in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTerm {
    pub order: usize,
    pub lag: usize,
    pub value: f64,
}

/// `f64` copy of a [`BdfScheme`].
#[derive(Debug, Clone, PartialEq)]
pub struct BdfTable {
    pub k: usize,
    pub delta: Vec<f64>,
    pub tilde_delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<BetaTerm>,
}

impl BdfTable {
    /// Order-`k` table with identity coefficients.
    pub fn new(k: usize) -> Result<Self, BdfError> {
        Ok(BdfScheme::new(k)?.table())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn binomial(n: usize, r: usize) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn sign(i: usize) -> i64 {
    if i % 2 == 0 {
        1
    } else {
        -1
    }
}

fn check_order(k: usize, min: usize) -> Result<(), BdfError> {
    if k < min || k > MAX_ORDER {
        return Err(BdfError::OrderOutOfRange {
            k,
            min,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

/// `δ`, `δ̃` and `γ` for order `k`; `β` is left empty.
pub fn bdf_coefficients(k: usize) -> Result<BdfScheme, BdfError> {
    check_order(k, 1)?;
    let mut delta = Vec::with_capacity(k + 1);
    let mut d0 = Rational::zero();
    for r in 1..=k {
        d0 += rat(1, r as i64);
    }
    delta.push(d0);
    for i in 1..=k {
        let c = Rational::from_integer(binomial(k, i) * BigInt::from(sign(i)));
        delta.push(c / rat(i as i64, 1));
    }
    let gamma = (0..k)
        .map(|j| Rational::from_integer(binomial(k, j + 1) * BigInt::from(sign(j))))
        .collect();
    let mut tilde_delta = Vec::with_capacity(k);
    let mut partial = Rational::zero();
    for d in delta.iter().take(k) {
        partial += d;
        tilde_delta.push(partial.clone());
    }
    Ok(BdfScheme {
        k,
        delta,
        tilde_delta,
        gamma,
        beta: BTreeMap::new(),
    })
}

fn packed_len(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Symmetric coefficient accumulator for quadratic forms in `x_0..x_k`.
struct QuadraticForm {
    k: usize,
    coeff: Vec<Rational>,
}

impl QuadraticForm {
    fn new(k: usize) -> Self {
        Self {
            k,
            coeff: vec![Rational::zero(); packed_len(k)],
        }
    }

    fn slot(&self, a: usize, b: usize) -> usize {
        let (m, p) = if a <= b { (a, b) } else { (b, a) };
        packed_offset(self.k, m) + (p - m)
    }

    /// Adds `c · x_a x_b`.
    fn add(&mut self, a: usize, b: usize, c: &Rational) {
        let i = self.slot(a, b);
        self.coeff[i] += c;
    }

    fn get(&self, m: usize, p: usize) -> &Rational {
        &self.coeff[self.slot(m, p)]
    }
}

fn packed_offset(k: usize, m: usize) -> usize {
    // rows (0,0..k), (1,1..k), ...
    (0..m).map(|r| k + 1 - r).sum()
}

/// Coefficients of the left-hand side `Σ δ_j x_j² - 2 (Σ δ_j x_j)(Σ γ_j x_{j+1})`.
fn identity_lhs(scheme: &BdfScheme) -> QuadraticForm {
    let k = scheme.k;
    let mut q = QuadraticForm::new(k);
    let two = rat(2, 1);
    for (j, d) in scheme.delta.iter().enumerate() {
        q.add(j, j, d);
    }
    for (a, d) in scheme.delta.iter().enumerate() {
        for (i, g) in scheme.gamma.iter().enumerate() {
            let c = -(&two * d * g);
            q.add(a, i + 1, &c);
        }
    }
    q
}

/// Coefficients of `s^{2j} (d_t^j a_{n-ℓ})² = (Σ_q (-1)^q C(j,q) x_{ℓ+q})²`.
fn difference_square(k: usize, order: usize, lag: usize) -> QuadraticForm {
    let mut q = QuadraticForm::new(k);
    let w: Vec<Rational> = (0..=order)
        .map(|i| Rational::from_integer(binomial(order, i) * BigInt::from(sign(i))))
        .collect();
    for (a, wa) in w.iter().enumerate() {
        for (b, wb) in w.iter().enumerate() {
            q.add(lag + a, lag + b, &(wa * wb));
        }
    }
    q
}

/// Identity coefficients `β_{jℓ}`, returned sparse (non-zero entries only).
///
/// The monomial-matching system has `(k+2)(k+1)/2` rows and `k(k+1)/2`
/// unknowns. The `k+1` diagonal rows `(m,m)` are dropped, the remaining rows
/// `(m,p)` are ordered by decreasing `p-m` and then increasing `m`, and the
/// unknown `β_{p-m,m}` is attached to row `(m,p)`. The reduced matrix is then
/// lower triangular and is solved by forward substitution. The dropped rows
/// are checked afterwards.
pub fn beta_coefficients(k: usize) -> Result<BTreeMap<BetaKey, Rational>, BdfError> {
    check_order(k, 1)?;
    let scheme = bdf_coefficients(k)?;
    let lhs = identity_lhs(&scheme);

    let mut order = Vec::with_capacity(k * (k + 1) / 2);
    for gap in (1..=k).rev() {
        for m in 0..=(k - gap) {
            order.push((m, m + gap));
        }
    }
    // column c ↔ β_{p-m, m} for (m,p) = order[c]
    let columns: Vec<QuadraticForm> = order
        .iter()
        .map(|&(m, p)| difference_square(k, p - m, m))
        .collect();

    let mut x: Vec<Rational> = Vec::with_capacity(order.len());
    for (row, &(m, p)) in order.iter().enumerate() {
        for form in columns.iter().skip(row + 1) {
            if !form.get(m, p).is_zero() {
                return Err(BdfError::NotTriangular { k, row });
            }
        }
        let mut rhs = lhs.get(m, p).clone();
        for (col, xv) in x.iter().enumerate() {
            rhs -= columns[col].get(m, p) * xv;
        }
        let pivot = columns[row].get(m, p);
        if pivot.is_zero() {
            return Err(BdfError::SingularSystem { k, row });
        }
        x.push(rhs / pivot);
    }

    for m in 0..=k {
        let mut acc = Rational::zero();
        for (col, xv) in x.iter().enumerate() {
            acc += columns[col].get(m, m) * xv;
        }
        if &acc != lhs.get(m, m) {
            return Err(BdfError::InconsistentSystem { k, m, p: m });
        }
    }

    Ok(order
        .iter()
        .zip(x)
        .filter(|(_, v)| !v.is_zero())
        .map(|(&(m, p), v)| ((p - m, m), v))
        .collect())
}

/// `d_t^j a_n = s^{-j} Σ_{m=0}^{j} (-1)^m C(j,m) a_{n-m}`.
pub fn backward_difference(a: &[f64], n: usize, order: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    let mut c = 1.0;
    for m in 0..=order {
        let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
        acc += sgn * c * a[n - m];
        c = c * (order - m) as f64 / (m + 1) as f64;
    }
    acc / s.powi(order as i32)
}

/// `|LHS - RHS|` of the quadratic identity at index `n` for a real sequence.
///
/// The scheme must carry its `β` coefficients.
pub fn verify_identity(scheme: &BdfScheme, a: &[f64], s: f64, n: usize) -> f64 {
    let t = scheme.table();
    let k = t.k;
    assert!(n >= k && n < a.len(), "identity needs a[n-k..=n]");
    let mut quad = 0.0;
    let mut deriv = 0.0;
    for (j, d) in t.delta.iter().enumerate() {
        quad += d * a[n - j] * a[n - j];
        deriv += d * a[n - j];
    }
    let extrap: f64 = t
        .gamma
        .iter()
        .enumerate()
        .map(|(j, g)| g * a[n - j - 1])
        .sum();
    let lhs = quad - 2.0 * deriv * extrap;
    let rhs: f64 = t
        .beta
        .iter()
        .map(|b| {
            let d = backward_difference(a, n - b.lag, b.order, s);
            b.value * s.powi(2 * b.order as i32) * d * d
        })
        .sum();
    (lhs - rhs).abs()
}

/// Taylor coefficients of `1/δ̃(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaSequence {
    k: usize,
    tilde_delta: Vec<f64>,
    values: Vec<f64>,
}

impl EtaSequence {
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `η_n`, zero for negative indices.
    pub fn get(&self, n: isize) -> f64 {
        if n < 0 {
            0.0
        } else {
            self.values[n as usize]
        }
    }

    /// Extends the sequence so that `η_0..=η_{n_max}` are available.
    pub fn extend_to(&mut self, n_max: usize) {
        let td = &self.tilde_delta;
        while self.values.len() <= n_max {
            let n = self.values.len();
            let mut acc = 0.0;
            for (j, d) in td.iter().enumerate().skip(1) {
                if j <= n {
                    acc += d * self.values[n - j];
                }
            }
            self.values.push(-acc / td[0]);
        }
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.values
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}

/// `η_0..=η_{n_max}` from the recurrence `η_0 = 1/δ̃_0`, `Σ δ̃_j η_{n-j} = 0`.
pub fn eta_coefficients(k: usize, n_max: usize) -> Result<EtaSequence, BdfError> {
    let scheme = bdf_coefficients(k)?;
    let tilde_delta: Vec<f64> = scheme.tilde_delta.iter().map(to_f64).collect();
    let mut eta = EtaSequence {
        k,
        values: vec![1.0 / tilde_delta[0]],
        tilde_delta,
    };
    eta.extend_to(n_max);
    Ok(eta)
}

/// Closed-form solution of `Σ_{j=0}^{k-1} δ̃_j a_{n-j} = f_n` (`n >= k`)
/// in terms of `a_1..a_{k-1}` and the Taylor coefficients `η`.
///
/// `initial[m-1] = a_m` for `m = 1..k-1`; `f[n]` is read for `k <= n`.
pub fn difference_equation_solution(
    tilde_delta: &[f64],
    eta: &EtaSequence,
    initial: &[f64],
    f: &[f64],
    n: usize,
) -> f64 {
    let k = tilde_delta.len();
    assert!(n >= k && initial.len() + 1 == k);
    let mut a = 0.0;
    for m in 1..k {
        for (l, d) in tilde_delta.iter().enumerate().skip(k - m) {
            a -= d * eta.get(n as isize - l as isize - m as isize) * initial[m - 1];
        }
    }
    for j in k..=n {
        a += eta.get((n - j) as isize) * f[j];
    }
    a
}

/// Roots of `Σ c_j z^j` by simultaneous (Aberth–Ehrlich) iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, BdfError> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |v| *v == 0.0) {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = c[degree];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &a in monic.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    };
    // Cauchy bound for the initial circle
    let radius = 1.0 + monic[..degree].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut z: Vec<Complex64> = (0..degree)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / degree as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, theta)
        })
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if max_step < 1e-15 {
            return Ok(z);
        }
    }
    let converged = z.iter().all(|&zi| eval(zi).0.norm() < 1e-10);
    if converged {
        Ok(z)
    } else {
        Err(BdfError::RootFinding { degree })
    }
}

/// The `k-1` roots of `δ̃(z)`.
pub fn characteristic_roots(k: usize) -> Result<Vec<Complex64>, BdfError> {
    check_order(k, 2)?;
    let scheme = bdf_coefficients(k)?;
    let c: Vec<f64> = scheme.tilde_delta.iter().map(to_f64).collect();
    polynomial_roots(&c)
}

/// Outcome of the contraction test used for the sharper `ℓ²` bound on
/// solutions of the `δ̃` difference equation.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    pub k: usize,
    pub value: Rational,
    pub holds: bool,
}

impl StabilityCheck {
    pub fn value_f64(&self) -> f64 {
        to_f64(&self.value)
    }
}

/// Evaluates `k (Σ_{j=2}^{k-1} (δ̃_j + βδ̃_{j-1})²/δ_0² + β² δ̃_{k-1}²/δ_0²)` with
/// `β = -δ̃_1/δ_0`; the condition holds when the value is below one.
pub fn stability_condition(k: usize) -> Result<StabilityCheck, BdfError> {
    check_order(k, 3)?;
    let scheme = bdf_coefficients(k)?;
    let td = &scheme.tilde_delta;
    let d0 = &scheme.delta[0];
    let beta = -(&td[1]) / d0;
    let d0_sq = d0 * d0;
    let mut sum = Rational::zero();
    for j in 2..k {
        let t = &td[j] + &beta * &td[j - 1];
        sum += &t * &t / &d0_sq;
    }
    sum += &beta * &beta * &td[k - 1] * &td[k - 1] / &d0_sq;
    let value = sum * rat(k as i64, 1);
    let holds = value < Rational::one();
    Ok(StabilityCheck { k, value, holds })
}

/// Exact check that `δ(z) = (1 - z) δ̃(z)` coefficient by coefficient.
pub fn factorization_holds(scheme: &BdfScheme) -> bool {
    let k = scheme.k;
    let td = &scheme.tilde_delta;
    (0..=k).all(|j| {
        let hi = if j < k { td[j].clone() } else { Rational::zero() };
        let lo = if j >= 1 { td[j - 1].clone() } else { Rational::zero() };
        scheme.delta[j] == hi - lo
    })
}

/// Formats a rational as `p/q` (or `p` when integral).
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Smallest root modulus of `δ̃`, used by the root-condition check.
pub fn min_root_modulus(k: usize) -> Result<f64, BdfError> {
    Ok(characteristic_roots(k)?
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min))
}
