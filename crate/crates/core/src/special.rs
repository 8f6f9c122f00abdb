//! Scalar building blocks: `z(x) = 1/(1 - e^{-x})`, its logarithmic
//! derivatives, the `Z`/`Z†` products over shift sets, and the finite-N
//! sine kernel `S_N`.

use crate::error::{NcorrError, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

pub const DEFAULT_POLE_TOL: f64 = 1e-12;

/// Below this distance to a pole `z` and its derivatives switch to Laurent series.
const SERIES_RADIUS: f64 = 1e-4;

/// A finite complex shift variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexShift(Complex64);

impl ComplexShift {
    pub fn new(value: Complex64) -> Result<Self> {
        if value.re.is_finite() && value.im.is_finite() {
            Ok(ComplexShift(value))
        } else {
            Err(NcorrError::Shift(format!("non-finite shift {value}")))
        }
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

/// An ordered finite list of shifts (one of the sets A, B, S, T).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShiftSet(Vec<Complex64>);

impl ShiftSet {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        for v in &values {
            ComplexShift::new(*v)?;
        }
        Ok(ShiftSet(values))
    }

    pub fn empty() -> Self {
        ShiftSet(Vec::new())
    }

    /// The sign-flipped view `S⁻ = {-s : s ∈ S}`.
    pub fn negated(&self) -> ShiftSet {
        ShiftSet(self.0.iter().map(|v| -v).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    /// Subset selected by index list.
    pub fn select(&self, idx: &[usize]) -> ShiftSet {
        ShiftSet(idx.iter().map(|&i| self.0[i]).collect())
    }
}

impl From<Vec<Complex64>> for ShiftSet {
    /// Unchecked conversion; callers that need finiteness use [`ShiftSet::new`].
    fn from(v: Vec<Complex64>) -> Self {
        ShiftSet(v)
    }
}

/// Reduces `x` to `w = x - 2πik` with `k` the nearest integer to `Im x / 2π`.
fn reduce(x: Complex64) -> (Complex64, i64) {
    let k = (x.im / TAU).round();
    (Complex64::new(x.re, x.im - TAU * k), k as i64)
}

fn check_pole(x: Complex64, tol: f64) -> Result<(Complex64, i64)> {
    let (w, k) = reduce(x);
    let distance = w.norm();
    if distance < tol || !distance.is_finite() {
        return Err(NcorrError::Pole { x, k, distance });
    }
    Ok((w, k))
}

/// `z(x) = 1/(1 - e^{-x})` with the default pole tolerance.
pub fn z_eval(x: Complex64) -> Result<Complex64> {
    z_eval_tol(x, DEFAULT_POLE_TOL)
}

pub fn z_eval_tol(x: Complex64, tol: f64) -> Result<Complex64> {
    let (w, _) = check_pole(x, tol)?;
    if w.norm() < SERIES_RADIUS {
        let w2 = w * w;
        return Ok(w.inv() + 0.5 + w / 12.0 - w2 * w / 720.0);
    }
    if w.re >= 0.0 {
        Ok((Complex64::new(1.0, 0.0) - (-w).exp()).inv())
    } else {
        let e = w.exp();
        Ok(-e / (Complex64::new(1.0, 0.0) - e))
    }
}

/// `z'/z (x) = 1 - z(x)`.
pub fn logz_deriv(x: Complex64) -> Result<Complex64> {
    Ok(Complex64::new(1.0, 0.0) - z_eval(x)?)
}

/// `(z'/z)'(x) = e^x/(e^x - 1)^2 = -z'(x)`, even in `x`.
pub fn logz_deriv2(x: Complex64) -> Result<Complex64> {
    let (w, _) = check_pole(x, DEFAULT_POLE_TOL)?;
    if w.norm() < SERIES_RADIUS {
        let w2 = w * w;
        return Ok(w2.inv() - 1.0 / 12.0 + w2 / 240.0 - w2 * w2 / 6048.0);
    }
    let w = if w.re >= 0.0 { -w } else { w };
    let e = w.exp();
    let d = Complex64::new(1.0, 0.0) - e;
    Ok(e / (d * d))
}

/// `Z(A,B) = ∏ z(α+β)`; with `dagger`, factors whose argument is (numerically) zero are omitted.
pub fn z_product(a: &ShiftSet, b: &ShiftSet, dagger: bool) -> Result<Complex64> {
    z_product_tol(a.as_slice(), b.as_slice(), dagger, DEFAULT_POLE_TOL)
}

pub fn z_product_tol(a: &[Complex64], b: &[Complex64], dagger: bool, tol: f64) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for alpha in a {
        for beta in b {
            let s = alpha + beta;
            if dagger && s.norm() < tol {
                continue;
            }
            acc *= z_eval_tol(s, tol)?;
        }
    }
    Ok(acc)
}

/// `S_N(α) = sin(Nα/2)/sin(α/2)`, with the limit `±N` filled in on `2πℤ`.
pub fn sn_kernel(alpha: f64, n: usize) -> f64 {
    let nf = n as f64;
    let half = 0.5 * alpha;
    let den = half.sin();
    if den.abs() < 1e-9 {
        // Taylor expansion about the nearest multiple of π in α/2.
        let m = (half / std::f64::consts::PI).round();
        let e = half - m * std::f64::consts::PI;
        // sin(N(mπ+e))/sin(mπ+e) = (-1)^{m(N-1)} sin(Ne)/sin(e)
        let sign = if (m as i64 * (n as i64 - 1)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        if e == 0.0 {
            return sign * nf;
        }
        let e2 = e * e;
        return sign * nf * (1.0 - (nf * nf - 1.0) * e2 / 6.0);
    }
    (nf * half).sin() / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn z_trivial_values() {
        assert!(close(z_eval(c(2f64.ln(), 0.0)).unwrap(), c(2.0, 0.0), 1e-15));
        assert!(close(z_eval(c(0.0, PI)).unwrap(), c(0.5, 0.0), 1e-15));
        assert!(close(logz_deriv(c(2f64.ln(), 0.0)).unwrap(), c(-1.0, 0.0), 1e-15));
        assert!(close(logz_deriv(c(0.0, PI)).unwrap(), c(0.5, 0.0), 1e-15));
        assert!(close(logz_deriv2(c(0.0, PI)).unwrap(), c(-0.25, 0.0), 1e-15));
    }

    #[test]
    fn z_near_zero_uses_series() {
        // 40-digit reference value of 1/(1-e^{-x}) at x = 1e-6
        let v = z_eval(c(1e-6, 0.0)).unwrap();
        let expected = 1_000_000.500_000_083_333_333_3;
        assert!((v.re - expected).abs() / expected < 1e-12);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn logz_deriv2_at_one() {
        // e/(e-1)^2 = 0.920673594207792... (40-digit reference)
        let v = logz_deriv2(c(1.0, 0.0)).unwrap();
        assert!((v.re - 0.920_673_594_207_792_3).abs() < 1e-15);
    }

    #[test]
    fn poles_are_rejected() {
        assert!(matches!(z_eval(c(0.0, 0.0)), Err(NcorrError::Pole { k: 0, .. })));
        assert!(matches!(z_eval(c(0.0, 2.0 * TAU)), Err(NcorrError::Pole { k: 2, .. })));
        assert!(logz_deriv2(c(1e-13, 0.0)).is_err());
        // just outside the tolerance the series takes over
        assert!(z_eval(c(1e-11, 0.0)).is_ok());
    }

    #[test]
    fn logz_deriv_matches_log_derivative() {
        let x = c(0.3, 0.7);
        let h = 1e-5;
        let lz = |x: Complex64| z_eval(x).unwrap().ln();
        let fd = (lz(x + h) - lz(x - h)) / (2.0 * h);
        assert!((fd - logz_deriv(x).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn z_product_cases() {
        let empty = ShiftSet::empty();
        let b = ShiftSet::new(vec![c(0.0, 0.0)]).unwrap();
        assert_eq!(z_product(&empty, &b, false).unwrap(), c(1.0, 0.0));
        let a = ShiftSet::new(vec![c(2f64.ln(), 0.0)]).unwrap();
        assert!(close(z_product(&a, &b, false).unwrap(), c(2.0, 0.0), 1e-15));
        let a = ShiftSet::new(vec![c(0.3, 0.2)]).unwrap();
        assert_eq!(z_product(&a, &a.negated(), true).unwrap(), c(1.0, 0.0));
        assert!(z_product(&a, &a.negated(), false).is_err());
    }

    #[test]
    fn shift_set_rejects_nan() {
        assert!(ShiftSet::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn sn_kernel_values() {
        assert_eq!(sn_kernel(0.0, 7), 7.0);
        assert!(sn_kernel(TAU / 5.0, 5).abs() < 1e-15);
        // sin(5)/sin(0.5), 30-digit reference
        assert!((sn_kernel(1.0, 10) - (-2.000_152_677_420_868_3)).abs() < 1e-13);
        // antiperiodic for even N, periodic for odd N
        assert!((sn_kernel(TAU, 4) + 4.0).abs() < 1e-12);
        assert!((sn_kernel(TAU, 5) - 5.0).abs() < 1e-12);
        for n in [1usize, 2, 17, 1000] {
            assert!((sn_kernel(1e-8, n) - n as f64).abs() < 1e-6);
        }
    }

    fn non_pole() -> impl Strategy<Value = Complex64> {
        (-3.0f64..3.0, -10.0f64..10.0)
            .prop_filter("away from poles", |(re, im)| reduce(c(*re, *im)).0.norm() > 1e-3)
            .prop_map(|(re, im)| c(re, im))
    }

    proptest! {
        #[test]
        fn z_reflection_identity(x in non_pole()) {
            let s = z_eval(x).unwrap() + z_eval(-x).unwrap();
            prop_assert!((s - 1.0).norm() < 1e-12 * (1.0 + z_eval(x).unwrap().norm()));
        }

        #[test]
        fn logz_deriv2_is_derivative_of_logz_deriv(x in non_pole()) {
            prop_assume!(reduce(x).0.norm() > 0.05);
            let h = 1e-4;
            let fd = (logz_deriv(x + h).unwrap() - logz_deriv(x - h).unwrap()) / (2.0 * h);
            let exact = logz_deriv2(x).unwrap();
            prop_assert!((fd - exact).norm() < 1e-6 * (1.0 + exact.norm()) / reduce(x).0.norm().powi(2));
        }

        #[test]
        fn sn_kernel_even(alpha in -20.0f64..20.0, n in 1usize..60) {
            prop_assert!((sn_kernel(alpha, n) - sn_kernel(-alpha, n)).abs() < 1e-9 * n as f64);
        }

        #[test]
        fn dagger_agrees_without_zero_sums(a in prop::collection::vec(non_pole(), 0..3),
                                            b in prop::collection::vec(non_pole(), 0..3)) {
            let ok = a.iter().all(|x| b.iter().all(|y| reduce(x + y).0.norm() > 1e-3));
            prop_assume!(ok);
            let (a, b) = (ShiftSet::from(a), ShiftSet::from(b));
            let p = z_product(&a, &b, false).unwrap();
            let q = z_product(&a, &b, true).unwrap();
            prop_assert!((p - q).norm() <= 1e-15 * p.norm());
        }
    }
}
