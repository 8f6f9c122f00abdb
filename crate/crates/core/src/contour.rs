//! Vertical-line evaluation of the correlation sum
//!
//! `Σ_{K+L+M} (2πi)^{-n} (-1)^{|L|+|M|} N^{|M|} ∫_{(δ)^K}∫_{(-δ)^L}∫_{(0)^M} J*(z_K; -z_L) F(iz) dz`.
//!
//! Each path is parametrized as `z_j = c_j + i y_j` with `y` increasing, which
//! turns every term into `(2π)^{-n} N^{|M|} ∫_{ℝⁿ} J* F dy`. Both `J*` and
//! `f` only see differences of the `y_j`, so the common shift `y_j ↦ y_j + v`
//! is integrated in closed form through [`common_mode_weight`] and the grid
//! covers the `n - 1` differences `u_j = y_j - y_n`.

use crate::combinatorics::{enum_partition3, enum_permutations, Partition3, Truncation};
use crate::error::{NcorrError, Result};
use crate::jstar::{jstar, jstar_stratum, JStarInput};
use crate::quadrature::{trapezoid_grid, ComplexSum};
use crate::result::{CorrelationResult, Method};
use crate::special::{logz_deriv2, ShiftSet};
use crate::test_functions::{common_mode_weight, PhiSpec, WeightSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// `F(x) = f(Nx/2π) h_1(x_1/𝒯) ⋯ h_n(x_n/𝒯)`.
#[derive(Debug, Clone)]
pub struct BigF {
    pub phi: PhiSpec,
    pub weights: Vec<WeightSpec>,
    pub n_matrix: usize,
    pub t_weight: f64,
}

impl BigF {
    pub fn new(phi: PhiSpec, weights: Vec<WeightSpec>, n_matrix: usize, t_weight: f64) -> Result<Self> {
        if weights.len() != phi.n {
            return Err(NcorrError::Config(format!(
                "{} weights supplied for arity {}",
                weights.len(),
                phi.n
            )));
        }
        if n_matrix == 0 {
            return Err(NcorrError::Config("matrix size N must be positive".into()));
        }
        if !(t_weight > 0.0 && t_weight.is_finite()) {
            return Err(NcorrError::Config(format!("𝒯 must be positive, got {t_weight}")));
        }
        Ok(BigF { phi, weights, n_matrix, t_weight })
    }

    /// Identical weights of support `delta` on every index.
    pub fn uniform(phi: PhiSpec, delta: f64, n_matrix: usize, t_weight: f64) -> Result<Self> {
        let w = WeightSpec::new(delta)?;
        let n = phi.n;
        Self::new(phi, vec![w; n], n_matrix, t_weight)
    }

    pub fn n(&self) -> usize {
        self.phi.n
    }

    pub fn eval(&self, x: &[Complex64]) -> Result<Complex64> {
        let scale = self.n_matrix as f64 / TAU;
        let xs: Vec<Complex64> = x.iter().map(|v| v * scale).collect();
        let mut v = self.phi.f_eval(&xs)?;
        for (w, xj) in self.weights.iter().zip(x) {
            v *= w.h_eval(xj / self.t_weight);
        }
        Ok(v)
    }

    /// `F` at real angles, using the tabulated weights.
    pub fn eval_real(&self, theta: &[f64]) -> f64 {
        let scale = self.n_matrix as f64 / TAU;
        let xs: Vec<f64> = theta.iter().map(|v| v * scale).collect();
        let mut v = self.phi.f_real(&xs);
        for (w, t) in self.weights.iter().zip(theta) {
            v *= w.h_real(t / self.t_weight);
        }
        v
    }

    /// `∫ dv ∏ h_j((w_j + v)/𝒯)`.
    pub fn common_mode(&self, w: &[Complex64]) -> Complex64 {
        common_mode_weight(&self.weights, w, self.t_weight)
    }

    fn provenance(&self, r: &mut CorrelationResult) {
        r.set_param("n", self.n());
        r.set_param("N", self.n_matrix);
        r.set_param("T", self.t_weight);
        r.set_param("phi_q", self.phi.q);
        r.set_param("phi_eps", self.phi.eps);
        r.set_param("phi_width", self.phi.width);
        r.set_param("phi_amplitude", self.phi.amplitude);
        let deltas: Vec<String> = self.weights.iter().map(|w| w.delta.to_string()).collect();
        r.set_param("g_width", deltas.join(","));
    }
}

/// Placement and resolution of the vertical paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourSpec {
    /// Abscissa `δ` of the `(±δ)` paths.
    pub delta: f64,
    /// Half-width of the grid in each difference variable; chosen by doubling when `None`.
    pub t_max: Option<f64>,
    /// Trapezoid spacing; derived from the pole distance and `f`'s growth when `None`.
    pub step: Option<f64>,
    /// Largest accepted ratio of integrand magnitude at the grid edge to its peak.
    pub tail_tol: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec { delta: 0.4, t_max: None, step: None, tail_tol: 1e-10 }
    }
}

impl ContourSpec {
    pub fn with_delta(delta: f64) -> Self {
        ContourSpec { delta, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(NcorrError::Config(format!("δ must be positive, got {}", self.delta)));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(NcorrError::Config(format!("t_max must be positive, got {t}")));
            }
        }
        if let Some(h) = self.step {
            if !(h > 0.0) {
                return Err(NcorrError::Config(format!("step must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// Spacing keeping the trapezoid error near `1e-12` relative: the nearest
    /// kernel pole sits `2δ` off the real axis, and `f` grows like `e^{N a s}`
    /// when a difference variable is moved `a` off it.
    fn resolved_step(&self, big_f: &BigF) -> f64 {
        if let Some(h) = self.step {
            return h;
        }
        let a = 1.8 * self.delta;
        let growth = a * big_f.n_matrix as f64 * big_f.phi.width;
        (TAU * a / (growth + 30.0)).min(0.5)
    }

    fn initial_t_max(&self, big_f: &BigF) -> f64 {
        self.t_max.unwrap_or_else(|| (TAU * 20.0 / (big_f.n_matrix as f64 * big_f.phi.width)).max(2.0))
    }
}

type Kernel<'a> = Box<dyn Fn(&[Complex64]) -> Result<Complex64> + Sync + 'a>;

/// One `(K, L, M)` contribution: path abscissae, constant prefactor, and the `J*`-type factor.
struct Term<'a> {
    abscissae: Vec<f64>,
    prefactor: Complex64,
    kernel: Kernel<'a>,
}

#[derive(Debug, Clone, Copy, Default)]
struct GridIntegral {
    value: Complex64,
    l1: f64,
    peak: f64,
    edge: f64,
}

/// `∫_{ℝ^{n-1}} kernel(z) f(iNz/2π) W(iz) du` with `z_j = c_j + i u_j`, `u_n = 0`.
fn grid_integral(big_f: &BigF, term: &Term, step: f64, t_max: f64) -> Result<GridIntegral> {
    let n = big_f.n();
    let axes: Vec<Vec<f64>> =
        (0..n - 1).map(|j| trapezoid_grid(t_max, step, (j + 1) as f64 / n as f64)).collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let scale = big_f.n_matrix as f64 / TAU;
    let c = &term.abscissae;
    let samples: Vec<Result<(Complex64, bool)>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut u = vec![0.0; n];
            let mut edge = false;
            for (j, axis) in axes.iter().enumerate() {
                u[j] = axis[idx % axis.len()];
                idx /= axis.len();
                edge |= u[j].abs() >= t_max - step;
            }
            let z: Vec<Complex64> = (0..n).map(|j| Complex64::new(c[j], u[j])).collect();
            let k = (term.kernel)(&z)?;
            if k == Complex64::new(0.0, 0.0) {
                return Ok((k, edge));
            }
            // iz_j = i c_j - u_j
            let iz: Vec<Complex64> = z.iter().map(|v| Complex64::i() * v).collect();
            let x: Vec<Complex64> = iz.iter().map(|v| v * scale).collect();
            let f = big_f.phi.f_eval(&x)?;
            let w = big_f.common_mode(&iz);
            Ok((k * f * w, edge))
        })
        .collect();
    let cell = step.powi(n as i32 - 1);
    let mut sum = ComplexSum::default();
    let mut out = GridIntegral::default();
    for s in samples {
        let (v, edge) = s?;
        let m = v.norm();
        sum.add(v);
        out.l1 += m;
        out.peak = out.peak.max(m);
        if edge {
            out.edge = out.edge.max(m);
        }
    }
    out.value = sum.value() * cell;
    out.l1 *= cell;
    Ok(out)
}

struct Evaluated {
    value: Complex64,
    error: f64,
    l1: f64,
    t_max: f64,
    step: f64,
}

const MAX_DOUBLINGS: usize = 6;

fn evaluate_terms(big_f: &BigF, spec: &ContourSpec, terms: &[Term]) -> Result<Evaluated> {
    spec.validate()?;
    let step = spec.resolved_step(big_f);
    let mut t_max = spec.initial_t_max(big_f);
    let mut doublings = 0;
    'grow: loop {
        let mut coarse = Vec::with_capacity(terms.len());
        for term in terms {
            let g = grid_integral(big_f, term, step, t_max)?;
            if g.peak > 0.0 && g.edge > spec.tail_tol * g.peak {
                if spec.t_max.is_none() && doublings < MAX_DOUBLINGS {
                    t_max *= 2.0;
                    doublings += 1;
                    continue 'grow;
                }
                return Err(NcorrError::Tail { t_max, ratio: g.edge / g.peak, tol: spec.tail_tol });
            }
            coarse.push(g);
        }
        let mut value = ComplexSum::default();
        let mut error = 0.0;
        let mut l1 = 0.0;
        for (term, g) in terms.iter().zip(&coarse) {
            let fine = grid_integral(big_f, term, 0.5 * step, t_max)?;
            value.add(term.prefactor * fine.value);
            error += (term.prefactor * (fine.value - g.value)).norm();
            l1 += term.prefactor.norm() * fine.l1;
        }
        return Ok(Evaluated { value: value.value(), error, l1, t_max, step: 0.5 * step });
    }
}

fn abscissae(p: &Partition3, delta: f64) -> Vec<f64> {
    let mut c = vec![0.0; p.n];
    for &k in &p.k {
        c[k] = delta;
    }
    for &l in &p.l {
        c[l] = -delta;
    }
    c
}

/// `(2π)^{-n} N^{|M|}`: the `(2πi)^{-n}(-1)^{|L|+|M|}` prefactor combined with `dz = ±i dy`.
fn term_prefactor(n: usize, n_matrix: usize, m: usize) -> Complex64 {
    Complex64::new((n_matrix as f64).powi(m as i32) / TAU.powi(n as i32), 0.0)
}

fn jstar_kernel<'a>(p: &Partition3, n_matrix: usize, truncation: Truncation, stratum: Option<usize>) -> Kernel<'a> {
    let (k, l) = (p.k.clone(), p.l.clone());
    Box::new(move |z: &[Complex64]| {
        let a = ShiftSet::from(k.iter().map(|&i| z[i]).collect::<Vec<_>>());
        let b = ShiftSet::from(l.iter().map(|&i| -z[i]).collect::<Vec<_>>());
        let input = JStarInput::new(a, b, n_matrix, truncation)?;
        match stratum {
            None => jstar(&input),
            Some(size) => jstar_stratum(&input, size),
        }
    })
}

fn check_arity(big_f: &BigF) -> Result<()> {
    let n = big_f.n();
    if !(1..=3).contains(&n) {
        return Err(NcorrError::Size { got: n, range: "1..=3 for contour evaluation" });
    }
    Ok(())
}

fn finish(big_f: &BigF, spec: &ContourSpec, ev: Evaluated, level: &str) -> CorrelationResult {
    let mut r = CorrelationResult::new(ev.value, ev.error, Method::Contour);
    big_f.provenance(&mut r);
    r.set_param("delta", spec.delta);
    r.set_param("t_max", ev.t_max);
    r.set_param("step", ev.step);
    r.set_param("level", level);
    if big_f.n_matrix < 4 * big_f.n() {
        r.warnings.push(format!(
            "N = {} is small compared with n = {}; the contour formula assumes N large in terms of n",
            big_f.n_matrix,
            big_f.n()
        ));
    }
    r
}

fn level_name(t: Truncation) -> String {
    match t {
        Truncation::Full => "full".into(),
        Truncation::Below(q) => format!("q={q}"),
    }
}

/// Whether `J*(A; B)` vanishes identically: one side empty, the other not.
fn kernel_vanishes(p: &Partition3) -> bool {
    p.k.is_empty() != p.l.is_empty()
}

/// The contour form of the correlation sum with `J*` truncated per `truncation`.
pub fn correlation_contour(big_f: &BigF, spec: &ContourSpec, truncation: Truncation) -> Result<CorrelationResult> {
    check_arity(big_f)?;
    let n = big_f.n();
    let terms: Vec<Term> = enum_partition3(n, false)?
        .filter(|p| !kernel_vanishes(p))
        .map(|p| Term {
            abscissae: abscissae(&p, spec.delta),
            prefactor: term_prefactor(n, big_f.n_matrix, p.m.len()),
            kernel: jstar_kernel(&p, big_f.n_matrix, truncation, None),
        })
        .collect();
    let ev = evaluate_terms(big_f, spec, &terms)?;
    Ok(finish(big_f, spec, ev, &level_name(truncation)))
}

fn permanent_kernel<'a>(k: Vec<usize>, l: Vec<usize>) -> Result<Kernel<'a>> {
    let perms: Vec<Vec<usize>> = enum_permutations(k.len())?.collect();
    Ok(Box::new(move |z: &[Complex64]| {
        let mut sum = ComplexSum::default();
        for sigma in &perms {
            let mut p = Complex64::new(1.0, 0.0);
            for (j, &kj) in k.iter().enumerate() {
                p *= logz_deriv2(z[kj] - z[l[sigma[j]]])?;
            }
            sum.add(p);
        }
        Ok(sum.value())
    }))
}

/// The `q = 1` form: only `|K| = |L|` and the permanent of `(z'/z)'(z_k - z_l)`.
pub fn correlation_contour_q1(big_f: &BigF, spec: &ContourSpec) -> Result<CorrelationResult> {
    check_arity(big_f)?;
    let n = big_f.n();
    let terms: Vec<Term> = enum_partition3(n, true)?
        .map(|p| {
            Ok(Term {
                abscissae: abscissae(&p, spec.delta),
                prefactor: term_prefactor(n, big_f.n_matrix, p.m.len()),
                kernel: permanent_kernel(p.k.clone(), p.l.clone())?,
            })
        })
        .collect::<Result<_>>()?;
    let ev = evaluate_terms(big_f, spec, &terms)?;
    Ok(finish(big_f, spec, ev, "q1-permanent"))
}

/// `I(K, L, σ) = ∫_{(δ)^K}∫_{(-δ)^L}∫_{(0)^M} ∏_j (z'/z)'(z_{k_j} - z_{ℓ_σ(j)}) F(iz) dz`,
/// with the `(−δ)` and `(0)` paths traversed downward, so that
/// `(2πi)^{-n}(-1)^{|L|+|M|} N^{|M|} I` is the corresponding term of the `q = 1` sum.
pub fn contour_term_integral(
    big_f: &BigF,
    spec: &ContourSpec,
    k: &[usize],
    l: &[usize],
    sigma: &[usize],
) -> Result<CorrelationResult> {
    check_arity(big_f)?;
    let n = big_f.n();
    if k.len() != l.len() || sigma.len() != k.len() {
        return Err(NcorrError::Config("K, L and σ must have equal sizes".into()));
    }
    let m = n - k.len() - l.len();
    let p = Partition3 { n, k: k.to_vec(), l: l.to_vec(), m: Vec::new() };
    let (kk, ll, sg) = (k.to_vec(), l.to_vec(), sigma.to_vec());
    let kernel: Kernel = Box::new(move |z: &[Complex64]| {
        let mut prod = Complex64::new(1.0, 0.0);
        for (j, &kj) in kk.iter().enumerate() {
            prod *= logz_deriv2(z[kj] - z[ll[sg[j]]])?;
        }
        Ok(prod)
    });
    // i^n from dz = i dy on every path, (-1)^{|L|+|M|} from the downward orientation
    let sign = if (l.len() + m) % 2 == 0 { 1.0 } else { -1.0 };
    let prefactor = Complex64::i().powi(n as i32) * sign;
    let term = Term { abscissae: abscissae(&p, spec.delta), prefactor, kernel };
    let ev = evaluate_terms(big_f, spec, std::slice::from_ref(&term))?;
    let mut r = finish(big_f, spec, ev, "single-term");
    r.set_param("K", format!("{k:?}"));
    r.set_param("L", format!("{l:?}"));
    r.set_param("sigma", format!("{sigma:?}"));
    Ok(r)
}

/// One row of a decay probe.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub delta: f64,
    pub value: Complex64,
    /// `∫ |integrand|` summed over the partitions.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub stratum: usize,
    pub rows: Vec<DecayRow>,
}

impl DecayTable {
    /// Least-squares slope of `ln(magnitude)` against `δ`.
    pub fn slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.magnitude > 0.0).map(|r| (r.delta, r.magnitude.ln())).collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}

/// The `|S| = |T| = stratum` part of the contour sum, at each `δ` in `deltas`.
pub fn decay_probe(big_f: &BigF, spec: &ContourSpec, deltas: &[f64], stratum: usize) -> Result<DecayTable> {
    check_arity(big_f)?;
    let n = big_f.n();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let s = ContourSpec { delta, ..spec.clone() };
        let terms: Vec<Term> = enum_partition3(n, false)?
            .filter(|p| p.k.len() >= stratum && p.l.len() >= stratum && !kernel_vanishes(p))
            .map(|p| Term {
                abscissae: abscissae(&p, delta),
                prefactor: term_prefactor(n, big_f.n_matrix, p.m.len()),
                kernel: jstar_kernel(&p, big_f.n_matrix, Truncation::Full, Some(stratum)),
            })
            .collect();
        let ev = evaluate_terms(big_f, &s, &terms)?;
        rows.push(DecayRow { delta, value: ev.value, magnitude: ev.l1 });
    }
    Ok(DecayTable { stratum, rows })
}

/// `e^{-2Nδ·size}` bound on `|e^{-N(ΣS+ΣT)}|` on the paths, against `f`'s
/// growth `e^{Nδ·support}`; the probe slope should not exceed this rate.
pub fn predicted_decay_rate(big_f: &BigF, stratum: usize) -> f64 {
    let n = big_f.n_matrix as f64;
    -n * (2.0 * stratum as f64 - big_f.phi.total_support())
}

/// Quick `n = 2` sanity value: `N²/(2π)² ∬ F` from the pure-`M` term alone.
pub fn pure_m_term(big_f: &BigF, spec: &ContourSpec) -> Result<Complex64> {
    let n = big_f.n();
    let term = Term {
        abscissae: vec![0.0; n],
        prefactor: term_prefactor(n, big_f.n_matrix, n),
        kernel: Box::new(|_| Ok(Complex64::new(1.0, 0.0))),
    };
    Ok(evaluate_terms(big_f, spec, std::slice::from_ref(&term))?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_f(n_matrix: usize, t: f64) -> BigF {
        let phi = PhiSpec::new(2, 1.0, 0.2, 0.9, 1.0).unwrap();
        BigF::uniform(phi, 1.0, n_matrix, t).unwrap()
    }

    #[test]
    fn big_f_at_origin_and_reality() {
        let f = pair_f(10, 5.0);
        let v = f.eval(&[Complex64::new(0.0, 0.0); 2]).unwrap();
        let h0 = f.weights[0].h_real(0.0);
        let f0 = f.phi.f_real(&[0.0, 0.0]);
        assert!((v.re - f0 * h0 * h0).abs() < 1e-14);
        let w = f.eval(&[Complex64::new(0.3, 0.0), Complex64::new(-1.1, 0.0)]).unwrap();
        assert!(w.im.abs() < 1e-15);
        assert!((w.re - f.eval_real(&[0.3, -1.1])).abs() < 1e-10);
    }

    #[test]
    fn single_variable_is_mean_count() {
        // n = 1: only the M term survives and equals (N/2π)∫F = N·T·Φ(0)·g(0)
        let phi = PhiSpec::new(1, 1.0, 0.2, 0.5, 2.0).unwrap();
        let f = BigF::uniform(phi, 1.0, 7, 3.0).unwrap();
        let r = correlation_contour(&f, &ContourSpec::default(), Truncation::Full).unwrap();
        let expected = 7.0 * 3.0 * 2.0 * (-1.0f64).exp() * (-1.0f64).exp();
        assert!((r.value.re - expected).abs() < 1e-12 * expected);
        let q1 = correlation_contour_q1(&f, &ContourSpec::default()).unwrap();
        assert!((q1.value.re - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn pair_q1_and_full_agree_and_are_real() {
        let f = pair_f(12, 5.0);
        let spec = ContourSpec::default();
        let q1 = correlation_contour_q1(&f, &spec).unwrap();
        let j1 = correlation_contour(&f, &spec, Truncation::Below(1)).unwrap();
        let full = correlation_contour(&f, &spec, Truncation::Full).unwrap();
        assert!((q1.value - j1.value).norm() < 1e-9 * q1.value.norm());
        assert!((q1.value - full.value).norm() < 1e-6 * q1.value.norm(), "{} vs {}", q1.value, full.value);
        assert!(full.value.im.abs() < 1e-6 * full.value.norm());
        assert!(q1.error < 1e-6 * q1.value.norm());
    }

    #[test]
    fn term_integrals_combine_into_q1_sum() {
        let f = pair_f(12, 5.0);
        let spec = ContourSpec::default();
        let q1 = correlation_contour_q1(&f, &spec).unwrap().value;
        let i0 = contour_term_integral(&f, &spec, &[], &[], &[]).unwrap().value;
        let i12 = contour_term_integral(&f, &spec, &[0], &[1], &[0]).unwrap().value;
        let i21 = contour_term_integral(&f, &spec, &[1], &[0], &[0]).unwrap().value;
        let n: f64 = 12.0;
        // (2πi)^{-2} (-1)^{|L|+|M|} N^{|M|}
        let pre = |l: usize, m: usize| {
            let sign = if (l + m) % 2 == 0 { 1.0 } else { -1.0 };
            sign * n.powi(m as i32) / (Complex64::i() * TAU).powi(2)
        };
        let total = pre(0, 2) * i0 + pre(1, 0) * (i12 + i21);
        assert!((total - q1).norm() < 1e-10 * q1.norm());
    }

    #[test]
    fn fixed_small_grid_reports_tail() {
        let f = pair_f(12, 5.0);
        let spec = ContourSpec { t_max: Some(0.5), ..Default::default() };
        assert!(matches!(correlation_contour_q1(&f, &spec), Err(NcorrError::Tail { .. })));
    }

    #[test]
    fn small_n_warning() {
        let f = pair_f(6, 5.0);
        let r = correlation_contour_q1(&f, &ContourSpec::default()).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
