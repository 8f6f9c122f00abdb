//! Monte Carlo estimators over sampled eigenangles, and quadrature of their
//! expectations.
//!
//! Two statistics are kept apart. The distinct-tuple sum runs over ordered
//! tuples of distinct indices `1..=N`. The wrapped sum runs over all tuples of
//! the periodic sequence `θ_{r+kN} = θ_r + 2πk`, repeated indices included, with
//! each index damped by its weight `h_j(θ/𝒯)`.

use crate::contour::BigF;
use crate::error::{NcorrError, Result};
use crate::quadrature::{cosine_transform_table, ComplexSum, CubicTable, NeumaierSum};
use crate::test_functions::bump;
use crate::result::{CorrelationResult, Method};
use crate::rmt::{weyl_density, wrap_angles, EigenangleSample};
use crate::special::sn_kernel;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// Test function on tuples of angles.
pub type TupleFn<'a> = dyn Fn(&[f64]) -> Complex64 + Sync + 'a;

/// Default cap on the number of tuples evaluated per sample.
pub const DEFAULT_TUPLE_BUDGET: usize = 1 << 24;

/// `|ψ̂(y)|` of the bump is below `1e-12` beyond this `y`.
const BUMP_DECAY_END: f64 = 400.0;

fn check_samples(samples: &[EigenangleSample]) -> Result<usize> {
    let first = samples.first().ok_or_else(|| NcorrError::Config("no samples supplied".into()))?;
    for s in samples {
        if s.n != first.n || s.angles.len() != first.n {
            return Err(NcorrError::Config(format!(
                "mixed sample sizes: {} and {}",
                first.n,
                s.angles.len()
            )));
        }
    }
    Ok(first.n)
}

/// Mean of per-matrix statistics and its standard error.
fn mean_and_error(values: &[Complex64]) -> (Complex64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().copied().collect::<ComplexSum>().value() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut var = NeumaierSum::default();
    for v in values {
        var.add((v - mean).norm_sqr());
    }
    (mean, (var.value() / (m - 1.0) / m).sqrt())
}

fn mc_result(values: &[Complex64], samples: &[EigenangleSample]) -> CorrelationResult {
    let (mean, err) = mean_and_error(values);
    let mut r = CorrelationResult::new(mean, err, Method::MonteCarlo)
        .with_param("matrices", samples.len())
        .with_param("first_seed", samples[0].seed);
    if samples.len() < 2 {
        r.warnings.push("single sample: no error estimate".into());
    }
    r
}

fn falling_factorial(n_points: usize, n: usize) -> usize {
    (0..n).map(|i| n_points - i).product()
}

/// Calls `visit` on every ordered tuple of `n` distinct indices below `n_points`.
fn for_each_distinct_tuple(n_points: usize, n: usize, visit: &mut impl FnMut(&[usize])) {
    fn go(n_points: usize, tuple: &mut Vec<usize>, used: &mut [bool], n: usize, visit: &mut impl FnMut(&[usize])) {
        if tuple.len() == n {
            visit(tuple);
            return;
        }
        for i in 0..n_points {
            if !used[i] {
                used[i] = true;
                tuple.push(i);
                go(n_points, tuple, used, n, visit);
                tuple.pop();
                used[i] = false;
            }
        }
    }
    go(n_points, &mut Vec::with_capacity(n), &mut vec![false; n_points], n, visit);
}

fn distinct_tuple_sum(angles: &[f64], f: &TupleFn, n: usize) -> Complex64 {
    let mut acc = ComplexSum::default();
    let mut args = vec![0.0; n];
    for_each_distinct_tuple(angles.len(), n, &mut |t| {
        for (a, &i) in args.iter_mut().zip(t) {
            *a = angles[i];
        }
        acc.add(f(&args));
    });
    acc.value()
}

/// `E Σ*_{j_1,…,j_n distinct} F(θ_{j_1}, …, θ_{j_n})`, averaged over samples.
pub fn mc_distinct_tuples(
    samples: &[EigenangleSample],
    f: &TupleFn,
    n: usize,
    budget: usize,
) -> Result<CorrelationResult> {
    let n_matrix = check_samples(samples)?;
    if n == 0 || n > n_matrix {
        return Err(NcorrError::Size { got: n, range: "1..=N" });
    }
    let count = falling_factorial(n_matrix, n);
    if count > budget {
        return Err(NcorrError::Size { got: count, range: "tuples per sample within budget" });
    }
    let values: Vec<Complex64> = samples.par_iter().map(|s| distinct_tuple_sum(&s.angles, f, n)).collect();
    Ok(mc_result(&values, samples).with_param("n", n).with_param("N", n_matrix))
}

/// Per-axis grid offsets, as fractions of a step, so that no two axes share nodes.
fn jitter(axis: usize) -> f64 {
    ((axis as f64 + 1.0) * 0.618_033_988_749_894_8).fract()
}

/// Mean of `integrand` over the `m^dim` periodic grid on `[0, 2π)^dim`.
fn periodic_grid_mean(dim: usize, m: usize, integrand: &(dyn Fn(&[f64]) -> Complex64 + Sync)) -> Complex64 {
    let h = TAU / m as f64;
    let offsets: Vec<f64> = (0..dim).map(|j| jitter(j) * h).collect();
    let partial: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut acc = ComplexSum::default();
            let mut idx = vec![0usize; dim];
            idx[0] = first;
            let mut theta = vec![0.0; dim];
            loop {
                for j in 0..dim {
                    theta[j] = offsets[j] + h * idx[j] as f64;
                }
                acc.add(integrand(&theta));
                let mut j = 1;
                while j < dim {
                    idx[j] += 1;
                    if idx[j] < m {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j >= dim {
                    break;
                }
            }
            acc.value()
        })
        .collect();
    partial.into_iter().collect::<ComplexSum>().value() / (m as f64).powi(dim as i32)
}

/// `det [S_N(α_k − α_j)]` for up to three angles.
pub fn kernel_determinant(alpha: &[f64], n_matrix: usize) -> f64 {
    let s = |a: usize, b: usize| sn_kernel(alpha[a] - alpha[b], n_matrix);
    let nn = n_matrix as f64;
    match alpha.len() {
        1 => nn,
        2 => nn * nn - s(0, 1) * s(1, 0),
        3 => {
            let (a, b, c) = (s(0, 1), s(0, 2), s(1, 2));
            // symmetric kernel matrix with N on the diagonal
            nn * (nn * nn - c * c) - a * (a * nn - c * b) + b * (a * c - nn * b)
        }
        k => panic!("kernel_determinant supports 1..=3 angles, got {k}"),
    }
}

/// `(2π)^{-n} ∫_{[0,2π]^n} F(α) det[S_N(α_k − α_j)] dα` by the periodic
/// trapezoid rule on `nodes` points per axis; the error is the change from
/// `nodes / 2` points.
pub fn determinantal_value(f: &TupleFn, n_matrix: usize, n: usize, nodes: usize) -> Result<CorrelationResult> {
    if !(1..=3).contains(&n) {
        return Err(NcorrError::Size { got: n, range: "1..=3" });
    }
    if nodes < 4 {
        return Err(NcorrError::Config(format!("need at least 4 nodes per axis, got {nodes}")));
    }
    let integrand = |a: &[f64]| f(a) * kernel_determinant(a, n_matrix);
    let fine = periodic_grid_mean(n, nodes, &integrand);
    let coarse = periodic_grid_mean(n, nodes / 2, &integrand);
    Ok(CorrelationResult::new(fine, (fine - coarse).norm(), Method::Determinant)
        .with_param("n", n)
        .with_param("N", n_matrix)
        .with_param("nodes", nodes))
}

/// Haar expectation of `Σ* F` for `N <= 3`, integrating the distinct-tuple sum
/// against the Weyl density on `[0, 2π]^N`.
pub fn small_n_oracle(f: &TupleFn, n_matrix: usize, n: usize, nodes: usize) -> Result<CorrelationResult> {
    if !(1..=3).contains(&n_matrix) {
        return Err(NcorrError::Size { got: n_matrix, range: "1..=3" });
    }
    if n == 0 || n > n_matrix {
        return Err(NcorrError::Size { got: n, range: "1..=N" });
    }
    if nodes < 4 {
        return Err(NcorrError::Config(format!("need at least 4 nodes per axis, got {nodes}")));
    }
    let norm = falling_factorial(n_matrix, n_matrix) as f64;
    let integrand = |theta: &[f64]| distinct_tuple_sum(theta, f, n) * (weyl_density(theta) / norm);
    let fine = periodic_grid_mean(n_matrix, nodes, &integrand);
    let coarse = periodic_grid_mean(n_matrix, nodes / 2, &integrand);
    Ok(CorrelationResult::new(fine, (fine - coarse).norm(), Method::Oracle)
        .with_param("n", n)
        .with_param("N", n_matrix)
        .with_param("nodes", nodes))
}

/// How the sum over wrapped copies is carried out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WrapMode {
    /// Sum the common shift of each tuple in closed form. Exact when `ΣΔ_j < 𝒯`,
    /// since the damped weight product is then band-limited below frequency 1.
    Resummed,
    /// Sum directly over copies `|k| <= k_range`; `None` picks the range from
    /// the decay of `h`.
    Truncated { k_range: Option<usize> },
}

/// Tables of `f(N u/2π)` and of `∫ h_1((u+v)/𝒯) h_2(v/𝒯) dv` in the difference `u`,
/// both even in `u`.
#[derive(Debug, Clone)]
pub struct PairKernel {
    f: CubicTable,
    w: CubicTable,
    /// `|f|` is negligible for `|u|` beyond this.
    pub reach: f64,
}

impl PairKernel {
    pub fn new(big_f: &BigF) -> Result<Self> {
        if big_f.n() != 2 {
            return Err(NcorrError::Size { got: big_f.n(), range: "2" });
        }
        let nm = big_f.n_matrix as f64;
        let s = big_f.phi.width;
        let band = nm * s;
        let end = 1.25 * BUMP_DECAY_END / band;
        let step_f = 0.02 / band;
        let f = pair_f_table(big_f, -4.0 * step_f, end, step_f);
        // last point where f is not negligible
        let peak = f.eval(0.0).abs();
        let mut reach = 0.0;
        let mut u = end;
        while u > 0.0 {
            if f.eval(u).abs() > 1e-14 * peak {
                reach = u + 10.0 * step_f;
                break;
            }
            u -= step_f;
        }
        let reach: f64 = reach.min(end);
        let delta: f64 = big_f.weights.iter().map(|w| w.delta).sum();
        let step_w = (0.02 * big_f.t_weight / delta).min(0.05);
        let w = CubicTable::tabulate(-4.0 * step_w, reach + 4.0 * step_w, step_w, |u| {
            big_f.common_mode(&[Complex64::new(u, 0.0), Complex64::new(0.0, 0.0)]).re
        });
        Ok(PairKernel { f, w, reach })
    }

    pub fn f(&self, u: f64) -> f64 {
        let u = u.abs();
        if u > self.reach {
            0.0
        } else {
            self.f.eval(u)
        }
    }

    pub fn w(&self, u: f64) -> f64 {
        self.w.eval(u.abs())
    }
}

/// `f(Nu/2π) = 2c ∫_0^s ψ(ξ/s)² cos(Nuξ) dξ` on a uniform grid in `u`.
fn pair_f_table(big_f: &BigF, start: f64, end: f64, step: f64) -> CubicTable {
    let s = big_f.phi.width;
    let c = big_f.phi.amplitude;
    cosine_transform_table(s, big_f.n_matrix as f64, start, end, step, |x| c * bump(x / s).powi(2))
}

/// `k_range` beyond which every wrapped copy has `|h(θ/𝒯)| < 1e-12·Δ`.
pub fn default_k_range(big_f: &BigF) -> usize {
    let min_delta = big_f.weights.iter().map(|w| w.delta).fold(f64::INFINITY, f64::min);
    (big_f.t_weight * BUMP_DECAY_END / (min_delta * TAU)).ceil() as usize + 1
}

/// `(1/2π) Σ_{r ∈ [N]^n} Σ_{d ∈ ℤ^{n-1}} f(N a/2π) W(a)` with `a = θ_r + 2π(d, 0)`.
fn resummed_sum(angles: &[f64], kernel: Option<&PairKernel>, f0w0: f64) -> f64 {
    match kernel {
        None => angles.len() as f64 * f0w0 / TAU,
        Some(k) => {
            let mut acc = NeumaierSum::default();
            for &a in angles {
                for &b in angles {
                    let base = a - b;
                    let lo = ((-k.reach - base) / TAU).ceil() as i64;
                    let hi = ((k.reach - base) / TAU).floor() as i64;
                    for d in lo..=hi {
                        let u = base + TAU * d as f64;
                        acc.add(k.f(u) * k.w(u));
                    }
                }
            }
            acc.value() / TAU
        }
    }
}

/// `Σ_{j_1, j_2} h_1(θ_{j_1}/𝒯) h_2(θ_{j_2}/𝒯) f(N(θ_{j_1} − θ_{j_2})/2π)` over wrapped copies.
fn truncated_sum(sample: &EigenangleSample, big_f: &BigF, kernel: Option<&PairKernel>, f0: f64, k_range: usize) -> f64 {
    let wrapped = wrap_angles(sample, k_range).angles;
    let t = big_f.t_weight;
    let h1: Vec<f64> = wrapped.iter().map(|&x| big_f.weights[0].h_real(x / t)).collect();
    match kernel {
        None => f0 * h1.iter().copied().fold(NeumaierSum::default(), |mut s, v| {
            s.add(v);
            s
        }).value(),
        Some(k) => {
            let h2: Vec<f64> = wrapped.iter().map(|&x| big_f.weights[1].h_real(x / t)).collect();
            let mut acc = NeumaierSum::default();
            let mut start = 0;
            for (i, &a) in wrapped.iter().enumerate() {
                while wrapped[start] < a - k.reach {
                    start += 1;
                }
                let mut inner = 0.0;
                for j in start..wrapped.len() {
                    let u = a - wrapped[j];
                    if u < -k.reach {
                        break;
                    }
                    inner += h2[j] * k.f(u);
                }
                acc.add(h1[i] * inner);
            }
            acc.value()
        }
    }
}

/// Monte Carlo mean of the weighted sum over all tuples of wrapped eigenangles,
/// `Σ_{j_1,…,j_n ∈ ℤ} ∏ h_j(θ_{j}/𝒯) f(Nθ_{j_1}/2π, …, Nθ_{j_n}/2π)`, for `n <= 2`.
pub fn mc_wrapped_weighted(samples: &[EigenangleSample], big_f: &BigF, mode: WrapMode) -> Result<CorrelationResult> {
    let n_matrix = check_samples(samples)?;
    if n_matrix != big_f.n_matrix {
        return Err(NcorrError::Config(format!(
            "samples have N = {n_matrix} but F was built for N = {}",
            big_f.n_matrix
        )));
    }
    let n = big_f.n();
    if mode == WrapMode::Resummed {
        let band: f64 = big_f.weights.iter().map(|w| w.delta).sum::<f64>() / big_f.t_weight;
        if band >= 1.0 {
            return Err(NcorrError::Config(format!(
                "closed-form wrap sum needs ΣΔ/𝒯 < 1, got {band}; use the truncated mode"
            )));
        }
    }
    let kernel = match n {
        1 => None,
        2 => Some(PairKernel::new(big_f)?),
        _ => return Err(NcorrError::Size { got: n, range: "1..=2" }),
    };
    let f0 = if n == 1 { big_f.phi.f_real(&[0.0]) } else { 0.0 };
    let values: Vec<Complex64>;
    let mut note = Vec::new();
    match mode {
        WrapMode::Resummed => {
            let f0w0 = if n == 1 { f0 * big_f.common_mode(&[Complex64::new(0.0, 0.0)]).re } else { 0.0 };
            values = samples
                .par_iter()
                .map(|s| Complex64::new(resummed_sum(&s.angles, kernel.as_ref(), f0w0), 0.0))
                .collect();
            note.push(("wrap", "resummed".to_string()));
        }
        WrapMode::Truncated { k_range } => {
            let k_range = k_range.unwrap_or_else(|| default_k_range(big_f));
            let copies = (2 * k_range + 1) * n_matrix;
            if copies > DEFAULT_TUPLE_BUDGET {
                return Err(NcorrError::Size { got: copies, range: "wrapped angles within budget" });
            }
            values = samples
                .par_iter()
                .map(|s| Complex64::new(truncated_sum(s, big_f, kernel.as_ref(), f0, k_range), 0.0))
                .collect();
            note.push(("wrap", "truncated".to_string()));
            note.push(("k_range", k_range.to_string()));
        }
    }
    let mut r = mc_result(&values, samples);
    big_f_params(big_f, &mut r);
    for (k, v) in note {
        r.set_param(k, v);
    }
    Ok(r)
}

fn big_f_params(big_f: &BigF, r: &mut CorrelationResult) {
    r.set_param("n", big_f.n());
    r.set_param("N", big_f.n_matrix);
    r.set_param("T", big_f.t_weight);
    r.set_param("phi_width", big_f.phi.width);
    r.set_param("phi_amplitude", big_f.phi.amplitude);
    let deltas: Vec<String> = big_f.weights.iter().map(|w| w.delta.to_string()).collect();
    r.set_param("g_width", deltas.join(","));
}

/// Exact expectation of the wrapped statistic for `n <= 2`. Off-diagonal
/// tuples use the pair density `(N² − S_N(u)²)/4π²`; tuples repeating one
/// eigenangle contribute `(N/2π) Σ_d f(Nd) W(2πd)`. The product of `f`,
/// `S_N²` and `W` is band-limited, so the trapezoid rule at `step` below
/// `2π/bandwidth` is exact up to truncation; the error is the change from
/// halving the step.
pub fn determinantal_wrapped(big_f: &BigF, step: Option<f64>) -> Result<CorrelationResult> {
    let nm = big_f.n_matrix as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut r = match big_f.n() {
        1 => {
            let v = nm / TAU * big_f.phi.f_real(&[0.0]) * big_f.common_mode(&[zero]).re;
            CorrelationResult::real(v, 0.0, Method::Determinant)
        }
        2 => {
            let band = nm * big_f.phi.width + nm + big_f.weights.iter().map(|w| w.delta).sum::<f64>() / big_f.t_weight;
            let h = step.unwrap_or(PI / band);
            let reach = 1.25 * BUMP_DECAY_END / (nm * big_f.phi.width);
            let pair = |u: f64| {
                let s = sn_kernel(u, big_f.n_matrix);
                let w = big_f.common_mode(&[Complex64::new(u, 0.0), zero]).re;
                big_f.phi.f_pair(nm * u / TAU) * w * (nm * nm - s * s) / (4.0 * PI * PI)
            };
            let trapezoid = |h: f64| -> f64 {
                let k_max = (reach / h).ceil() as i64;
                let terms: Vec<f64> = (-k_max..=k_max).into_par_iter().map(|k| pair(h * k as f64)).collect();
                h * terms.into_iter().fold(NeumaierSum::default(), |mut s, v| {
                    s.add(v);
                    s
                }).value()
            };
            let fine = trapezoid(h / 2.0);
            let coarse = trapezoid(h);
            let d_max = (reach / TAU).ceil() as i64;
            let mut diag = NeumaierSum::default();
            for d in -d_max..=d_max {
                let u = TAU * d as f64;
                let w = big_f.common_mode(&[Complex64::new(u, 0.0), zero]).re;
                diag.add(nm / TAU * big_f.phi.f_pair(nm * d as f64) * w);
            }
            CorrelationResult::real(fine + diag.value(), (fine - coarse).abs(), Method::Determinant)
                .with_param("step", h / 2.0)
        }
        n => return Err(NcorrError::Size { got: n, range: "1..=2" }),
    };
    big_f_params(big_f, &mut r);
    Ok(r)
}
