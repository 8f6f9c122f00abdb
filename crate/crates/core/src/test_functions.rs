//! Band-limited test functions: the product bump `Φ`, its hyperplane transform
//! `f`, the weights `g`/`h`, and `κ(h) = ∫ ∏ h_j`.

use crate::error::{NcorrError, Result};
use crate::quadrature::{ComplexSum, CubicTable, TanhSinhRule};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

/// The even C^∞ bump `ψ(u) = exp(-1/(1-u²))` on `(-1, 1)`.
pub fn bump(u: f64) -> f64 {
    let d = 1.0 - u * u;
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

/// `∫_{Σξ=0} ∏ ψ(ξ_j/w_j) e^{i Σ k_j ξ_j} dξ_1…dξ_{n-1}`, with `ξ_n` eliminated.
///
/// For `n = 1` the hyperplane is the origin and the value is `ψ(0)`.
pub fn hyperplane_integral(widths: &[f64], freq: &[Complex64]) -> Complex64 {
    let n = widths.len();
    assert_eq!(n, freq.len());
    assert!(n >= 1);
    if n == 1 {
        return Complex64::new(bump(0.0), 0.0);
    }
    let last = freq[n - 1];
    let diff: Vec<Complex64> = freq[..n - 1].iter().map(|k| k - last).collect();
    // tail[j] = Σ_{i ≥ j} w_i
    let mut tail = vec![0.0; n + 1];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + widths[j];
    }
    hyperplane_rec(0, 0.0, widths, &diff, &tail)
}

fn hyperplane_rec(j: usize, partial: f64, widths: &[f64], diff: &[Complex64], tail: &[f64]) -> Complex64 {
    let n = widths.len();
    if j == n - 1 {
        return Complex64::new(bump(-partial / widths[n - 1]), 0.0);
    }
    let w = widths[j];
    let rest = tail[j + 1];
    let lo = (-w).max(-rest - partial);
    let hi = w.min(rest - partial);
    if lo >= hi {
        return Complex64::new(0.0, 0.0);
    }
    let mut cuts = vec![lo, hi];
    if j + 2 < n {
        // where the next variable's range stops being clipped by the later ones
        let inner = tail[j + 2] - widths[j + 1];
        for b in [-inner - partial, inner - partial] {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = diff[j];
    let mut acc = ComplexSum::default();
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        if b - a <= 0.0 {
            continue;
        }
        let rule = TanhSinhRule::for_oscillation(a, b, k.norm() * 0.5 * (b - a));
        acc.add(rule.integrate_complex(|xi| {
            let p = bump(xi / w);
            if p == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            (Complex64::i() * k * xi).exp() * p * hyperplane_rec(j + 1, partial + xi, widths, diff, tail)
        }));
    }
    acc.value()
}

/// `Φ(ξ) = c ∏ ψ(ξ_j/s)` with total support `n·s ≤ 2q - ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pub n: usize,
    pub q: f64,
    pub eps: f64,
    pub width: f64,
    pub amplitude: f64,
    /// Largest `|Im x_j|` accepted by [`PhiSpec::f_eval`].
    pub strip_bound: f64,
}

impl PhiSpec {
    pub fn new(n: usize, q: f64, eps: f64, width: f64, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(NcorrError::Config("arity n must be at least 1".into()));
        }
        if !(q > 0.0 && eps > 0.0 && width > 0.0 && amplitude.is_finite()) {
            return Err(NcorrError::Config(format!(
                "need q > 0, eps > 0, width > 0 (got q={q}, eps={eps}, width={width})"
            )));
        }
        let support = n as f64 * width;
        if support > 2.0 * q - eps + 1e-12 {
            return Err(NcorrError::Support { support, limit: 2.0 * q - eps });
        }
        // keeps |e^{-2πi x·ξ}| below e^600 on the support
        let strip_bound = 600.0 / (TAU * support);
        Ok(PhiSpec { n, q, eps, width, amplitude, strip_bound })
    }

    /// Spec with the smallest integer `q` admitting `width` and `eps`.
    pub fn with_minimal_q(n: usize, eps: f64, width: f64, amplitude: f64) -> Result<Self> {
        let q = ((n as f64 * width + eps) / 2.0).ceil().max(1.0);
        Self::new(n, q, eps, width, amplitude)
    }

    pub fn with_strip_bound(mut self, bound: f64) -> Self {
        self.strip_bound = bound;
        self
    }

    /// `Σ|ξ_j|` can reach at most this value.
    pub fn total_support(&self) -> f64 {
        self.n as f64 * self.width
    }

    pub fn phi_eval(&self, xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.n);
        self.amplitude * xi.iter().map(|&x| bump(x / self.width)).product::<f64>()
    }

    /// `f(x) = ∫ Φ(ξ) δ(Σξ) e(-x·ξ) dξ` at complex `x`.
    pub fn f_eval(&self, x: &[Complex64]) -> Result<Complex64> {
        if x.len() != self.n {
            return Err(NcorrError::Config(format!("expected {} arguments, got {}", self.n, x.len())));
        }
        for v in x {
            if v.im.abs() > self.strip_bound {
                return Err(NcorrError::Strip { im: v.im.abs(), bound: self.strip_bound });
            }
        }
        let widths = vec![self.width; self.n];
        let freq: Vec<Complex64> = x.iter().map(|v| -TAU * v).collect();
        Ok(self.amplitude * hyperplane_integral(&widths, &freq))
    }

    /// `f` at real arguments.
    pub fn f_real(&self, x: &[f64]) -> f64 {
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.f_eval(&xc).expect("real arguments lie in the strip").re
    }

    /// For `n = 2`, `f(u, 0)` as a function of the single difference.
    pub fn f_pair(&self, u: f64) -> f64 {
        debug_assert_eq!(self.n, 2);
        self.f_real(&[u, 0.0])
    }
}

/// Weight `g(t) = ψ(t/Δ)` on `[-Δ, Δ]` and its transform `h(x) = ∫ g(t) e^{ixt} dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub delta: f64,
}

/// `|ψ̂(y)|` is below `1e-12` beyond this `y = Δ·x`.
const H_TABLE_END: f64 = 400.0;
const H_TABLE_STEP: f64 = 0.01;

/// `ψ̂(y) = 2∫_0^1 ψ(u) cos(yu) du` on `[0, H_TABLE_END]`, shared by every weight.
fn bump_transform_table() -> &'static CubicTable {
    static TABLE: OnceLock<CubicTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let end = H_TABLE_END + 3.0 * H_TABLE_STEP;
        let len = (end / H_TABLE_STEP).ceil() as usize + 1;
        let rule = TanhSinhRule::for_oscillation(0.0, 1.0, 0.5 * end);
        let weights: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(&u, &w)| 2.0 * w * bump(u)).collect();
        let rotation: Vec<Complex64> =
            rule.nodes.iter().map(|&u| Complex64::from_polar(1.0, H_TABLE_STEP * u)).collect();
        let mut phase = vec![Complex64::new(1.0, 0.0); rule.len()];
        let mut values = Vec::with_capacity(len);
        for k in 0..len {
            if k % 256 == 0 {
                // refresh the phasors to stop rounding drift
                let y = H_TABLE_STEP * k as f64;
                for (p, &u) in phase.iter_mut().zip(&rule.nodes) {
                    *p = Complex64::from_polar(1.0, y * u);
                }
            }
            values.push(weights.iter().zip(&phase).map(|(w, p)| w * p.re).sum());
            for (p, r) in phase.iter_mut().zip(&rotation) {
                *p *= r;
            }
        }
        CubicTable::from_values(0.0, H_TABLE_STEP, values)
    })
}

impl WeightSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(NcorrError::Config(format!("weight support must be positive, got {delta}")));
        }
        Ok(WeightSpec { delta })
    }

    pub fn g_eval(&self, t: f64) -> f64 {
        bump(t / self.delta)
    }

    /// Direct quadrature, valid for complex `x`.
    pub fn h_eval(&self, x: Complex64) -> Complex64 {
        let k = x * self.delta;
        let rule = TanhSinhRule::for_oscillation(-1.0, 1.0, k.norm());
        self.delta * rule.integrate_complex(|u| (Complex64::i() * k * u).exp() * bump(u))
    }

    /// `h` at real `x`, interpolated from a table built on first use.
    pub fn h_real(&self, x: f64) -> f64 {
        let y = (x * self.delta).abs();
        if y > H_TABLE_END {
            return self.h_eval(Complex64::new(x, 0.0)).re;
        }
        self.delta * bump_transform_table().eval(y)
    }
}

/// `κ(h) = ∫ ∏ h_j(u) du`, computed as `2π ∫_{Σy=0} ∏ g_j(y_j) dy`.
pub fn kappa(weights: &[WeightSpec]) -> f64 {
    assert!(!weights.is_empty());
    let widths: Vec<f64> = weights.iter().map(|w| w.delta).collect();
    let zero = vec![Complex64::new(0.0, 0.0); weights.len()];
    TAU * hyperplane_integral(&widths, &zero).re
}

/// `κ(h)` by integrating `∏ h_j` on the line. The product is band-limited to
/// `[-ΣΔ, ΣΔ]`, so the trapezoid rule at spacing `π/ΣΔ` is exact up to truncation.
pub fn kappa_from_h(weights: &[WeightSpec]) -> f64 {
    let band: f64 = weights.iter().map(|w| w.delta).sum();
    let step = PI / band;
    let min_delta = weights.iter().map(|w| w.delta).fold(f64::INFINITY, f64::min);
    let reach = 1.2 * H_TABLE_END / min_delta;
    let peak: f64 = weights.iter().map(|w| w.h_real(0.0)).product();
    let mut acc = ComplexSum::default();
    let mut k = 0i64;
    loop {
        let u = step * k as f64;
        let v: f64 = weights.iter().map(|w| w.h_real(u)).product();
        acc.add(Complex64::new(if k == 0 { v } else { 2.0 * v }, 0.0));
        if (v.abs() < 1e-16 * peak && k > 8) || u > reach {
            break;
        }
        k += 1;
    }
    step * acc.value().re
}

/// `W(w) = ∫ ∏ h_j((w_j + v)/𝒯) dv = 2π𝒯 ∫_{Σt=0} ∏ g_j(t_j) e^{i Σ t_j w_j/𝒯} dt`.
pub fn common_mode_weight(weights: &[WeightSpec], w: &[Complex64], t_scale: f64) -> Complex64 {
    let widths: Vec<f64> = weights.iter().map(|g| g.delta).collect();
    let freq: Vec<Complex64> = w.iter().map(|x| x / t_scale).collect();
    TAU * t_scale * hyperplane_integral(&widths, &freq)
}
