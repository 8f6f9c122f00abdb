//! Quadrature rules and summation helpers shared by the evaluators.
//!
//! Every integrand in this crate is either a smooth bump supported on a
//! compact interval (tanh-sinh handles the flat endpoints), a periodic
//! trigonometric integrand (periodic trapezoid), or a band-limited function
//! on the line (plain trapezoid, exact below the Nyquist spacing).

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// Largest |t| kept by the tanh-sinh rule; beyond this the weights are below 1e-20.
const TANH_SINH_T_MAX: f64 = 3.5;
pub const BASE_STEP: f64 = 1.0 / 16.0;

/// Nodes and weights of a tanh-sinh rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct TanhSinhRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TanhSinhRule {
    /// Rule with step `h` in the tanh-sinh variable.
    pub fn with_step(a: f64, b: f64, h: f64) -> Self {
        let half = 0.5 * (b - a);
        let k_max = (TANH_SINH_T_MAX / h).ceil() as i64;
        let mut nodes = Vec::with_capacity(2 * k_max as usize + 1);
        let mut weights = Vec::with_capacity(2 * k_max as usize + 1);
        for k in -k_max..=k_max {
            let t = k as f64 * h;
            let y = FRAC_PI_2 * t.sinh();
            // distance 1 - |tanh y| computed without cancellation
            let gap = 2.0 / (1.0 + (2.0 * y.abs()).exp());
            let c = y.cosh();
            let w = h * FRAC_PI_2 * t.cosh() / (c * c);
            if w * half < 1e-300 {
                continue;
            }
            nodes.push(if y >= 0.0 { b - (b - a) * 0.5 * gap } else { a + (b - a) * 0.5 * gap });
            weights.push(half * w);
        }
        TanhSinhRule { nodes, weights }
    }

    /// Rule resolving an integrand whose phase changes by at most
    /// `oscillation` radians per unit of the normalized variable on `[-1, 1]`.
    pub fn for_oscillation(a: f64, b: f64, oscillation: f64) -> Self {
        Self::with_step(a, b, oscillation_step(oscillation))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = NeumaierSum::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*x));
        }
        acc.value()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        let mut acc = ComplexSum::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(f(*x) * *w);
        }
        acc.value()
    }
}

/// Tanh-sinh step for a given oscillation (radians across the half-width).
pub fn oscillation_step(oscillation: f64) -> f64 {
    BASE_STEP.min(1.2 / (oscillation.abs() + 20.0))
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated summation applied to real and imaginary parts separately.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = ComplexSum::default();
        for z in iter {
            s.add(z);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = NeumaierSum::default();
    for x in iter {
        s.add(x);
    }
    s.value()
}

/// Cell-centred offsets `H·(j + offset)` covering `[-half_width, half_width]`.
pub fn trapezoid_grid(half_width: f64, step: f64, offset: f64) -> Vec<f64> {
    let k_max = (half_width / step).ceil() as i64 + 1;
    (-k_max..=k_max)
        .map(|j| step * (j as f64 + offset))
        .filter(|u| u.abs() <= half_width + step)
        .collect()
}

/// Uniformly sampled real function with local cubic interpolation
/// on `[start, start + step·(len-1)]`; zero outside.
#[derive(Debug, Clone)]
pub struct CubicTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl CubicTable {
    pub fn tabulate<F: Fn(f64) -> f64 + Sync>(start: f64, end: f64, step: f64, f: F) -> Self {
        use rayon::prelude::*;
        let len = (((end - start) / step).ceil() as usize + 1).max(4);
        let values: Vec<f64> = (0..len)
            .into_par_iter()
            .map(|i| f(start + step * i as f64))
            .collect();
        CubicTable { start, step, values }
    }

    pub fn from_values(start: f64, step: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 4);
        CubicTable { start, step, values }
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.start) / self.step;
        if !(pos >= 0.0) || pos > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        // four-point Lagrange stencil, shifted inward at the ends
        let last = self.values.len() - 4;
        let base = (pos.floor() as usize).saturating_sub(1).min(last);
        let t = pos - base as f64;
        let p = &self.values[base..base + 4];
        -p[0] * (t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0 + p[1] * t * (t - 2.0) * (t - 3.0) / 2.0
            - p[2] * t * (t - 1.0) * (t - 3.0) / 2.0
            + p[3] * t * (t - 1.0) * (t - 2.0) / 6.0
    }
}

/// `2∫_0^a w(α) cos(ω u α) dα` on the grid `u = start + k·step` up to `end`,
/// with one fixed rule in `α` and phasors advanced by recurrence.
pub fn cosine_transform_table(a: f64, omega: f64, start: f64, end: f64, step: f64, w: impl Fn(f64) -> f64) -> CubicTable {
    let rule = TanhSinhRule::for_oscillation(0.0, a, omega * a * start.abs().max(end.abs()));
    let weights: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(&x, &q)| 2.0 * q * w(x)).collect();
    let rotation: Vec<Complex64> = rule.nodes.iter().map(|&x| Complex64::from_polar(1.0, omega * step * x)).collect();
    let len = (((end - start) / step).ceil() as usize + 1).max(4);
    let mut phase = vec![Complex64::new(1.0, 0.0); rule.len()];
    let mut values = Vec::with_capacity(len);
    for k in 0..len {
        if k % 256 == 0 {
            // refresh the phasors to stop rounding drift
            let u = start + step * k as f64;
            for (p, &x) in phase.iter_mut().zip(&rule.nodes) {
                *p = Complex64::from_polar(1.0, omega * u * x);
            }
        }
        values.push(weights.iter().zip(&phase).map(|(q, p)| q * p.re).sum());
        for (p, r) in phase.iter_mut().zip(&rotation) {
            *p *= r;
        }
    }
    CubicTable::from_values(start, step, values)
}
