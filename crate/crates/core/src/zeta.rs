//! Zeta-zero ordinates and their pair and `n`-level correlation sums.

use crate::error::{NcorrError, Result};
use crate::quadrature::{cosine_transform_table, CubicTable, NeumaierSum, TanhSinhRule, BASE_STEP};
use crate::rs_main::sarnak_bracket;
use crate::test_functions::{bump, kappa, PhiSpec, WeightSpec};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{E, PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

/// Ordinates closer than this after sorting are treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-10;

/// `|ψ̂(y)|` of the bump is below `1e-12` beyond this `y`.
const BUMP_DECAY_END: f64 = 400.0;

/// Sorted, strictly increasing positive zero ordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDataset {
    pub ordinates: Vec<f64>,
    pub source: Option<PathBuf>,
}

impl ZeroDataset {
    pub fn count(&self) -> usize {
        self.ordinates.len()
    }

    pub fn max_height(&self) -> f64 {
        *self.ordinates.last().expect("datasets hold at least two ordinates")
    }

    /// The first `count` ordinates.
    pub fn head(&self, count: usize) -> Result<ZeroDataset> {
        if count < 2 || count > self.count() {
            return Err(NcorrError::Size { got: count, range: "2..=dataset size" });
        }
        Ok(ZeroDataset { ordinates: self.ordinates[..count].to_vec(), source: self.source.clone() })
    }
}

/// One ordinate per line; blank lines and lines starting with `#` are skipped.
pub fn parse_zeros(text: &str) -> Result<ZeroDataset> {
    let mut ordinates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| NcorrError::Parse { line: i + 1, msg: format!("not a number: {line:?}") })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(NcorrError::Parse { line: i + 1, msg: format!("ordinate must be positive, got {v}") });
        }
        ordinates.push(v);
    }
    if ordinates.len() < 2 {
        return Err(NcorrError::Parse { line: 0, msg: format!("need at least 2 ordinates, found {}", ordinates.len()) });
    }
    ordinates.sort_by(f64::total_cmp);
    for (i, w) in ordinates.windows(2).enumerate() {
        if w[1] - w[0] <= DUPLICATE_TOL {
            return Err(NcorrError::Order { index: i + 1, prev: w[0], next: w[1] });
        }
    }
    Ok(ZeroDataset { ordinates, source: None })
}

pub fn load_zeros(path: &Path) -> Result<ZeroDataset> {
    let text = fs::read_to_string(path)?;
    let mut d = parse_zeros(&text)?;
    d.source = Some(path.to_path_buf());
    Ok(d)
}

/// Shape of the Fourier transform `f̂` of a one-dimensional pair test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// `f̂(α) = ψ(α/a)`.
    Bump,
    /// `f̂(α) = ψ(α/a)²`, the pair profile of a product `Φ(ξ, −ξ)`.
    BumpSquared,
    /// `f̂(α) = (1 − |α|/a)₊`, with `f(u) = a (sin πau / πau)²`.
    Triangle,
}

/// Even pair test function `f(u) = ∫ f̂(α) e(uα) dα` with `f̂` supported in `[−a, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProfile {
    pub shape: ProfileShape,
    pub half_width: f64,
    pub amplitude: f64,
}

impl FourierProfile {
    /// `half_width` must lie in `(0, 1)`.
    pub fn new(shape: ProfileShape, half_width: f64, amplitude: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(NcorrError::Config(format!("profile half-width must be positive, got {half_width}")));
        }
        if half_width >= 1.0 {
            return Err(NcorrError::Support { support: half_width, limit: 1.0 });
        }
        Ok(FourierProfile { shape, half_width, amplitude })
    }

    pub fn f_hat(&self, alpha: f64) -> f64 {
        let a = self.half_width;
        let v = match self.shape {
            ProfileShape::Bump => bump(alpha / a),
            ProfileShape::BumpSquared => bump(alpha / a).powi(2),
            ProfileShape::Triangle => (1.0 - alpha.abs() / a).max(0.0),
        };
        self.amplitude * v
    }

    pub fn f(&self, u: f64) -> f64 {
        let a = self.half_width;
        match self.shape {
            ProfileShape::Triangle => {
                let x = PI * a * u;
                let s = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                self.amplitude * a * s * s
            }
            _ => {
                let rule = TanhSinhRule::for_oscillation(0.0, a, TAU * u * a);
                2.0 * rule.integrate(|al| self.f_hat(al) * (TAU * u * al).cos())
            }
        }
    }

    /// `|u|` beyond which the pair sums ignore `f`.
    pub fn reach(&self) -> f64 {
        match self.shape {
            ProfileShape::Triangle => 200.0,
            _ => BUMP_DECAY_END / (TAU * self.half_width),
        }
    }

    /// `f(0) + ∫ f(u)(1 − (sin πu/πu)²) du`, evaluated on the Fourier side as
    /// `f(0) + f̂(0) − ∫ f̂(α)(1 − |α|) dα`.
    pub fn prediction(&self) -> f64 {
        let a = self.half_width;
        let rule = TanhSinhRule::with_step(0.0, a, BASE_STEP);
        let f0 = 2.0 * rule.integrate(|al| self.f_hat(al));
        let tri = 2.0 * rule.integrate(|al| self.f_hat(al) * (1.0 - al));
        f0 + self.f_hat(0.0) - tri
    }

    fn table(&self) -> CubicTable {
        let step = 0.01 / (1.0 + TAU * self.half_width);
        let (start, end) = (-4.0 * step, self.reach() + 4.0 * step);
        match self.shape {
            ProfileShape::Triangle => CubicTable::tabulate(start, end, step, |u| self.f(u)),
            _ => cosine_transform_table(self.half_width, TAU, start, end, step, |al| self.f_hat(al)),
        }
    }
}

/// `Σ_{i,j} w1_i w2_j f(x_i − x_j)` over pairs with `|x_i − x_j| <= reach`; `x` ascending.
pub fn weighted_pair_sum(x: &[f64], w1: &[f64], w2: &[f64], f: &(dyn Fn(f64) -> f64 + Sync), reach: f64) -> f64 {
    assert!(x.len() == w1.len() && x.len() == w2.len());
    let partial: Vec<f64> = x
        .par_iter()
        .enumerate()
        .map(|(i, &xi)| {
            let start = x.partition_point(|&v| v < xi - reach);
            let mut inner = NeumaierSum::default();
            for j in start..x.len() {
                let d = xi - x[j];
                if d < -reach {
                    break;
                }
                inner.add(w2[j] * f(d));
            }
            w1[i] * inner.value()
        })
        .collect();
    let mut acc = NeumaierSum::default();
    partial.into_iter().for_each(|v| acc.add(v));
    acc.value()
}

/// How ordinates are scaled to unit mean spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unfolding {
    /// `x = (γ/2π) log(γ/2πe) + 7/8`, the smooth zero counting function; the
    /// sum is divided by the number of zeros.
    Local,
    /// `x = γ log T/2π`; the sum is divided by `T log T/2π`.
    LogT,
}

impl Unfolding {
    pub fn name(self) -> &'static str {
        match self {
            Unfolding::Local => "local",
            Unfolding::LogT => "logT",
        }
    }
}

/// Pair correlation of zeros against its Montgomery prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct MontgomeryResult {
    pub value: f64,
    pub prediction: f64,
    /// The `γ = γ'` part of `value`.
    pub diagonal: f64,
    pub zeros_used: usize,
    pub t_cut: f64,
    pub unfolding: Unfolding,
    pub warnings: Vec<String>,
}

impl MontgomeryResult {
    pub fn relative_deviation(&self) -> f64 {
        (self.value - self.prediction).abs() / self.prediction.abs()
    }
}

/// `Σ_{0<γ,γ'≤T} f(x_γ − x_γ')` over ordered pairs including `γ = γ'`, normalized
/// per `unfolding`, with a sharp window at `T = t_cut` (default: the last ordinate).
pub fn montgomery_statistic(
    zeros: &ZeroDataset,
    profile: &FourierProfile,
    t_cut: Option<f64>,
    unfolding: Unfolding,
) -> Result<MontgomeryResult> {
    let t = t_cut.unwrap_or_else(|| zeros.max_height());
    let used: Vec<f64> = zeros.ordinates.iter().copied().take_while(|&g| g <= t).collect();
    if used.len() < 2 {
        return Err(NcorrError::Config(format!("fewer than two ordinates below {t}")));
    }
    let m = used.len();
    let (x, norm): (Vec<f64>, f64) = match unfolding {
        Unfolding::Local => (used.iter().map(|&g| g / TAU * (g / (TAU * E)).ln() + 0.875).collect(), 1.0 / m as f64),
        Unfolding::LogT => {
            let l = t.ln();
            (used.iter().map(|&g| g * l / TAU).collect(), TAU / (t * l))
        }
    };
    let table = profile.table();
    let reach = profile.reach();
    let f = |u: f64| table.eval(u.abs());
    let ones = vec![1.0; m];
    let total = weighted_pair_sum(&x, &ones, &ones, &f, reach);
    let mut warnings = Vec::new();
    if profile.shape == ProfileShape::Triangle {
        warnings.push(format!("slowly decaying profile truncated at |u| = {reach}"));
    }
    Ok(MontgomeryResult {
        value: norm * total,
        prediction: profile.prediction(),
        diagonal: norm * m as f64 * profile.f(0.0),
        zeros_used: m,
        t_cut: t,
        unfolding,
        warnings,
    })
}

/// Smallest `X` with `|h_j(x)| <= tol·h_j(0)` for all `x >= X` and every weight.
pub fn weight_reach(weights: &[WeightSpec], tol: f64) -> f64 {
    let mut reach: f64 = 0.0;
    for w in weights {
        let peak = w.h_real(0.0).abs();
        let step = 0.01 / w.delta;
        let mut x = BUMP_DECAY_END / w.delta;
        while x > 0.0 && w.h_real(x).abs() <= tol * peak {
            x -= step;
        }
        reach = reach.max(x + step);
    }
    reach
}

/// Relative size of the weight tail ignored by [`zeta_n_correlation`].
pub const WEIGHT_TAIL_TOL: f64 = 1e-8;

/// Largest `𝒯` for which the data reach every zero with a non-negligible weight.
pub fn largest_scale(zeros: &ZeroDataset, weights: &[WeightSpec]) -> f64 {
    zeros.max_height() / weight_reach(weights, WEIGHT_TAIL_TOL)
}

/// Weighted `n`-level sum over zeros against its main term.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaComparison {
    pub value: f64,
    pub prediction: f64,
    pub t_weight: f64,
    pub log_scale: f64,
    /// Ordinates (of either sign) inside the weight window.
    pub zeros_used: usize,
    /// `|γ|` of the last ordinate used.
    pub last_height: f64,
    /// Set when `Φ` exceeds the proven support budget.
    pub conjectural: bool,
    pub warnings: Vec<String>,
}

impl ZetaComparison {
    pub fn relative_deviation(&self) -> f64 {
        (self.value - self.prediction).abs() / self.prediction.abs()
    }
}

/// `Σ_{γ_1,…,γ_n} ∏ h_j(γ_j/𝒯) f(γ_1 L/2π, …, γ_n L/2π)` with `L = log 𝒯`, over
/// ordinates of both signs, against `κ(h)(𝒯L/2π)[Φ(0) + Σ ∫|v|Φ]`.
pub fn zeta_n_correlation(
    zeros: &ZeroDataset,
    phi: &PhiSpec,
    weights: &[WeightSpec],
    t_weight: f64,
    force_conjectural: bool,
) -> Result<ZetaComparison> {
    let n = phi.n;
    if weights.len() != n {
        return Err(NcorrError::Config(format!("{} weights supplied for arity {n}", weights.len())));
    }
    if !(1..=3).contains(&n) {
        return Err(NcorrError::Size { got: n, range: "1..=3" });
    }
    if !(t_weight > 1.0 && t_weight.is_finite()) {
        return Err(NcorrError::Config(format!("𝒯 must exceed 1, got {t_weight}")));
    }
    let limit = 2.0 - phi.eps;
    let conjectural = phi.total_support() > limit + 1e-12;
    if conjectural && !force_conjectural {
        return Err(NcorrError::Support { support: phi.total_support(), limit });
    }
    let window = t_weight * weight_reach(weights, WEIGHT_TAIL_TOL);
    if window > zeros.max_height() {
        return Err(NcorrError::Config(format!(
            "weights at 𝒯 = {t_weight} need zeros up to {window:.1}, data end at {:.1}; largest usable 𝒯 is {:.1}",
            zeros.max_height(),
            largest_scale(zeros, weights)
        )));
    }
    let positive: Vec<f64> = zeros.ordinates.iter().copied().take_while(|&g| g <= window).collect();
    let mut points: Vec<f64> = positive.iter().rev().map(|g| -g).collect();
    points.extend(&positive);
    let l = t_weight.ln();
    let x: Vec<f64> = points.iter().map(|p| p * l / TAU).collect();
    let w: Vec<Vec<f64>> = weights.iter().map(|h| points.iter().map(|p| h.h_real(p / t_weight)).collect()).collect();
    let reach = BUMP_DECAY_END / (TAU * phi.width);
    let value = match n {
        1 => {
            let mut acc = NeumaierSum::default();
            w[0].iter().for_each(|v| acc.add(*v));
            acc.value() * phi.f_real(&[0.0])
        }
        2 => {
            let step = 0.01 / (1.0 + TAU * phi.width);
            let (s, c) = (phi.width, phi.amplitude);
            let table = cosine_transform_table(s, TAU, -4.0 * step, reach + 4.0 * step, step, |xi| c * bump(xi / s).powi(2));
            let f = |u: f64| table.eval(u.abs());
            weighted_pair_sum(&x, &w[0], &w[1], &f, reach)
        }
        _ => triple_sum(&x, &w, phi, reach)?,
    };
    let prediction = kappa(weights) * t_weight * l / TAU * sarnak_bracket(phi)?;
    let mut warnings = Vec::new();
    if conjectural {
        warnings.push(format!(
            "Φ support {} exceeds the proven budget {limit}; comparison is conjectural",
            phi.total_support()
        ));
    }
    Ok(ZetaComparison {
        value,
        prediction,
        t_weight,
        log_scale: l,
        zeros_used: points.len(),
        last_height: positive.last().copied().unwrap_or(0.0),
        conjectural,
        warnings,
    })
}

fn triple_sum(x: &[f64], w: &[Vec<f64>], phi: &PhiSpec, reach: f64) -> Result<f64> {
    let partial: Vec<Result<f64>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let lo = x.partition_point(|&v| v < x[i] - reach);
            let hi = x.partition_point(|&v| v <= x[i] + reach);
            let mut acc = NeumaierSum::default();
            for j in lo..hi {
                for k in lo..hi {
                    if (x[j] - x[k]).abs() > reach {
                        continue;
                    }
                    let args = [Complex64::new(x[i], 0.0), Complex64::new(x[j], 0.0), Complex64::new(x[k], 0.0)];
                    acc.add(w[1][j] * w[2][k] * phi.f_eval(&args)?.re);
                }
            }
            Ok(w[0][i] * acc.value())
        })
        .collect();
    let mut acc = NeumaierSum::default();
    for p in partial {
        acc.add(p?);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ZeroDataset {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/zeros_2000.txt");
        load_zeros(&path).unwrap()
    }

    #[test]
    fn parse_cases() {
        let d = parse_zeros("14.134725\n21.022040\n25.010858\n").unwrap();
        assert_eq!(d.count(), 3);
        assert!((d.ordinates[0] - 14.134725).abs() < 1e-12);
        assert!(matches!(parse_zeros(""), Err(NcorrError::Parse { .. })));
        let d = parse_zeros("# comment\n25.010858\n\n14.134725\n21.022040\n").unwrap();
        assert_eq!(d.ordinates, vec![14.134725, 21.022040, 25.010858]);
        assert!(matches!(parse_zeros("14.1\nabc\n"), Err(NcorrError::Parse { line: 2, .. })));
        assert!(matches!(parse_zeros("14.1\n-3\n"), Err(NcorrError::Parse { line: 2, .. })));
        assert!(matches!(parse_zeros("14.1\n21.0\n14.1\n"), Err(NcorrError::Order { .. })));
        let again = parse_zeros(&d.ordinates.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
        assert_eq!(again.ordinates, d.ordinates);
    }

    #[test]
    fn fixture_starts_with_known_zeros() {
        let d = fixture();
        assert_eq!(d.count(), 2000);
        assert!((d.ordinates[0] - 14.134_725_141_734_7).abs() < 1e-9);
        assert!((d.ordinates[1] - 21.022_039_638_771_6).abs() < 1e-9);
    }

    #[test]
    fn profile_values() {
        let t = FourierProfile::new(ProfileShape::Triangle, 0.8, 1.0).unwrap();
        // closed form 1 + a²/3
        assert!((t.prediction() - (1.0 + 0.64 / 3.0)).abs() < 1e-12);
        let b = FourierProfile::new(ProfileShape::Bump, 0.9, 1.0).unwrap();
        // band-limited integrand: trapezoid at step 0.25 is exact up to truncation
        let h = 0.25;
        let mut direct = b.f(0.0);
        for k in -400i32..=400 {
            let u = h * k as f64;
            let s = if k == 0 { 1.0 } else { ((PI * u).sin() / (PI * u)).powi(2) };
            direct += h * b.f(u) * (1.0 - s);
        }
        assert!((b.prediction() - direct).abs() < 1e-12, "{} {direct}", b.prediction());
        assert!(matches!(FourierProfile::new(ProfileShape::Bump, 1.0, 1.0), Err(NcorrError::Support { .. })));
        let tri_quad = {
            let rule = TanhSinhRule::with_step(0.0, 0.8, BASE_STEP);
            2.0 * rule.integrate(|al| t.f_hat(al) * (TAU * 0.7 * al).cos())
        };
        assert!((t.f(0.7) - tri_quad).abs() < 1e-12);
    }

    #[test]
    fn montgomery_small_and_diagonal() {
        let d = parse_zeros("14.134725\n21.022040\n25.010858\n").unwrap();
        let p = FourierProfile::new(ProfileShape::Bump, 0.9, 1.0).unwrap();
        let r = montgomery_statistic(&d, &p, None, Unfolding::Local).unwrap();
        assert_eq!(r.zeros_used, 3);
        assert!((r.diagonal - p.f(0.0)).abs() < 1e-14);
        // far-apart zeros: value is the diagonal plus tiny off-diagonal terms
        assert!((r.value - r.diagonal).abs() < 0.1 * r.diagonal);
    }

    #[test]
    fn montgomery_on_fixture() {
        let d = fixture();
        let p = FourierProfile::new(ProfileShape::Bump, 0.9, 1.0).unwrap();
        let r = montgomery_statistic(&d, &p, None, Unfolding::Local).unwrap();
        assert!(r.relative_deviation() < 0.05, "{} vs {}", r.value, r.prediction);
        let l = montgomery_statistic(&d, &p, None, Unfolding::LogT).unwrap();
        assert!(l.value < r.value);
    }

    #[test]
    fn single_index_counts_zeros() {
        let d = fixture();
        let w = WeightSpec::new(4.0).unwrap();
        let t = largest_scale(&d, &[w.clone()]);
        let phi = PhiSpec::new(1, 1.0, 0.2, 0.9, 1.0).unwrap();
        let r = zeta_n_correlation(&d, &phi, &[w.clone()], t, false).unwrap();
        // Riemann–von Mangoldt density log(|t|/2π)/2π against the same weight
        let rule = TanhSinhRule::with_step(0.0, 60.0, BASE_STEP / 8.0);
        let smooth = 2.0 * rule.integrate(|x| w.h_real(x) * (t * x / TAU).ln().max(0.0) / TAU) * t;
        let oracle = smooth * phi.f_real(&[0.0]);
        assert!((r.value - oracle).abs() < 0.05 * oracle, "{} vs {oracle}", r.value);
    }

    #[test]
    fn pair_sum_matches_profile_route() {
        let d = fixture();
        let w = WeightSpec::new(4.0).unwrap();
        let weights = vec![w.clone(), w.clone()];
        let t = largest_scale(&d, &weights) / 4.0;
        let phi = PhiSpec::new(2, 1.0, 0.2, 0.9, 1.7).unwrap();
        let r = zeta_n_correlation(&d, &phi, &weights, t, false).unwrap();
        let prof = FourierProfile::new(ProfileShape::BumpSquared, 0.9, 1.7).unwrap();
        let positive: Vec<f64> = d.ordinates.iter().copied().take_while(|&g| g <= r.last_height).collect();
        let mut pts: Vec<f64> = positive.iter().rev().map(|g| -g).collect();
        pts.extend(&positive);
        let x: Vec<f64> = pts.iter().map(|p| p * t.ln() / TAU).collect();
        let hw: Vec<f64> = pts.iter().map(|p| w.h_real(p / t)).collect();
        let other = weighted_pair_sum(&x, &hw, &hw, &|u| prof.f(u), prof.reach());
        assert!((r.value - other).abs() < 1e-8 * other.abs(), "{} {other}", r.value);
    }

    #[test]
    fn scaling_and_support() {
        let d = fixture();
        let w = WeightSpec::new(4.0).unwrap();
        let weights = vec![w.clone(), w];
        let t = largest_scale(&d, &weights);
        let a = zeta_n_correlation(&d, &PhiSpec::new(2, 1.0, 0.2, 0.8, 1.0).unwrap(), &weights, t, false).unwrap();
        let b = zeta_n_correlation(&d, &PhiSpec::new(2, 1.0, 0.2, 0.8, 3.0).unwrap(), &weights, t, false).unwrap();
        assert!((b.prediction - 3.0 * a.prediction).abs() < 1e-13 * b.prediction);
        assert!((b.value - 3.0 * a.value).abs() < 1e-12 * b.value.abs());
        let wide = PhiSpec::new(2, 2.0, 0.2, 1.2, 1.0).unwrap();
        assert!(matches!(zeta_n_correlation(&d, &wide, &weights, t, false), Err(NcorrError::Support { .. })));
        let forced = zeta_n_correlation(&d, &wide, &weights, t, true).unwrap();
        assert!(forced.conjectural && !forced.warnings.is_empty());
        assert!(matches!(zeta_n_correlation(&d, &wide, &weights, 2.0 * t, true), Err(NcorrError::Config(_))));
    }
}
