//! The combinatorial kernel `J*(A; B)` and its truncations.
//!
//! `J*(A;B) = Σ_{S⊂A, T⊂B, |S|=|T|} e^{-N(ΣS+ΣT)} Z(S,T)Z(S⁻,T⁻)/(Z†(S,S⁻)Z†(T,T⁻))
//!            · Σ_{partial matchings of (A-S)+(B-T)} ∏ H_{S,T}(cell)`.

use crate::combinatorics::{enum_pair_partitions, enum_permutations, enum_subset_pairs, Truncation};
use crate::error::{NcorrError, Result};
use crate::quadrature::ComplexSum;
use crate::special::{logz_deriv, logz_deriv2, z_eval, ShiftSet, DEFAULT_POLE_TOL};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub const MAX_TOTAL_SHIFTS: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Validated arguments of `J*`.
#[derive(Debug, Clone)]
pub struct JStarInput {
    pub a: ShiftSet,
    pub b: ShiftSet,
    pub n: usize,
    pub truncation: Truncation,
}

fn distance_to_pole(x: Complex64) -> f64 {
    let k = (x.im / TAU).round();
    Complex64::new(x.re, x.im - TAU * k).norm()
}

impl JStarInput {
    pub fn new(a: ShiftSet, b: ShiftSet, n: usize, truncation: Truncation) -> Result<Self> {
        let total = a.len() + b.len();
        if total > MAX_TOTAL_SHIFTS {
            return Err(NcorrError::Size { got: total, range: "|A|+|B| <= 16" });
        }
        if n == 0 {
            return Err(NcorrError::Config("matrix size N must be positive".into()));
        }
        for set in [&a, &b] {
            let v = set.as_slice();
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    if distance_to_pole(v[i] - v[j]) < DEFAULT_POLE_TOL {
                        return Err(NcorrError::Shift(format!(
                            "shifts {} and {} coincide modulo 2πi",
                            v[i], v[j]
                        )));
                    }
                }
            }
        }
        for alpha in a.iter() {
            for beta in b.iter() {
                let s = alpha + beta;
                let d = distance_to_pole(s);
                if d < DEFAULT_POLE_TOL {
                    return Err(NcorrError::Pole { x: s, k: (s.im / TAU).round() as i64, distance: d });
                }
            }
        }
        Ok(JStarInput { a, b, n, truncation })
    }
}

/// A cell of a partial matching, carrying the shift values it involves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    SingletonA(Complex64),
    SingletonB(Complex64),
    Doubleton(Complex64, Complex64),
}

/// `H_{S,T}(W)` for a singleton or cross doubleton.
pub fn h_factor(s: &ShiftSet, t: &ShiftSet, cell: Cell) -> Result<Complex64> {
    match cell {
        Cell::SingletonA(alpha) => {
            let mut acc = ZERO;
            for ah in s.iter() {
                acc += logz_deriv(alpha - ah)?;
            }
            for bh in t.iter() {
                acc -= logz_deriv(alpha + bh)?;
            }
            Ok(acc)
        }
        Cell::SingletonB(beta) => {
            let mut acc = ZERO;
            for bh in t.iter() {
                acc += logz_deriv(beta - bh)?;
            }
            for ah in s.iter() {
                acc -= logz_deriv(beta + ah)?;
            }
            Ok(acc)
        }
        Cell::Doubleton(alpha, beta) => logz_deriv2(alpha + beta),
    }
}

/// One summand `D_{S,T}(A-S, B-T)`, evaluated directly from its definition
/// by enumerating the partial matchings.
pub fn d_term(s: &ShiftSet, t: &ShiftSet, a_rest: &ShiftSet, b_rest: &ShiftSet, n: usize) -> Result<Complex64> {
    if s.len() != t.len() {
        return Err(NcorrError::Config("|S| must equal |T|".into()));
    }
    let mut pref = ONE;
    let mut exponent = ZERO;
    for ah in s.iter() {
        exponent += ah;
    }
    for bh in t.iter() {
        exponent += bh;
    }
    pref *= (-(n as f64) * exponent).exp();
    for ah in s.iter() {
        for bh in t.iter() {
            pref *= z_eval(ah + bh)? * z_eval(-ah - bh)?;
        }
    }
    for set in [s, t] {
        let v = set.as_slice();
        for i in 0..v.len() {
            for j in 0..v.len() {
                if i != j {
                    pref /= z_eval(v[i] - v[j])?;
                }
            }
        }
    }
    let ha: Vec<Complex64> =
        a_rest.iter().map(|&x| h_factor(s, t, Cell::SingletonA(x))).collect::<Result<_>>()?;
    let hb: Vec<Complex64> =
        b_rest.iter().map(|&x| h_factor(s, t, Cell::SingletonB(x))).collect::<Result<_>>()?;
    let mut sum = ComplexSum::default();
    for part in enum_pair_partitions(a_rest.len(), b_rest.len()) {
        let mut prod = ONE;
        for &i in &part.singletons_a {
            prod *= ha[i];
        }
        for &j in &part.singletons_b {
            prod *= hb[j];
        }
        for &(i, j) in &part.doubletons {
            prod *= h_factor(s, t, Cell::Doubleton(a_rest.as_slice()[i], b_rest.as_slice()[j]))?;
        }
        sum.add(prod);
    }
    Ok(pref * sum.value())
}

/// Pairwise `z`-tables for one `(A, B)`; every `D_{S,T}` is assembled from these.
struct Tables {
    n: f64,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    /// `(z'/z)(a_i - a_k)`, `(z'/z)(b_j - b_l)`, `(z'/z)(a_i + b_j)`.
    ld_aa: Vec<Vec<Complex64>>,
    ld_bb: Vec<Vec<Complex64>>,
    ld_ab: Vec<Vec<Complex64>>,
    /// `(z'/z)'(a_i + b_j)`.
    ld2_ab: Vec<Vec<Complex64>>,
    /// `z(a_i + b_j) z(-a_i - b_j)`.
    zz_ab: Vec<Vec<Complex64>>,
    /// `z(a_i - a_k)`, `z(b_j - b_l)`.
    z_aa: Vec<Vec<Complex64>>,
    z_bb: Vec<Vec<Complex64>>,
}

fn table<F: Fn(usize, usize) -> Result<Complex64>>(rows: usize, cols: usize, f: F) -> Result<Vec<Vec<Complex64>>> {
    (0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect()
}

impl Tables {
    fn new(input: &JStarInput, need_prefactor: bool) -> Result<Self> {
        let a = input.a.as_slice().to_vec();
        let b = input.b.as_slice().to_vec();
        let (na, nb) = (a.len(), b.len());
        let diff = |v: &[Complex64], f: fn(Complex64) -> Result<Complex64>| {
            table(v.len(), v.len(), |i, k| if i == k { Ok(ZERO) } else { f(v[i] - v[k]) })
        };
        let ld2_ab = table(na, nb, |i, j| logz_deriv2(a[i] + b[j]))?;
        let (ld_aa, ld_bb, ld_ab, zz_ab, z_aa, z_bb) = if need_prefactor {
            (
                diff(&a, logz_deriv)?,
                diff(&b, logz_deriv)?,
                table(na, nb, |i, j| logz_deriv(a[i] + b[j]))?,
                table(na, nb, |i, j| Ok(z_eval(a[i] + b[j])? * z_eval(-a[i] - b[j])?))?,
                diff(&a, z_eval)?,
                diff(&b, z_eval)?,
            )
        } else {
            Default::default()
        };
        Ok(Tables { n: input.n as f64, a, b, ld_aa, ld_bb, ld_ab, ld2_ab, zz_ab, z_aa, z_bb })
    }

    fn prefactor(&self, s: &[usize], t: &[usize]) -> Complex64 {
        let mut exponent = ZERO;
        for &k in s {
            exponent += self.a[k];
        }
        for &l in t {
            exponent += self.b[l];
        }
        let mut p = (-self.n * exponent).exp();
        for &k in s {
            for &l in t {
                p *= self.zz_ab[k][l];
            }
        }
        for &k in s {
            for &k2 in s {
                if k != k2 {
                    p /= self.z_aa[k][k2];
                }
            }
        }
        for &l in t {
            for &l2 in t {
                if l != l2 {
                    p /= self.z_bb[l][l2];
                }
            }
        }
        p
    }

    /// Sum over partial matchings of the rests, recursing over the A-side elements.
    fn matching_sum(&self, a_rest: &[usize], b_rest: &[usize], ha: &[Complex64], hb: &[Complex64]) -> Complex64 {
        fn rec(
            tb: &Tables,
            pos: usize,
            used: u32,
            a_rest: &[usize],
            b_rest: &[usize],
            ha: &[Complex64],
            hb: &[Complex64],
        ) -> Complex64 {
            if pos == a_rest.len() {
                let mut p = ONE;
                for (jj, h) in hb.iter().enumerate() {
                    if used & (1 << jj) == 0 {
                        p *= h;
                    }
                }
                return p;
            }
            let mut acc = ZERO;
            if ha[pos] != ZERO {
                acc += ha[pos] * rec(tb, pos + 1, used, a_rest, b_rest, ha, hb);
            }
            for (jj, &j) in b_rest.iter().enumerate() {
                if used & (1 << jj) == 0 {
                    acc += tb.ld2_ab[a_rest[pos]][j] * rec(tb, pos + 1, used | (1 << jj), a_rest, b_rest, ha, hb);
                }
            }
            acc
        }
        rec(self, 0, 0, a_rest, b_rest, ha, hb)
    }

    fn term(&self, s: &[usize], t: &[usize]) -> Complex64 {
        let a_rest: Vec<usize> = (0..self.a.len()).filter(|i| !s.contains(i)).collect();
        let b_rest: Vec<usize> = (0..self.b.len()).filter(|j| !t.contains(j)).collect();
        if s.is_empty() {
            // every singleton factor is an empty sum: only perfect matchings survive
            if a_rest.len() != b_rest.len() {
                return ZERO;
            }
            let zeros = vec![ZERO; a_rest.len()];
            return self.matching_sum(&a_rest, &b_rest, &zeros, &zeros);
        }
        let ha: Vec<Complex64> = a_rest
            .iter()
            .map(|&i| {
                s.iter().map(|&k| self.ld_aa[i][k]).sum::<Complex64>()
                    - t.iter().map(|&l| self.ld_ab[i][l]).sum::<Complex64>()
            })
            .collect();
        let hb: Vec<Complex64> = b_rest
            .iter()
            .map(|&j| {
                t.iter().map(|&l| self.ld_bb[j][l]).sum::<Complex64>()
                    - s.iter().map(|&k| self.ld_ab[k][j]).sum::<Complex64>()
            })
            .collect();
        self.prefactor(s, t) * self.matching_sum(&a_rest, &b_rest, &ha, &hb)
    }
}

/// `J*` (or `J_q*`, per `input.truncation`).
pub fn jstar(input: &JStarInput) -> Result<Complex64> {
    jstar_sizes(input, |_| true)
}

/// Only the terms with `|S| = |T| = size`.
pub fn jstar_stratum(input: &JStarInput, size: usize) -> Result<Complex64> {
    jstar_sizes(input, |k| k == size)
}

fn jstar_sizes<P: Fn(usize) -> bool>(input: &JStarInput, keep: P) -> Result<Complex64> {
    let (na, nb) = (input.a.len(), input.b.len());
    let only_empty = matches!(input.truncation, Truncation::Below(1)) || !(1..=na.min(nb)).any(&keep);
    let tables = Tables::new(input, !only_empty)?;
    let mut sum = ComplexSum::default();
    for (s, t) in enum_subset_pairs(na, nb, input.truncation) {
        if keep(s.len()) {
            sum.add(tables.term(&s, &t));
        }
    }
    Ok(sum.value())
}

/// `J*` summed term by term through [`d_term`]; slower, used as a cross-check.
pub fn jstar_by_definition(input: &JStarInput) -> Result<Complex64> {
    let mut sum = ComplexSum::default();
    for (s, t) in enum_subset_pairs(input.a.len(), input.b.len(), input.truncation) {
        let a_rest: Vec<usize> = (0..input.a.len()).filter(|i| !s.contains(i)).collect();
        let b_rest: Vec<usize> = (0..input.b.len()).filter(|j| !t.contains(j)).collect();
        sum.add(d_term(
            &input.a.select(&s),
            &input.b.select(&t),
            &input.a.select(&a_rest),
            &input.b.select(&b_rest),
            input.n,
        )?);
    }
    Ok(sum.value())
}

/// Number of `(S, T, matching)` triples in the defining sum.
pub fn term_count(len_a: usize, len_b: usize, truncation: Truncation) -> usize {
    enum_subset_pairs(len_a, len_b, truncation)
        .map(|(s, t)| enum_pair_partitions(len_a - s.len(), len_b - t.len()).count())
        .sum()
}

/// `J₁*(A;B) = Σ_σ ∏_k (z'/z)'(α_k + β_σ(k))` when `|A| = |B|`, else 0.
pub fn jstar_q1_closed_form(a: &ShiftSet, b: &ShiftSet) -> Result<Complex64> {
    if a.len() != b.len() {
        return Ok(ZERO);
    }
    let av = a.as_slice();
    let bv = b.as_slice();
    let mut sum = ComplexSum::default();
    for perm in enum_permutations(a.len())? {
        let mut p = ONE;
        for (k, &sk) in perm.iter().enumerate() {
            p *= logz_deriv2(av[k] + bv[sk])?;
        }
        sum.add(p);
    }
    Ok(sum.value())
}

/// One comparison of the engine against a hand-written closed form.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SmallCaseReport {
    pub n: usize,
    pub trials: usize,
    pub tol: f64,
    pub cases: Vec<CaseReport>,
}

impl SmallCaseReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.cases.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }
}

/// Hand-written small cases of `J*`, written out term by term.
mod closed_forms {
    use super::*;

    fn z(x: Complex64) -> Complex64 {
        z_eval(x).unwrap()
    }
    fn ld(x: Complex64) -> Complex64 {
        logz_deriv(x).unwrap()
    }
    fn ld2(x: Complex64) -> Complex64 {
        logz_deriv2(x).unwrap()
    }

    /// `e^{-N(a+b)} z(a+b) z(-a-b)`
    pub fn pair_weight(n: f64, a: Complex64, b: Complex64) -> Complex64 {
        (-n * (a + b)).exp() * z(a + b) * z(-a - b)
    }

    pub fn one_one(n: f64, a: Complex64, b: Complex64) -> Complex64 {
        pair_weight(n, a, b) + ld2(a + b)
    }

    pub fn one_two(n: f64, a: Complex64, b1: Complex64, b2: Complex64) -> Complex64 {
        pair_weight(n, a, b1) * (ld(b2 - b1) - ld(b2 + a)) + pair_weight(n, a, b2) * (ld(b1 - b2) - ld(b1 + a))
    }

    pub fn one_three(n: f64, a: Complex64, b: [Complex64; 3]) -> Complex64 {
        let [b1, b2, b3] = b;
        pair_weight(n, a, b1) * (ld(b2 - b1) - ld(b2 + a)) * (ld(b3 - b1) - ld(b3 + a))
            + pair_weight(n, a, b2) * (ld(b1 - b2) - ld(b1 + a)) * (ld(b3 - b2) - ld(b3 + a))
            + pair_weight(n, a, b3) * (ld(b1 - b3) - ld(b1 + a)) * (ld(b2 - b3) - ld(b2 + a))
    }

    pub fn two_two_empty(a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
        ld2(a[0] + b[0]) * ld2(a[1] + b[1]) + ld2(a[0] + b[1]) * ld2(a[1] + b[0])
    }

    /// `D_{{a_i},{b_j}}({a_i'},{b_j'})`.
    pub fn two_two_single(n: f64, a: [Complex64; 2], b: [Complex64; 2], i: usize, j: usize) -> Complex64 {
        let (ai, ao) = (a[i], a[1 - i]);
        let (bj, bo) = (b[j], b[1 - j]);
        pair_weight(n, ai, bj) * (ld2(ao + bo) + (ld(ao - ai) - ld(ao + bj)) * (ld(bo - bj) - ld(bo + ai)))
    }

    /// `D_{{a1,a2},{b1,b2}}(∅,∅)`; the denominator is `Z†(S,S⁻)Z†(T,T⁻)`,
    /// i.e. `z(a1-a2) z(a2-a1) z(b1-b2) z(b2-b1)`.
    pub fn two_two_full(n: f64, a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
        let [a1, a2] = a;
        let [b1, b2] = b;
        (-n * (a1 + a2 + b1 + b2)).exp()
            * z(a1 + b1)
            * z(-a1 - b1)
            * z(a1 + b2)
            * z(-a1 - b2)
            * z(a2 + b1)
            * z(-a2 - b1)
            * z(a2 + b2)
            * z(-a2 - b2)
            / (z(a1 - a2) * z(a2 - a1) * z(b1 - b2) * z(b2 - b1))
    }
}

fn deviation(engine: Complex64, oracle: Complex64) -> f64 {
    let diff = (engine - oracle).norm();
    if oracle.norm() > 0.0 {
        diff / oracle.norm()
    } else {
        diff
    }
}

/// Checks the engine against the hand-written small cases at `trials` random
/// shift tuples (real parts in `[0.1, 1]`, imaginary parts in `[-2, 2]`).
pub fn verify_small_cases(n: usize, trials: usize, tol: f64, seed: u64) -> Result<SmallCaseReport> {
    use closed_forms::*;
    if trials == 0 {
        return Err(NcorrError::Config("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || Complex64::new(rng.gen_range(0.1..1.0), rng.gen_range(-2.0..2.0));
    let nf = n as f64;
    let names = [
        "J*({a},{b})",
        "J1*({a},{b})",
        "J*({a},{b1,b2})",
        "J1*({a},{b1,b2})",
        "J*({a},{b1,b2,b3})",
        "D_{0,0}({a1,a2},{b1,b2})",
        "D_{{a1},{b1}}({a2},{b2})",
        "D_{{a1},{b2}}({a2},{b1})",
        "D_{{a2},{b1}}({a1},{b2})",
        "D_{{a2},{b2}}({a1},{b1})",
        "D_{{a1,a2},{b1,b2}}(0,0)",
        "J*({a1,a2},{b1,b2})",
        "J2*({a1,a2},{b1,b2})",
        "J1*({a1,a2},{b1,b2})",
    ];
    let mut worst = vec![0.0f64; names.len()];
    let full = |a: Vec<Complex64>, b: Vec<Complex64>, tr: Truncation| -> Result<Complex64> {
        jstar(&JStarInput::new(ShiftSet::from(a), ShiftSet::from(b), n, tr)?)
    };
    for _ in 0..trials {
        let a = draw();
        let (b1, b2, b3) = (draw(), draw(), draw());
        let (a1, a2) = (draw(), draw());
        let aa = [a1, a2];
        let bb = [b1, b2];
        let mut checks: Vec<(Complex64, Complex64)> = vec![
            (full(vec![a], vec![b1], Truncation::Full)?, one_one(nf, a, b1)),
            (full(vec![a], vec![b1], Truncation::Below(1))?, logz_deriv2(a + b1)?),
            (full(vec![a], vec![b1, b2], Truncation::Full)?, one_two(nf, a, b1, b2)),
            (full(vec![a], vec![b1, b2], Truncation::Below(1))?, ZERO),
            (full(vec![a], vec![b1, b2, b3], Truncation::Full)?, one_three(nf, a, [b1, b2, b3])),
        ];
        let input = JStarInput::new(ShiftSet::from(aa.to_vec()), ShiftSet::from(bb.to_vec()), n, Truncation::Full)?;
        let tables = Tables::new(&input, true)?;
        let d00 = two_two_empty(aa, bb);
        let d11 = two_two_single(nf, aa, bb, 0, 0);
        let d12 = two_two_single(nf, aa, bb, 0, 1);
        let d21 = two_two_single(nf, aa, bb, 1, 0);
        let d22 = two_two_single(nf, aa, bb, 1, 1);
        let dff = two_two_full(nf, aa, bb);
        checks.push((tables.term(&[], &[]), d00));
        checks.push((tables.term(&[0], &[0]), d11));
        checks.push((tables.term(&[0], &[1]), d12));
        checks.push((tables.term(&[1], &[0]), d21));
        checks.push((tables.term(&[1], &[1]), d22));
        checks.push((tables.term(&[0, 1], &[0, 1]), dff));
        checks.push((jstar(&input)?, d00 + d11 + d12 + d21 + d22 + dff));
        checks.push((full(aa.to_vec(), bb.to_vec(), Truncation::Below(2))?, d00 + d11 + d12 + d21 + d22));
        checks.push((full(aa.to_vec(), bb.to_vec(), Truncation::Below(1))?, d00));
        for (w, (e, o)) in worst.iter_mut().zip(checks) {
            *w = w.max(deviation(e, o));
        }
    }
    Ok(SmallCaseReport {
        n,
        trials,
        tol,
        cases: names
            .iter()
            .zip(worst)
            .map(|(name, d)| CaseReport { name: name.to_string(), max_deviation: d, passed: d <= tol })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enum_pair_partitions;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn set(v: &[Complex64]) -> ShiftSet {
        ShiftSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn h_factor_cases() {
        let (a, b) = (c(0.3, 0.1), c(0.5, -0.4));
        let e = ShiftSet::empty();
        assert_eq!(h_factor(&e, &e, Cell::Doubleton(a, b)).unwrap(), logz_deriv2(a + b).unwrap());
        assert_eq!(h_factor(&e, &e, Cell::SingletonA(a)).unwrap(), ZERO);
        let h = h_factor(&set(&[a]), &e, Cell::SingletonB(b)).unwrap();
        assert!((h + logz_deriv(b + a).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn d_term_cases() {
        let (a, b1, b2) = (c(0.3, 0.1), c(0.5, -0.4), c(0.7, 1.1));
        let e = ShiftSet::empty();
        let n = 4;
        let v = d_term(&e, &e, &set(&[a]), &set(&[b1]), n).unwrap();
        assert!((v - logz_deriv2(a + b1).unwrap()).norm() < 1e-15);
        let v = d_term(&set(&[a]), &set(&[b1]), &e, &e, n).unwrap();
        let expected = (-4.0 * (a + b1)).exp() * z_eval(a + b1).unwrap() * z_eval(-a - b1).unwrap();
        assert!((v - expected).norm() < 1e-15 * expected.norm());
        assert_eq!(d_term(&e, &e, &set(&[a]), &set(&[b1, b2]), n).unwrap(), ZERO);
    }

    #[test]
    fn engine_matches_hand_written_cases() {
        for n in [1, 3, 10] {
            let report = verify_small_cases(n, 100, 1e-10, 7 + n as u64).unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn coincident_shifts_rejected() {
        let a = set(&[c(0.3, 0.1), c(0.3, 0.1 + TAU)]);
        let b = set(&[c(0.2, 0.0)]);
        assert!(matches!(JStarInput::new(a, b, 3, Truncation::Full), Err(NcorrError::Shift(_))));
        let a = set(&[c(0.3, 0.1)]);
        let b = set(&[c(-0.3, -0.1)]);
        assert!(matches!(JStarInput::new(a, b, 3, Truncation::Full), Err(NcorrError::Pole { .. })));
        let big = set(&(0..9).map(|k| c(0.1 * k as f64 + 0.1, 0.0)).collect::<Vec<_>>());
        assert!(matches!(
            JStarInput::new(big.clone(), big, 3, Truncation::Full),
            Err(NcorrError::Size { .. })
        ));
    }

    #[test]
    fn term_count_matches_enumeration() {
        // (1,1): 2 + 1; (1,2): 3 + 1 + 1; (2,2): 7 + 4·2 + 1
        assert_eq!(term_count(1, 1, Truncation::Full), 3);
        assert_eq!(term_count(1, 2, Truncation::Full), 5);
        assert_eq!(term_count(2, 2, Truncation::Full), 16);
        let mut brute = 0;
        for (s, t) in enum_subset_pairs(3, 4, Truncation::Full) {
            brute += enum_pair_partitions(3 - s.len(), 4 - t.len()).count();
        }
        assert_eq!(term_count(3, 4, Truncation::Full), brute);
    }

    fn shift() -> impl Strategy<Value = Complex64> {
        (0.1f64..1.0, -3.0f64..3.0).prop_map(|(re, im)| c(re, im))
    }

    fn shifts(max: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec(shift(), 1..=max)
    }

    fn well_separated(v: &[Complex64]) -> bool {
        (0..v.len()).all(|i| (i + 1..v.len()).all(|j| distance_to_pole(v[i] - v[j]) > 0.05))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fast_path_matches_definition(a in shifts(3), b in shifts(3), n in 1usize..8) {
            prop_assume!(well_separated(&a) && well_separated(&b));
            let input = JStarInput::new(ShiftSet::from(a), ShiftSet::from(b), n, Truncation::Full).unwrap();
            let x = jstar(&input).unwrap();
            let y = jstar_by_definition(&input).unwrap();
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }

        #[test]
        fn symmetric_under_permutations(mut a in shifts(3), mut b in shifts(3), n in 1usize..6) {
            prop_assume!(well_separated(&a) && well_separated(&b));
            let x = jstar(&JStarInput::new(ShiftSet::from(a.clone()), ShiftSet::from(b.clone()), n, Truncation::Full).unwrap()).unwrap();
            a.reverse();
            b.rotate_left(1);
            let y = jstar(&JStarInput::new(ShiftSet::from(a), ShiftSet::from(b), n, Truncation::Full).unwrap()).unwrap();
            prop_assert!((x - y).norm() <= 1e-11 * (1.0 + x.norm()));
        }

        #[test]
        fn truncation_above_min_size_is_full(a in shifts(3), b in shifts(3), n in 1usize..6) {
            prop_assume!(well_separated(&a) && well_separated(&b));
            let q = a.len().min(b.len()) + 1;
            let full = jstar(&JStarInput::new(ShiftSet::from(a.clone()), ShiftSet::from(b.clone()), n, Truncation::Full).unwrap()).unwrap();
            let trunc = jstar(&JStarInput::new(ShiftSet::from(a), ShiftSet::from(b), n, Truncation::Below(q)).unwrap()).unwrap();
            prop_assert_eq!(full, trunc);
        }

        #[test]
        fn q1_matches_permanent(a in shifts(4), b in shifts(4)) {
            prop_assume!(well_separated(&a) && well_separated(&b));
            let (sa, sb) = (ShiftSet::from(a), ShiftSet::from(b));
            let x = jstar(&JStarInput::new(sa.clone(), sb.clone(), 5, Truncation::Below(1)).unwrap()).unwrap();
            let y = jstar_q1_closed_form(&sa, &sb).unwrap();
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }

        #[test]
        fn strata_sum_to_total(a in shifts(3), b in shifts(3), n in 1usize..6) {
            prop_assume!(well_separated(&a) && well_separated(&b));
            let input = JStarInput::new(ShiftSet::from(a.clone()), ShiftSet::from(b.clone()), n, Truncation::Full).unwrap();
            let total = jstar(&input).unwrap();
            let parts: Complex64 = (0..=a.len().min(b.len())).map(|k| jstar_stratum(&input, k).unwrap()).sum();
            prop_assert!((total - parts).norm() <= 1e-12 * (1.0 + total.norm()));
        }
    }
}
