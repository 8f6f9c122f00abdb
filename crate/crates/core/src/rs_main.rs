//! Closed-form main terms of the correlation sum and the leading asymptotics of
//! the individual contour terms.

use crate::combinatorics::{enum_pair_systems, enum_partition3, enum_permutations};
use crate::contour::BigF;
use crate::error::{NcorrError, Result};
use crate::quadrature::{compensated_sum, TanhSinhRule, BASE_STEP};
use crate::test_functions::{bump, kappa, PhiSpec};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// `∫_0^s ξ ψ(ξ/s)² dξ`: one matched pair of the product `Φ`.
fn pair_moment(width: f64) -> f64 {
    let rule = TanhSinhRule::with_step(0.0, width, BASE_STEP);
    rule.integrate(|x| x * bump(x / width).powi(2))
}

fn check_pairing(n: usize, k: &[usize], l: &[usize], sigma: &[usize]) -> Result<()> {
    if k.len() != l.len() || sigma.len() != k.len() || 2 * k.len() > n {
        return Err(NcorrError::Config("need |K| = |L| = |σ| and 2|K| <= n".into()));
    }
    let mut seen = vec![false; n];
    for &i in k.iter().chain(l) {
        if i >= n || seen[i] {
            return Err(NcorrError::Config(format!("index {i} repeated or out of range")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// `∫_{ξ_k > 0} ξ_{k_1}⋯ξ_{k_K} Φ(Σ_j ξ_{k_j} e_{k_j, ℓ_σ(j)}) dξ` for product `Φ`,
/// as a product of one-dimensional moments.
pub fn rs_integral(k: &[usize], l: &[usize], sigma: &[usize], phi: &PhiSpec) -> Result<f64> {
    check_pairing(phi.n, k, l, sigma)?;
    let m = phi.n - 2 * k.len();
    Ok(phi.amplitude * bump(0.0).powi(m as i32) * pair_moment(phi.width).powi(k.len() as i32))
}

/// The same orthant integral by tensor quadrature of `Φ` itself.
pub fn rs_integral_direct(k: &[usize], l: &[usize], sigma: &[usize], phi: &PhiSpec) -> Result<f64> {
    check_pairing(phi.n, k, l, sigma)?;
    let rule = TanhSinhRule::with_step(0.0, phi.width, BASE_STEP);
    let dim = k.len();
    let mut idx = vec![0usize; dim];
    let mut terms = Vec::new();
    let mut arg = vec![0.0; phi.n];
    loop {
        let mut weight = 1.0;
        arg.iter_mut().for_each(|a| *a = 0.0);
        for (j, &i) in idx.iter().enumerate() {
            let xi = rule.nodes[i];
            weight *= rule.weights[i] * xi;
            arg[k[j]] += xi;
            arg[l[sigma[j]]] -= xi;
        }
        terms.push(weight * phi.phi_eval(&arg));
        // odometer over the tensor grid
        let mut j = 0;
        while j < dim {
            idx[j] += 1;
            if idx[j] < rule.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == dim {
            break;
        }
    }
    Ok(compensated_sum(terms))
}

/// `Σ_{K+L+M, |K|=|L|} Σ_σ ∫ ξ⋯ Φ(…) dξ`, the bracket of the main term.
pub fn rs_bracket(phi: &PhiSpec) -> Result<f64> {
    let mut terms = Vec::new();
    for p in enum_partition3(phi.n, true)? {
        for sigma in enum_permutations(p.k.len())? {
            terms.push(rs_integral(&p.k, &p.l, &sigma, phi)?);
        }
    }
    Ok(compensated_sum(terms))
}

/// `κ(h) (N𝒯/2π) Σ_{K,L,σ} ∫ ξ⋯ Φ(…) dξ`.
pub fn rs_main(big_f: &BigF) -> Result<f64> {
    let pre = kappa(&big_f.weights) * big_f.n_matrix as f64 * big_f.t_weight / TAU;
    Ok(pre * rs_bracket(&big_f.phi)?)
}

/// `Φ(0) + Σ_{pair systems} ∫_{ℝ^r} |v_1|⋯|v_r| Φ(Σ_t v_t e_{i(t),j(t)}) dv`, by direct quadrature.
pub fn sarnak_bracket(phi: &PhiSpec) -> Result<f64> {
    let s = phi.width;
    let halves = [TanhSinhRule::with_step(-s, 0.0, BASE_STEP), TanhSinhRule::with_step(0.0, s, BASE_STEP)];
    let nodes: Vec<(f64, f64)> = halves
        .iter()
        .flat_map(|r| r.nodes.iter().copied().zip(r.weights.iter().copied()))
        .collect();
    let mut terms = vec![phi.phi_eval(&vec![0.0; phi.n])];
    for system in enum_pair_systems(phi.n)? {
        let r = system.r();
        let mut idx = vec![0usize; r];
        let mut arg = vec![0.0; phi.n];
        loop {
            let mut weight = 1.0;
            arg.iter_mut().for_each(|a| *a = 0.0);
            for (t, &(i, j)) in system.pairs.iter().enumerate() {
                let (v, w) = nodes[idx[t]];
                weight *= w * v.abs();
                arg[i] += v;
                arg[j] -= v;
            }
            terms.push(weight * phi.phi_eval(&arg));
            let mut t = 0;
            while t < r {
                idx[t] += 1;
                if idx[t] < nodes.len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == r {
                break;
            }
        }
    }
    Ok(compensated_sum(terms))
}

/// `κ(h) (𝒯·logscale/2π) [Φ(0) + Σ_{pair systems} ∫ |v| Φ dv]`, with `logscale = N`
/// for the matrix comparison and `log 𝒯` on the zeta side.
pub fn rs_sarnak_form(big_f: &BigF, logscale: f64) -> Result<f64> {
    let pre = kappa(&big_f.weights) * big_f.t_weight * logscale / TAU;
    Ok(pre * sarnak_bracket(&big_f.phi)?)
}

/// Leading-order value of the contour term `I(K, L, σ)`:
/// `(N𝒯) N^{2|K|-n} (2πi)^n (-1)^{n-|K|} (κ/2π) ∫ ξ⋯ Φ(…) dξ`.
pub fn asymptotic_i(big_f: &BigF, k: &[usize], l: &[usize], sigma: &[usize]) -> Result<Complex64> {
    let n = big_f.n();
    let nm = big_f.n_matrix as f64;
    let kk = k.len();
    let sign = if (n - kk) % 2 == 0 { 1.0 } else { -1.0 };
    let pow = (2 * kk) as i32 - n as i32;
    let scale = nm * big_f.t_weight * nm.powi(pow) * sign * kappa(&big_f.weights) / TAU;
    Ok((Complex64::i() * TAU).powi(n as i32) * scale * rs_integral(k, l, sigma, &big_f.phi)?)
}

/// Sign and power of `N` left after multiplying the contour prefactor
/// `(2πi)^{-n}(-1)^{|L|+|M|}N^{|M|}` by the asymptotic factor
/// `N^{2|K|-n+1}(2πi)^n(-1)^{n-|K|}`, beyond the common `N`.
pub fn assembled_prefactor(n: usize, k: usize) -> (i32, i32) {
    let (l, m) = (k, n - 2 * k);
    let sign_exp = l + m + (n - k);
    let sign = if sign_exp % 2 == 0 { 1 } else { -1 };
    let power = m as i32 + 2 * k as i32 - n as i32;
    (sign, power)
}
