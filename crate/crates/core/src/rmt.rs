//! Haar-random unitary matrices, their eigenangles, and goodness-of-fit checks
//! against the Weyl density.

use crate::error::{NcorrError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Sorted eigenangles in `[0, 2π)` of one sampled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenangleSample {
    pub n: usize,
    pub seed: u64,
    pub angles: Vec<f64>,
}

/// Eigenangles extended periodically, `θ_{r+kN} = θ_r + 2πk` for `|k| <= k_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct WrappedAngles {
    pub base: EigenangleSample,
    pub k_range: usize,
    pub angles: Vec<f64>,
}

/// splitmix64 finalizer, used to derive one stream seed per matrix.
pub fn matrix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Haar-distributed `U(N)` matrix: QR of a complex Ginibre matrix with the
/// diagonal of `R` rotated onto the positive reals.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> Result<DMatrix<Complex64>> {
    if n == 0 {
        return Err(NcorrError::Size { got: 0, range: ">= 1" });
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(NcorrError::Numerical(format!("QR diagonal {j} has modulus {norm:e}")));
        }
        let phase = d / norm;
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    Ok(q)
}

fn canonical_angle(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    let a = if a < 0.0 { a + TAU } else { a };
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Eigenangles of a unitary matrix, sorted, in `[0, 2π)`.
pub fn unitary_eigenangles(u: DMatrix<Complex64>) -> Result<Vec<f64>> {
    let n = u.nrows();
    let mut angles = if n == 1 {
        vec![canonical_angle(u[(0, 0)])]
    } else {
        let schur = u
            .try_schur(1e-15, 100_000)
            .ok_or_else(|| NcorrError::Numerical("Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let z = t[(j, j)];
            if (z.norm() - 1.0).abs() > 1e-8 {
                return Err(NcorrError::Numerical(format!("eigenvalue modulus {} off the unit circle", z.norm())));
            }
            out.push(canonical_angle(z));
        }
        out
    };
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// One Haar sample of `U(N)`, deterministic in `seed`.
pub fn sample_eigenangles(n: usize, seed: u64) -> Result<EigenangleSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(n, &mut rng)?;
    Ok(EigenangleSample { n, seed, angles: unitary_eigenangles(u)? })
}

/// `count` independent samples; matrix `i` uses seed `matrix_seed(base_seed, i)`.
pub fn sample_many(n: usize, count: usize, base_seed: u64) -> Result<Vec<EigenangleSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_eigenangles(n, matrix_seed(base_seed, i)))
        .collect()
}

/// `∏_{j<k} |e^{iθ_j} − e^{iθ_k}|²`, unnormalized.
pub fn weyl_density(angles: &[f64]) -> f64 {
    let mut p = 1.0;
    for (j, &a) in angles.iter().enumerate() {
        for &b in &angles[j + 1..] {
            let s = (0.5 * (a - b)).sin();
            p *= 4.0 * s * s;
        }
    }
    p
}

pub fn wrap_angles(sample: &EigenangleSample, k_range: usize) -> WrappedAngles {
    let k = k_range as i64;
    let mut angles = Vec::with_capacity((2 * k_range + 1) * sample.n);
    for shift in -k..=k {
        let off = TAU * shift as f64;
        angles.extend(sample.angles.iter().map(|a| a + off));
    }
    WrappedAngles { base: sample.clone(), k_range, angles }
}

const CACHE_MAGIC: &str = "NCORR-SAMPLES v1";

/// Text cache: a header line `NCORR-SAMPLES v1 N=<N>`, then one line per sample
/// holding the seed followed by the `N` angles in `%.17e`.
pub fn write_samples(path: &Path, n: usize, samples: &[EigenangleSample]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CACHE_MAGIC} N={n}")?;
    for s in samples {
        if s.n != n || s.angles.len() != n {
            return Err(NcorrError::Size { got: s.angles.len(), range: "sample size must match the cache header" });
        }
        write!(w, "{}", s.seed)?;
        for a in &s.angles {
            write!(w, " {a:.17e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<(usize, Vec<EigenangleSample>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or(NcorrError::Parse { line: 1, msg: "empty cache file".into() })??;
    let n = header
        .strip_prefix(CACHE_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("N="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or(NcorrError::Parse { line: 1, msg: format!("bad header {header:?}") })?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let seed = fields
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or(NcorrError::Parse { line: lineno, msg: "bad seed".into() })?;
        let angles = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| NcorrError::Parse { line: lineno, msg: e.to_string() })?;
        if angles.len() != n {
            return Err(NcorrError::Parse { line: lineno, msg: format!("expected {n} angles, got {}", angles.len()) });
        }
        out.push(EigenangleSample { n, seed, angles });
    }
    Ok((n, out))
}

/// Outcome of a goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct FitTest {
    pub statistic: f64,
    pub p_value: f64,
}

impl FitTest {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Kolmogorov–Smirnov test of values against the uniform law on `[0, 2π)`.
pub fn ks_uniform(values: &[f64]) -> FitTest {
    let mut v: Vec<f64> = values.iter().map(|x| x / TAU).collect();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / m - x).max(x - i as f64 / m))
        .fold(0.0, f64::max);
    let sq = m.sqrt();
    FitTest { statistic: d, p_value: kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d) }
}

/// Probability that the sorted eigenangle pair of a `U(2)` sample lands in cell
/// `(i, j)`, `i <= j`, of a `bins × bins` grid.
pub fn pair_cell_probability(i: usize, j: usize, bins: usize) -> f64 {
    let b = TAU / bins as f64;
    let d = (i as f64 - j as f64) * b;
    let labelled = (2.0 * b * b - 4.0 * d.cos() * (1.0 - b.cos())) / (8.0 * PI * PI);
    if i == j {
        labelled
    } else {
        2.0 * labelled
    }
}

/// χ² test of `U(2)` samples against the Weyl density on the unordered `bins × bins` grid.
pub fn chi2_pair_density(samples: &[EigenangleSample], bins: usize) -> Result<FitTest> {
    let idx = |i: usize, j: usize| i * bins + j;
    let mut counts = vec![0u64; bins * bins];
    for s in samples {
        if s.angles.len() != 2 {
            return Err(NcorrError::Size { got: s.angles.len(), range: "2" });
        }
        let cell = |a: f64| ((a / TAU * bins as f64) as usize).min(bins - 1);
        let (i, j) = (cell(s.angles[0]), cell(s.angles[1]));
        counts[idx(i.min(j), i.max(j))] += 1;
    }
    let total = samples.len() as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    for i in 0..bins {
        for j in i..bins {
            let e = total * pair_cell_probability(i, j, bins);
            let o = counts[idx(i, j)] as f64;
            stat += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    let dist = ChiSquared::new((cells - 1) as f64).map_err(|e| NcorrError::Numerical(e.to_string()))?;
    Ok(FitTest { statistic: stat, p_value: dist.sf(stat) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(6, &mut rng).unwrap();
        let prod = u.adjoint() * &u;
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-13);
            }
        }
        let a = sample_eigenangles(7, 11).unwrap();
        let b = sample_eigenangles(7, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.angles, sample_eigenangles(7, 12).unwrap().angles);
        assert_eq!(a.angles.len(), 7);
        assert!(a.angles.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.angles.iter().all(|&x| (0.0..TAU).contains(&x)));
    }

    #[test]
    fn eigenangles_match_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(5, &mut rng).unwrap();
        let tr = u.trace();
        let angles = unitary_eigenangles(u).unwrap();
        let s: Complex64 = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).sum();
        assert!((s - tr).norm() < 1e-12);
    }

    #[test]
    fn weyl_density_values() {
        assert_eq!(weyl_density(&[1.0, 1.0]), 0.0);
        assert!((weyl_density(&[0.0, PI]) - 4.0).abs() < 1e-14);
        assert!((weyl_density(&[0.0, TAU / 3.0, 2.0 * TAU / 3.0]) - 27.0).abs() < 1e-12);
    }

    #[test]
    fn weyl_density_normalization_two() {
        // periodic trapezoid is exact for this trigonometric polynomial
        let m = 64;
        let h = TAU / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += weyl_density(&[i as f64 * h, j as f64 * h]);
            }
        }
        let mean = s * h * h / (TAU * TAU);
        assert!((mean - 2.0).abs() < 1e-8);
    }

    #[test]
    fn wrap_counts_and_copies() {
        let s = EigenangleSample { n: 2, seed: 0, angles: vec![0.5, 2.0] };
        assert_eq!(wrap_angles(&s, 0).angles, s.angles);
        let w = wrap_angles(&s, 1);
        assert_eq!(w.angles, vec![0.5 - TAU, 2.0 - TAU, 0.5, 2.0, 0.5 + TAU, 2.0 + TAU]);
        for k in 0..4 {
            assert_eq!(wrap_angles(&s, k).angles.len(), (2 * k + 1) * 2);
        }
    }

    #[test]
    fn cell_probabilities_sum_to_one() {
        let mut total = 0.0;
        for i in 0..20 {
            for j in i..20 {
                total += pair_cell_probability(i, j, 20);
            }
        }
        assert!((total - 1.0).abs() < 1e-13);
        // midpoint-rule oracle for one off-diagonal cell
        let b = TAU / 20.0;
        let m = 200;
        let hh = b / m as f64;
        let mut s = 0.0;
        for p in 0..m {
            for q in 0..m {
                let x = 3.0 * b + (p as f64 + 0.5) * hh;
                let y = 7.0 * b + (q as f64 + 0.5) * hh;
                s += weyl_density(&[x, y]);
            }
        }
        let oracle = 2.0 * s * hh * hh / (8.0 * PI * PI);
        assert!((pair_cell_probability(3, 7, 20) - oracle).abs() < 1e-6 * oracle);
    }

    #[test]
    fn mean_spacing() {
        let n = 8;
        let samples = sample_many(n, 2000, 1).unwrap();
        let mut total = 0.0;
        for s in &samples {
            let a = &s.angles;
            let gaps: f64 = a.windows(2).map(|w| w[1] - w[0]).sum::<f64>() + (a[0] + TAU - a[n - 1]);
            total += gaps / n as f64;
        }
        let mean = total / samples.len() as f64;
        assert!((mean - TAU / n as f64).abs() < 0.02 * TAU / n as f64);
    }

    #[test]
    fn ks_detects_nonuniform() {
        let good: Vec<f64> = sample_many(1, 4000, 9).unwrap().iter().map(|s| s.angles[0]).collect();
        assert!(ks_uniform(&good).passes(1e-3));
        let bad: Vec<f64> = good.iter().map(|x| x * x / TAU).collect();
        assert!(!ks_uniform(&bad).passes(1e-3));
    }

    #[test]
    fn chi2_detects_phase_bias() {
        // columns rotated by a data-dependent phase, as a LAPACK-style
        // Householder QR without the diagonal fix would leave them
        let mut samples = Vec::new();
        for i in 0..20000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(matrix_seed(77, i));
            let g = DMatrix::from_fn(2, 2, |_, _| {
                Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
            });
            let mut q = g.clone().qr().q();
            for j in 0..2 {
                let p = g[(j, j)].conj() / g[(j, j)].norm();
                q.column_mut(j).iter_mut().for_each(|x| *x *= -p);
            }
            samples.push(EigenangleSample { n: 2, seed: i, angles: unitary_eigenangles(q).unwrap() });
        }
        assert!(!chi2_pair_density(&samples, 20).unwrap().passes(1e-3));
        let good = sample_many(2, 20000, 77).unwrap();
        assert!(chi2_pair_density(&good, 20).unwrap().passes(1e-3));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let samples = sample_many(4, 5, 2).unwrap();
        write_samples(&path, 4, &samples).unwrap();
        let (n, back) = read_samples(&path).unwrap();
        assert_eq!(n, 4);
        assert_eq!(back, samples);
        fs::write(&path, "NCORR-SAMPLES v1 N=2\n1 0.5\n").unwrap();
        assert!(matches!(read_samples(&path), Err(NcorrError::Parse { line: 2, .. })));
    }
}
