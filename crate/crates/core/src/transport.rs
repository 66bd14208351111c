//! One-dimensional and sliced Wasserstein distances, plus the histogram
//! divergences they are contrasted with.
//!
//! `W1` between two empirical measures on the line is the area between their
//! CDFs. For equally sized samples that area equals the mean absolute
//! difference of the sorted samples, which is also the form differentiated
//! by [`sliced_wasserstein_with_grad`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, streams};

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Domain(format!("{name} is empty")));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} contains non-finite values")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `W1` between the empirical distributions of `a` and `b`.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample("a", a)?;
    check_sample("b", b)?;
    Ok(wasserstein_1d_sorted(&sorted(a), &sorted(b)))
}

/// As [`wasserstein_1d`] for inputs already in ascending order.
pub fn wasserstein_1d_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        let n = a.len() as f64;
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    }
    cdf_area(a, b)
}

/// Integral of `|F_a - F_b|` over the merged support.
fn cdf_area(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut area = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let gap = (i as f64 / na - j as f64 / nb).abs();
        area += gap * (x - prev);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        prev = x;
    }
    area
}

/// `m` points in `R^d`, one row per vectorized field.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBatch {
    count: usize,
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalBatch {
    pub fn new(count: usize, dim: usize, points: Vec<f64>) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::Dimension(format!(
                "batch needs m >= 1 and d >= 1, got m={count}, d={dim}"
            )));
        }
        if points.len() != count * dim {
            return Err(Error::Dimension(format!(
                "{count}x{dim} batch needs {} entries, got {}",
                count * dim,
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("batch contains non-finite entries".into()));
        }
        Ok(Self { count, dim, points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Dimension("rows have different lengths".into()));
        }
        let points = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), dim, points)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        self.points
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(x, w)| x * w).sum())
            .collect()
    }
}

/// Unit vectors on `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    count: usize,
    dim: usize,
    vectors: Vec<f64>,
    seed: u64,
}

impl ProjectionSet {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Same directions in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.count];
        if order.len() != self.count || order.iter().any(|&i| i >= self.count || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Dimension("order is not a permutation of the projections".into()));
        }
        let vectors = order.iter().flat_map(|&i| self.vector(i).iter().copied()).collect();
        Ok(Self {
            vectors,
            ..self.clone()
        })
    }
}

/// `count` directions drawn uniformly from the unit sphere in `R^dim`
/// (normalized standard normal vectors).
pub fn sample_projections(dim: usize, count: usize, seed: u64) -> Result<ProjectionSet> {
    if dim == 0 || count == 0 {
        return Err(Error::Domain(format!(
            "projection set needs d >= 1 and N >= 1, got d={dim}, N={count}"
        )));
    }
    let mut r = rng::stream(seed, streams::PROJECTIONS);
    let mut vectors = Vec::with_capacity(dim * count);
    let mut v = vec![0.0; dim];
    for _ in 0..count {
        let norm = loop {
            rng::fill_standard_normal(&mut r, &mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                break norm;
            }
        };
        vectors.extend(v.iter().map(|x| x / norm));
    }
    Ok(ProjectionSet {
        count,
        dim,
        vectors,
        seed,
    })
}

fn check_dims(a: &EmpiricalBatch, b: &EmpiricalBatch, proj: &ProjectionSet) -> Result<()> {
    if a.dim != b.dim || a.dim != proj.dim {
        return Err(Error::Dimension(format!(
            "dimension mismatch: A has d={}, B has d={}, projections have d={}",
            a.dim, b.dim, proj.dim
        )));
    }
    Ok(())
}

/// Mean over projections of `W1` between the projected point sets.
pub fn sliced_wasserstein(a: &EmpiricalBatch, b: &EmpiricalBatch, proj: &ProjectionSet) -> Result<f64> {
    check_dims(a, b, proj)?;
    let mut total = 0.0;
    for i in 0..proj.count {
        let v = proj.vector(i);
        total += wasserstein_1d_sorted(&sorted(&a.project(v)), &sorted(&b.project(v)));
    }
    Ok(total / proj.count as f64)
}

/// Sliced `W1` together with its gradient with respect to the points of
/// `a` (row-major, same layout as `a.points()`). Both batches must hold the
/// same number of points.
///
/// Each projection contributes `sign(a_(k) - b_(k)) / m` to the k-th ranked
/// point of `a`; ties are broken by the stable sort order.
pub fn sliced_wasserstein_with_grad(
    a: &EmpiricalBatch,
    b: &EmpiricalBatch,
    proj: &ProjectionSet,
) -> Result<(f64, Vec<f64>)> {
    check_dims(a, b, proj)?;
    if a.count != b.count {
        return Err(Error::Dimension(format!(
            "gradient path needs equal batch sizes, got {} and {}",
            a.count, b.count
        )));
    }
    let m = a.count as f64;
    let n = proj.count as f64;
    let mut grad = vec![0.0; a.points.len()];
    let mut total = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(a.count);
    for i in 0..proj.count {
        let v = proj.vector(i);
        let pa = a.project(v);
        let pb = sorted(&b.project(v));
        order.clear();
        order.extend(0..a.count);
        order.sort_by(|&x, &y| pa[x].total_cmp(&pa[y]));
        let mut w = 0.0;
        for (rank, &row) in order.iter().enumerate() {
            let diff = pa[row] - pb[rank];
            w += diff.abs();
            let s = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            if s != 0.0 {
                let coef = s / (m * n);
                let g = &mut grad[row * a.dim..(row + 1) * a.dim];
                for (gk, vk) in g.iter_mut().zip(v) {
                    *gk += coef * vk;
                }
            }
        }
        total += w / m;
    }
    Ok((total / n, grad))
}

/// Normalized histogram of `xs` on `bins` equal bins over `[lo, hi]`.
pub fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}] / {bins} bins")));
    }
    check_sample("histogram input", xs)?;
    let mut counts = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in xs {
        let k = (((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1.0;
    }
    let n = xs.len() as f64;
    Ok(counts.into_iter().map(|c| c / n).collect())
}

/// Floor applied to `q` where `p > 0`.
pub const KL_FLOOR: f64 = 1e-12;

pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "histograms have {} and {} bins",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(KL_FLOOR)).ln())
        .sum::<f64>()
        .max(0.0))
}

pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "histograms have {} and {} bins",
            p.len(),
            q.len()
        )));
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(0.5 * kl_divergence(p, &m)? + 0.5 * kl_divergence(q, &m)?)
}

/// Bins used when comparing two samples by KL/JS.
pub const DIVERGENCE_BINS: usize = 128;

/// Histograms of two samples over their pooled range.
pub fn paired_histograms(a: &[f64], b: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sample("a", a)?;
    check_sample("b", b)?;
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    Ok((histogram(a, lo, hi, bins)?, histogram(b, lo, hi, bins)?))
}

/// Two-component Gaussian mixture: a modal bulk plus a tail bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailMixture {
    pub mode_mean: f64,
    pub mode_std: f64,
    pub tail_weight: f64,
    pub tail_mean: f64,
    pub tail_std: f64,
}

impl TailMixture {
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rand::Rng::gen(&mut r);
            let z = rng::standard_normal(&mut r);
            out.push(if u < self.tail_weight {
                self.tail_mean + self.tail_std * z
            } else {
                self.mode_mean + self.mode_std * z
            });
        }
        out
    }
}

/// Target / prediction triple whose ranking separates W1 from KL and JS:
/// `P1` keeps the tail but misplaces the mode, `P2` nails the mode but
/// drops most of the tail.
pub mod fixture {
    use super::TailMixture;

    pub const SAMPLES: usize = 50_000;

    pub const TARGET: TailMixture = TailMixture {
        mode_mean: 0.0,
        mode_std: 1.0,
        tail_weight: 0.15,
        tail_mean: 6.0,
        tail_std: 1.5,
    };

    pub const P1: TailMixture = TailMixture {
        mode_mean: 0.6,
        mode_std: 1.4,
        tail_weight: 0.15,
        tail_mean: 6.0,
        tail_std: 1.5,
    };

    pub const P2: TailMixture = TailMixture {
        mode_mean: 0.0,
        mode_std: 1.0,
        tail_weight: 0.05,
        tail_mean: 6.0,
        tail_std: 1.5,
    };

    pub const SEEDS: [u64; 3] = [101, 202, 303];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub metric: &'static str,
    pub p1_vs_t: f64,
    pub p2_vs_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailDemoReport {
    pub rows: Vec<DistanceRow>,
}

impl TailDemoReport {
    pub fn row(&self, metric: &str) -> Option<&DistanceRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Wasserstein prefers `P1` while both divergences prefer `P2`.
    pub fn reproduces_ordering(&self) -> bool {
        let prefers_p1 = |m: &str| self.row(m).is_some_and(|r| r.p1_vs_t < r.p2_vs_t);
        let prefers_p2 = |m: &str| self.row(m).is_some_and(|r| r.p1_vs_t > r.p2_vs_t);
        prefers_p1("wasserstein") && prefers_p2("kl") && prefers_p2("js")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,p1_vs_t,p2_vs_t\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.6},{:.6}\n", r.metric, r.p1_vs_t, r.p2_vs_t));
        }
        s
    }
}

/// Scores `p1` and `p2` against `target` with W1, KL and JS.
pub fn compare_to_target(target: &[f64], p1: &[f64], p2: &[f64]) -> Result<TailDemoReport> {
    let score = |p: &[f64]| -> Result<(f64, f64, f64)> {
        let (hp, ht) = paired_histograms(p, target, DIVERGENCE_BINS)?;
        Ok((
            wasserstein_1d(p, target)?,
            kl_divergence(&hp, &ht)?,
            js_divergence(&hp, &ht)?,
        ))
    };
    let (w1, kl1, js1) = score(p1)?;
    let (w2, kl2, js2) = score(p2)?;
    Ok(TailDemoReport {
        rows: vec![
            DistanceRow { metric: "wasserstein", p1_vs_t: w1, p2_vs_t: w2 },
            DistanceRow { metric: "kl", p1_vs_t: kl1, p2_vs_t: kl2 },
            DistanceRow { metric: "js", p1_vs_t: js1, p2_vs_t: js2 },
        ],
    })
}

pub fn tail_sensitivity_demo() -> TailDemoReport {
    let [st, s1, s2] = fixture::SEEDS;
    let t = fixture::TARGET.sample(fixture::SAMPLES, st);
    let p1 = fixture::P1.sample(fixture::SAMPLES, s1);
    let p2 = fixture::P2.sample(fixture::SAMPLES, s2);
    compare_to_target(&t, &p1, &p2).expect("fixture samples are finite and nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn w1_examples() {
        assert_eq!(wasserstein_1d(&[2.5], &[2.5]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[3.0]).unwrap(), 3.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!((wasserstein_1d(&[0.0, 1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w1_errors() {
        assert!(matches!(wasserstein_1d(&[], &[1.0]), Err(Error::Domain(_))));
        assert!(matches!(wasserstein_1d(&[f64::NAN], &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn projections_in_one_dimension_are_signs() {
        let p = sample_projections(1, 50, 9).unwrap();
        for i in 0..p.count() {
            assert_eq!(p.vector(i)[0].abs(), 1.0);
        }
    }

    #[test]
    fn projections_are_unit_norm_and_deterministic() {
        let p = sample_projections(37, 20, 4).unwrap();
        for i in 0..20 {
            let n: f64 = p.vector(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(p, sample_projections(37, 20, 4).unwrap());
    }

    #[test]
    fn projected_coordinates_are_centered() {
        // <v, mu> over 10k directions has mean 0 and variance |mu|^2 / d.
        let d = 5;
        let mu = [1.0, -2.0, 0.5, 3.0, 1.5];
        let p = sample_projections(d, 10_000, 21).unwrap();
        let xs: Vec<f64> = (0..p.count())
            .map(|i| p.vector(i).iter().zip(&mu).map(|(a, b)| a * b).sum())
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let norm2: f64 = mu.iter().map(|x| x * x).sum();
        let se = (norm2 / d as f64 / xs.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn sliced_is_zero_for_permuted_copy() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0], vec![4.0, 4.0, 0.0]];
        let perm = vec![rows[2].clone(), rows[0].clone(), rows[1].clone()];
        let a = EmpiricalBatch::from_rows(&rows).unwrap();
        let b = EmpiricalBatch::from_rows(&perm).unwrap();
        let p = sample_projections(3, 25, 1).unwrap();
        assert_eq!(sliced_wasserstein(&a, &b, &p).unwrap(), 0.0);
        assert_eq!(sliced_wasserstein(&a, &a, &p).unwrap(), 0.0);
    }

    #[test]
    fn sliced_dimension_mismatch() {
        let a = EmpiricalBatch::new(2, 3, vec![0.0; 6]).unwrap();
        let b = EmpiricalBatch::new(2, 2, vec![0.0; 4]).unwrap();
        let p = sample_projections(3, 5, 1).unwrap();
        assert!(matches!(sliced_wasserstein(&a, &b, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn sliced_gradient_matches_value_and_finite_differences() {
        let mut r = rng::stream(8, 0);
        let a = EmpiricalBatch::new(6, 4, rng::standard_normal_vec(&mut r, 24)).unwrap();
        let b = EmpiricalBatch::new(6, 4, rng::standard_normal_vec(&mut r, 24)).unwrap();
        let p = sample_projections(4, 30, 2).unwrap();
        let (v, g) = sliced_wasserstein_with_grad(&a, &b, &p).unwrap();
        assert!((v - sliced_wasserstein(&a, &b, &p).unwrap()).abs() < 1e-13);
        let h = 1e-6;
        for k in 0..24 {
            let mut plus = a.points().to_vec();
            plus[k] += h;
            let mut minus = a.points().to_vec();
            minus[k] -= h;
            let fp = sliced_wasserstein(&EmpiricalBatch::new(6, 4, plus).unwrap(), &b, &p).unwrap();
            let fm = sliced_wasserstein(&EmpiricalBatch::new(6, 4, minus).unwrap(), &b, &p).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "k={k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn divergence_examples() {
        let p = [0.25, 0.25, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(kl_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Dimension(_))));
        assert!(matches!(js_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn js_is_bounded_by_ln2() {
        let js = js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((js - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn replacing_p2_by_target_makes_every_metric_prefer_it() {
        let [st, s1, _] = fixture::SEEDS;
        let t = fixture::TARGET.sample(20_000, st);
        let p1 = fixture::P1.sample(20_000, s1);
        let r = compare_to_target(&t, &p1, &t).unwrap();
        for row in &r.rows {
            assert_eq!(row.p2_vs_t, 0.0, "{}", row.metric);
            assert!(row.p1_vs_t > 0.0);
        }
    }

    #[test]
    fn demo_csv_layout() {
        let csv = tail_sensitivity_demo().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,p1_vs_t,p2_vs_t");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("wasserstein,"));
    }

    fn normalize_hist(v: &[f64]) -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn w1_symmetry_and_triangle(
            a in proptest::collection::vec(-10.0f64..10.0, 1..20),
            b in proptest::collection::vec(-10.0f64..10.0, 1..20),
            c in proptest::collection::vec(-10.0f64..10.0, 1..20),
        ) {
            let ab = wasserstein_1d(&a, &b).unwrap();
            let ba = wasserstein_1d(&b, &a).unwrap();
            let bc = wasserstein_1d(&b, &c).unwrap();
            let ac = wasserstein_1d(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn w1_translation_and_scaling(
            a in proptest::collection::vec(-10.0f64..10.0, 1..16),
            b in proptest::collection::vec(-10.0f64..10.0, 1..16),
            shift in -100.0f64..100.0,
            k in prop::sample::select(vec![-4.0f64, -2.0, -0.5, 0.25, 2.0, 8.0]),
        ) {
            let w = wasserstein_1d(&a, &b).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
            prop_assert!((wasserstein_1d(&sa, &sb).unwrap() - w).abs() <= 1e-9 * (1.0 + shift.abs()));
            // powers of two keep the scaled values exact
            let ka: Vec<f64> = a.iter().map(|x| x * k).collect();
            let kb: Vec<f64> = b.iter().map(|x| x * k).collect();
            prop_assert!((wasserstein_1d(&ka, &kb).unwrap() - k.abs() * w).abs() <= 1e-12 * (1.0 + w));
        }

        #[test]
        fn js_symmetric_and_bounded(
            p in proptest::collection::vec(0.0f64..1.0, 8),
            q in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            prop_assume!(p.iter().sum::<f64>() > 1e-3 && q.iter().sum::<f64>() > 1e-3);
            let (p, q) = (normalize_hist(&p), normalize_hist(&q));
            let a = js_divergence(&p, &q).unwrap();
            let b = js_divergence(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!(a <= 2f64.ln() + 1e-12);
        }

        #[test]
        fn sliced_is_nonnegative_and_symmetric(seed in 0u64..1000) {
            let mut r = rng::stream(seed, 5);
            let a = EmpiricalBatch::new(5, 3, rng::standard_normal_vec(&mut r, 15)).unwrap();
            let b = EmpiricalBatch::new(5, 3, rng::standard_normal_vec(&mut r, 15)).unwrap();
            let p = sample_projections(3, 10, seed).unwrap();
            let ab = sliced_wasserstein(&a, &b, &p).unwrap();
            let ba = sliced_wasserstein(&b, &a, &p).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
