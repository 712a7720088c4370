//! Regular hypercube partition of `[0, 1]^d` into `m^d` bins of side `1/m`.
//!
//! Bins are addressed by a [`BinIndex`] `k = (k_1, …, k_d)` and stored in
//! lexicographic order, last axis fastest. The last bin on each axis is
//! right-closed so that every point of the cube has a bin.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ArmPoint, Environment};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Default cap on the number of bins a table may hold.
pub const DEFAULT_BIN_BUDGET: usize = 1_000_000;

/// Default Gauss–Legendre order per axis.
pub const DEFAULT_QUADRATURE_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinIndex {
    k: Vec<usize>,
    m: usize,
}

impl BinIndex {
    pub fn new(k: Vec<usize>, m: usize) -> Result<Self> {
        if m == 0 || k.is_empty() {
            return Err(Error::InvalidParameter("bin index needs m ≥ 1 and d ≥ 1".into()));
        }
        if let Some(&bad) = k.iter().find(|&&ki| ki >= m) {
            return Err(Error::InvalidParameter(format!("bin coordinate {bad} ≥ m = {m}")));
        }
        Ok(Self { k, m })
    }

    /// Inverse of [`BinIndex::linear`].
    pub fn from_linear(mut linear: usize, m: usize, d: usize) -> Self {
        let mut k = vec![0; d];
        for slot in k.iter_mut().rev() {
            *slot = linear % m;
            linear /= m;
        }
        debug_assert_eq!(linear, 0, "linear index out of range");
        Self { k, m }
    }

    pub fn coords(&self) -> &[usize] {
        &self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    /// Position in lexicographic order.
    pub fn linear(&self) -> usize {
        self.k.iter().fold(0, |acc, &ki| acc * self.m + ki)
    }

    /// Corners `(k/m, (k+1)/m)` of the bin.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.m as f64;
        let lo = self.k.iter().map(|&ki| ki as f64 / m).collect();
        let hi = self.k.iter().map(|&ki| (ki + 1) as f64 / m).collect();
        (lo, hi)
    }
}

/// Total number of bins `m^d`, or `None` on overflow.
pub fn bin_count(m: usize, d: usize) -> Option<usize> {
    u32::try_from(d).ok().and_then(|d| m.checked_pow(d))
}

#[inline]
fn axis_bin(x: f64, m: usize) -> usize {
    ((m as f64 * x).floor() as usize).min(m - 1)
}

/// Bin containing `x`: `k_i = floor(m x_i)`, with `x_i = 1` sent to `m - 1`.
pub fn bin_index(x: &ArmPoint, m: usize) -> BinIndex {
    assert!(m >= 1, "m must be at least 1");
    BinIndex {
        k: x.coords().iter().map(|&xi| axis_bin(xi, m)).collect(),
        m,
    }
}

/// Uniform point of bin `k`: each coordinate independently uniform on
/// `[k_i/m, (k_i+1)/m)`.
pub fn sample_in_bin<R: Rng + ?Sized>(k: &BinIndex, rng: &mut R) -> ArmPoint {
    let mut out = vec![0.0; k.dim()];
    for (slot, &ki) in out.iter_mut().zip(&k.k) {
        *slot = sample_axis(ki, k.m, rng);
    }
    ArmPoint::new(out).expect("in-bin samples lie in the cube")
}

/// [`sample_in_bin`] for the bin at lexicographic position `linear`, written
/// into `out` without allocating.
#[inline]
pub fn sample_in_linear_bin<R: Rng + ?Sized>(linear: usize, m: usize, out: &mut [f64], rng: &mut R) {
    let mut rest = linear;
    // fill the last axis first so the draws match `sample_in_bin` order
    let mut digits = [0usize; 16];
    let d = out.len();
    if d <= digits.len() {
        for a in (0..d).rev() {
            digits[a] = rest % m;
            rest /= m;
        }
        for a in 0..d {
            out[a] = sample_axis(digits[a], m, rng);
        }
    } else {
        let k = BinIndex::from_linear(linear, m, d);
        for (slot, &ki) in out.iter_mut().zip(&k.k) {
            *slot = sample_axis(ki, m, rng);
        }
    }
}

#[inline]
fn sample_axis<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let x = (k as f64 + u) / m as f64;
        // rounding can push x onto a neighbouring bin edge
        if axis_bin(x, m) == k {
            return x;
        }
    }
}

/// How bin averages are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMethod {
    /// Closed form when the family has one, quadrature otherwise.
    #[default]
    Auto,
    Analytic,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageOptions {
    pub method: AverageMethod,
    pub quadrature_order: usize,
    pub bin_budget: usize,
}

impl Default for AverageOptions {
    fn default() -> Self {
        Self {
            method: AverageMethod::Auto,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            bin_budget: DEFAULT_BIN_BUDGET,
        }
    }
}

/// Averages `m^d ∫_bin f` of the mean payoff over every bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAverageTable {
    m: usize,
    d: usize,
    /// `Analytic` or `Quadrature`, never `Auto`.
    method: AverageMethod,
    values: Vec<f64>,
}

impl BinAverageTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn method(&self) -> AverageMethod {
        self.method
    }

    /// Values in lexicographic bin order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: &BinIndex) -> f64 {
        self.values[k.linear()]
    }

    /// Writes `k1,…,kd,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.d).map(|a| format!("k{a}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let k = BinIndex::from_linear(i, self.m, self.d);
            for ki in k.coords() {
                write!(w, "{ki},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// Bin averages with default options.
pub fn bin_averages(env: &Environment, m: usize) -> Result<BinAverageTable> {
    bin_averages_with(env, m, &AverageOptions::default())
}

pub fn bin_averages_with(env: &Environment, m: usize, opts: &AverageOptions) -> Result<BinAverageTable> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let d = env.dim();
    let n_bins = match bin_count(m, d) {
        Some(n) if n <= opts.bin_budget => n,
        _ => {
            return Err(Error::BinBudgetExceeded {
                bins: (m as u128).saturating_pow(d as u32),
                budget: opts.bin_budget,
            })
        }
    };
    let probe_lo = vec![0.0; d];
    let probe_hi = vec![1.0; d];
    let has_closed_form = env.box_average(&probe_lo, &probe_hi).is_some();
    let method = match opts.method {
        AverageMethod::Auto if has_closed_form => AverageMethod::Analytic,
        AverageMethod::Auto => AverageMethod::Quadrature,
        AverageMethod::Analytic if !has_closed_form => {
            return Err(Error::InvalidParameter(format!(
                "{} family has no closed-form bin averages",
                env.family().name()
            )))
        }
        other => other,
    };
    let rule = (method == AverageMethod::Quadrature).then(|| GaussLegendre::new(opts.quadrature_order));
    let values = (0..n_bins)
        .map(|i| {
            let (lo, hi) = BinIndex::from_linear(i, m, d).bounds();
            match &rule {
                Some(rule) => rule.box_average(&lo, &hi, |x| env.mean(x)),
                None => env.box_average(&lo, &hi).expect("closed form checked above"),
            }
        })
        .collect();
    Ok(BinAverageTable { m, d, method, values })
}

/// Grid approximation of the Lipschitz constant,
/// `m · max_{k ∈ {1..m-2}^d, s ∈ {-1,1}^d} |f̄_m(k) - f̄_m(k+s)|`.
pub fn lbar(env: &Environment, m: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::GridTooCoarse(m));
    }
    lbar_from_table(&bin_averages(env, m)?)
}

/// [`lbar`] on a precomputed table.
pub fn lbar_from_table(table: &BinAverageTable) -> Result<f64> {
    let (m, d) = (table.m, table.d);
    if m < 3 {
        return Err(Error::GridTooCoarse(m));
    }
    let mut k = vec![1usize; d];
    let mut neighbour = BinIndex { k: vec![0; d], m };
    let mut best = 0.0f64;
    'interior: loop {
        let here = table.values[BinIndex { k: k.clone(), m }.linear()];
        for signs in 0u32..(1 << d) {
            for (a, slot) in neighbour.k.iter_mut().enumerate() {
                *slot = if signs >> a & 1 == 1 { k[a] + 1 } else { k[a] - 1 };
            }
            best = best.max((here - table.values[neighbour.linear()]).abs());
        }
        for a in (0..d).rev() {
            k[a] += 1;
            if k[a] <= m - 2 {
                continue 'interior;
            }
            k[a] = 1;
        }
        break;
    }
    Ok(m as f64 * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Family, NoiseSpec};
    use crate::rng_from_seed;
    use proptest::prelude::*;

    fn square() -> Environment {
        let fam = Family::Quadratic { coef: vec![1.0], center: vec![0.0], offset: 0.0 };
        Environment::from_family(&fam, 1, NoiseSpec::Zero).unwrap()
    }

    fn smooth_catalogue() -> Vec<Environment> {
        let fams = [
            Family::constant(0.5),
            Family::Affine { slope: vec![0.5], intercept: 0.2 },
            Family::Affine { slope: vec![0.3, -0.4], intercept: 0.5 },
            Family::Quadratic { coef: vec![1.0], center: vec![0.0], offset: 0.0 },
            Family::Quadratic { coef: vec![-1.0], center: vec![0.5], offset: 1.0 },
            Family::Quadratic { coef: vec![0.2, -0.3], center: vec![-1.0, 0.3], offset: 0.0 },
            Family::Cosine { kappa: 1.0 },
            Family::Cosine { kappa: 0.15 },
        ];
        let mut out = Vec::new();
        for fam in &fams {
            for d in 1..=2 {
                if let Ok(env) = Environment::from_family(fam, d, NoiseSpec::Zero) {
                    out.push(env);
                }
            }
        }
        out
    }

    fn pt(c: &[f64]) -> ArmPoint {
        ArmPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn bin_index_examples() {
        assert_eq!(bin_index(&pt(&[0.37]), 10).coords(), &[3]);
        assert_eq!(bin_index(&pt(&[1.0]), 10).coords(), &[9]);
        assert_eq!(bin_index(&pt(&[0.0, 0.999]), 4).coords(), &[0, 3]);
    }

    #[test]
    fn linear_order_is_lexicographic() {
        let k = BinIndex::new(vec![1, 2], 3).unwrap();
        assert_eq!(k.linear(), 5);
        assert_eq!(BinIndex::from_linear(5, 3, 2), k);
        assert!(BinIndex::new(vec![3], 3).is_err());
        assert_eq!(bin_count(10, 3), Some(1000));
    }

    #[test]
    fn whole_cube_bin() {
        let mut rng = rng_from_seed(0);
        let k = BinIndex::new(vec![0, 0, 0], 1).unwrap();
        for _ in 0..100 {
            let x = sample_in_bin(&k, &mut rng);
            assert!(x.coords().iter().all(|c| (0.0..1.0).contains(c)));
        }
    }

    #[test]
    fn in_bin_sample_mean() {
        let mut rng = rng_from_seed(9);
        let k = BinIndex::new(vec![2], 4).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_in_bin(&k, &mut rng).coords()[0];
            assert!((0.5..0.75).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 0.625).abs() < 0.003);
    }

    #[test]
    fn sample_round_trip_small_grids() {
        let mut rng = rng_from_seed(4);
        for d in 1..=3 {
            for m in 1..=8 {
                for lin in 0..bin_count(m, d).unwrap() {
                    let k = BinIndex::from_linear(lin, m, d);
                    for _ in 0..5 {
                        assert_eq!(bin_index(&sample_in_bin(&k, &mut rng), m), k);
                    }
                }
            }
        }
    }

    #[test]
    fn linear_sampler_matches_index_sampler() {
        let k = BinIndex::new(vec![3, 0, 5], 7).unwrap();
        let a = sample_in_bin(&k, &mut rng_from_seed(12));
        let mut b = vec![0.0; 3];
        sample_in_linear_bin(k.linear(), 7, &mut b, &mut rng_from_seed(12));
        assert_eq!(a.coords(), &b[..]);
    }

    #[test]
    fn square_bin_averages_closed_form() {
        let table = bin_averages(&square(), 10).unwrap();
        assert_eq!(table.method(), AverageMethod::Analytic);
        for (k, v) in table.values().iter().enumerate() {
            let k = k as f64;
            let exact = (3.0 * k * k + 3.0 * k + 1.0) / 300.0;
            assert!((v - exact).abs() < 1e-15, "k = {k}");
        }
        assert!((table.values()[0] - 1.0 / 300.0).abs() < 1e-16);
        assert!((table.values()[9] - 271.0 / 300.0).abs() < 1e-15);
    }

    #[test]
    fn constant_and_affine_averages() {
        let c = Environment::constant(0.37, 2, NoiseSpec::Zero).unwrap();
        assert!(bin_averages(&c, 6).unwrap().values().iter().all(|&v| (v - 0.37).abs() < 1e-15));
        let fam = Family::Affine { slope: vec![0.5], intercept: 0.2 };
        let env = Environment::from_family(&fam, 1, NoiseSpec::Zero).unwrap();
        for m in [1, 3, 17] {
            let t = bin_averages(&env, m).unwrap();
            for (k, v) in t.values().iter().enumerate() {
                assert!((v - (0.5 * (k as f64 + 0.5) / m as f64 + 0.2)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let opts = AverageOptions { method: AverageMethod::Quadrature, ..Default::default() };
        for env in smooth_catalogue() {
            for m in [3, 5, 10, 20] {
                let exact = bin_averages(&env, m).unwrap();
                let quad = bin_averages_with(&env, m, &opts).unwrap();
                assert_eq!(quad.method(), AverageMethod::Quadrature);
                for (a, b) in exact.values().iter().zip(quad.values()) {
                    assert!((a - b).abs() < 1e-9, "{env}, m = {m}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let env = Environment::constant(0.5, 3, NoiseSpec::Zero).unwrap();
        let opts = AverageOptions { bin_budget: 999, ..Default::default() };
        assert!(matches!(
            bin_averages_with(&env, 10, &opts),
            Err(Error::BinBudgetExceeded { bins: 1000, budget: 999 })
        ));
        assert!(bin_averages(&env, 100).is_ok());
        assert!(bin_averages(&env, 101).is_err());
    }

    #[test]
    fn lbar_square_m10() {
        let l = lbar(&square(), 10).unwrap();
        assert!((l - 1.8).abs() < 1e-12);
        assert!(2.0 - 14.0 / 10.0 <= l && l <= 2.0);
    }

    #[test]
    fn lbar_affine_and_constant() {
        let fam = Family::Affine { slope: vec![0.5], intercept: 0.2 };
        let env = Environment::from_family(&fam, 1, NoiseSpec::Zero).unwrap();
        for m in 3..30 {
            assert!((lbar(&env, m).unwrap() - 0.5).abs() < 1e-12);
        }
        let c = Environment::constant(0.5, 2, NoiseSpec::Zero).unwrap();
        assert_eq!(lbar(&c, 7).unwrap(), 0.0);
        assert!(matches!(lbar(&c, 2), Err(Error::GridTooCoarse(2))));
    }

    #[test]
    fn grid_bounds_on_smooth_families() {
        for env in smooth_catalogue() {
            let (l, mh) = (env.lipschitz(), env.hessian_bound().value());
            for m in 3..=50 {
                let lb = lbar(&env, m).unwrap();
                assert!(lb <= l + 1e-12, "{env}, m = {m}: {lb} > {l}");
                assert!(lb >= l - 7.0 * mh / m as f64 - 1e-8, "{env}, m = {m}: {lb}");
            }
        }
    }

    #[test]
    fn lbar_converges_to_lipschitz() {
        for env in smooth_catalogue() {
            let (l, mh) = (env.lipschitz(), env.hessian_bound().value());
            for m in [20, 40, 80] {
                let lb = lbar(&env, m).unwrap();
                assert!((l - lb).abs() <= 10.0 * mh / m as f64 + 1e-12, "{env}, m = {m}");
            }
        }
    }

    #[test]
    fn hard_instance_upper_bound_only() {
        for (d, l, c) in [(1, 1.0, 0.3), (1, 4.0, 0.55), (2, 2.0, 0.5)] {
            let fam = Family::Hard { lipschitz: l, eps: 0.1, center: vec![c], baseline: 0.5 };
            let env = Environment::from_family(&fam, d, NoiseSpec::Zero).unwrap();
            for m in 3..=30 {
                let t = bin_averages(&env, m).unwrap();
                assert_eq!(t.method(), AverageMethod::Quadrature);
                assert!(lbar_from_table(&t).unwrap() <= l + 1e-12);
            }
        }
    }

    #[test]
    fn csv_dump_layout() {
        let env = Environment::constant(0.25, 2, NoiseSpec::Zero).unwrap();
        let mut buf = Vec::new();
        bin_averages(&env, 2).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k1,k2,value\n0,0,0.25\n0,1,0.25\n1,0,0.25\n1,1,0.25\n");
    }

    proptest! {
        #[test]
        fn sampled_points_stay_in_their_bin(m in 1usize..40, k_raw in 0usize..1000, seed in any::<u64>()) {
            let k = BinIndex::new(vec![k_raw % m, (k_raw / 7) % m], m).unwrap();
            let mut rng = rng_from_seed(seed);
            let x = sample_in_bin(&k, &mut rng);
            prop_assert_eq!(bin_index(&x, m), k);
        }

        #[test]
        fn linear_index_round_trip(m in 1usize..12, d in 1usize..4, raw in any::<usize>()) {
            let n = bin_count(m, d).unwrap();
            let k = BinIndex::from_linear(raw % n, m, d);
            prop_assert_eq!(k.linear(), raw % n);
        }
    }
}
