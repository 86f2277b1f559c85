//! Conditional mutual information test for lagged binary variables.
//!
//! Samples are pooled across individuals: for every individual and every
//! tick `t` where all lags are in range, one sample
//! `(x[t - x.lag], y[t - y.lag], z_1[t - z_1.lag], ...)` is counted.
//! The statistic `G = 2 n I(X;Y|Z)` is referred to a chi-square
//! distribution whose degrees of freedom count the strata in which both `X`
//! and `Y` vary (strata where either is constant contribute exactly zero).
//! When the table is too sparse, a permutation test shuffling `X` within
//! strata of `Z` is used instead.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::MultiSeries;
use crate::error::{Error, Result};
use crate::rng::SeedMix;

/// A variable observed `lag` ticks before the sample time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LaggedVar {
    pub var: usize,
    pub lag: usize,
}

impl LaggedVar {
    pub fn new(var: usize, lag: usize) -> Self {
        LaggedVar { var, lag }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    /// Conditional mutual information in nats.
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub sample_count: usize,
    pub permutation: bool,
}

impl CiTestResult {
    fn independent(sample_count: usize) -> Self {
        CiTestResult {
            statistic: 0.0,
            p_value: 1.0,
            dof: 1,
            sample_count,
            permutation: false,
        }
    }
}

/// 2x2 table of one stratum, indexed `[x][y]`.
pub type Stratum = [[u64; 2]; 2];

/// CMI (nats) and informative-stratum count of a stratified 2x2 table.
pub fn cmi_from_strata(strata: &[Stratum]) -> (f64, usize) {
    let n: u64 = strata.iter().flatten().flatten().sum();
    if n == 0 {
        return (0.0, 0);
    }
    let n = n as f64;
    let mut cmi = 0.0;
    let mut informative = 0;
    for s in strata {
        let nz = (s[0][0] + s[0][1] + s[1][0] + s[1][1]) as f64;
        let nx = [(s[0][0] + s[0][1]) as f64, (s[1][0] + s[1][1]) as f64];
        let ny = [(s[0][0] + s[1][0]) as f64, (s[0][1] + s[1][1]) as f64];
        if nx[0] == 0.0 || nx[1] == 0.0 || ny[0] == 0.0 || ny[1] == 0.0 {
            continue;
        }
        informative += 1;
        for x in 0..2 {
            for y in 0..2 {
                let c = s[x][y] as f64;
                if c > 0.0 {
                    cmi += c / n * (c * nz / (nx[x] * ny[y])).ln();
                }
            }
        }
    }
    (cmi.max(0.0), informative)
}

/// Asymptotic p-value of `G = 2 n cmi` with `dof` degrees of freedom.
pub fn g_test_p_value(cmi: f64, n: usize, dof: usize) -> f64 {
    if dof == 0 || cmi <= 0.0 {
        return 1.0;
    }
    let g = 2.0 * n as f64 * cmi;
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    chi.sf(g).clamp(0.0, 1.0)
}

/// Reusable tester over a fixed series.
#[derive(Clone, Debug)]
pub struct CiTester {
    /// `columns[individual][var][t]`
    columns: Vec<Vec<Vec<u8>>>,
    min_start: usize,
    /// Minimum average count per contingency cell for the asymptotic test.
    pub min_cell_average: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// Conditioning sets larger than this are rejected outright.
pub const MAX_CONDITIONS: usize = 20;

impl CiTester {
    /// Samples start at tick `min_start` (or later, if a query needs longer lags).
    pub fn new(series: &MultiSeries, min_start: usize) -> Self {
        let w = series.width();
        let columns = series
            .individuals
            .iter()
            .map(|ind| (0..w).map(|v| ind.column(v)).collect())
            .collect();
        CiTester {
            columns,
            min_start,
            min_cell_average: 5.0,
            permutations: 199,
            seed: 0,
        }
    }

    fn n_vars(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Tests `x ⟂ y | z`.
    pub fn test(&self, x: LaggedVar, y: LaggedVar, z: &[LaggedVar]) -> Result<CiTestResult> {
        if z.len() > MAX_CONDITIONS {
            return Err(Error::Invalid(format!("{} conditions exceed the limit", z.len())));
        }
        let nv = self.n_vars();
        if std::iter::once(&x).chain(std::iter::once(&y)).chain(z).any(|v| v.var >= nv) {
            return Err(Error::Invalid("variable index out of range".into()));
        }
        let max_lag = z.iter().map(|v| v.lag).chain([x.lag, y.lag]).max().unwrap_or(0);
        let start = self.min_start.max(max_lag);

        let n_strata = 1usize << z.len();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut zs = Vec::new();
        for cols in &self.columns {
            let len = cols[0].len();
            for t in start..len {
                let mut k = 0usize;
                for (b, v) in z.iter().enumerate() {
                    k |= usize::from(cols[v.var][t - v.lag]) << b;
                }
                xs.push(cols[x.var][t - x.lag]);
                ys.push(cols[y.var][t - y.lag]);
                zs.push(k as u32);
            }
        }
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        let strata = tabulate(&xs, &ys, &zs, n_strata);
        let (cmi, dof) = cmi_from_strata(&strata);
        if dof == 0 {
            return Ok(CiTestResult::independent(n));
        }
        let cells = 4.0 * n_strata as f64;
        if n as f64 / cells >= self.min_cell_average {
            return Ok(CiTestResult {
                statistic: cmi,
                p_value: g_test_p_value(cmi, n, dof),
                dof,
                sample_count: n,
                permutation: false,
            });
        }

        // Shuffle x within strata of z.
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
        for (i, &k) in zs.iter().enumerate() {
            groups[k as usize].push(i);
        }
        let mut mix = SeedMix::new(self.seed).u64(x.var as u64).u64(x.lag as u64);
        mix = mix.u64(y.var as u64).u64(y.lag as u64);
        for v in z {
            mix = mix.u64(v.var as u64).u64(v.lag as u64);
        }
        let mut rng = mix.rng();
        let mut perm = xs.clone();
        let mut exceed = 0usize;
        for _ in 0..self.permutations {
            for g in &groups {
                let mut vals: Vec<u8> = g.iter().map(|&i| xs[i]).collect();
                vals.shuffle(&mut rng);
                for (&i, v) in g.iter().zip(vals) {
                    perm[i] = v;
                }
            }
            let (c, _) = cmi_from_strata(&tabulate(&perm, &ys, &zs, n_strata));
            if c >= cmi - 1e-12 {
                exceed += 1;
            }
        }
        Ok(CiTestResult {
            statistic: cmi,
            p_value: (1 + exceed) as f64 / (1 + self.permutations) as f64,
            dof,
            sample_count: n,
            permutation: true,
        })
    }
}

fn tabulate(xs: &[u8], ys: &[u8], zs: &[u32], n_strata: usize) -> Vec<Stratum> {
    let mut strata = vec![[[0u64; 2]; 2]; n_strata];
    for i in 0..xs.len() {
        strata[zs[i] as usize][xs[i] as usize][ys[i] as usize] += 1;
    }
    strata
}

/// One-off CMI test of `x ⟂ y | z` over `series`.
pub fn lagged_cmi(series: &MultiSeries, x: LaggedVar, y: LaggedVar, z: &[LaggedVar]) -> Result<CiTestResult> {
    CiTester::new(series, 0).test(x, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IndividualSeries, VariableCatalog};

    /// Two states + `m` contexts; context columns given explicitly.
    fn series_from_columns(states: &[usize], contexts: &[Vec<u8>]) -> MultiSeries {
        let m = contexts.len();
        let cat = VariableCatalog::synthetic(2, m).unwrap();
        let w = 2 + m;
        let mut data = Vec::new();
        for (t, &s) in states.iter().enumerate() {
            let mut row = vec![0u8; w];
            row[s] = 1;
            for (c, col) in contexts.iter().enumerate() {
                row[2 + c] = col[t];
            }
            data.extend(row);
        }
        let ticks = (0..states.len() as i64).collect();
        MultiSeries::new(cat, vec![IndividualSeries::new("a", ticks, data, w).unwrap()]).unwrap()
    }

    /// Independent G statistic: 2 Σ O ln(O / E) with E from margins.
    fn g_oracle(table: [[f64; 2]; 2]) -> f64 {
        let n: f64 = table.iter().flatten().sum();
        let mut g = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let o = table[x][y];
                let e = (table[x][0] + table[x][1]) * (table[0][y] + table[1][y]) / n;
                if o > 0.0 {
                    g += o * (o / e).ln();
                }
            }
        }
        2.0 * g
    }

    #[test]
    fn perfect_two_by_two_table() {
        let g = g_oracle([[20.0, 0.0], [0.0, 20.0]]);
        assert!((g - 80.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g - 55.451_774_444_795_62).abs() < 1e-9);
        let (cmi, dof) = cmi_from_strata(&[[[20, 0], [0, 20]]]);
        assert_eq!(dof, 1);
        assert!((cmi - g / 80.0).abs() < 1e-12);
        assert!((cmi - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(g_test_p_value(cmi, 40, dof) < 1e-12);
    }

    #[test]
    fn same_table_through_a_series() {
        // x = context at lag 1, y = context at lag 0, 20 (0,0) and 20 (1,1) pairs.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let v = u8::from(i % 2 == 0);
            x.push(v);
            y.push(0);
            x.push(0);
            y.push(v);
        }
        // Interleave so that y[t] = x[t-1] only on odd ticks.
        let states = vec![0usize; x.len()];
        let s = series_from_columns(&states, &[x, y]);
        let r = lagged_cmi(&s, LaggedVar::new(2, 1), LaggedVar::new(3, 0), &[]).unwrap();
        assert_eq!(r.sample_count, 79);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn constant_x_is_independent() {
        let y: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
        let s = series_from_columns(&vec![0; 50], &[vec![0; 50], y]);
        let r = lagged_cmi(&s, LaggedVar::new(2, 1), LaggedVar::new(3, 0), &[]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn lagged_copy_is_detected() {
        let mut rng = crate::rng::rng(3);
        use rand::Rng;
        let x: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let k = 3;
        let y: Vec<u8> = (0..1000).map(|t| if t >= k { x[t - k] } else { 0 }).collect();
        let s = series_from_columns(&vec![1; 1000], &[x, y]);
        let r = lagged_cmi(&s, LaggedVar::new(2, k), LaggedVar::new(3, 0), &[]).unwrap();
        assert!(r.p_value < 0.001);
        assert!(!r.permutation);
    }

    #[test]
    fn symmetric_in_x_and_y() {
        let mut rng = crate::rng::rng(9);
        use rand::Rng;
        let a: Vec<u8> = (0..300).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<u8> = (0..300).map(|t| if t > 0 && rng.random::<f64>() < 0.7 { a[t - 1] } else { rng.random_range(0..2) }).collect();
        let c: Vec<u8> = (0..300).map(|_| rng.random_range(0..2)).collect();
        let s = series_from_columns(&vec![0; 300], &[a, b, c]);
        let z = [LaggedVar::new(4, 1)];
        let r1 = lagged_cmi(&s, LaggedVar::new(2, 1), LaggedVar::new(3, 0), &z).unwrap();
        let r2 = lagged_cmi(&s, LaggedVar::new(3, 0), LaggedVar::new(2, 1), &z).unwrap();
        assert!((r1.statistic - r2.statistic).abs() < 1e-15);
    }

    #[test]
    fn sparse_table_uses_permutation() {
        let mut rng = crate::rng::rng(1);
        use rand::Rng;
        let cols: Vec<Vec<u8>> = (0..4).map(|_| (0..30).map(|_| rng.random_range(0..2)).collect()).collect();
        let s = series_from_columns(&vec![0; 30], &cols);
        let z = [LaggedVar::new(4, 1), LaggedVar::new(5, 1)];
        let r = lagged_cmi(&s, LaggedVar::new(2, 1), LaggedVar::new(3, 0), &z).unwrap();
        assert!(r.permutation);
        assert!((0.0..=1.0).contains(&r.p_value));
        let again = lagged_cmi(&s, LaggedVar::new(2, 1), LaggedVar::new(3, 0), &z).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn empty_series_is_an_error() {
        let s = series_from_columns(&[0, 1], &[vec![0, 1]]);
        assert!(matches!(
            lagged_cmi(&s, LaggedVar::new(2, 5), LaggedVar::new(0, 0), &[]),
            Err(Error::EmptySeries)
        ));
    }
}
