use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::MultiSeries;
use crate::error::{Error, Result};
use crate::rng::SeedMix;

/// Flattened windows of `snippet_len` consecutive rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnippetEmbedding {
    pub snippet_len: usize,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    /// `(individual, first tick)` of each snippet.
    pub origins: Vec<(String, i64)>,
}

/// Samples `count` snippets with replacement, uniformly over every start
/// position of every individual.
pub fn embed_snippets(series: &MultiSeries, snippet_len: usize, count: usize, seed: u64) -> Result<SnippetEmbedding> {
    if snippet_len == 0 {
        return Err(Error::Config("snippet length must be positive".into()));
    }
    let starts: Vec<usize> = series
        .individuals
        .iter()
        .map(|i| (i.len() + 1).saturating_sub(snippet_len))
        .collect();
    let total: usize = starts.iter().sum();
    if total == 0 {
        return Err(Error::TooShort(format!("no individual has {snippet_len} ticks")));
    }
    let mut rng = SeedMix::new(seed).str("snippets").rng();
    let mut vectors = Vec::with_capacity(count);
    let mut origins = Vec::with_capacity(count);
    for _ in 0..count {
        let mut k = rng.random_range(0..total);
        let mut ind = 0;
        while k >= starts[ind] {
            k -= starts[ind];
            ind += 1;
        }
        let s = &series.individuals[ind];
        let w = s.window(k, k + snippet_len);
        vectors.push(w.as_slice().iter().map(|&v| f64::from(v)).collect());
        origins.push((s.id.clone(), s.ticks[k]));
    }
    Ok(SnippetEmbedding {
        snippet_len,
        dim: snippet_len * series.width(),
        vectors,
        origins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsProjection {
    pub coords: Vec<[f64; 2]>,
    /// Top two eigenvalues of the double-centred Gram matrix.
    pub eigenvalues: [f64; 2],
    /// Kruskal stress-1 of the 2D distances against the input distances.
    pub stress: f64,
    /// The input spans fewer than two dimensions; missing axes are zero.
    pub rank_deficient: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn distinct_count<P: AsRef<[f64]>>(points: &[P]) -> usize {
    let mut v: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    v.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    v.dedup();
    v.len()
}

/// Top-two eigenpairs, largest first.
fn top_two(m: DMatrix<f64>) -> [(f64, Vec<f64>); 2] {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let pick = |i: Option<&usize>| match i {
        Some(&i) => (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()),
        None => (0.0, vec![0.0; eig.eigenvalues.len()]),
    };
    [pick(order.first()), pick(order.get(1))]
}

fn finish(vectors: &[Vec<f64>], mut coords: Vec<[f64; 2]>, eigen: [f64; 2]) -> MdsProjection {
    let scale = eigen[0].max(0.0);
    let mut rank_deficient = false;
    for (axis, &lambda) in eigen.iter().enumerate() {
        if lambda <= 1e-9 * scale || lambda <= 0.0 {
            rank_deficient = true;
            coords.iter_mut().for_each(|c| c[axis] = 0.0);
            continue;
        }
        // Sign convention: the first clearly non-zero coordinate is positive.
        let tol = 1e-9 * lambda.sqrt();
        if let Some(c) = coords.iter().map(|c| c[axis]).find(|v| v.abs() > tol) {
            if c < 0.0 {
                coords.iter_mut().for_each(|p| p[axis] = -p[axis]);
            }
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let d = dist(&vectors[i], &vectors[j]);
            let e = dist(&coords[i], &coords[j]);
            num += (d - e) * (d - e);
            den += d * d;
        }
    }
    MdsProjection {
        coords,
        eigenvalues: eigen.map(|l| l.max(0.0)),
        stress: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        rank_deficient,
    }
}

fn check_input(vectors: &[Vec<f64>]) -> Result<()> {
    let d = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Invalid("vectors differ in dimension".into()));
    }
    if distinct_count(vectors) < 3 {
        return Err(Error::Invalid("MDS needs at least three distinct vectors".into()));
    }
    Ok(())
}

/// Torgerson MDS: eigendecomposition of `-1/2 J D^2 J`.
pub fn classical_mds(vectors: &[Vec<f64>]) -> Result<MdsProjection> {
    check_input(vectors)?;
    let n = vectors.len();
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&vectors[i], &vectors[j]);
            d2[(i, j)] = d * d;
            d2[(j, i)] = d * d;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let [(l1, v1), (l2, v2)] = top_two(b);
    let s1 = l1.max(0.0).sqrt();
    let s2 = l2.max(0.0).sqrt();
    let coords = (0..n).map(|i| [v1[i] * s1, v2[i] * s2]).collect();
    Ok(finish(vectors, coords, [l1, l2]))
}

/// Classical MDS of Euclidean distances. Uses the `d x d` covariance of the
/// centred vectors when that is smaller than the `n x n` Gram matrix; both
/// routes give the same coordinates.
pub fn mds_project(vectors: &[Vec<f64>]) -> Result<MdsProjection> {
    check_input(vectors)?;
    let n = vectors.len();
    let d = vectors[0].len();
    if d >= n {
        return classical_mds(vectors);
    }
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    let mean = x.row_mean();
    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = xc.transpose() * &xc;
    let [(l1, v1), (l2, v2)] = top_two(cov);
    let coords = (0..n)
        .map(|i| {
            let r = xc.row(i);
            [
                r.iter().zip(&v1).map(|(a, b)| a * b).sum(),
                r.iter().zip(&v2).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();
    Ok(finish(vectors, coords, [l1, l2]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub const KMEANS_MAX_ITER: usize = 100;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (k, c) in centroids.iter().enumerate() {
                let d = sq(p.as_ref(), c);
                if d < best.1 {
                    best = (k, d);
                }
            }
            inertia += best.1;
            best.0
        })
        .collect();
    (labels, inertia)
}

/// Lloyd iterations from k-means++ seeding.
pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if distinct_count(points) < k {
        return Err(Error::Invalid(format!("fewer than {k} distinct points")));
    }
    let dim = points[0].as_ref().len();
    let mut rng = SeedMix::new(seed).str("kmeans").rng();
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].as_ref().to_vec()];
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| sq(p.as_ref(), c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("distinct points remain");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        centroids.push(points[pick].as_ref().to_vec());
    }

    let (mut labels, mut inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let (next, next_inertia) = assign(points, &centroids);
        history.push(next_inertia);
        inertia = next_inertia;
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        labels,
        centroids,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(points: &[[f64; 2]]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                out.push(dist(&points[i], &points[j]));
            }
        }
        out
    }

    #[test]
    fn padded_planar_points_are_recovered() {
        let pts = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [1.0, 1.0], [-2.0, 5.0]];
        let vectors: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0], p[1], 0.0, 0.0, 0.0, 0.0, 0.0]).collect();
        for proj in [classical_mds(&vectors).unwrap(), mds_project(&vectors).unwrap()] {
            for (a, b) in pairwise(&pts).iter().zip(pairwise(&proj.coords)) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!(proj.stress < 1e-9);
            assert!(!proj.rank_deficient);
        }
    }

    #[test]
    fn equilateral_triangle() {
        let vectors = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let p = mds_project(&vectors).unwrap();
        let d = pairwise(&p.coords);
        assert!((d[0] - d[1]).abs() < 1e-6 && (d[1] - d[2]).abs() < 1e-6);
        assert!((d[0] - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn collinear_points_are_flagged() {
        let vectors: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = mds_project(&vectors).unwrap();
        assert!(p.rank_deficient);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
    }

    #[test]
    fn too_few_distinct_vectors() {
        let vectors = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(mds_project(&vectors).is_err());
    }

    #[test]
    fn kmeans_basics() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]];
        let one = kmeans(&pts, 1, 0).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
        let two = kmeans(&pts, 2, 3).unwrap();
        assert_eq!(two.labels[0], two.labels[1]);
        assert_eq!(two.labels[2], two.labels[3]);
        assert_ne!(two.labels[0], two.labels[2]);
        assert_eq!(kmeans(&pts, 2, 3).unwrap(), two);
        assert!(kmeans(&[[0.0, 0.0], [0.0, 0.0]], 2, 0).is_err());
    }

    #[test]
    fn snippet_dimension() {
        let cat = crate::data::VariableCatalog::synthetic(4, 16).unwrap();
        let len = 30;
        let mut data = vec![0u8; len * 20];
        for t in 0..len {
            data[t * 20] = 1;
        }
        let ind = crate::data::IndividualSeries::new("a", (0..len as i64).collect(), data, 20).unwrap();
        let s = MultiSeries::new(cat, vec![ind]).unwrap();
        let e = embed_snippets(&s, 6, 50, 1).unwrap();
        assert_eq!(e.dim, 120);
        assert!(e.vectors.iter().all(|v| v.len() == 120 && *v == e.vectors[0]));
        assert_eq!(embed_snippets(&s, 6, 50, 1).unwrap(), e);
        assert!(embed_snippets(&s, 31, 5, 1).is_err());
    }
}
