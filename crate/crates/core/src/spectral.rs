//! Spectral representations of entity affinity matrices.
//!
//! The affinity (binary adjacency, or a cosine-similarity matrix built from
//! adjacency plus descriptive features) is eigendecomposed with cyclic Jacobi
//! rotations. The eigenvectors of the `k` largest eigenvalues form a `p x k`
//! embedding: row `l` is the feature vector of entity `l`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, AdjacencyMatrix, DesignMatrix, GeoError, GeoMap, GeoPoint, OutsidePolicy};
use crate::matrix::Matrix;

/// Off-diagonal Frobenius norm below which the Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
/// Maximum asymmetry accepted by [`symmetric_eigen`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Full eigendecomposition of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    values: Vec<f64>,
    /// Column `j` pairs with `values[j]`.
    vectors: Matrix,
}

impl EigenPairs {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Entity-by-feature embedding (`p x k`), entity rows in map order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    values: Matrix,
    eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn entities(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        self.values.row(l)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.values
    }

    /// Eigenvalues of the selected columns, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// CSV `key,c1,...,ck`.
    pub fn to_csv(&self, map: &GeoMap) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["key".to_string()];
        header.extend((1..=self.k()).map(|c| format!("c{c}")));
        w.write_record(&header).expect("in-memory write");
        for (l, key) in map.keys().enumerate() {
            let mut rec = vec![key.to_string()];
            rec.extend(self.row(l).iter().map(|x| x.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Cluster assignment per entity, labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// CSV `key,label`.
    pub fn to_csv(&self, map: &GeoMap) -> String {
        let mut out = String::from("key,label\n");
        for (key, label) in map.keys().zip(&self.labels) {
            out.push_str(&format!("{key},{label}\n"));
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues are returned in descending order; values equal within a relative
/// `1e-12` keep the order of their original diagonal position. Each eigenvector
/// is signed so that its largest-magnitude component (the first one on ties) is positive.
pub fn symmetric_eigen(matrix: &Matrix) -> Result<EigenPairs> {
    if !matrix.is_square() {
        return Err(SpectralError::NotSquare(matrix.rows(), matrix.cols()));
    }
    if !matrix.is_finite() {
        return Err(SpectralError::NonFinite);
    }
    let asym = matrix.asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(SpectralError::NotSymmetric(asym));
    }
    let n = matrix.rows();
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)]));
    let mut v = Matrix::identity(n);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < JACOBI_TOLERANCE {
            converged = true;
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                rotated |= rotate(&mut a, &mut v, p, q);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && off_diagonal_norm(&a) >= JACOBI_TOLERANCE {
        return Err(SpectralError::NoConvergence(MAX_SWEEPS));
    }

    let raw: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let order = descending_order(&raw);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_sign(&mut col);
        for (i, x) in col.into_iter().enumerate() {
            vectors[(i, dst)] = x;
        }
    }
    Ok(EigenPairs {
        values: order.iter().map(|&i| raw[i]).collect(),
        vectors,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with a plane rotation; accumulates it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) -> bool {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return false;
    }
    let (app, aqq) = (a[(p, p)], a[(q, q)]);
    // below the precision of both diagonal entries: drop it
    let g = 100.0 * apq.abs();
    if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return false;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
    true
}

/// Indices sorting `values` descending; near-equal runs are ordered by index.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let scale = values.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end - 1]] - values[order[end]] <= tie {
            end += 1;
        }
        order[start..end].sort_unstable();
        start = end;
    }
    order
}

fn fix_sign(col: &mut [f64]) {
    let max = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(lead) = col.iter().position(|x| x.abs() >= max - 1e-10) {
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// The `k` eigenvectors with the largest eigenvalues, as a `p x k` embedding.
pub fn top_k(pairs: &EigenPairs, k: usize) -> Result<SpectralEmbedding> {
    let p = pairs.dim();
    if k == 0 || k > p {
        return Err(SpectralError::KOutOfRange { k, max: p });
    }
    Ok(SpectralEmbedding {
        values: Matrix::from_fn(p, k, |i, j| pairs.vectors[(i, j)]),
        eigenvalues: pairs.values[..k].to_vec(),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Euclidean k-means over embedding rows with k-means++ seeding.
pub fn kmeans(embedding: &SpectralEmbedding, k: usize, seed: u64) -> Result<ClusterLabels> {
    let points = embedding.values.to_rows();
    kmeans_rows(&points, k, seed)
}

/// [`kmeans`] over arbitrary equal-length rows.
pub fn kmeans_rows(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterLabels> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SpectralError::KOutOfRange { k, max: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding landing on an already chosen point
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITER {
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(p, &centroids).0;
        }
        repair_empty_clusters(points, &mut labels, &centroids, k);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centroids).0;
    }
    repair_empty_clusters(points, &mut labels, &centroids, k);
    Ok(ClusterLabels { labels, k })
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty_clusters(points: &[Vec<f64>], labels: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

/// Cosine similarity; zero when either vector is all zeros.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(SpectralError::LengthMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// How an entity pair's adjacency enters the similarity vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsaRep {
    /// The single adjacency bit between the pair, followed by each entity's features.
    Bin,
    /// Each entity's full adjacency row, followed by its features.
    Full,
}

/// Pairwise cosine-similarity affinity over adjacency + descriptive features.
///
/// Symmetric with a zero diagonal.
pub fn ssa_affinity(adjacency: &AdjacencyMatrix, design: &DesignMatrix, rep: SsaRep) -> Result<Matrix> {
    let p = adjacency.dim();
    if design.rows() != p {
        return Err(SpectralError::DimensionMismatch(format!(
            "adjacency has {p} entities, design matrix {} rows",
            design.rows()
        )));
    }
    let z = adjacency.as_matrix();
    let h = design.feature_count();
    let mut out = Matrix::zeros(p, p);
    let mut zl = Vec::new();
    let mut zv = Vec::new();
    for l in 0..p {
        for v in (l + 1)..p {
            zl.clear();
            zv.clear();
            match rep {
                SsaRep::Bin => {
                    zl.push(z[(l, v)]);
                    zv.push(z[(v, l)]);
                }
                SsaRep::Full => {
                    zl.extend_from_slice(z.row(l));
                    zv.extend_from_slice(z.row(v));
                }
            }
            zl.extend_from_slice(design.row(l));
            zv.extend_from_slice(design.row(v));
            debug_assert_eq!(zl.len(), zv.len());
            debug_assert!(zl.len() >= h);
            let s = cosine(&zl, &zv)?;
            out[(l, v)] = s;
            out[(v, l)] = s;
        }
    }
    Ok(out)
}

/// Top-`k` eigenvectors of the map's binary adjacency.
pub fn rr_sa_embedding(map: &GeoMap, k: usize) -> Result<SpectralEmbedding> {
    let adjacency = geo::build_adjacency(map)?;
    top_k(&symmetric_eigen(adjacency.as_matrix())?, k)
}

/// Top-`k` eigenvectors of the similarity affinity over adjacency and `design`.
pub fn rr_ssa_embedding(map: &GeoMap, design: &DesignMatrix, rep: SsaRep, k: usize) -> Result<SpectralEmbedding> {
    let adjacency = geo::build_adjacency(map)?;
    let affinity = ssa_affinity(&adjacency, design, rep)?;
    top_k(&symmetric_eigen(&affinity)?, k)
}

/// Embedding row of the entity containing `point`.
pub fn enrich(
    point: &GeoPoint,
    map: &GeoMap,
    embedding: &SpectralEmbedding,
    policy: OutsidePolicy,
) -> Result<Vec<f64>> {
    if embedding.entities() != map.len() {
        return Err(SpectralError::DimensionMismatch(format!(
            "embedding has {} rows for {} entities",
            embedding.entities(),
            map.len()
        )));
    }
    let l = geo::locate_index(point, map, policy)?;
    Ok(embedding.row(l).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn two_path_spectrum() {
        let e = symmetric_eigen(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(close(e.values(), &[1.0, -1.0], 1e-12));
        assert!(close(&e.vectors().column(0), &[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 1e-12));
        assert!(close(&e.vectors().column(1), &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2], 1e-12));
    }

    #[test]
    fn diagonal_spectrum() {
        let e = symmetric_eigen(&m(&[&[2.0, 0.0], &[0.0, 3.0]])).unwrap();
        assert_eq!(e.values(), &[3.0, 2.0]);
        assert_eq!(e.vectors().column(0), vec![0.0, 1.0]);
        assert_eq!(e.vectors().column(1), vec![1.0, 0.0]);
    }

    #[test]
    fn three_path_spectrum() {
        let e = symmetric_eigen(&m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]])).unwrap();
        assert!(close(e.values(), &[SQRT_2, 0.0, -SQRT_2], 1e-12));
    }

    #[test]
    fn eigen_errors() {
        assert!(matches!(
            symmetric_eigen(&m(&[&[0.0, 1.0], &[2.0, 0.0]])),
            Err(SpectralError::NotSymmetric(_))
        ));
        assert!(matches!(
            symmetric_eigen(&m(&[&[f64::NAN, 0.0], &[0.0, 1.0]])),
            Err(SpectralError::NonFinite)
        ));
        assert!(matches!(
            symmetric_eigen(&Matrix::zeros(2, 3)),
            Err(SpectralError::NotSquare(2, 3))
        ));
    }

    #[test]
    fn zero_matrix_keeps_index_order() {
        let e = symmetric_eigen(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.vectors(), &Matrix::identity(3));
    }

    #[test]
    fn top_k_selection() {
        let e = symmetric_eigen(&m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]])).unwrap();
        let top = top_k(&e, 1).unwrap();
        assert_eq!(top.k(), 1);
        assert!(close(&top.as_matrix().column(0), &[0.5, FRAC_1_SQRT_2, 0.5], 1e-12));
        let all = top_k(&e, 3).unwrap();
        assert_eq!(all.as_matrix(), e.vectors());
        assert!(matches!(top_k(&e, 0), Err(SpectralError::KOutOfRange { .. })));
        assert!(matches!(top_k(&e, 4), Err(SpectralError::KOutOfRange { .. })));
    }

    fn embedding(rows: &[Vec<f64>]) -> SpectralEmbedding {
        let values = Matrix::from_rows(rows).unwrap();
        let k = values.cols();
        SpectralEmbedding {
            values,
            eigenvalues: vec![0.0; k],
        }
    }

    #[test]
    fn kmeans_separated_pairs() {
        let e = embedding(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![5.0, 5.0], vec![5.1, 5.0]]);
        for seed in 0..10 {
            let l = kmeans(&e, 2, seed).unwrap();
            let l = l.labels();
            assert_eq!(l[0], l[1]);
            assert_eq!(l[2], l[3]);
            assert_ne!(l[0], l[2]);
        }
    }

    #[test]
    fn kmeans_single_cluster_and_singletons() {
        let e = embedding(&[vec![0.0], vec![1.0], vec![3.0], vec![7.0]]);
        assert_eq!(kmeans(&e, 1, 3).unwrap().labels(), &[0, 0, 0, 0]);
        let l = kmeans(&e, 4, 3).unwrap();
        let mut seen = l.labels().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert!(kmeans(&e, 5, 3).is_err());
    }

    #[test]
    fn kmeans_duplicate_points_fill_every_cluster() {
        let e = embedding(&[vec![1.0], vec![1.0], vec![1.0]]);
        let l = kmeans(&e, 3, 0).unwrap();
        let mut seen = l.labels().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(SpectralError::LengthMismatch(1, 2))));
    }

    fn two_entity_inputs(adjacent: bool, rows: &[Vec<f64>]) -> (AdjacencyMatrix, DesignMatrix) {
        let bit = if adjacent { 1.0 } else { 0.0 };
        let adj = AdjacencyMatrix::from_matrix(m(&[&[0.0, bit], &[bit, 0.0]])).unwrap();
        let design = DesignMatrix::new(vec!["f1".into(), "f2".into()], rows).unwrap();
        (adj, design)
    }

    #[test]
    fn ssa_bin_identical_and_orthogonal() {
        let (adj, design) = two_entity_inputs(true, &[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let z = ssa_affinity(&adj, &design, SsaRep::Bin).unwrap();
        assert!((z[(0, 1)] - 1.0).abs() < 1e-15);
        assert_eq!(z[(0, 1)], z[(1, 0)]);
        assert_eq!((z[(0, 0)], z[(1, 1)]), (0.0, 0.0));

        let (adj, design) = two_entity_inputs(false, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let z = ssa_affinity(&adj, &design, SsaRep::Bin).unwrap();
        assert_eq!(z, Matrix::zeros(2, 2));
    }

    #[test]
    fn ssa_dimension_mismatch() {
        let (adj, _) = two_entity_inputs(true, &[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let design = DesignMatrix::new(vec!["f".into()], &[vec![1.0]]).unwrap();
        assert!(matches!(
            ssa_affinity(&adj, &design, SsaRep::Full),
            Err(SpectralError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rr_sa_on_row_of_squares() {
        let map = geo::grid_map(1, 3);
        let e = rr_sa_embedding(&map, 1).unwrap();
        assert!(close(&e.as_matrix().column(0), &[0.5, FRAC_1_SQRT_2, 0.5], 1e-12));
        let full = rr_sa_embedding(&map, 3).unwrap();
        assert_eq!(full.k(), 3);
        assert!(close(full.eigenvalues(), &[SQRT_2, 0.0, -SQRT_2], 1e-12));
    }

    #[test]
    fn rr_ssa_two_entity_cases() {
        let map = geo::grid_map(1, 2);
        let design = DesignMatrix::new(vec!["f1".into(), "f2".into()], &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let e = rr_ssa_embedding(&map, &design, SsaRep::Bin, 1).unwrap();
        assert!(close(e.row(0), &[FRAC_1_SQRT_2], 1e-12));
        assert!(close(e.row(1), &[FRAC_1_SQRT_2], 1e-12));

        let far = GeoMap::from_entries([
            ("A", vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]),
            ("B", vec![(5.0, 5.0), (5.0, 6.0), (6.0, 6.0)]),
        ])
        .unwrap();
        let design = DesignMatrix::new(vec!["f1".into(), "f2".into()], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = rr_ssa_embedding(&far, &design, SsaRep::Bin, 2).unwrap();
        assert_eq!(e.eigenvalues(), &[0.0, 0.0]);
        assert_eq!(e.as_matrix(), &Matrix::identity(2));
    }

    #[test]
    fn enrich_returns_entity_row() {
        let map = geo::grid_map(1, 3);
        let e = rr_sa_embedding(&map, 1).unwrap();
        let pt = GeoPoint::new(0.5, 2.5).unwrap();
        let row = enrich(&pt, &map, &e, OutsidePolicy::Reject).unwrap();
        assert!(close(&row, &[0.5], 1e-12));
        let outside = GeoPoint::new(-4.0, -4.0).unwrap();
        assert!(matches!(
            enrich(&outside, &map, &e, OutsidePolicy::Reject),
            Err(SpectralError::Geo(GeoError::OutsideMap { .. }))
        ));
        let full = rr_sa_embedding(&map, 3).unwrap();
        let first = GeoPoint::new(0.5, 0.5).unwrap();
        let row = enrich(&first, &map, &full, OutsidePolicy::Reject).unwrap();
        assert_eq!(row, full.row(0));
    }

    #[test]
    fn cluster_csv_format() {
        let map = geo::grid_map(1, 2);
        let labels = ClusterLabels { labels: vec![1, 0], k: 2 };
        assert_eq!(labels.to_csv(&map), "key,label\nr0c0,1\nr0c1,0\n");
    }
}
