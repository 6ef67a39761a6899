//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use geosurv::geo::{AdjacencyMatrix, DesignMatrix, GeoMap};
use geosurv::model::{self, Network};
use geosurv::survival::{EventRecord, SurvivalCurve};
use geosurv::Matrix;
use rand::Rng;

/// Product-limit estimate recomputed from explicit at-risk sets.
pub fn km_oracle(records: &[EventRecord], horizon: usize) -> Vec<f64> {
    let mut s = vec![1.0; horizon + 1];
    for t in 1..=horizon {
        let at_risk = records.iter().filter(|r| r.time() >= t).count();
        let deaths = records.iter().filter(|r| r.time() == t && r.event()).count();
        s[t] = if at_risk == 0 {
            s[t - 1]
        } else {
            s[t - 1] * (1.0 - deaths as f64 / at_risk as f64)
        };
    }
    s
}

pub fn random_cohort(rng: &mut impl Rng, n: usize, horizon: usize) -> Vec<EventRecord> {
    (0..n)
        .map(|_| {
            let time = rng.gen_range(1..=horizon);
            EventRecord::new(rng.gen_bool(0.6), time, horizon).unwrap()
        })
        .collect()
}

pub fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Affinity built pair by pair from explicit concatenations.
pub fn ssa_oracle(z: &Matrix, a: &Matrix, full: bool) -> Matrix {
    let p = z.rows();
    let mut out = Matrix::zeros(p, p);
    for l in 0..p {
        for v in 0..p {
            if l == v {
                continue;
            }
            let (mut zl, mut zv) = if full {
                (z.row(l).to_vec(), z.row(v).to_vec())
            } else {
                (vec![z[(l, v)]], vec![z[(v, l)]])
            };
            zl.extend_from_slice(a.row(l));
            zv.extend_from_slice(a.row(v));
            out[(l, v)] = cosine_oracle(&zl, &zv);
        }
    }
    out
}

pub fn random_adjacency(rng: &mut impl Rng, p: usize) -> AdjacencyMatrix {
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.gen_bool(0.4) {
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
            }
        }
    }
    AdjacencyMatrix::from_matrix(m).unwrap()
}

pub fn random_design(rng: &mut impl Rng, p: usize, h: usize, nonnegative: bool) -> DesignMatrix {
    let lo = if nonnegative { 0.0 } else { -1.0 };
    let rows: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..h).map(|_| rng.gen_range(lo..1.0)).collect())
        .collect();
    DesignMatrix::new((0..h).map(|j| format!("d{j}")).collect(), &rows).unwrap()
}

pub fn random_symmetric(rng: &mut impl Rng, p: usize) -> Matrix {
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let x = rng.gen_range(-1.0..1.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// Five-point central-difference gradient of the batch loss (error O(h^4)).
pub fn numeric_gradient(net: &Network, batch: &[(Vec<f64>, SurvivalCurve)], h: f64) -> Vec<f64> {
    let params = net.parameters();
    let mut probe = net.clone();
    let mut loss_at = |i: usize, offset: f64| {
        let mut p = params.clone();
        p[i] += offset;
        probe.set_parameters(&p).unwrap();
        model::batch_loss(&probe, batch).unwrap()
    };
    (0..params.len())
        .map(|i| {
            let (f2, f1) = (loss_at(i, 2.0 * h), loss_at(i, h));
            let (b1, b2) = (loss_at(i, -h), loss_at(i, -2.0 * h));
            (-f2 + 8.0 * f1 - 8.0 * b1 + b2) / (12.0 * h)
        })
        .collect()
}

/// Relative error with a floor on the denominator so that near-zero entries compare absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn random_curve(rng: &mut impl Rng, t: usize) -> SurvivalCurve {
    let mut v: Vec<f64> = (0..t).map(|_| rng.gen::<f64>()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    SurvivalCurve::new(v).unwrap()
}

/// Unit cell `[r, r+1] x [c, c+1]` as a closed ring of (lat, lon).
pub fn cell(r: f64, c: f64) -> Vec<(f64, f64)> {
    vec![(r, c), (r, c + 1.0), (r + 1.0, c + 1.0), (r + 1.0, c), (r, c)]
}

/// A 3x3 block of cells and, far away, a 2x2 block: two connected components of
/// unequal size. Returns the map and the component (0 or 1) of every entity.
pub fn two_block_map() -> (GeoMap, Vec<usize>) {
    let mut entries = Vec::new();
    let mut component = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            entries.push((format!("a{r}{c}"), cell(r as f64, c as f64)));
            component.push(0);
        }
    }
    for r in 0..2 {
        for c in 0..2 {
            entries.push((format!("b{r}{c}"), cell(r as f64 + 10.0, c as f64 + 10.0)));
            component.push(1);
        }
    }
    (GeoMap::from_entries(entries).unwrap(), component)
}

/// True when `labels` induce exactly the partition `truth`.
pub fn same_partition(labels: &[usize], truth: &[usize]) -> bool {
    labels.len() == truth.len()
        && (0..labels.len()).all(|i| (0..labels.len()).all(|j| (labels[i] == labels[j]) == (truth[i] == truth[j])))
}
