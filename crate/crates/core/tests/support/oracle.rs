//! Reference implementations used only by tests. Nothing here calls into the
//! library's metric or loss code; each routine recomputes from raw numbers.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Index of the first maximal entry and the maximum itself.
pub fn top(probs: &[f64]) -> (usize, f64) {
    let mut best = (0, probs[0]);
    for (i, &p) in probs.iter().enumerate() {
        if p > best.1 {
            best = (i, p);
        }
    }
    best
}

/// Whether `c` lies in interval `m` (1-based) of `bins`: `((m-1)/M, m/M]`,
/// with zero assigned to the first interval.
fn in_interval(c: f64, m: usize, bins: usize) -> bool {
    let lo = (m - 1) as f64 / bins as f64;
    let hi = m as f64 / bins as f64;
    (c > lo && c <= hi) || (m == 1 && c == 0.0)
}

/// Hard ECE by an explicit loop over bins, each scanning every sample.
pub fn brute_force_ece(probs: &[Vec<f64>], labels: &[usize], bins: usize) -> f64 {
    let n = probs.len() as f64;
    let mut total = 0.0;
    for m in 1..=bins {
        let mut count = 0usize;
        let mut hits = 0usize;
        let mut conf = 0.0;
        for (p, &y) in probs.iter().zip(labels) {
            let (pred, c) = top(p);
            if in_interval(c, m, bins) {
                count += 1;
                conf += c;
                if pred == y {
                    hits += 1;
                }
            }
        }
        if count > 0 {
            let acc = hits as f64 / count as f64;
            let conf = conf / count as f64;
            total += count as f64 / n * (acc - conf).abs();
        }
    }
    total
}

pub fn sigmoid_of_tangent(p: f64, epsilon: f64) -> f64 {
    let p = p.max(epsilon).min(1.0 - epsilon);
    let x = (PI * p - PI / 2.0).tan();
    1.0 / (1.0 + (-x).exp())
}

/// Soft ECE with bins materialized as explicit member lists.
pub fn brute_force_soft_ece(
    probs: &[Vec<f64>],
    labels: &[usize],
    bins: usize,
    use_true_class: bool,
    epsilon: f64,
) -> f64 {
    let n = probs.len() as f64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (i, p) in probs.iter().enumerate() {
        let c = top(p).1;
        let m = (1..=bins).find(|&m| in_interval(c, m, bins)).unwrap();
        members[m - 1].push(i);
    }
    members
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let size = b.len() as f64;
            let acc: f64 = b
                .iter()
                .map(|&i| {
                    let q = if use_true_class {
                        probs[i][labels[i]]
                    } else {
                        top(&probs[i]).1
                    };
                    sigmoid_of_tangent(q, epsilon)
                })
                .sum::<f64>()
                / size;
            let conf: f64 = b.iter().map(|&i| top(&probs[i]).1).sum::<f64>() / size;
            size / n * (acc - conf).abs()
        })
        .sum()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor on the denominator so that two entries that
/// are both essentially zero compare as equal.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// True when a perturbation of size `margin` in a sample's confidence could
/// move it across a bin edge, or when its top two probabilities are within
/// `margin` (so the argmax could change).
pub fn near_discontinuity(probs: &[f64], bins: usize, margin: f64) -> bool {
    let (pred, c) = top(probs);
    let near_edge = (0..=bins).any(|k| (c - k as f64 / bins as f64).abs() < margin);
    let near_tie = probs
        .iter()
        .enumerate()
        .any(|(j, &p)| j != pred && c - p < margin);
    near_edge || near_tie
}

/// Triple-loop product `a · b` for row-major `a` (n×k) and `b` (k×m).
pub fn naive_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i * k + t] * b[t * m + j];
            }
            out[i * m + j] = s;
        }
    }
    out
}

/// Accuracy of assigning each row to the class whose sample mean is closest.
pub fn nearest_centroid_accuracy(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> f64 {
    let dim = rows[0].len();
    let mut centroids = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (r, &y) in rows.iter().zip(labels) {
        counts[y] += 1;
        for (c, v) in centroids[y].iter_mut().zip(r) {
            *c += v;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= n as f64;
        }
    }
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(r, &y)| {
            let dist = |c: &Vec<f64>| {
                c.iter()
                    .zip(r.iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            let best = (0..classes)
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .unwrap();
            best == y
        })
        .count();
    hits as f64 / rows.len() as f64
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
