//! Size groups via 1-D k-means, and pixel heights proportional to real
//! object heights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ObjectAsset;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub object_id: String,
    /// `ln` of the 3-D bounding-box diagonal in meters.
    pub feature: f64,
}

impl SizeRecord {
    pub fn from_asset(asset: &ObjectAsset) -> Result<Self> {
        let dims = asset.real_dims.as_ref().ok_or_else(|| {
            Error::invariant(format!("object `{}` has no real_dims", asset.id))
        })?;
        Ok(SizeRecord {
            object_id: asset.id.clone(),
            feature: dims.diagonal_m().ln(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest-SSE run wins.
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 3,
            max_iter: 100,
            tol: 1e-9,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster per input, with clusters numbered by ascending centroid.
    pub assignments: Vec<usize>,
    pub centroids: Vec<f64>,
    pub sse: f64,
    /// SSE after each Lloyd iteration of the winning run.
    pub sse_history: Vec<f64>,
}

fn sse_of(xs: &[f64], assign: &[usize], centroids: &[f64]) -> f64 {
    xs.iter()
        .zip(assign)
        .map(|(x, &c)| (x - centroids[c]).powi(2))
        .sum()
}

fn nearest(x: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate().skip(1) {
        if (x - c).abs() < (x - centroids[best]).abs() {
            best = j;
        }
    }
    best
}

fn kmeanspp(xs: &[f64], k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centroids = vec![xs[rng.gen_range(0..xs.len())]];
    while centroids.len() < k {
        let d2: Vec<f64> = xs
            .iter()
            .map(|&x| centroids.iter().map(|c| (x - c).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut idx = xs.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.gen_range(0..xs.len())
        };
        centroids.push(xs[pick]);
    }
    centroids
}

/// Moves the point farthest from its centroid (among clusters with more
/// than one member) into each empty cluster.
fn repair_empty(xs: &[f64], assign: &mut [usize], centroids: &mut [f64]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far: Option<(usize, f64)> = None;
        for (i, &x) in xs.iter().enumerate() {
            if sizes[assign[i]] < 2 {
                continue;
            }
            let d = (x - centroids[assign[i]]).abs();
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("n >= k leaves a cluster with two members");
        assign[i] = empty;
        centroids[empty] = xs[i];
    }
}

fn update(xs: &[f64], assign: &[usize], centroids: &mut [f64]) {
    let k = centroids.len();
    let mut sum = vec![0.0; k];
    let mut cnt = vec![0usize; k];
    for (x, &a) in xs.iter().zip(assign) {
        sum[a] += x;
        cnt[a] += 1;
    }
    for j in 0..k {
        if cnt[j] > 0 {
            centroids[j] = sum[j] / cnt[j] as f64;
        }
    }
}

fn lloyd(xs: &[f64], mut centroids: Vec<f64>, p: &KMeansParams) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut assign: Vec<usize> = xs.iter().map(|&x| nearest(x, &centroids)).collect();
    repair_empty(xs, &mut assign, &mut centroids);
    update(xs, &assign, &mut centroids);
    let mut history = vec![sse_of(xs, &assign, &centroids)];
    for _ in 0..p.max_iter {
        let before = centroids.clone();
        for (a, &x) in assign.iter_mut().zip(xs) {
            // keep the current cluster on ties so SSE cannot rise
            let n = nearest(x, &centroids);
            if (x - centroids[n]).abs() < (x - centroids[*a]).abs() {
                *a = n;
            }
        }
        repair_empty(xs, &mut assign, &mut centroids);
        update(xs, &assign, &mut centroids);
        let sse = sse_of(xs, &assign, &centroids);
        debug_assert!(sse <= history.last().unwrap() + 1e-9 * (1.0 + sse.abs()));
        history.push(sse);
        let moved = before
            .iter()
            .zip(&centroids)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved < p.tol {
            break;
        }
    }
    (assign, centroids, history)
}

/// Cost of one cluster over `sorted[j..i]`, from prefix sums.
struct Segments {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Segments {
    fn new(sorted: &[f64]) -> Self {
        // centering keeps the prefix sums well conditioned
        let m = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let mut s1 = vec![0.0];
        let mut s2 = vec![0.0];
        for &x in sorted {
            let d = x - m;
            s1.push(s1.last().unwrap() + d);
            s2.push(s2.last().unwrap() + d * d);
        }
        Segments { s1, s2 }
    }

    fn cost(&self, j: usize, i: usize) -> f64 {
        let n = (i - j) as f64;
        let a = self.s1[i] - self.s1[j];
        ((self.s2[i] - self.s2[j]) - a * a / n).max(0.0)
    }
}

/// Fills `cur[i]` for `i` in `lo..=hi` given the previous layer, using the
/// monotone split points of the 1-D objective.
#[allow(clippy::too_many_arguments)]
fn dp_layer(
    seg: &Segments,
    prev: &[f64],
    cur: &mut [f64],
    arg: &mut [usize],
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
) {
    if lo > hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut best = (f64::INFINITY, opt_lo);
    for (j, &pj) in prev.iter().enumerate().take(opt_hi.min(mid - 1) + 1).skip(opt_lo) {
        let v = pj + seg.cost(j, mid);
        if v < best.0 {
            best = (v, j);
        }
    }
    cur[mid] = best.0;
    arg[mid] = best.1;
    if mid > lo {
        dp_layer(seg, prev, cur, arg, lo, mid - 1, opt_lo, best.1);
    }
    dp_layer(seg, prev, cur, arg, mid + 1, hi, best.1, opt_hi);
}

/// Centroids of the globally optimal k-partition of scalar data. Optimal
/// 1-D clusters are contiguous in sorted order, so a dynamic program over
/// split points finds them in O(k n log n).
fn optimal_centroids(xs: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let seg = Segments::new(&sorted);
    let mut prev: Vec<f64> = (0..=n).map(|i| if i == 0 { 0.0 } else { seg.cost(0, i) }).collect();
    let mut splits = vec![vec![0usize; n + 1]];
    for m in 2..=k {
        let mut cur = vec![f64::INFINITY; n + 1];
        let mut arg = vec![0usize; n + 1];
        dp_layer(&seg, &prev, &mut cur, &mut arg, m, n, m - 1, n - 1);
        prev = cur;
        splits.push(arg);
    }
    let mut bounds = vec![n];
    let mut i = n;
    for m in (1..k).rev() {
        i = splits[m][i];
        bounds.push(i);
    }
    bounds.push(0);
    bounds.reverse();
    bounds
        .windows(2)
        .map(|w| sorted[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect()
}

/// Lloyd's algorithm on scalar features. Runs are seeded by k-means++
/// restarts plus one seed at the exact 1-D optimum; the lowest SSE wins, so
/// the result is globally optimal.
pub fn kmeans_1d(xs: &[f64], params: &KMeansParams, seed: u64) -> Result<KMeansResult> {
    let k = params.k;
    if k == 0 {
        return Err(Error::arg("k must be ≥ 1"));
    }
    if xs.len() < k {
        return Err(Error::arg(format!("{} records, need at least k={k}", xs.len())));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::arg(format!("non-finite feature {x}")));
    }
    let mut best: Option<KMeansResult> = None;
    let restarts = (0..params.n_init.max(1)).map(|run| {
        let mut rng = seed::sub_rng(seed, &format!("kmeans/{run}"));
        kmeanspp(xs, k, &mut rng)
    });
    for init in std::iter::once(optimal_centroids(xs, k)).chain(restarts) {
        let (assign, centroids, history) = lloyd(xs, init, params);
        let sse = *history.last().unwrap();
        if best.as_ref().is_none_or(|b| sse < b.sse) {
            best = Some(KMeansResult {
                assignments: assign,
                centroids,
                sse,
                sse_history: history,
            });
        }
    }
    let mut r = best.unwrap();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| r.centroids[a].total_cmp(&r.centroids[b]).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    r.assignments.iter_mut().for_each(|a| *a = rank[*a]);
    r.centroids = order.iter().map(|&o| r.centroids[o]).collect();
    Ok(r)
}

pub fn kmeans_sizes(records: &[SizeRecord], params: &KMeansParams, seed: u64) -> Result<KMeansResult> {
    let xs: Vec<f64> = records.iter().map(|r| r.feature).collect();
    kmeans_1d(&xs, params, seed)
}

/// An object to size: real height and the pixel aspect (width / height)
/// of its visible silhouette.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizedItem {
    pub real_height_m: f64,
    pub aspect: f64,
}

/// Pixel heights proportional to real heights, with the largest constant
/// such that the items fit side by side inside the canvas minus margins.
pub fn relative_scale(items: &[SizedItem], canvas: (u32, u32), margin_frac: f64) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&margin_frac) {
        return Err(Error::arg(format!("margin_frac {margin_frac} outside [0, 0.5)")));
    }
    if items.is_empty() {
        return Err(Error::arg("no items to size"));
    }
    for it in items {
        if !(it.real_height_m > 0.0 && it.real_height_m.is_finite() && it.aspect > 0.0 && it.aspect.is_finite()) {
            return Err(Error::arg(format!("bad sizing input {it:?}")));
        }
    }
    let avail_w = canvas.0 as f64 * (1.0 - 2.0 * margin_frac);
    let avail_h = canvas.1 as f64 * (1.0 - 2.0 * margin_frac);
    let width_per_unit: f64 = items.iter().map(|it| it.real_height_m * it.aspect).sum();
    let tallest = items.iter().map(|it| it.real_height_m).fold(0.0, f64::max);
    let c = (avail_w / width_per_unit).min(avail_h / tallest);
    Ok(items.iter().map(|it| c * it.real_height_m).collect())
}

/// Groups object ids by size cluster (smallest group first).
pub fn size_groups(records: &[SizeRecord], params: &KMeansParams, seed: u64) -> Result<Vec<Vec<String>>> {
    let r = kmeans_sizes(records, params, seed)?;
    let mut groups = vec![Vec::new(); params.k];
    for (rec, &a) in records.iter().zip(&r.assignments) {
        groups[a].push(rec.object_id.clone());
    }
    Ok(groups)
}

/// Draws a side-by-side pair from one size group.
pub fn sample_pair(groups: &[Vec<String>], seed: u64) -> Result<(String, String)> {
    let eligible: Vec<&Vec<String>> = groups.iter().filter(|g| g.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::invariant("no size group has two objects"));
    }
    let mut rng = seed::sub_rng(seed, "pair");
    let g = eligible[rng.gen_range(0..eligible.len())];
    let a = rng.gen_range(0..g.len());
    let mut b = rng.gen_range(0..g.len() - 1);
    if b >= a {
        b += 1;
    }
    Ok((g[a].clone(), g[b].clone()))
}
