//! Weighted kernel ridge regression on deduplicated embedding features.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embed::Embedding;
use crate::error::{EstimationError, Result};

/// Distinct feature with the count and per-head sums of its samples.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub feature: Embedding,
    pub count: f64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

/// Collects samples into groups keyed by exact feature value, in first-seen order.
pub(crate) struct GroupBuilder {
    heads: usize,
    index: HashMap<(usize, usize, Vec<u64>), usize>,
    groups: Vec<Group>,
}

impl GroupBuilder {
    pub fn new(heads: usize) -> Self {
        Self {
            heads,
            index: HashMap::new(),
            groups: Vec::new(),
        }
    }

    pub fn push(&mut self, feature: &Embedding, targets: &[f64]) {
        debug_assert_eq!(targets.len(), self.heads);
        let key = (
            feature.s,
            feature.a,
            feature.z.iter().map(|v| v.to_bits()).collect(),
        );
        let heads = self.heads;
        let groups = &mut self.groups;
        let g = *self.index.entry(key).or_insert_with(|| {
            groups.push(Group {
                feature: feature.clone(),
                count: 0.0,
                sum: vec![0.0; heads],
                sum_sq: vec![0.0; heads],
            });
            groups.len() - 1
        });
        let g = &mut self.groups[g];
        g.count += 1.0;
        for (k, &y) in targets.iter().enumerate() {
            g.sum[k] += y;
            g.sum_sq[k] += y * y;
        }
    }

    pub fn finish(self) -> Vec<Group> {
        self.groups
    }
}

/// Bandwidth of the Gaussian kernel `exp(-‖x - y‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median pairwise distance between training samples.
    #[default]
    Median,
    Fixed {
        sigma: f64,
    },
}

fn weighted_median(mut items: Vec<(f64, f64)>) -> f64 {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = items.iter().map(|x| x.1).sum();
    let mut acc = 0.0;
    for &(d, w) in &items {
        acc += w;
        if acc >= 0.5 * total {
            return d;
        }
    }
    items.last().map_or(0.0, |x| x.0)
}

/// Gaussian kernel on the dense embedding, or that kernel restricted to pairs
/// sharing the same `(s, a)` block (zero across blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Dense,
    #[default]
    Blockwise,
}

impl KernelKind {
    fn comparable(self, x: &Embedding, y: &Embedding) -> bool {
        self == KernelKind::Dense || (x.s == y.s && x.a == y.a)
    }
}

/// Median distance over all comparable sample pairs; falls back to distinct-feature pairs, then 1.
pub(crate) fn median_bandwidth(groups: &[Group], kind: KernelKind) -> f64 {
    let mut weighted = Vec::new();
    let mut plain = Vec::new();
    for (a, ga) in groups.iter().enumerate() {
        if ga.count > 1.0 {
            weighted.push((0.0, 0.5 * ga.count * (ga.count - 1.0)));
        }
        for gb in groups[a + 1..]
            .iter()
            .filter(|gb| kind.comparable(&ga.feature, &gb.feature))
        {
            let d = ga.feature.sq_dist(&gb.feature).sqrt();
            weighted.push((d, ga.count * gb.count));
            plain.push((d, 1.0));
        }
    }
    let m = weighted_median(weighted);
    if m > 0.0 {
        return m;
    }
    let m = weighted_median(plain);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// `f_k(x) = b_k(x) + Σ_g coef[k][g] K(x_g, x)` for each head `k`, with an
/// unpenalized intercept `b_k` per kernel block (one global block for the dense kernel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRegressor {
    pub centers: Vec<Embedding>,
    #[serde(default)]
    pub kind: KernelKind,
    pub sigma: f64,
    pub coef: Vec<Vec<f64>>,
    /// `((s, a), b_k per head)`; `None` keys the dense kernel's single block.
    pub intercepts: Vec<(Option<(usize, usize)>, Vec<f64>)>,
}

impl KernelRegressor {
    pub fn kernel(&self, x: &Embedding, y: &Embedding) -> f64 {
        kernel(self.kind, x, y, self.sigma)
    }

    pub fn heads(&self) -> usize {
        self.coef.len()
    }

    pub fn predict(&self, x: &Embedding) -> Vec<f64> {
        let k: Vec<f64> = self.centers.iter().map(|c| self.kernel(c, x)).collect();
        let key = match self.kind {
            KernelKind::Dense => None,
            KernelKind::Blockwise => Some((x.s, x.a)),
        };
        let bias = self
            .intercepts
            .iter()
            .find(|b| b.0 == key)
            .map(|b| b.1.as_slice());
        self.coef
            .iter()
            .enumerate()
            .map(|(h, c)| {
                bias.map_or(0.0, |b| b[h]) + c.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

fn gaussian(x: &Embedding, y: &Embedding, sigma: f64) -> f64 {
    (-x.sq_dist(y) / (2.0 * sigma * sigma)).exp()
}

fn kernel(kind: KernelKind, x: &Embedding, y: &Embedding, sigma: f64) -> f64 {
    if kind.comparable(x, y) {
        gaussian(x, y, sigma)
    } else {
        0.0
    }
}

/// Minimizer of `(1/n) Σ (y - b - f(x))² + ρ ‖f‖²` over intercepts `b` and RKHS
/// functions `f`, for every head, with its empirical loss `(1/n) Σ_samples Σ_heads (y - b - f(x))²`.
///
/// With `A = K + nρ C⁻¹` (`C` the group counts) the optimum solves
/// `A α + b 1 = ȳ`, `1ᵀ α = 0`, so `b = 1ᵀA⁻¹ȳ / 1ᵀA⁻¹1`.
pub(crate) fn fit_groups(
    groups: &[Group],
    ridge: f64,
    bandwidth: Bandwidth,
    kind: KernelKind,
) -> Result<(KernelRegressor, f64)> {
    let g = groups.len();
    let heads = groups.first().map_or(0, |x| x.sum.len());
    let n: f64 = groups.iter().map(|x| x.count).sum();
    let sigma = match bandwidth {
        Bandwidth::Median => median_bandwidth(groups, kind),
        Bandwidth::Fixed { sigma } => sigma,
    };
    // The blockwise kernel matrix is block diagonal: solve each (s, a) block on its own.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    match kind {
        KernelKind::Dense => blocks.push((0..g).collect()),
        KernelKind::Blockwise => {
            let mut seen: Vec<(usize, usize)> = Vec::new();
            for (i, x) in groups.iter().enumerate() {
                let key = (x.feature.s, x.feature.a);
                match seen.iter().position(|&k| k == key) {
                    Some(b) => blocks[b].push(i),
                    None => {
                        seen.push(key);
                        blocks.push(vec![i]);
                    }
                }
            }
        }
    }
    let mut coef = vec![vec![0.0; g]; heads];
    let mut intercepts = Vec::with_capacity(blocks.len());
    let mut loss = 0.0;
    for idx in &blocks {
        let b = idx.len();
        let mut k = DMatrix::<f64>::zeros(b, b);
        for u in 0..b {
            k[(u, u)] = 1.0;
            for v in u + 1..b {
                let x = kernel(
                    kind,
                    &groups[idx[u]].feature,
                    &groups[idx[v]].feature,
                    sigma,
                );
                k[(u, v)] = x;
                k[(v, u)] = x;
            }
        }
        let mut sys = k.clone();
        for (u, &i) in idx.iter().enumerate() {
            sys[(u, u)] += n * ridge / groups[i].count;
        }
        let chol = sys.cholesky().ok_or(EstimationError::Singular)?;
        let ones = chol.solve(&DVector::from_element(b, 1.0));
        let ones_total = ones.sum();
        let mut bias = Vec::with_capacity(heads);
        for (head, c) in coef.iter_mut().enumerate() {
            let means = DVector::from_iterator(
                b,
                idx.iter().map(|&i| groups[i].sum[head] / groups[i].count),
            );
            let solved = chol.solve(&means);
            let b0 = solved.sum() / ones_total;
            let alpha = solved - &ones * b0;
            let fitted = (&k * &alpha).add_scalar(b0);
            bias.push(b0);
            for ((&i, &f), &al) in idx.iter().zip(fitted.iter()).zip(alpha.iter()) {
                let x = &groups[i];
                loss += x.sum_sq[head] - 2.0 * f * x.sum[head] + x.count * f * f;
                c[i] = al;
            }
        }
        let f = &groups[idx[0]].feature;
        let key = match kind {
            KernelKind::Dense => None,
            KernelKind::Blockwise => Some((f.s, f.a)),
        };
        intercepts.push((key, bias));
    }
    let centers = groups.iter().map(|x| x.feature.clone()).collect();
    Ok((
        KernelRegressor {
            centers,
            kind,
            sigma,
            coef,
            intercepts,
        },
        (loss / n).max(0.0),
    ))
}
