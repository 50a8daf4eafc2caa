//! Joint evaluation of every policy over a window set.
//!
//! For one user the metric of a policy `T` is
//! `sum_R credit(decode(R)) * prod_w Binom(T_w, R_w)`, a separable transform
//! of the credit table over receptions. Evaluating the transform one window
//! at a time, depth first over policy prefixes, shares every partial sum
//! between policies with a common prefix, so the whole policy space costs
//! little more than its own size.
//!
//! Two facts keep the tables finite:
//! * receiving more than `size(w)` packets of window `w` decodes exactly like
//!   receiving `size(w)`: such a window always passes its own check before
//!   any window containing it is visited, so counts are capped at the size
//!   and the binomial tail is folded into the cap;
//! * a policy with total `n` only yields receptions with total `<= n`.
//!
//! Tables are laid out graded: by total count, then lexicographically. With
//! that layout every `(first count, rest total)` block of a parent table is
//! contiguous and lines up with the child table, so each transform step is a
//! sequence of AXPYs.

use num_traits::Float;
use rayon::prelude::*;

use crate::decoding::SweepDecoder;
use crate::lattice::WindowSet;
use crate::scalar::Probability;
use crate::stream::{MetricWeights, SystemConfig};

/// Receives the per-user metric of every evaluated policy.
pub trait PolicyVisitor<F> {
    /// `counts` is aligned with the canonical window order.
    fn visit(&mut self, total: u32, counts: &[u32], metrics: &[F]);
}

/// Precomputed transform for one configuration, window set and budget bound.
#[derive(Debug, Clone)]
pub struct PolicySpace<F> {
    windows: WindowSet,
    max_total: u32,
    users: usize,
    /// Canonical window position of each transform dimension.
    order: Vec<usize>,
    caps: Vec<u32>,
    /// `eq[j][t]`: capped vectors over dimensions `j..` with sum exactly `t`.
    eq: Vec<Vec<usize>>,
    /// `below[j][t]`: same with sum `< t`.
    below: Vec<Vec<usize>>,
    /// `offset[j][r][t]`: start of the block with first count `r` and total
    /// `t` in a table over dimensions `j..`.
    offset: Vec<Vec<Vec<usize>>>,
    /// Decoded-layer code of every capped reception, graded layout.
    codes: Vec<u16>,
    /// `credit[u][code]`.
    credit: Vec<Vec<F>>,
    /// `binom[j][u][n][r]` with the tail folded into `r = caps[j]`.
    binom: Vec<Vec<Vec<Vec<F>>>>,
}

impl<F> PolicySpace<F>
where
    F: Float + Probability + Send + Sync,
{
    /// Builds the space of policies over `windows` with total at most
    /// `max_total`, for the channels of `config` and the given weights.
    pub fn new(config: &SystemConfig<F>, windows: &WindowSet, weights: &MetricWeights<F>, max_total: u32) -> Self {
        let w = windows.len();
        let sizes: Vec<u32> = windows.iter().map(|x| x.size(config)).collect();
        let mut order: Vec<usize> = (0..w).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let caps: Vec<u32> = order.iter().map(|&p| sizes[p].min(max_total)).collect();
        let m = max_total as usize;

        let mut eq = vec![vec![0usize; m + 1]; w + 1];
        eq[w][0] = 1;
        for j in (0..w).rev() {
            for t in 0..=m {
                eq[j][t] = (0..=(caps[j] as usize).min(t)).map(|r| eq[j + 1][t - r]).sum();
            }
        }
        let below: Vec<Vec<usize>> = eq
            .iter()
            .map(|e| {
                let mut acc = 0;
                let mut v = Vec::with_capacity(m + 2);
                for &x in e {
                    v.push(acc);
                    acc += x;
                }
                v.push(acc);
                v
            })
            .collect();
        let offset = (0..w)
            .map(|j| {
                (0..=caps[j] as usize)
                    .map(|r| {
                        (0..=m)
                            .map(|t| {
                                if t < r {
                                    return usize::MAX;
                                }
                                below[j][t] + (0..r).map(|u| eq[j + 1][t - u]).sum::<usize>()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let layers = config.layer_counts();
        let code_count: usize = layers.iter().map(|l| l + 1).product();
        assert!(code_count <= usize::from(u16::MAX) + 1, "too many layer combinations");
        let decoder = SweepDecoder::new(config, windows);
        let mut codes = Vec::with_capacity(below[0][m + 1]);
        let mut counts = vec![0u32; w];
        let mut work = vec![0u32; w];
        let mut prefix = vec![0usize; layers.len()];
        let mut decoded = vec![0usize; layers.len()];
        for t in 0..=max_total {
            for_each_with_sum(&caps, t, &mut vec![0u32; w], 0, &mut |v| {
                for (j, &c) in v.iter().enumerate() {
                    counts[order[j]] = c;
                }
                decoder.decode_into(&counts, &mut work, &mut prefix, &mut decoded);
                let code = decoded.iter().zip(&layers).fold(0usize, |acc, (&d, &l)| acc * (l + 1) + d);
                codes.push(code as u16);
            });
        }
        debug_assert_eq!(codes.len(), below[0][m + 1]);

        let credit = (0..layers.len())
            .map(|u| {
                (0..code_count)
                    .map(|code| {
                        let mut rest = code;
                        let mut d = vec![0; layers.len()];
                        for s in (0..layers.len()).rev() {
                            d[s] = rest % (layers[s] + 1);
                            rest /= layers[s] + 1;
                        }
                        weights.credit(u, d[u])
                    })
                    .collect()
            })
            .collect();

        let binom = caps
            .iter()
            .map(|&cap| {
                config
                    .per()
                    .iter()
                    .map(|&pe| {
                        let success = F::one() - pe;
                        (0..=max_total)
                            .map(|n| {
                                let pmf: Vec<F> = (0..=n).map(|r| F::binomial_pmf(n, r, &success)).collect();
                                if n < cap {
                                    pmf
                                } else {
                                    let mut v = pmf[..cap as usize].to_vec();
                                    v.push(pmf[cap as usize..].iter().fold(F::zero(), |a, &b| a + b));
                                    v
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Self {
            windows: windows.clone(),
            max_total,
            users: layers.len(),
            order,
            caps,
            eq,
            below,
            offset,
            codes,
            credit,
            binom,
        }
    }

    pub fn windows(&self) -> &WindowSet {
        &self.windows
    }

    pub fn max_total(&self) -> u32 {
        self.max_total
    }

    /// Number of capped receptions in the decoding table.
    pub fn table_len(&self) -> usize {
        self.codes.len()
    }

    /// Visits every policy with total `<= max_total` (or exactly
    /// `max_total` when `exact_total`). Work is split by the count of the
    /// first transform dimension; one visitor per part is returned, in
    /// increasing order of that count.
    pub fn run<V, M>(&self, exact_total: bool, make: M) -> Vec<V>
    where
        V: PolicyVisitor<F> + Send,
        M: Fn() -> V + Sync,
    {
        (0..=self.max_total)
            .into_par_iter()
            .map(|n| {
                let mut visitor = make();
                let mut bufs = self.buffers(n);
                let mut counts = vec![0u32; self.windows.len()];
                let src = CodeSource { codes: &self.codes, credit: &self.credit };
                let mut metrics = vec![F::zero(); self.users];
                let ctx = Walk { exact_total, visitor: &mut visitor, counts: &mut counts, metrics: &mut metrics };
                self.step(0, self.max_total, n, 0, &src, &mut bufs, ctx);
                visitor
            })
            .collect()
    }

    fn buffers(&self, first: u32) -> Vec<Vec<Vec<F>>> {
        let m = self.max_total as usize;
        (0..self.windows.len())
            .map(|j| {
                let len = if j + 1 < self.windows.len() {
                    self.below[j + 1][m - first as usize + 1]
                } else {
                    0
                };
                vec![vec![F::zero(); len]; self.users]
            })
            .collect()
    }

    /// Handles dimension `j` with remaining budget `budget` and count `n`,
    /// then recurses over all counts of the next dimension.
    #[allow(clippy::too_many_arguments)]
    fn step<S: Source<F>>(
        &self,
        j: usize,
        budget: u32,
        n: u32,
        used: u32,
        src: &S,
        bufs: &mut [Vec<Vec<F>>],
        ctx: Walk<'_, F, impl PolicyVisitor<F>>,
    ) {
        let dims = self.windows.len();
        let dim = self.order[j];
        let cap = self.caps[j] as usize;
        let rmax = (n as usize).min(cap);
        let Walk { exact_total, visitor, counts, metrics } = ctx;
        counts[dim] = n;

        if j + 1 == dims {
            if exact_total && n != budget {
                counts[dim] = 0;
                return;
            }
            for (u, m) in metrics.iter_mut().enumerate() {
                let b = &self.binom[j][u][n as usize];
                *m = (0..=rmax).fold(F::zero(), |acc, r| acc + b[r] * src.at(u, self.offset[j][r][r]));
            }
            visitor.visit(used + n, counts, metrics);
            counts[dim] = 0;
            return;
        }

        let child_budget = budget - n;
        let cb = child_budget as usize;
        let len = self.below[j + 1][cb + 1];
        let (cur, deeper) = bufs.split_at_mut(1);
        let child = &mut cur[0];
        for table in child.iter_mut() {
            table[..len].iter_mut().for_each(|x| *x = F::zero());
        }
        let below = &self.below[j + 1][..=cb];
        let eq = &self.eq[j + 1][..=cb];
        // `metrics` doubles as scratch for the per-user coefficients; it is
        // only read at the leaves.
        let coef = &mut *metrics;
        for r in 0..=rmax {
            for (u, c) in coef.iter_mut().enumerate() {
                *c = self.binom[j][u][n as usize][r];
            }
            if coef.iter().all(|c| *c == F::zero()) {
                continue;
            }
            let offsets = &self.offset[j][r][r..=r + cb];
            for ((&dst, &l), &start) in below.iter().zip(eq).zip(offsets) {
                if l == 0 {
                    continue;
                }
                for (u, &c) in coef.iter().enumerate() {
                    if c != F::zero() {
                        src.axpy(u, c, start, &mut child[u][dst..dst + l]);
                    }
                }
            }
        }
        let next = TableSource { tables: &cur[0] };
        for m in 0..=child_budget {
            let ctx = Walk { exact_total, visitor: &mut *visitor, counts: &mut *counts, metrics: &mut *metrics };
            self.step(j + 1, child_budget, m, used + n, &next, deeper, ctx);
        }
        counts[dim] = 0;
    }
}

struct Walk<'a, F, V> {
    exact_total: bool,
    visitor: &'a mut V,
    counts: &'a mut [u32],
    metrics: &'a mut [F],
}

trait Source<F> {
    fn at(&self, user: usize, idx: usize) -> F;
    fn axpy(&self, user: usize, coef: F, start: usize, out: &mut [F]);
}

struct CodeSource<'a, F> {
    codes: &'a [u16],
    credit: &'a [Vec<F>],
}

impl<F: Float> Source<F> for CodeSource<'_, F> {
    #[inline]
    fn at(&self, user: usize, idx: usize) -> F {
        self.credit[user][usize::from(self.codes[idx])]
    }

    #[inline]
    fn axpy(&self, user: usize, coef: F, start: usize, out: &mut [F]) {
        let credit = &self.credit[user];
        let len = out.len();
        for (o, &c) in out.iter_mut().zip(&self.codes[start..start + len]) {
            *o = *o + coef * credit[usize::from(c)];
        }
    }
}

struct TableSource<'a, F> {
    tables: &'a [Vec<F>],
}

impl<F: Float> Source<F> for TableSource<'_, F> {
    #[inline]
    fn at(&self, user: usize, idx: usize) -> F {
        self.tables[user][idx]
    }

    #[inline]
    fn axpy(&self, user: usize, coef: F, start: usize, out: &mut [F]) {
        let len = out.len();
        for (o, &x) in out.iter_mut().zip(&self.tables[user][start..start + len]) {
            *o = *o + coef * x;
        }
    }
}

/// Calls `f` on every vector with `v[j] <= caps[j]` and sum `total`, in
/// lexicographic order.
fn for_each_with_sum(caps: &[u32], total: u32, v: &mut Vec<u32>, j: usize, f: &mut impl FnMut(&[u32])) {
    if j + 1 == caps.len() {
        if total <= caps[j] {
            v[j] = total;
            f(v);
        }
        return;
    }
    let rest_cap: u32 = caps[j + 1..].iter().sum();
    let lo = total.saturating_sub(rest_cap);
    for r in lo..=caps[j].min(total) {
        v[j] = r;
        for_each_with_sum(caps, total - r, v, j + 1, f);
    }
    v[j] = 0;
}
