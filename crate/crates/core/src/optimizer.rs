//! Exhaustive policy search, Pareto frontiers and baselines.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use num_traits::Float;
use rayon::prelude::*;

use crate::analytics::{layer_distributions, mean, user_metric, LayerDistribution, Policy};
use crate::error::ModelError;
use crate::lattice::WindowSet;
use crate::policy_space::{PolicySpace, PolicyVisitor};
use crate::scalar::Probability;
use crate::stream::{MetricWeights, SystemConfig};

/// Default bound on the number of policies a search may visit.
pub const DEFAULT_SEARCH_CAP: u128 = 10_000_000;

/// Metric differences up to this size count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A policy with its per-user metrics and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation<P = f64> {
    pub policy: Policy,
    pub per_user_eta: Vec<P>,
    pub aggregate: P,
}

impl<P: Probability> PolicyEvaluation<P> {
    pub fn new(policy: Policy, per_user_eta: Vec<P>) -> Self {
        let aggregate = mean(&per_user_eta);
        Self { policy, per_user_eta, aggregate }
    }

    /// Evaluates `policy` directly.
    pub fn evaluate(config: &SystemConfig<P>, policy: &Policy, weights: &MetricWeights<P>) -> Result<Self, ModelError> {
        let etas = layer_distributions(config, policy)?
            .iter()
            .enumerate()
            .map(|(u, d)| user_metric(d, weights.stream(u)))
            .collect::<Result<_, _>>()?;
        Ok(Self::new(policy.clone(), etas))
    }
}

/// Number of ways to split `total` into `parts` ordered nonnegative parts.
pub fn composition_count(total: u32, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    let k = (parts - 1) as u128;
    let n = u128::from(total) + k;
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Compositions of a total into a fixed number of parts, in decreasing
/// lexicographic order: `(n, 0, ..)` first, `(.., 0, n)` last.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(total: u32, parts: usize) -> Self {
        let current = match parts {
            0 if total == 0 => Some(Vec::new()),
            0 => None,
            _ => {
                let mut v = vec![0; parts];
                v[0] = total;
                Some(v)
            }
        };
        Self { current }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let last = out.len().saturating_sub(1);
        if let Some(i) = (0..last).rev().find(|&i| out[i] > 0) {
            let mut v = out.clone();
            let tail: u32 = v[i + 1..].iter().sum();
            v[i] -= 1;
            v[i + 1..].iter_mut().for_each(|x| *x = 0);
            v[i + 1] = tail + 1;
            self.current = Some(v);
        }
        Some(out)
    }
}

/// Every policy over `windows` with the given total, in decreasing
/// lexicographic order of the count vectors.
pub fn enumerate_policies(total: u32, windows: &WindowSet) -> impl Iterator<Item = Policy> + '_ {
    Compositions::new(total, windows.len()).map(move |c| Policy::from_counts(windows, &c))
}

fn check_cap(required: u128, cap: u128) -> Result<(), ModelError> {
    if required > cap {
        Err(ModelError::CapExceeded { required, cap })
    } else {
        Ok(())
    }
}

/// Whether `(a, ca)` should replace `(b, cb)` as the best candidate: a
/// strictly larger value, or a tie with a lexicographically smaller policy.
fn prefer<P: Probability>(a: &P, ca: &[u32], b: &P, cb: &[u32]) -> bool {
    let diff = a.as_f64() - b.as_f64();
    if diff > TIE_TOLERANCE {
        true
    } else if diff < -TIE_TOLERANCE {
        false
    } else {
        ca < cb
    }
}

/// Best policy with total `config.budget()` by evaluating every policy
/// directly. Works for any scalar, including exact rationals; see
/// [`optimize_up_to`] for the fast floating-point search.
pub fn optimize<P: Probability>(
    config: &SystemConfig<P>,
    windows: &WindowSet,
    weights: &MetricWeights<P>,
    cap: u128,
) -> Result<PolicyEvaluation<P>, ModelError> {
    let total = config.budget();
    check_cap(composition_count(total, windows.len()), cap)?;
    let best = (0..=total)
        .into_par_iter()
        .map(|first| -> Result<Option<(P, Vec<u32>, Vec<P>)>, ModelError> {
            let mut best: Option<(P, Vec<u32>, Vec<P>)> = None;
            for rest in Compositions::new(total - first, windows.len() - 1) {
                let mut counts = Vec::with_capacity(windows.len());
                counts.push(first);
                counts.extend(rest);
                let eval = PolicyEvaluation::evaluate(config, &Policy::from_counts(windows, &counts), weights)?;
                if best.as_ref().map_or(true, |(v, c, _)| prefer(&eval.aggregate, &counts, v, c)) {
                    best = Some((eval.aggregate, counts, eval.per_user_eta));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .reduce(|b, a| if prefer(&a.0, &a.1, &b.0, &b.1) { a } else { b })
        .expect("at least one policy");
    Ok(PolicyEvaluation { policy: Policy::from_counts(windows, &best.1), per_user_eta: best.2, aggregate: best.0 })
}

#[derive(Clone)]
struct Candidate<F> {
    value: F,
    counts: Vec<u32>,
    etas: Vec<F>,
}

fn offer<F: Float + Probability>(slot: &mut Option<Candidate<F>>, value: F, counts: &[u32], etas: &[F]) {
    if slot.as_ref().map_or(true, |b| prefer(&value, counts, &b.value, &b.counts)) {
        *slot = Some(Candidate { value, counts: counts.to_vec(), etas: etas.to_vec() });
    }
}

/// Tracks the best policy for every total, optionally also among policies
/// supported on a subset of the windows.
struct BestPerTotal<F> {
    best: Vec<Option<Candidate<F>>>,
    outside_subset: Option<Vec<bool>>,
    best_in_subset: Vec<Option<Candidate<F>>>,
}

impl<F: Float + Probability> PolicyVisitor<F> for BestPerTotal<F> {
    fn visit(&mut self, total: u32, counts: &[u32], metrics: &[F]) {
        let value = mean(metrics);
        offer(&mut self.best[total as usize], value, counts, metrics);
        if let Some(outside) = &self.outside_subset {
            if counts.iter().zip(outside).all(|(&c, &o)| !o || c == 0) {
                offer(&mut self.best_in_subset[total as usize], value, counts, metrics);
            }
        }
    }
}

fn merge_slots<F: Float + Probability>(into: &mut [Option<Candidate<F>>], from: Vec<Option<Candidate<F>>>) {
    for (slot, c) in into.iter_mut().zip(from).filter_map(|(s, c)| c.map(|c| (s, c))) {
        offer(slot, c.value, &c.counts, &c.etas);
    }
}

fn to_evaluation<F>(windows: &WindowSet, c: Candidate<F>) -> PolicyEvaluation<F> {
    PolicyEvaluation { policy: Policy::from_counts(windows, &c.counts), per_user_eta: c.etas, aggregate: c.value }
}

/// Best policies for every total `0..=max_total`, plus the best among
/// policies supported on `subset` when given.
#[allow(clippy::type_complexity)]
fn search_totals<F>(
    config: &SystemConfig<F>,
    windows: &WindowSet,
    weights: &MetricWeights<F>,
    max_total: u32,
    subset: Option<&WindowSet>,
    cap: u128,
) -> Result<(Vec<PolicyEvaluation<F>>, Option<Vec<PolicyEvaluation<F>>>), ModelError>
where
    F: Float + Probability + Send + Sync,
{
    check_cap(composition_count(max_total, windows.len() + 1), cap)?;
    let outside: Option<Vec<bool>> = subset.map(|s| windows.iter().map(|w| !s.contains(w)).collect());
    let slots = max_total as usize + 1;
    let space = PolicySpace::new(config, windows, weights, max_total);
    let parts = space.run(false, || BestPerTotal {
        best: vec![None; slots],
        outside_subset: outside.clone(),
        best_in_subset: vec![None; slots],
    });
    let mut best = vec![None; slots];
    let mut best_in_subset = vec![None; slots];
    for p in parts {
        merge_slots(&mut best, p.best);
        merge_slots(&mut best_in_subset, p.best_in_subset);
    }
    let collect = |v: Vec<Option<Candidate<F>>>| -> Vec<PolicyEvaluation<F>> {
        v.into_iter().map(|c| to_evaluation(windows, c.expect("every total has a policy"))).collect()
    };
    let sub = subset.map(|_| collect(best_in_subset));
    Ok((collect(best), sub))
}

/// Best policy for every total in `0..=max_total`, indexed by total, from a
/// single shared search over the window set. The cap bounds the number of
/// policies visited over all totals.
pub fn optimize_up_to<F>(
    config: &SystemConfig<F>,
    windows: &WindowSet,
    weights: &MetricWeights<F>,
    max_total: u32,
    cap: u128,
) -> Result<Vec<PolicyEvaluation<F>>, ModelError>
where
    F: Float + Probability + Send + Sync,
{
    Ok(search_totals(config, windows, weights, max_total, None, cap)?.0)
}

/// `a` weakly dominates `b`: at least as good for every user, within the
/// tie tolerance.
fn dominates<F: Float + Probability>(a: &[F], b: &[F]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.as_f64() >= y.as_f64() - TIE_TOLERANCE)
}

/// Incrementally maintained set of non-dominated points.
struct Frontier<F> {
    points: Vec<Candidate<F>>,
}

impl<F: Float + Probability> Frontier<F> {
    fn insert(&mut self, value: F, counts: &[u32], etas: &[F]) {
        for p in &mut self.points {
            if dominates(&p.etas, etas) {
                if dominates(etas, &p.etas) && counts < &p.counts[..] {
                    *p = Candidate { value, counts: counts.to_vec(), etas: etas.to_vec() };
                }
                return;
            }
        }
        self.points.retain(|p| !dominates(etas, &p.etas));
        self.points.push(Candidate { value, counts: counts.to_vec(), etas: etas.to_vec() });
    }

    fn into_sorted(mut self) -> Vec<Candidate<F>> {
        self.points.sort_by(|a, b| {
            for (x, y) in a.etas.iter().zip(&b.etas) {
                match y.partial_cmp(x) {
                    Some(Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            a.counts.cmp(&b.counts)
        });
        self.points
    }
}

impl<F: Float + Probability> PolicyVisitor<F> for Frontier<F> {
    fn visit(&mut self, _total: u32, counts: &[u32], metrics: &[F]) {
        self.insert(mean(metrics), counts, metrics);
    }
}

/// Keeps the non-dominated entries of `points` (one representative per
/// metric vector, the lexicographically smallest policy), sorted by the
/// first user's metric descending.
pub fn pareto_filter<F: Float + Probability>(points: &[PolicyEvaluation<F>], windows: &WindowSet) -> Vec<PolicyEvaluation<F>> {
    let mut f = Frontier { points: Vec::new() };
    for p in points {
        let counts = p.policy.aligned(windows).expect("policy over the window set");
        f.insert(p.aggregate, &counts, &p.per_user_eta);
    }
    f.into_sorted().into_iter().map(|c| to_evaluation(windows, c)).collect()
}

/// Pareto-optimal metric vectors over all policies with total
/// `config.budget()`, one representative policy each, sorted by the first
/// user's metric descending.
pub fn pareto_frontier<F>(
    config: &SystemConfig<F>,
    windows: &WindowSet,
    weights: &MetricWeights<F>,
    cap: u128,
) -> Result<Vec<PolicyEvaluation<F>>, ModelError>
where
    F: Float + Probability + Send + Sync,
{
    let total = config.budget();
    check_cap(composition_count(total, windows.len()), cap)?;
    let space = PolicySpace::new(config, windows, weights, total);
    let mut frontier = Frontier { points: Vec::new() };
    for part in space.run(true, || Frontier { points: Vec::new() }) {
        for c in part.points {
            frontier.insert(c.value, &c.counts, &c.etas);
        }
    }
    Ok(frontier.into_sorted().into_iter().map(|c| to_evaluation(windows, c)).collect())
}

/// Transmissions of original (uncoded) packets per stream and layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UncodedAllocation {
    counts: Vec<Vec<u32>>,
}

impl UncodedAllocation {
    pub fn new<P: Probability>(config: &SystemConfig<P>, counts: Vec<Vec<u32>>) -> Result<Self, ModelError> {
        let layers = config.layer_counts();
        let found: Vec<usize> = counts.iter().map(Vec::len).collect();
        if found != layers {
            return Err(ModelError::LengthMismatch {
                expected: layers.iter().sum(),
                found: found.iter().sum(),
            });
        }
        Ok(Self { counts })
    }

    fn from_flat(layers: &[usize], flat: &[u32]) -> Self {
        let mut rest = flat;
        let counts = layers
            .iter()
            .map(|&l| {
                let (head, tail) = rest.split_at(l);
                rest = tail;
                head.to_vec()
            })
            .collect();
        Self { counts }
    }

    /// `counts()[i][l]`: transmissions for layer `l + 1` of stream `i + 1`.
    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    fn flat(&self) -> Vec<u32> {
        self.counts.iter().flatten().copied().collect()
    }
}

/// Metrics of an uncoded allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct UncodedEvaluation<P = f64> {
    pub allocation: UncodedAllocation,
    pub distributions: Vec<LayerDistribution<P>>,
    pub per_user_eta: Vec<P>,
    pub aggregate: P,
}

/// Layer distribution of one user when the transmissions of each layer are
/// spread round-robin over its packets and a layer needs every packet of
/// itself and all lower layers.
fn uncoded_distribution<P: Probability>(k: &[u32], n: &[u32], pe: &P) -> LayerDistribution<P> {
    let mut at_least = Vec::with_capacity(k.len() + 1);
    let mut acc = P::one();
    at_least.push(acc.clone());
    for (&packets, &sent) in k.iter().zip(n) {
        let base = sent / packets;
        let extra = sent % packets;
        let lost_base = P::one() - pe.powu(base);
        let lost_extra = P::one() - pe.powu(base + 1);
        acc = acc * lost_base.powu(packets - extra) * lost_extra.powu(extra);
        at_least.push(acc.clone());
    }
    let probs = (0..=k.len())
        .map(|l| {
            if l == k.len() {
                at_least[l].clone()
            } else {
                at_least[l].clone() - at_least[l + 1].clone()
            }
        })
        .collect();
    LayerDistribution::new(probs)
}

/// Evaluates an uncoded allocation exactly.
pub fn uncoded_uep_evaluate<P: Probability>(
    config: &SystemConfig<P>,
    alloc: &UncodedAllocation,
    weights: &MetricWeights<P>,
) -> Result<UncodedEvaluation<P>, ModelError> {
    if alloc.counts.len() != config.stream_count() {
        return Err(ModelError::LengthMismatch { expected: config.stream_count(), found: alloc.counts.len() });
    }
    let distributions: Vec<LayerDistribution<P>> = config
        .streams()
        .iter()
        .zip(&alloc.counts)
        .zip(config.per())
        .map(|((s, n), pe)| uncoded_distribution(s.packets_per_layer(), n, pe))
        .collect();
    let per_user_eta = distributions
        .iter()
        .enumerate()
        .map(|(u, d)| user_metric(d, weights.stream(u)))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = mean(&per_user_eta);
    Ok(UncodedEvaluation { allocation: alloc.clone(), distributions, per_user_eta, aggregate })
}

/// Every uncoded allocation with total `config.budget()`, in decreasing
/// lexicographic order of the flattened (stream, layer) counts.
pub fn enumerate_allocations<P: Probability>(config: &SystemConfig<P>) -> impl Iterator<Item = UncodedAllocation> {
    let layers = config.layer_counts();
    let slots = layers.iter().sum();
    Compositions::new(config.budget(), slots).map(move |flat| UncodedAllocation::from_flat(&layers, &flat))
}

fn uncoded_all<P: Probability>(
    config: &SystemConfig<P>,
    weights: &MetricWeights<P>,
    cap: u128,
) -> Result<Vec<UncodedEvaluation<P>>, ModelError> {
    let slots: usize = config.layer_counts().iter().sum();
    check_cap(composition_count(config.budget(), slots), cap)?;
    enumerate_allocations(config).map(|a| uncoded_uep_evaluate(config, &a, weights)).collect()
}

/// Best uncoded allocation with total `config.budget()`; ties go to the
/// lexicographically smallest flattened allocation.
pub fn uncoded_uep_optimize<P: Probability>(
    config: &SystemConfig<P>,
    weights: &MetricWeights<P>,
    cap: u128,
) -> Result<UncodedEvaluation<P>, ModelError> {
    let mut best: Option<(UncodedEvaluation<P>, Vec<u32>)> = None;
    for e in uncoded_all(config, weights, cap)? {
        let flat = e.allocation.flat();
        if best.as_ref().map_or(true, |(b, bf)| prefer(&e.aggregate, &flat, &b.aggregate, bf)) {
            best = Some((e, flat));
        }
    }
    Ok(best.expect("at least one allocation").0)
}

/// Pareto-optimal uncoded allocations with total `config.budget()`.
pub fn uncoded_pareto_frontier<F: Float + Probability>(
    config: &SystemConfig<F>,
    weights: &MetricWeights<F>,
    cap: u128,
) -> Result<Vec<UncodedEvaluation<F>>, ModelError> {
    let all = uncoded_all(config, weights, cap)?;
    let mut f = Frontier { points: Vec::new() };
    for (j, e) in all.iter().enumerate() {
        // the index stands in for the policy; enumeration order is fixed
        f.insert(e.aggregate, &[j as u32], &e.per_user_eta);
    }
    Ok(f.into_sorted().into_iter().map(|c| all[c.counts[0] as usize].clone()).collect())
}

/// Controls for [`improvement_sweep`].
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub range: RangeInclusive<u32>,
    pub cap: u128,
    /// Stop the joint search once the intra-only optimum proves that no
    /// larger budget can beat the maximum gain found so far.
    pub certify: bool,
    pub uncoded: bool,
}

impl SweepOptions {
    pub fn new(range: RangeInclusive<u32>) -> Self {
        Self { range, cap: DEFAULT_SEARCH_CAP, certify: true, uncoded: true }
    }
}

/// One budget of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow<F = f64> {
    pub total: u32,
    /// `None` when the joint search was not needed for this budget.
    pub inter: Option<PolicyEvaluation<F>>,
    pub intra: PolicyEvaluation<F>,
    pub uncoded: Option<UncodedEvaluation<F>>,
    /// Percentage gain over the intra optimum; `None` when not computed or
    /// when the intra optimum is zero.
    pub gain: Option<f64>,
    /// Upper bound on the gain implied by a metric of at most one.
    pub gain_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport<F = f64> {
    pub rows: Vec<SweepRow<F>>,
    /// Maximum gain over the whole range and the budget attaining it.
    pub max_gain: Option<(u32, f64)>,
    /// Largest budget for which the joint optimum was computed.
    pub searched_through: u32,
}

fn gain_percent(inter: f64, intra: f64) -> Option<f64> {
    (intra > 0.0).then(|| 100.0 * (inter - intra) / intra)
}

fn gain_bound(intra: f64) -> Option<f64> {
    gain_percent(1.0, intra)
}

/// Smallest budget in `range` beyond which every bound is at most `gain`.
fn certified_through(range: &RangeInclusive<u32>, intra: &[f64], gain: f64) -> u32 {
    let mut through = *range.start();
    for t in range.clone() {
        match gain_bound(intra[t as usize]) {
            Some(b) if b <= gain => {}
            _ => through = t,
        }
    }
    through
}

/// Optimal joint (`inter`) and single-stream (`intra`) metrics over a range
/// of budgets, with the percentage gain and its maximum.
pub fn improvement_sweep<F>(
    config: &SystemConfig<F>,
    inter: &WindowSet,
    intra: &WindowSet,
    weights: &MetricWeights<F>,
    options: &SweepOptions,
) -> Result<SweepReport<F>, ModelError>
where
    F: Float + Probability + Send + Sync,
{
    let end = *options.range.end();
    let intra_rows = optimize_up_to(config, intra, weights, end, options.cap)?;
    let intra_values: Vec<f64> = intra_rows.iter().map(|e| e.aggregate.as_f64()).collect();
    let nested = intra.is_subset_of(inter);

    let run = |through: u32| -> Result<(Vec<PolicyEvaluation<F>>, Option<Vec<PolicyEvaluation<F>>>), ModelError> {
        search_totals(config, inter, weights, through, nested.then_some(intra), options.cap)
    };
    let max_over = |joint: &[PolicyEvaluation<F>], local_intra: &Option<Vec<PolicyEvaluation<F>>>| -> f64 {
        options
            .range
            .clone()
            .filter(|&t| (t as usize) < joint.len())
            .filter_map(|t| {
                let base = local_intra.as_ref().map_or(intra_values[t as usize], |v| v[t as usize].aggregate.as_f64());
                gain_percent(joint[t as usize].aggregate.as_f64(), base)
            })
            .fold(0.0, f64::max)
    };

    // With certification, start from a cheap search up to the stream size
    // and extend it until the bound covers the rest of the range. Each
    // extension can only raise the maximum, so this settles quickly.
    let mut through = if options.certify { config.total_packets().clamp(*options.range.start(), end) } else { end };
    let (mut joint, mut local_intra) = run(through)?;
    while options.certify {
        let needed = certified_through(&options.range, &intra_values, max_over(&joint, &local_intra));
        if needed <= through {
            break;
        }
        through = needed;
        (joint, local_intra) = run(through)?;
    }

    let mut rows = Vec::new();
    let mut max_gain: Option<(u32, f64)> = None;
    for t in options.range.clone() {
        let i = t as usize;
        let searched = t <= through;
        let intra_eval = match (&local_intra, searched) {
            (Some(v), true) => v[i].clone(),
            _ => intra_rows[i].clone(),
        };
        let inter_eval = searched.then(|| joint[i].clone());
        let gain = inter_eval
            .as_ref()
            .and_then(|e| gain_percent(e.aggregate.as_f64(), intra_eval.aggregate.as_f64()));
        if let Some(g) = gain {
            if max_gain.map_or(true, |(_, m)| g > m) {
                max_gain = Some((t, g));
            }
        }
        let uncoded = if options.uncoded {
            Some(uncoded_uep_optimize(&config.with_budget(t), weights, options.cap)?)
        } else {
            None
        };
        rows.push(SweepRow {
            total: t,
            gain_bound: gain_bound(intra_eval.aggregate.as_f64()),
            inter: inter_eval,
            intra: intra_eval,
            uncoded,
            gain,
        });
    }
    Ok(SweepReport { rows, max_gain, searched_through: through })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WindowIndex;
    use num_rational::BigRational;
    use proptest::prelude::*;

    type Q = BigRational;

    fn cfg(k: &[&[u32]], per: &[f64], budget: u32) -> SystemConfig {
        SystemConfig::from_raw(k.iter().map(|s| s.to_vec()).collect(), per.to_vec(), budget).unwrap()
    }

    fn win(ix: &[u16]) -> WindowIndex {
        WindowIndex::new(ix.to_vec()).unwrap()
    }

    #[test]
    fn compositions_in_decreasing_lexicographic_order() {
        let all: Vec<_> = Compositions::new(2, 2).collect();
        assert_eq!(all, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let three: Vec<_> = Compositions::new(2, 3).collect();
        assert_eq!(three, vec![vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 2, 0], vec![0, 1, 1], vec![0, 0, 2]]);
        assert_eq!(Compositions::new(0, 4).collect::<Vec<_>>(), vec![vec![0; 4]]);
    }

    #[test]
    fn composition_counts_match_closed_form() {
        assert_eq!(composition_count(17, 8), 346_104);
        assert_eq!(Compositions::new(17, 8).count(), 346_104);
        for n in 0..=20 {
            for w in 1..=8usize {
                if composition_count(n, w) < 20_000 {
                    assert_eq!(Compositions::new(n, w).count() as u128, composition_count(n, w), "{n} {w}");
                }
            }
        }
    }

    #[test]
    fn enumerate_policies_covers_each_once() {
        let c = cfg(&[&[1, 1]], &[0.5], 2);
        let w = WindowSet::full(&c);
        let all: Vec<Policy> = enumerate_policies(3, &w).collect();
        assert_eq!(all.len(), 4);
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        assert!(all.iter().all(|p| p.total() == 3));
        assert_eq!(enumerate_policies(0, &w).next(), Some(Policy::new()));
    }

    #[test]
    fn optimize_single_window_example() {
        let c = SystemConfig::<Q>::from_raw(vec![vec![1]], vec![Q::new(1.into(), 2.into())], 2).unwrap();
        let w = WindowSet::full(&c);
        let best = optimize(&c, &w, &MetricWeights::throughput(&c), DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(best.aggregate, Q::new(3.into(), 4.into()));
    }

    #[test]
    fn optimize_lossless_picks_top_window() {
        let c = SystemConfig::<Q>::from_raw(vec![vec![1, 1], vec![2]], vec![Q::from_integer(0.into()); 2], 4).unwrap();
        let w = WindowSet::full(&c);
        let best = optimize(&c, &w, &MetricWeights::throughput(&c), DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(best.aggregate, Q::from_integer(1.into()));
        assert_eq!(best.policy, Policy::new().with(win(&[2, 1]), 4));
    }

    #[test]
    fn zero_budget_scores_zero() {
        let c = cfg(&[&[2], &[1, 1]], &[0.1, 0.2], 0);
        let w = WindowSet::full(&c);
        let best = optimize(&c, &w, &MetricWeights::throughput(&c), DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(best.aggregate, 0.0);
        assert_eq!(best.policy, Policy::new());
    }

    #[test]
    fn cap_is_reported() {
        let c = cfg(&[&[1, 1], &[1, 1]], &[0.1, 0.2], 10);
        let w = WindowSet::full(&c);
        let err = optimize(&c, &w, &MetricWeights::throughput(&c), 100).unwrap_err();
        assert!(matches!(err, ModelError::CapExceeded { required: 19448, cap: 100 }));
    }

    #[test]
    fn fast_search_agrees_with_direct_search() {
        let c = cfg(&[&[1, 2], &[2]], &[0.25, 0.1], 0);
        let w = WindowSet::full(&c);
        let weights = MetricWeights::throughput(&c);
        let fast = optimize_up_to(&c, &w, &weights, 8, DEFAULT_SEARCH_CAP).unwrap();
        for (t, f) in fast.iter().enumerate() {
            let direct = optimize(&c.with_budget(t as u32), &w, &weights, DEFAULT_SEARCH_CAP).unwrap();
            assert!((f.aggregate - direct.aggregate).abs() < 1e-12);
            assert_eq!(f.policy, direct.policy, "total {t}");
        }
    }

    #[test]
    fn optimum_is_nondecreasing_and_dominates_intra() {
        let c = cfg(&[&[1, 1], &[2]], &[0.3, 0.2], 0);
        let weights = MetricWeights::throughput(&c);
        let full = optimize_up_to(&c, &WindowSet::full(&c), &weights, 9, DEFAULT_SEARCH_CAP).unwrap();
        let intra = optimize_up_to(&c, &WindowSet::intra(&c), &weights, 9, DEFAULT_SEARCH_CAP).unwrap();
        for t in 1..full.len() {
            assert!(full[t].aggregate >= full[t - 1].aggregate - 1e-12);
            assert!(full[t].aggregate >= intra[t].aggregate - 1e-12);
        }
    }

    #[test]
    fn pareto_examples() {
        let c = cfg(&[&[1], &[1]], &[0.1, 0.1], 1);
        let w = WindowSet::new(&c, [win(&[1, 1])]).unwrap();
        let weights = MetricWeights::throughput(&c);
        let f = pareto_frontier(&c, &w, &weights, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(f.len(), 1);

        let full = WindowSet::full(&c);
        let mk = |a: f64, b: f64, counts: &[u32]| PolicyEvaluation::new(Policy::from_counts(&full, counts), vec![a, b]);
        let kept = pareto_filter(&[mk(0.9, 0.1, &[1, 0, 0]), mk(0.1, 0.9, &[0, 1, 0])], &full);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].per_user_eta, vec![0.9, 0.1]);
        let kept = pareto_filter(&[mk(0.5, 0.5, &[1, 0, 0]), mk(0.6, 0.6, &[0, 1, 0])], &full);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].per_user_eta, vec![0.6, 0.6]);
        let kept = pareto_filter(&[mk(0.5, 0.5, &[1, 0, 0]), mk(0.5, 0.5, &[0, 1, 0])], &full);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].policy, Policy::from_counts(&full, &[0, 1, 0]));
    }

    #[test]
    fn pareto_points_reevaluate_consistently() {
        let c = cfg(&[&[1, 1], &[1, 1]], &[0.2, 0.3], 5);
        let w = WindowSet::full(&c);
        let weights = MetricWeights::throughput(&c);
        let f = pareto_frontier(&c, &w, &weights, DEFAULT_SEARCH_CAP).unwrap();
        assert!(!f.is_empty());
        for e in &f {
            let again = PolicyEvaluation::evaluate(&c, &e.policy, &weights).unwrap();
            for (a, b) in e.per_user_eta.iter().zip(&again.per_user_eta) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for (i, a) in f.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                if i != j {
                    assert!(!dominates(&a.per_user_eta, &b.per_user_eta));
                }
            }
        }
        for pair in f.windows(2) {
            assert!(pair[0].per_user_eta[0] >= pair[1].per_user_eta[0]);
        }
    }

    #[test]
    fn uncoded_examples() {
        let half = Q::new(1.into(), 2.into());
        let c = SystemConfig::<Q>::from_raw(vec![vec![1]], vec![half.clone()], 2).unwrap();
        let w = MetricWeights::throughput(&c);
        let e = uncoded_uep_evaluate(&c, &UncodedAllocation::new(&c, vec![vec![2]]).unwrap(), &w).unwrap();
        assert_eq!(e.distributions[0].probs()[1], Q::new(3.into(), 4.into()));

        let lossless = cfg(&[&[2, 1]], &[0.0], 3);
        let lw = MetricWeights::throughput(&lossless);
        let e = uncoded_uep_evaluate(&lossless, &UncodedAllocation::new(&lossless, vec![vec![2, 1]]).unwrap(), &lw).unwrap();
        assert_eq!(e.aggregate, 1.0);
        let e = uncoded_uep_evaluate(&lossless, &UncodedAllocation::new(&lossless, vec![vec![1, 2]]).unwrap(), &lw).unwrap();
        assert_eq!(e.aggregate, 0.0);
    }

    #[test]
    fn uncoded_optimum_two_layers() {
        // (2,0) and (1,1) both score 3/8; (0,2) scores 0.
        let half = Q::new(1.into(), 2.into());
        let c = SystemConfig::<Q>::from_raw(vec![vec![1, 1]], vec![half], 2).unwrap();
        let w = MetricWeights::throughput(&c);
        let scores: Vec<Q> = enumerate_allocations(&c).map(|a| uncoded_uep_evaluate(&c, &a, &w).unwrap().aggregate).collect();
        assert_eq!(scores, vec![Q::new(3.into(), 8.into()), Q::new(3.into(), 8.into()), Q::from_integer(0.into())]);
        let best = uncoded_uep_optimize(&c, &w, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(best.allocation.counts(), &[vec![1, 1]]);
        assert_eq!(best.aggregate, Q::new(3.into(), 8.into()));
    }

    #[test]
    fn uncoded_trivial_cases() {
        let c = cfg(&[&[1]], &[0.4], 5);
        let w = MetricWeights::throughput(&c);
        let best = uncoded_uep_optimize(&c, &w, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(best.allocation.counts(), &[vec![5]]);
        let zero = uncoded_uep_optimize(&c.with_budget(0), &w, DEFAULT_SEARCH_CAP).unwrap();
        assert_eq!(zero.aggregate, 0.0);
    }

    #[test]
    fn sweep_gains_are_nonnegative_and_certified() {
        let c = cfg(&[&[1, 1], &[1, 1]], &[0.2, 0.2], 0);
        let weights = MetricWeights::throughput(&c);
        let full = WindowSet::full(&c);
        let intra = WindowSet::intra(&c);
        let mut opts = SweepOptions::new(1..=12);
        opts.certify = false;
        let exact = improvement_sweep(&c, &full, &intra, &weights, &opts).unwrap();
        assert!(exact.rows.iter().all(|r| r.gain.unwrap() >= 0.0));
        assert!(exact.rows.iter().all(|r| r.inter.as_ref().unwrap().aggregate >= r.intra.aggregate));
        opts.certify = true;
        let cert = improvement_sweep(&c, &full, &intra, &weights, &opts).unwrap();
        assert_eq!(cert.max_gain, exact.max_gain);
        for r in cert.rows.iter().filter(|r| r.inter.is_none()) {
            assert!(r.gain_bound.unwrap() <= cert.max_gain.unwrap().1);
            let e = &exact.rows[(r.total - 1) as usize];
            assert!(e.gain.unwrap() <= r.gain_bound.unwrap() + 1e-9);
        }
    }

    #[test]
    fn sweep_saturates_far_above_the_stream_size() {
        let c = cfg(&[&[1, 1], &[2]], &[0.2, 0.2], 0);
        let weights = MetricWeights::throughput(&c);
        let top = 10 * c.total_packets();
        let mut opts = SweepOptions::new(top..=top);
        opts.certify = false;
        opts.uncoded = false;
        let r = improvement_sweep(&c, &WindowSet::full(&c), &WindowSet::intra(&c), &weights, &opts).unwrap();
        let row = &r.rows[0];
        assert!(row.inter.as_ref().unwrap().aggregate > 1.0 - 1e-6);
        assert!(row.intra.aggregate > 1.0 - 1e-6);
        assert!(row.gain.unwrap() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn superset_windows_never_lose(p1 in 0.0f64..0.9, p2 in 0.0f64..0.9, t in 0u32..7) {
            let c = cfg(&[&[1, 1], &[1]], &[p1, p2], t);
            let weights = MetricWeights::throughput(&c);
            let full = optimize(&c, &WindowSet::full(&c), &weights, DEFAULT_SEARCH_CAP).unwrap();
            let intra = optimize(&c, &WindowSet::intra(&c), &weights, DEFAULT_SEARCH_CAP).unwrap();
            prop_assert!(full.aggregate >= intra.aggregate - 1e-12);
            prop_assert!((full.aggregate - mean(&full.per_user_eta)).abs() <= 1e-12);
        }

        #[test]
        fn swapping_identical_streams_swaps_metrics(p in 0.05f64..0.6, t in 1u32..6) {
            let c = cfg(&[&[1, 1], &[1, 1]], &[p, p], t);
            let weights = MetricWeights::throughput(&c);
            let w = WindowSet::full(&c);
            let best = optimize(&c, &w, &weights, DEFAULT_SEARCH_CAP).unwrap();
            let mut swapped = Policy::new();
            for (win, n) in best.policy.iter() {
                let ix = win.indices();
                swapped.set(WindowIndex::new(vec![ix[1], ix[0]]).unwrap(), n);
            }
            let again = PolicyEvaluation::evaluate(&c, &swapped, &weights).unwrap();
            prop_assert!((again.per_user_eta[0] - best.per_user_eta[1]).abs() < 1e-12);
            prop_assert!((again.per_user_eta[1] - best.per_user_eta[0]).abs() < 1e-12);
            prop_assert!((again.aggregate - best.aggregate).abs() < 1e-12);
        }
    }
}
