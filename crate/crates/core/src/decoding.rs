//! Highest decodable layer of a user, by the window-sweep rule and by an
//! explicit finite-field rank check.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, WindowError};
use crate::gf::{EchelonBasis, PrimeField};
use crate::lattice::{WindowIndex, WindowSet};
use crate::scalar::Probability;
use crate::stream::SystemConfig;

/// Received coded packets per window; absent windows count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Reception {
    counts: BTreeMap<WindowIndex, u32>,
}

impl Reception {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the count of `w`; zero removes the entry.
    pub fn set(&mut self, w: WindowIndex, count: u32) {
        if count == 0 {
            self.counts.remove(&w);
        } else {
            self.counts.insert(w, count);
        }
    }

    pub fn with(mut self, w: WindowIndex, count: u32) -> Self {
        self.set(w, count);
        self
    }

    pub fn get(&self, w: &WindowIndex) -> u32 {
        self.counts.get(w).copied().unwrap_or(0)
    }

    /// Nonzero entries in lexicographic window order.
    pub fn iter(&self) -> impl Iterator<Item = (&WindowIndex, u32)> {
        self.counts.iter().map(|(w, &c)| (w, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn check<P: Probability>(&self, config: &SystemConfig<P>) -> Result<(), WindowError> {
        self.counts.keys().try_for_each(|w| w.check(config))
    }

    /// Counts aligned with `windows`, or `None` if the reception uses a
    /// window outside the set.
    pub fn aligned(&self, windows: &WindowSet) -> Option<Vec<u32>> {
        let mut out = vec![0; windows.len()];
        for (w, c) in self.iter() {
            out[windows.position(w)?] = c;
        }
        Some(out)
    }
}

/// The window-sweep decoder, compiled for one window set.
///
/// Windows are visited in lexicographic order (stream 1 outermost). A window
/// that still holds received packets decodes when the packets left in its
/// down-set cover the source packets not yet decoded inside it. A decode
/// consumes the whole down-set, marks the layer prefixes of every stream as
/// known, and restarts the sweep. The sweep stops when a full pass decodes
/// nothing.
#[derive(Debug, Clone)]
pub struct SweepDecoder {
    streams: usize,
    layers: Vec<usize>,
    /// `cumulative[s][l]`: packets of stream `s` in layers `1..=l`.
    cumulative: Vec<Vec<u32>>,
    windows: Vec<Vec<u16>>,
    /// Positions of the windows contained in each window, itself included.
    down_sets: Vec<Vec<usize>>,
}

/// Outcome of one sweep-decoder run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepTrace {
    /// Highest decoded layer of every stream.
    pub layers: Vec<usize>,
    /// Number of times the sweep restarted after a decode.
    pub restarts: usize,
}

impl SweepDecoder {
    pub fn new<P: Probability>(config: &SystemConfig<P>, windows: &WindowSet) -> Self {
        let idx: Vec<Vec<u16>> = windows.iter().map(|w| w.indices().to_vec()).collect();
        let down_sets = windows
            .iter()
            .map(|b| (0..windows.len()).filter(|&a| windows.get(a).is_subset(b)).collect())
            .collect();
        Self {
            streams: config.stream_count(),
            layers: config.layer_counts(),
            cumulative: config
                .streams()
                .iter()
                .map(|s| (0..=s.layer_count()).map(|l| s.cumulative(l)).collect())
                .collect(),
            windows: idx,
            down_sets,
        }
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    /// Runs the sweep to completion and reports every stream's layer.
    ///
    /// Running past the point where one user's layer reaches its maximum
    /// never lowers that user's result, so this matches the per-user
    /// early-exit variant for all users at once.
    pub fn decode_all(&self, counts: &[u32]) -> SweepTrace {
        self.run(counts, None)
    }

    /// The per-user rule with its early exit once the user's top layer is
    /// reached.
    pub fn decode_user(&self, user: usize, counts: &[u32]) -> usize {
        self.run(counts, Some(user)).layers[user]
    }

    /// Writes the decoded layer of every stream into `out` without
    /// allocating; `work` must have one slot per window.
    pub fn decode_into(&self, counts: &[u32], work: &mut [u32], prefix: &mut [usize], out: &mut [usize]) {
        work.copy_from_slice(counts);
        prefix.iter_mut().for_each(|z| *z = 0);
        out.iter_mut().for_each(|d| *d = 0);
        self.sweep(work, prefix, out, None);
    }

    fn run(&self, counts: &[u32], stop_user: Option<usize>) -> SweepTrace {
        assert_eq!(counts.len(), self.windows.len());
        let mut work = counts.to_vec();
        let mut prefix = vec![0usize; self.streams];
        let mut layers = vec![0usize; self.streams];
        let restarts = self.sweep(&mut work, &mut prefix, &mut layers, stop_user);
        SweepTrace { layers, restarts }
    }

    fn sweep(
        &self,
        work: &mut [u32],
        prefix: &mut [usize],
        layers: &mut [usize],
        stop_user: Option<usize>,
    ) -> usize {
        let mut restarts = 0;
        'restart: loop {
            for (j, w) in self.windows.iter().enumerate() {
                if work[j] == 0 {
                    continue;
                }
                let have: u64 = self.down_sets[j].iter().map(|&a| u64::from(work[a])).sum();
                let need: u64 = (0..self.streams)
                    .map(|s| {
                        let c = &self.cumulative[s];
                        u64::from(c[usize::from(w[s])].saturating_sub(c[prefix[s]]))
                    })
                    .sum();
                if have >= need {
                    for s in 0..self.streams {
                        let l = usize::from(w[s]);
                        layers[s] = layers[s].max(l);
                        prefix[s] = prefix[s].max(l);
                    }
                    if let Some(u) = stop_user {
                        if layers[u] == self.layers[u] {
                            return restarts;
                        }
                    }
                    for &a in &self.down_sets[j] {
                        work[a] = 0;
                    }
                    restarts += 1;
                    continue 'restart;
                }
            }
            return restarts;
        }
    }
}

fn check_user<P: Probability>(user: usize, config: &SystemConfig<P>) -> Result<(), ModelError> {
    if user >= config.stream_count() {
        return Err(ModelError::UserOutOfRange { user: user + 1, streams: config.stream_count() });
    }
    Ok(())
}

fn support_set<P: Probability>(
    config: &SystemConfig<P>,
    reception: &Reception,
) -> Result<Option<WindowSet>, ModelError> {
    reception.check(config)?;
    if reception.total() == 0 {
        return Ok(None);
    }
    Ok(Some(WindowSet::new(config, reception.iter().map(|(w, _)| w.clone()))?))
}

/// Highest decodable layer of user `user` (0-based) by the window sweep.
pub fn highest_decodable_layer<P: Probability>(
    user: usize,
    config: &SystemConfig<P>,
    reception: &Reception,
) -> Result<usize, ModelError> {
    check_user(user, config)?;
    let Some(set) = support_set(config, reception)? else {
        return Ok(0);
    };
    let counts = reception.aligned(&set).expect("support");
    Ok(SweepDecoder::new(config, &set).decode_user(user, &counts))
}

/// Packet columns of every (stream, layer) block in a flat coefficient row.
#[derive(Debug, Clone)]
pub struct PacketLayout {
    /// `offsets[s][l]`: first column of layer `l + 1` of stream `s`.
    offsets: Vec<Vec<usize>>,
    total: usize,
}

impl PacketLayout {
    pub fn new<P: Probability>(config: &SystemConfig<P>) -> Self {
        let mut offsets = Vec::new();
        let mut next = 0usize;
        for s in config.streams() {
            let mut o = Vec::new();
            for &k in s.packets_per_layer() {
                o.push(next);
                next += k as usize;
            }
            o.push(next);
            offsets.push(o);
        }
        Self { offsets, total: next }
    }

    pub fn columns(&self) -> usize {
        self.total
    }

    /// Columns of stream `s` layers `1..=layer`.
    pub fn prefix(&self, s: usize, layer: usize) -> std::ops::Range<usize> {
        self.offsets[s][0]..self.offsets[s][layer]
    }

    /// Columns holding the source packets of window `w`.
    pub fn window_columns<'a>(&'a self, w: &'a WindowIndex) -> impl Iterator<Item = usize> + 'a {
        (0..self.offsets.len()).flat_map(move |s| self.prefix(s, w.layer(s)))
    }

    /// Highest layer of stream `s` whose packets are all recoverable.
    pub fn decoded_layer(&self, basis: &EchelonBasis, s: usize) -> usize {
        let layers = self.offsets[s].len() - 1;
        let mut best = 0;
        for l in 1..=layers {
            let block = self.offsets[s][l - 1]..self.offsets[s][l];
            if block.into_iter().all(|c| basis.contains_unit(c)) {
                best = l;
            } else {
                break;
            }
        }
        best
    }
}

/// Fills `row` with a random coded packet of window `w`: uniform nonzero
/// coefficients on the window's packets, zero elsewhere.
pub fn random_coded_row<R: Rng>(
    rng: &mut R,
    field: &PrimeField,
    layout: &PacketLayout,
    w: &WindowIndex,
    row: &mut [u64],
) {
    row.iter_mut().for_each(|x| *x = 0);
    for c in layout.window_columns(w) {
        row[c] = rng.gen_range(1..field.order());
    }
}

/// Decodable layer of `user` found by instantiating random coded rows and
/// reducing them over GF(`field_order`), maximised over `trials` fresh
/// instantiations.
pub fn oracle_decodable_layer<P: Probability>(
    user: usize,
    config: &SystemConfig<P>,
    reception: &Reception,
    field_order: u64,
    trials: u32,
    seed: u64,
) -> Result<usize, ModelError> {
    check_user(user, config)?;
    let field = PrimeField::large(field_order)?;
    if trials == 0 {
        return Err(ModelError::NoTrials);
    }
    reception.check(config)?;
    let layout = PacketLayout::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = EchelonBasis::new(field, layout.columns());
    let mut row = vec![0u64; layout.columns()];
    let mut best = 0;
    for trial in 0..trials {
        rng.set_stream(u64::from(trial));
        basis.clear();
        for (w, count) in reception.iter() {
            for _ in 0..count {
                random_coded_row(&mut rng, &field, &layout, w, &mut row);
                basis.insert(&row);
            }
        }
        best = best.max(layout.decoded_layer(&basis, user));
    }
    Ok(best)
}
