//! The expanding-window lattice.
//!
//! Window `(l_1, .., l_N)` holds every packet of layers `1..=l_i` of each
//! stream `i`. Windows are kept as index tuples; packet membership is always
//! derived from the configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::WindowError;
use crate::scalar::Probability;
use crate::stream::SystemConfig;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowIndex(Vec<u16>);

impl WindowIndex {
    /// Builds a window without checking it against a configuration.
    pub fn new(indices: impl Into<Vec<u16>>) -> Result<Self, WindowError> {
        let indices = indices.into();
        if indices.iter().all(|&l| l == 0) {
            return Err(WindowError::AllZero);
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[u16] {
        &self.0
    }

    /// Highest layer of stream `i` inside the window.
    pub fn layer(&self, i: usize) -> usize {
        usize::from(self.0[i])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// Checks arity and index ranges against `config`.
    pub fn check<P: Probability>(&self, config: &SystemConfig<P>) -> Result<(), WindowError> {
        if self.arity() != config.stream_count() {
            return Err(WindowError::Arity {
                window: self.to_string(),
                expected: config.stream_count(),
                found: self.arity(),
            });
        }
        for (i, s) in config.streams().iter().enumerate() {
            if self.layer(i) > s.layer_count() {
                return Err(WindowError::OutOfRange {
                    window: self.to_string(),
                    stream: i + 1,
                    index: self.layer(i),
                    layers: s.layer_count(),
                });
            }
        }
        Ok(())
    }

    /// Number of source packets in the window.
    pub fn size<P: Probability>(&self, config: &SystemConfig<P>) -> u32 {
        config
            .streams()
            .iter()
            .enumerate()
            .map(|(i, s)| s.cumulative(self.layer(i)))
            .sum()
    }

    /// True iff every packet of `self` is also in `other`.
    pub fn is_subset(&self, other: &WindowIndex) -> bool {
        self.arity() == other.arity() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Intra-session windows touch exactly one stream.
    pub fn is_intra(&self) -> bool {
        self.0.iter().filter(|&&l| l != 0).count() == 1
    }
}

impl fmt::Display for WindowIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, l) in self.0.iter().enumerate() {
            if j > 0 {
                f.write_str(".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for WindowIndex {
    type Err = WindowError;

    /// Parses the dotted form `l1.l2...lN`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let indices = s
            .split('.')
            .map(|p| p.trim().parse::<u16>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| WindowError::Arity { window: s.to_string(), expected: 0, found: 0 })?;
        Self::new(indices)
    }
}

/// Free-function form of [`WindowIndex::size`].
pub fn window_size<P: Probability>(w: &WindowIndex, config: &SystemConfig<P>) -> u32 {
    w.size(config)
}

pub fn is_subset(a: &WindowIndex, b: &WindowIndex) -> bool {
    a.is_subset(b)
}

pub fn is_intra(w: &WindowIndex) -> bool {
    w.is_intra()
}

/// Distinct windows in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowSet {
    windows: Vec<WindowIndex>,
}

impl WindowSet {
    /// Validates `windows` against `config` and sorts them canonically.
    pub fn new<P: Probability>(
        config: &SystemConfig<P>,
        windows: impl IntoIterator<Item = WindowIndex>,
    ) -> Result<Self, WindowError> {
        let mut windows: Vec<WindowIndex> = windows.into_iter().collect();
        if windows.is_empty() {
            return Err(WindowError::Empty);
        }
        for w in &windows {
            w.check(config)?;
        }
        windows.sort();
        if let Some(p) = windows.windows(2).find(|p| p[0] == p[1]) {
            return Err(WindowError::Duplicate(p[0].to_string()));
        }
        Ok(Self { windows })
    }

    /// The whole lattice: `prod(L_i + 1) - 1` windows.
    pub fn full<P: Probability>(config: &SystemConfig<P>) -> Self {
        Self { windows: enumerate_all_windows(config) }
    }

    /// The `sum(L_i)` intra-session windows.
    pub fn intra<P: Probability>(config: &SystemConfig<P>) -> Self {
        Self::full(config).intra_members()
    }

    /// Intra-session windows plus `(1,1,0), (1,0,1), (0,1,1), (1,1,1),
    /// (2,2,0), (2,2,1)`, for three streams with layer counts `(2, 2, 1)`.
    pub fn n3_subset<P: Probability>(config: &SystemConfig<P>) -> Result<Self, WindowError> {
        let layers = config.layer_counts();
        if layers != [2, 2, 1] {
            return Err(WindowError::ShapeMismatch(layers));
        }
        let inter = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1], [2, 2, 0], [2, 2, 1]]
            .into_iter()
            .map(|w| WindowIndex::new(w.to_vec()).expect("nonzero"));
        Self::new(config, Self::intra(config).windows.into_iter().chain(inter))
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WindowIndex> {
        self.windows.iter()
    }

    pub fn as_slice(&self) -> &[WindowIndex] {
        &self.windows
    }

    pub fn get(&self, pos: usize) -> &WindowIndex {
        &self.windows[pos]
    }

    pub fn position(&self, w: &WindowIndex) -> Option<usize> {
        self.windows.binary_search(w).ok()
    }

    pub fn contains(&self, w: &WindowIndex) -> bool {
        self.position(w).is_some()
    }

    pub fn intra_members(&self) -> Self {
        Self { windows: self.windows.iter().filter(|w| w.is_intra()).cloned().collect() }
    }

    pub fn is_subset_of(&self, other: &WindowSet) -> bool {
        self.windows.iter().all(|w| other.contains(w))
    }
}

impl<'a> IntoIterator for &'a WindowSet {
    type Item = &'a WindowIndex;
    type IntoIter = std::slice::Iter<'a, WindowIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.windows.iter()
    }
}

/// Every nonzero point of `[0, L_1] x .. x [0, L_N]`, lexicographically.
pub fn enumerate_all_windows<P: Probability>(config: &SystemConfig<P>) -> Vec<WindowIndex> {
    let layers = config.layer_counts();
    let mut out = Vec::new();
    let mut cur = vec![0u16; layers.len()];
    loop {
        if cur.iter().any(|&l| l != 0) {
            out.push(WindowIndex(cur.clone()));
        }
        // odometer, last stream fastest
        let mut j = layers.len();
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if usize::from(cur[j]) < layers[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(k: &[&[u32]]) -> SystemConfig {
        SystemConfig::from_raw(
            k.iter().map(|s| s.to_vec()).collect(),
            vec![0.2; k.len()],
            10,
        )
        .unwrap()
    }

    fn w(i: &[u16]) -> WindowIndex {
        WindowIndex::new(i.to_vec()).unwrap()
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(WindowSet::full(&cfg(&[&[1, 1], &[1, 1], &[1]])).len(), 17);
        let one = WindowSet::full(&cfg(&[&[1, 1, 1]]));
        assert_eq!(one.as_slice(), &[w(&[1]), w(&[2]), w(&[3])]);
        assert_eq!(WindowSet::full(&cfg(&[&[3, 3], &[3, 3]])).len(), 8);
    }

    #[test]
    fn sizes() {
        let c = cfg(&[&[3, 3], &[6]]);
        assert_eq!(w(&[2, 1]).size(&c), 12);
        assert_eq!(w(&[1, 0]).size(&c), 3);
        let c3 = cfg(&[&[2, 3], &[3, 3], &[4]]);
        assert_eq!(window_size(&w(&[1, 1, 1]), &c3), 9);
    }

    #[test]
    fn subset_and_intra() {
        assert!(is_subset(&w(&[0, 1]), &w(&[2, 3])));
        assert!(is_subset(&w(&[1, 2]), &w(&[1, 2])));
        assert!(!is_subset(&w(&[1, 0]), &w(&[0, 1])));
        assert!(is_intra(&w(&[0, 3])));
        assert!(!is_intra(&w(&[1, 1])));
        assert!(is_intra(&w(&[2, 0, 0])));
    }

    #[test]
    fn three_stream_subset() {
        let c = cfg(&[&[2, 3], &[3, 3], &[4]]);
        let s = WindowSet::n3_subset(&c).unwrap();
        assert_eq!(s.len(), 11);
        assert!(s.contains(&w(&[1, 1, 1])));
        assert_eq!(s.intra_members().len(), 5);
        assert!(s.intra_members().is_subset_of(&s));
        assert_eq!(
            WindowSet::n3_subset(&cfg(&[&[1], &[1]])).unwrap_err(),
            WindowError::ShapeMismatch(vec![1, 1])
        );
    }

    #[test]
    fn window_set_validation() {
        let c = cfg(&[&[1], &[1]]);
        assert!(matches!(WindowSet::new(&c, [w(&[2, 0])]), Err(WindowError::OutOfRange { .. })));
        assert!(matches!(WindowSet::new(&c, [w(&[1])]), Err(WindowError::Arity { .. })));
        assert!(matches!(
            WindowSet::new(&c, [w(&[1, 0]), w(&[1, 0])]),
            Err(WindowError::Duplicate(_))
        ));
        assert_eq!(WindowSet::new(&c, []).unwrap_err(), WindowError::Empty);
        assert_eq!(WindowIndex::new(vec![0, 0]).unwrap_err(), WindowError::AllZero);
        assert_eq!("1.0.2".parse::<WindowIndex>().unwrap(), w(&[1, 0, 2]));
        assert_eq!(w(&[1, 0, 2]).to_string(), "1.0.2");
    }

    fn arb_config() -> impl Strategy<Value = SystemConfig> {
        prop::collection::vec(prop::collection::vec(1u32..4, 1..4), 1..4).prop_map(|k| {
            let n = k.len();
            SystemConfig::from_raw(k, vec![0.1; n], 5).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lattice_invariants(c in arb_config()) {
            let all = WindowSet::full(&c);
            let expected: usize = c.layer_counts().iter().map(|l| l + 1).product::<usize>() - 1;
            prop_assert_eq!(all.len(), expected);
            prop_assert!(all.as_slice().windows(2).all(|p| p[0] < p[1]));
            let intra: usize = c.layer_counts().iter().sum();
            prop_assert_eq!(all.intra_members().len(), intra);
            for a in &all {
                prop_assert!(a.size(&c) >= 1);
                for b in &all {
                    if a.is_subset(b) {
                        prop_assert!(a.size(&c) <= b.size(&c));
                        prop_assert!(a <= b);
                        if b.is_subset(a) {
                            prop_assert_eq!(a, b);
                        }
                    }
                    // containment of the implied packet sets
                    let packets_contained = (0..c.stream_count())
                        .all(|i| c.stream(i).cumulative(a.layer(i)) <= c.stream(i).cumulative(b.layer(i)));
                    prop_assert_eq!(a.is_subset(b), packets_contained);
                }
            }
        }
    }
}
