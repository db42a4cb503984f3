//! Event sequences and two-source mixing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack under which a descending pair is treated as round-off and
/// re-sorted instead of rejected.
const ORDER_NOISE: f64 = 1e-9;

/// Ordered event times on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    id: String,
    horizon: f64,
    times: Vec<f64>,
}

impl EventSequence {
    /// Validates raw input.
    ///
    /// Pairs that descend by no more than `1e-9 * max(1, horizon)` are
    /// treated as numerical noise and stably sorted; larger descents are
    /// rejected with [`Error::Unordered`].
    pub fn new(id: impl Into<String>, horizon: f64, mut times: Vec<f64>) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        for (index, &time) in times.iter().enumerate() {
            if !time.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if time <= 0.0 || time > horizon {
                return Err(Error::TimeOutOfRange { index, time, horizon });
            }
        }
        let slack = ORDER_NOISE * horizon.max(1.0);
        let mut needs_sort = false;
        for i in 1..times.len() {
            let drop = times[i - 1] - times[i];
            if drop > slack {
                return Err(Error::Unordered(i));
            }
            if drop > 0.0 {
                needs_sort = true;
            }
        }
        if needs_sort {
            times.sort_by(f64::total_cmp);
        }
        Ok(Self { id: id.into(), horizon, times })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Treats every event as coming from process 1.
    pub fn to_labeled(&self) -> LabeledSequence {
        LabeledSequence {
            horizon: self.horizon,
            times: self.times.clone(),
            labels: vec![Label::One; self.times.len()],
        }
    }
}

/// Free-function form of [`EventSequence::new`].
pub fn validate_sequence(id: &str, horizon: f64, times: Vec<f64>) -> Result<EventSequence> {
    EventSequence::new(id, horizon, times)
}

/// Source process of an event in a mixed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    One,
    Two,
}

impl Label {
    /// 0 for process 1, 1 for process 2.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Label::One => 0,
            Label::Two => 1,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::One => Label::Two,
            Label::Two => Label::One,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Time-sorted union of two sequences with source labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    horizon: f64,
    times: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledSequence {
    /// Builds a labeled sequence from already ordered `(time, label)` pairs.
    pub fn new(horizon: f64, events: Vec<(f64, Label)>) -> Result<Self> {
        let times: Vec<f64> = events.iter().map(|e| e.0).collect();
        // reuse the unlabeled checks, but require exact ordering here
        EventSequence::new("", horizon, times.clone())?;
        if let Some(i) = (1..times.len()).find(|&i| times[i] < times[i - 1]) {
            return Err(Error::Unordered(i));
        }
        Ok(Self {
            horizon,
            times,
            labels: events.into_iter().map(|e| e.1).collect(),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, Label)> + '_ {
        self.times.iter().copied().zip(self.labels.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(N1, N2)`.
    pub fn counts(&self) -> (usize, usize) {
        let n1 = self.labels.iter().filter(|&&l| l == Label::One).count();
        (n1, self.labels.len() - n1)
    }

    /// Same times with every label flipped.
    pub fn swap_labels(&self) -> Self {
        Self {
            horizon: self.horizon,
            times: self.times.clone(),
            labels: self.labels.iter().map(|l| l.other()).collect(),
        }
    }

    /// Same times with the given labels; used for label-permutation checks.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), got: labels.len() });
        }
        Ok(Self { horizon: self.horizon, times: self.times.clone(), labels })
    }

    /// Events of one source as an unlabeled sequence.
    pub fn component(&self, label: Label, id: &str) -> EventSequence {
        let times = self
            .events()
            .filter(|e| e.1 == label)
            .map(|e| e.0)
            .collect();
        EventSequence { id: id.to_owned(), horizon: self.horizon, times }
    }
}

/// Merges two sequences on the same horizon. Ties keep process 1 first.
pub fn merge_sequences(s1: &EventSequence, s2: &EventSequence) -> Result<LabeledSequence> {
    if s1.horizon != s2.horizon {
        return Err(Error::HorizonMismatch(s1.horizon, s2.horizon));
    }
    let (a, b) = (s1.times(), s2.times());
    let mut times = Vec::with_capacity(a.len() + b.len());
    let mut labels = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] <= b[j]) {
            times.push(a[i]);
            labels.push(Label::One);
            i += 1;
        } else {
            times.push(b[j]);
            labels.push(Label::Two);
            j += 1;
        }
    }
    Ok(LabeledSequence { horizon: s1.horizon, times, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: f64, times: &[f64]) -> EventSequence {
        EventSequence::new("s", t, times.to_vec()).unwrap()
    }

    #[test]
    fn accepts_well_formed_input() {
        let s = validate_sequence("a", 1.0, vec![0.2, 0.7]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.id(), "a");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            validate_sequence("a", 1.0, vec![1.5]),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(matches!(validate_sequence("a", 0.0, vec![]), Err(Error::NonPositiveHorizon(_))));
        assert!(matches!(validate_sequence("a", 1.0, vec![0.0]), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(validate_sequence("a", 1.0, vec![f64::NAN]), Err(Error::NonFinite(0))));
        assert!(matches!(validate_sequence("a", f64::INFINITY, vec![]), Err(Error::NonPositiveHorizon(_))));
        assert!(matches!(validate_sequence("a", 1.0, vec![0.5, 0.3]), Err(Error::Unordered(1))));
    }

    #[test]
    fn horizon_endpoint_is_inclusive() {
        assert_eq!(seq(1.0, &[1.0]).len(), 1);
    }

    #[test]
    fn noise_level_disorder_is_sorted() {
        let s = validate_sequence("a", 1.0, vec![0.5, 0.5 - 1e-13, 0.6]).unwrap();
        assert_eq!(s.times(), &[0.5 - 1e-13, 0.5, 0.6]);
    }

    #[test]
    fn merge_interleaves_with_labels() {
        let m = merge_sequences(&seq(3.0, &[1.0]), &seq(3.0, &[2.0])).unwrap();
        assert_eq!(m.events().collect::<Vec<_>>(), vec![(1.0, Label::One), (2.0, Label::Two)]);
    }

    #[test]
    fn merge_with_empty_keeps_everything_as_process_one() {
        let s1 = seq(3.0, &[0.5, 1.0, 2.5]);
        let m = merge_sequences(&s1, &seq(3.0, &[])).unwrap();
        assert_eq!(m.counts(), (3, 0));
        assert_eq!(m.times(), s1.times());
    }

    #[test]
    fn merge_ties_put_process_one_first() {
        let m = merge_sequences(&seq(1.0, &[0.5]), &seq(1.0, &[0.5])).unwrap();
        assert_eq!(m.events().collect::<Vec<_>>(), vec![(0.5, Label::One), (0.5, Label::Two)]);
    }

    #[test]
    fn merge_requires_equal_horizons() {
        assert!(matches!(
            merge_sequences(&seq(1.0, &[]), &seq(2.0, &[])),
            Err(Error::HorizonMismatch(..))
        ));
    }

    #[test]
    fn components_round_trip() {
        let s1 = seq(4.0, &[0.1, 1.0, 3.0]);
        let s2 = seq(4.0, &[0.5, 1.0]);
        let m = merge_sequences(&s1, &s2).unwrap();
        assert_eq!(m.component(Label::One, "x").times(), s1.times());
        assert_eq!(m.component(Label::Two, "y").times(), s2.times());
        let (n1, n2) = m.counts();
        assert_eq!(n1 + n2, m.len());
    }
}
