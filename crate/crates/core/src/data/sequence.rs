use super::InteractionEvent;

/// Time-ordered exposures of one `(user, item)` pair.
///
/// `positive_times` holds the times of exposures with a listen; the history
/// visible at exposure `j` is the prefix `positive_times[..positives_before[j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSequence {
    pub user: usize,
    pub item: usize,
    pub times: Vec<f64>,
    pub labels: Vec<bool>,
    positive_times: Vec<f64>,
    positives_before: Vec<usize>,
}

impl PairSequence {
    /// `events` must belong to a single pair and be sorted by time.
    pub fn from_events(events: &[InteractionEvent]) -> Self {
        let first = events.first().expect("pair sequence needs at least one event");
        let mut positive_times = Vec::new();
        let mut positives_before = Vec::with_capacity(events.len());
        for e in events {
            debug_assert!(e.user == first.user && e.item == first.item);
            positives_before.push(positive_times.len());
            if e.listened {
                positive_times.push(e.t);
            }
        }
        PairSequence {
            user: first.user,
            item: first.item,
            times: events.iter().map(|e| e.t).collect(),
            labels: events.iter().map(|e| e.listened).collect(),
            positive_times,
            positives_before,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Past listen times strictly before exposure `j`.
    pub fn history_at(&self, j: usize) -> &[f64] {
        &self.positive_times[..self.positives_before[j]]
    }

    pub fn positive_times(&self) -> &[f64] {
        &self.positive_times
    }
}
