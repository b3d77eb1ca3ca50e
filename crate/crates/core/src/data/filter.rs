use std::collections::VecDeque;

use super::Dataset;
use crate::error::{Error, Result};

/// Drops every pair whose first exposure falls after
/// `t_min + fraction * (t_max - t_min)`, then re-densifies indices.
pub fn window_trim(dataset: &Dataset, fraction: f64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!("window fraction must be in (0, 1], got {fraction}")));
    }
    let (t_min, t_max) = dataset
        .events()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.t), hi.max(e.t)));
    let cutoff = t_min + fraction * (t_max - t_min);

    let mut keep_pair = Vec::new();
    for seq in dataset.events().chunk_by(|a, b| a.user == b.user && a.item == b.item) {
        keep_pair.push(((seq[0].user, seq[0].item), seq[0].t <= cutoff));
    }
    // events are sorted by pair, so the lookup can use binary search
    Ok(dataset
        .filter_events(|e| {
            let idx = keep_pair
                .binary_search_by(|(pair, _)| pair.cmp(&(e.user, e.item)))
                .expect("pair present");
            keep_pair[idx].1
        })
        .compact())
}

/// Recursively removes users with fewer than `k_item` distinct items and items
/// with fewer than `k_user` distinct users until both conditions hold.
///
/// The result may be empty. Indices are re-densified.
pub fn kcore_filter(dataset: &Dataset, k_item: usize, k_user: usize) -> Result<Dataset> {
    if k_item == 0 || k_user == 0 {
        return Err(Error::Validation("k-core thresholds must be at least 1".into()));
    }
    let pairs = dataset.pairs();
    let mut user_items: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_users()];
    let mut item_users: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_items()];
    for &(u, i) in &pairs {
        user_items[u].push(i);
        item_users[i].push(u);
    }
    let mut user_deg: Vec<usize> = user_items.iter().map(Vec::len).collect();
    let mut item_deg: Vec<usize> = item_users.iter().map(Vec::len).collect();
    let mut user_alive = vec![true; dataset.n_users()];
    let mut item_alive = vec![true; dataset.n_items()];

    enum Node {
        User(usize),
        Item(usize),
    }
    let mut queue = VecDeque::new();
    for (u, &d) in user_deg.iter().enumerate() {
        if d < k_item {
            user_alive[u] = false;
            queue.push_back(Node::User(u));
        }
    }
    for (i, &d) in item_deg.iter().enumerate() {
        if d < k_user {
            item_alive[i] = false;
            queue.push_back(Node::Item(i));
        }
    }
    while let Some(node) = queue.pop_front() {
        match node {
            Node::User(u) => {
                for &i in &user_items[u] {
                    if item_alive[i] {
                        item_deg[i] -= 1;
                        if item_deg[i] < k_user {
                            item_alive[i] = false;
                            queue.push_back(Node::Item(i));
                        }
                    }
                }
            }
            Node::Item(i) => {
                for &u in &item_users[i] {
                    if user_alive[u] {
                        user_deg[u] -= 1;
                        if user_deg[u] < k_item {
                            user_alive[u] = false;
                            queue.push_back(Node::User(u));
                        }
                    }
                }
            }
        }
    }
    Ok(dataset
        .filter_events(|e| user_alive[e.user] && item_alive[e.item])
        .compact())
}
