use std::collections::BTreeSet;

/// Novel (long-tail) items: the bottom half by training count.
///
/// `counts[i]` belongs to id `i + 1`. Items are ranked by count descending
/// with ties broken by ascending id; the last `floor(n / 2)` are returned.
pub fn popularity_split(counts: &[u64]) -> BTreeSet<u32> {
    let mut order: Vec<u32> = (1..=counts.len() as u32).collect();
    order.sort_by(|&a, &b| {
        counts[b as usize - 1]
            .cmp(&counts[a as usize - 1])
            .then(a.cmp(&b))
    });
    let head = counts.len() - counts.len() / 2;
    order[head..].iter().copied().collect()
}
