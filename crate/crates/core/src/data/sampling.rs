use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::pair;
use crate::error::{Error, Result};

/// Draw `count` distinct unordered pairs uniformly among node pairs that are
/// neither self-pairs nor in `forbidden`.
pub fn sample_non_edges<R: Rng>(
    n: usize,
    count: usize,
    forbidden: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let total = n * n.saturating_sub(1) / 2;
    let blocked = forbidden.iter().filter(|&&(a, b)| a != b && a < n && b < n).count();
    let available = total.saturating_sub(blocked);
    if count > available {
        return Err(Error::TooDense { wanted: count });
    }
    if count * 2 > available {
        let mut all: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !forbidden.contains(p))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let p = pair(a, b);
        if forbidden.contains(&p) || !chosen.insert(p) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn avoids_forbidden_and_is_distinct() {
        let forbidden: HashSet<_> = [(0, 1), (1, 2), (2, 3)].into_iter().collect();
        let mut rng = seed::rng(3);
        let s = sample_non_edges(6, 10, &forbidden, &mut rng).unwrap();
        assert_eq!(s.len(), 10);
        let uniq: HashSet<_> = s.iter().collect();
        assert_eq!(uniq.len(), 10);
        assert!(s.iter().all(|p| !forbidden.contains(p) && p.0 < p.1));
    }

    #[test]
    fn too_dense() {
        let forbidden: HashSet<_> = [(0, 1), (0, 2)].into_iter().collect();
        let mut rng = seed::rng(3);
        assert_eq!(sample_non_edges(3, 1, &forbidden, &mut rng).unwrap(), vec![(1, 2)]);
        assert!(matches!(sample_non_edges(3, 2, &forbidden, &mut rng), Err(Error::TooDense { .. })));
    }
}
