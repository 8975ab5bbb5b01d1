//! The four episode samplers.

use std::collections::HashSet;

use rand::RngCore;

use crate::item::Item;
use crate::rng;

use super::{DataError, DatasetSource, Episode, QueryMix, TaskKind, TaskSpec};

/// Dispatch on the task kind.
pub fn sample_episode(
    r: &mut impl RngCore,
    spec: &TaskSpec,
    source: &DatasetSource,
) -> Result<Episode, DataError> {
    spec.validate()?;
    let mix = spec.query_mix();
    match spec.kind {
        TaskKind::ClassBased => {
            sample_class_based(r, source, spec.set_size, spec.query_count, mix)
        }
        TaskKind::Exponential => sample_exponential(
            r,
            source,
            spec.set_size,
            spec.query_count,
            spec.decay,
            mix,
        ),
        TaskKind::Uniform => sample_uniform(r, source, spec.set_size, spec.query_count, mix),
        TaskKind::DatabaseRange => {
            sample_database_range(r, source, spec.set_size, spec.query_count, mix)
        }
    }
}

fn member_keys(storage: &[Item]) -> HashSet<Vec<u8>> {
    storage.iter().map(|i| i.key_bytes().into_owned()).collect()
}

fn finish_episode(
    r: &mut impl RngCore,
    storage: Vec<Item>,
    mut queries: Vec<Item>,
) -> Episode {
    // Shuffle query order so positives and negatives interleave.
    for i in (1..queries.len()).rev() {
        queries.swap(i, rng::index(r, i + 1));
    }
    let members = member_keys(&storage);
    let labels = queries
        .iter()
        .map(|q| members.contains(q.key_bytes().as_ref()))
        .collect();
    Episode {
        storage,
        queries,
        labels,
    }
}

/// Queries for the balanced mix: positives uniform from the stored set,
/// negatives drawn by `draw_negative` (None when no negative exists).
fn balanced_queries(
    r: &mut impl RngCore,
    storage: &[Item],
    t: usize,
    fraction: f64,
    mut draw_negative: impl FnMut(&mut dyn RngCore) -> Option<Item>,
) -> Vec<Item> {
    let n_pos = ((t as f64) * fraction).round() as usize;
    let mut queries = Vec::with_capacity(t);
    for i in 0..t {
        if i < n_pos {
            queries.push(storage[rng::index(r, storage.len())].clone());
        } else {
            match draw_negative(r) {
                Some(item) => queries.push(item),
                // no non-member exists: every query is positive
                None => queries.push(storage[rng::index(r, storage.len())].clone()),
            }
        }
    }
    queries
}

/// Rejection sampler for uniform non-members of the stored set.
fn uniform_non_member<'a>(
    source: &'a DatasetSource,
    members: &'a HashSet<Vec<u8>>,
) -> impl FnMut(&mut dyn RngCore) -> Option<Item> + 'a {
    let exhausted = members.len() >= source.len();
    move |r| {
        if exhausted {
            return None;
        }
        loop {
            let item = source.item(rng::index(r, source.len()));
            if !members.contains(item.key_bytes().as_ref()) {
                return Some(item.clone());
            }
        }
    }
}

/// n distinct indices via a partial Fisher-Yates pass over the pool.
fn sample_without_replacement(
    r: &mut impl RngCore,
    pool: &[usize],
    n: usize,
) -> Vec<usize> {
    debug_assert!(n <= pool.len());
    let mut pool = pool.to_vec();
    for i in 0..n {
        let j = i + rng::index(r, pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool
}

/// Storage from one random class with enough items; positive queries from
/// the set, negatives from other classes.
pub fn sample_class_based(
    r: &mut impl RngCore,
    source: &DatasetSource,
    n: usize,
    t: usize,
    mix: QueryMix,
) -> Result<Episode, DataError> {
    let buckets = source.class_indices()?;
    let eligible: Vec<usize> = (0..buckets.len())
        .filter(|&c| buckets[c].len() >= n)
        .collect();
    if eligible.is_empty() {
        return Err(DataError::ClassTooSmall {
            needed: n,
            largest: buckets.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    let class = eligible[rng::index(r, eligible.len())];
    let storage: Vec<Item> = sample_without_replacement(r, &buckets[class], n)
        .into_iter()
        .map(|i| source.item(i).clone())
        .collect();

    let labels = source.labels().expect("class_indices verified labels");
    let other_exists = labels.iter().any(|&l| l != class);
    let fraction = match mix {
        QueryMix::Balanced(f) => f,
        QueryMix::UniformOverUniverse => 0.5,
    };
    let queries = balanced_queries(r, &storage, t, fraction, |r| {
        if !other_exists {
            return None;
        }
        loop {
            let idx = rng::index(r, source.len());
            if labels[idx] != class {
                return Some(source.item(idx).clone());
            }
        }
    });
    Ok(finish_episode(r, storage, queries))
}

/// Storage drawn without replacement with weight decay^rank over the
/// source's fixed permutation.
pub fn sample_exponential(
    r: &mut impl RngCore,
    source: &DatasetSource,
    n: usize,
    t: usize,
    decay: f64,
    mix: QueryMix,
) -> Result<Episode, DataError> {
    if source.len() < n {
        return Err(DataError::UniverseTooSmall {
            need: n,
            have: source.len(),
        });
    }
    // Weighted sampling without replacement: item with weight w gets key
    // ln(u)/w; the n largest keys win.
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(source.len());
    for (rank, &idx) in source.permutation().iter().enumerate() {
        let weight = decay.powi(rank as i32);
        let u = loop {
            let u = rng::uniform(r);
            if u > 0.0 {
                break u;
            }
        };
        keyed.push((u.ln() / weight, idx));
    }
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let storage: Vec<Item> = keyed[..n]
        .iter()
        .map(|&(_, idx)| source.item(idx).clone())
        .collect();

    let queries = queries_for_mix(r, source, &storage, t, mix);
    Ok(finish_episode(r, storage, queries))
}

/// Storage uniform without replacement.
pub fn sample_uniform(
    r: &mut impl RngCore,
    source: &DatasetSource,
    n: usize,
    t: usize,
    mix: QueryMix,
) -> Result<Episode, DataError> {
    if source.len() < n {
        return Err(DataError::UniverseTooSmall {
            need: n,
            have: source.len(),
        });
    }
    let pool: Vec<usize> = (0..source.len()).collect();
    let storage: Vec<Item> = sample_without_replacement(r, &pool, n)
        .into_iter()
        .map(|i| source.item(i).clone())
        .collect();
    let queries = queries_for_mix(r, source, &storage, t, mix);
    Ok(finish_episode(r, storage, queries))
}

/// Contiguous run of the sorted token universe from a random start index.
pub fn sample_database_range(
    r: &mut impl RngCore,
    source: &DatasetSource,
    n: usize,
    t: usize,
    mix: QueryMix,
) -> Result<Episode, DataError> {
    if !source.is_sorted_tokens() {
        return Err(DataError::BadSpec(
            "database_range sampling needs a sorted token universe".to_string(),
        ));
    }
    if source.len() < n {
        return Err(DataError::UniverseTooSmall {
            need: n,
            have: source.len(),
        });
    }
    let start = rng::index(r, source.len() - n + 1);
    let storage: Vec<Item> = (start..start + n)
        .map(|i| source.item(i).clone())
        .collect();
    let queries = queries_for_mix(r, source, &storage, t, mix);
    Ok(finish_episode(r, storage, queries))
}

fn queries_for_mix(
    r: &mut impl RngCore,
    source: &DatasetSource,
    storage: &[Item],
    t: usize,
    mix: QueryMix,
) -> Vec<Item> {
    match mix {
        QueryMix::Balanced(f) => {
            let members = member_keys(storage);
            let mut draw = uniform_non_member(source, &members);
            balanced_queries(r, storage, t, f, &mut draw)
        }
        QueryMix::UniformOverUniverse => (0..t)
            .map(|_| source.item(rng::index(r, source.len())).clone())
            .collect(),
    }
}
