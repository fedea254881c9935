//! Block-structured synthetic dataset generator.
//!
//! Users and categories are partitioned into aligned blocks; each user
//! draws most interactions from items of its own block, so learned
//! models have both a popularity signal and a diversity axis to trade
//! off. Playtimes follow a Pareto tail with a configurable share of
//! exact zeros.

use std::collections::BTreeSet;

use crate::dataset::{RawInteraction, RawItem};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub n_blocks: usize,
    pub interactions_per_user: usize,
    /// Probability that a draw comes from the user's own block.
    pub affinity: f64,
    /// Probability that an interaction has zero playtime.
    pub zero_share: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_users: usize, n_items: usize, n_categories: usize, seed: u64) -> SynthConfig {
        let n_blocks = n_categories.min(n_users).min(n_items).clamp(1, 4);
        SynthConfig {
            n_users,
            n_items,
            n_categories,
            n_blocks,
            interactions_per_user: (n_items / 5).clamp(1, 20),
            affinity: 0.8,
            zero_share: 0.3,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub interactions: Vec<RawInteraction>,
    pub items: Vec<RawItem>,
}

fn block_of(idx: usize, n: usize, blocks: usize) -> usize {
    idx * blocks / n
}

/// Members of each block under the contiguous partition used throughout.
fn block_members(n: usize, blocks: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); blocks];
    for idx in 0..n {
        out[block_of(idx, n, blocks)].push(idx);
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.n_users < 2 || cfg.n_items < 2 || cfg.n_categories < 2 {
        return Err(Error::data("need at least 2 users, items, and categories"));
    }
    if cfg.n_blocks < 1 || cfg.n_blocks > cfg.n_categories.min(cfg.n_users).min(cfg.n_items) {
        return Err(Error::data(
            "block count must fit users, items, and categories",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.zero_share) || !(0.0..=1.0).contains(&cfg.affinity) {
        return Err(Error::data("zero_share and affinity must lie in [0, 1]"));
    }
    if cfg.interactions_per_user < 1 || cfg.interactions_per_user > cfg.n_items {
        return Err(Error::data(
            "interactions_per_user must lie in [1, n_items]",
        ));
    }

    let cat_blocks = block_members(cfg.n_categories, cfg.n_blocks);
    let item_blocks = block_members(cfg.n_items, cfg.n_blocks);

    let mut item_rng = Stream::new(cfg.seed, "synth_items");
    let items: Vec<RawItem> = (0..cfg.n_items)
        .map(|i| {
            let own = &cat_blocks[block_of(i, cfg.n_items, cfg.n_blocks)];
            let mut cats = BTreeSet::new();
            cats.insert(own[item_rng.below(own.len())]);
            // Up to two extra categories drawn from the whole catalog.
            for _ in 0..2 {
                if item_rng.f64() < 0.4 {
                    cats.insert(item_rng.below(cfg.n_categories));
                }
            }
            RawItem {
                item_id: format!("g{i:05}"),
                categories: cats.into_iter().map(|c| format!("cat{c:03}")).collect(),
            }
        })
        .collect();

    let mut rng = Stream::new(cfg.seed, "synth_interactions");
    let mut interactions = Vec::with_capacity(cfg.n_users * cfg.interactions_per_user);
    for u in 0..cfg.n_users {
        let b = block_of(u, cfg.n_users, cfg.n_blocks);
        let mut own: Vec<usize> = item_blocks[b].clone();
        let mut other: Vec<usize> = (0..cfg.n_items)
            .filter(|i| block_of(*i, cfg.n_items, cfg.n_blocks) != b)
            .collect();
        rng.shuffle(&mut own);
        rng.shuffle(&mut other);
        for _ in 0..cfg.interactions_per_user {
            let from_own = rng.f64() < cfg.affinity;
            let item = if from_own && !own.is_empty() {
                own.pop().unwrap()
            } else if let Some(i) = other.pop() {
                i
            } else {
                own.pop().expect("interactions_per_user <= n_items")
            };
            let playtime = if rng.f64() < cfg.zero_share {
                0
            } else {
                (60.0 * rng.pareto(1.0, 1.2)).floor() as u64
            };
            interactions.push(RawInteraction {
                user_id: format!("u{u:05}"),
                item_id: format!("g{item:05}"),
                playtime,
            });
        }
    }
    Ok(SynthDataset {
        interactions,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_share_is_respected() {
        let mut cfg = SynthConfig::new(500, 100, 10, 7);
        cfg.interactions_per_user = 20;
        let data = generate(&cfg).unwrap();
        assert_eq!(data.interactions.len(), 10_000);
        let zeros = data.interactions.iter().filter(|r| r.playtime == 0).count();
        let share = zeros as f64 / data.interactions.len() as f64;
        assert!((share - 0.3).abs() < 0.03, "zero share {share}");
    }

    #[test]
    fn items_carry_one_to_three_categories() {
        let data = generate(&SynthConfig::new(50, 60, 8, 1)).unwrap();
        assert_eq!(data.items.len(), 60);
        assert!(data
            .items
            .iter()
            .all(|it| (1..=3).contains(&it.categories.len())));
        assert!(data.items.iter().any(|it| it.categories.len() > 1));
        // No duplicate categories inside an item.
        for it in &data.items {
            let set: BTreeSet<_> = it.categories.iter().collect();
            assert_eq!(set.len(), it.categories.len());
        }
    }

    #[test]
    fn interactions_are_distinct_pairs() {
        let data = generate(&SynthConfig::new(40, 30, 6, 2)).unwrap();
        let pairs: BTreeSet<_> = data
            .interactions
            .iter()
            .map(|r| (r.user_id.clone(), r.item_id.clone()))
            .collect();
        assert_eq!(pairs.len(), data.interactions.len());
    }

    #[test]
    fn playtimes_have_a_heavy_front_loaded_tail() {
        let mut cfg = SynthConfig::new(500, 100, 10, 11);
        cfg.interactions_per_user = 20;
        let data = generate(&cfg).unwrap();
        // Doubling buckets of playtime/60; a Pareto tail decays by a
        // near-constant factor per bucket.
        let mut buckets = [0usize; 4];
        for r in &data.interactions {
            if r.playtime == 0 {
                continue;
            }
            let k = (r.playtime / 60).ilog2() as usize;
            if k < buckets.len() {
                buckets[k] += 1;
            }
        }
        for w in buckets.windows(2) {
            assert!(w[0] > w[1], "buckets {buckets:?}");
        }
    }

    #[test]
    fn users_favor_their_own_block() {
        let cfg = SynthConfig::new(200, 100, 10, 3);
        let data = generate(&cfg).unwrap();
        let mut in_block = 0usize;
        for r in &data.interactions {
            let u: usize = r.user_id[1..].parse().unwrap();
            let i: usize = r.item_id[1..].parse().unwrap();
            if block_of(u, cfg.n_users, cfg.n_blocks) == block_of(i, cfg.n_items, cfg.n_blocks) {
                in_block += 1;
            }
        }
        let share = in_block as f64 / data.interactions.len() as f64;
        assert!(share > 0.6, "in-block share {share}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::new(30, 20, 5, 9);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.interactions, b.interactions);
        assert_eq!(a.items, b.items);
        let mut other = cfg.clone();
        other.seed = 10;
        let c = generate(&other).unwrap();
        assert_ne!(a.interactions, c.interactions);
    }

    #[test]
    fn undersized_requests_are_rejected() {
        assert!(generate(&SynthConfig::new(1, 20, 5, 0)).is_err());
        assert!(generate(&SynthConfig::new(20, 1, 5, 0)).is_err());
        assert!(generate(&SynthConfig::new(20, 20, 1, 0)).is_err());
        let mut cfg = SynthConfig::new(20, 20, 5, 0);
        cfg.interactions_per_user = 25;
        assert!(generate(&cfg).is_err());
        cfg = SynthConfig::new(20, 20, 5, 0);
        cfg.zero_share = 1.5;
        assert!(generate(&cfg).is_err());
    }
}
