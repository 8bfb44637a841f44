use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::substream;

/// `k` `(train, test)` index partitions of `0..n_items`. Test folds are
/// disjoint, cover every item, and differ in size by at most one.
pub fn kfold_split(n_items: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::config(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n_items {
        return Err(Error::input(format!(
            "cannot split {n_items} items into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut substream(seed, "data.kfold"));
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut test: Vec<usize> = order.iter().skip(f).step_by(k).copied().collect();
        test.sort_unstable();
        let mut train: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % k != f)
            .map(|(_, &x)| x)
            .collect();
        train.sort_unstable();
        folds.push((train, test));
    }
    Ok(folds)
}
