use alloc::vec::Vec;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{check_index, Error, Result};

/// Rejections tolerated before falling back to enumerating the complement.
const MAX_REJECTIONS: usize = 32;

/// Draws `count` items uniformly, with replacement, from
/// `Q \ (Q+_user ∪ Q+_interval)`.
pub fn sample_negatives<R: Rng + ?Sized>(
    dataset: &Dataset,
    user: usize,
    interval: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_index("user", user, dataset.num_users())?;
    check_index("interval", interval, dataset.num_intervals())?;
    let mut out = Vec::with_capacity(count);
    sample_into(dataset, user, Some(interval), count, rng, &mut out)?;
    Ok(out)
}

/// Appends `count` negatives to `out`. With `interval = None` only `Q+_user`
/// is excluded (user × item slice training).
pub(crate) fn sample_into<R: Rng + ?Sized>(
    dataset: &Dataset,
    user: usize,
    interval: Option<usize>,
    count: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    let num_items = dataset.num_items();
    let excluded = |q: usize| {
        dataset.is_user_item(user, q) || interval.is_some_and(|r| dataset.is_interval_item(r, q))
    };
    let mut complement: Option<Vec<usize>> = None;
    for _ in 0..count {
        let q = match &complement {
            Some(c) => c[rng.random_range(0..c.len())],
            None => {
                let mut drawn = None;
                for _ in 0..MAX_REJECTIONS {
                    let q = rng.random_range(0..num_items);
                    if !excluded(q) {
                        drawn = Some(q);
                        break;
                    }
                }
                match drawn {
                    Some(q) => q,
                    None => {
                        let c: Vec<usize> = (0..num_items).filter(|&q| !excluded(q)).collect();
                        if c.is_empty() {
                            return Err(Error::NoNegativesAvailable {
                                user,
                                interval: interval.unwrap_or(0),
                            });
                        }
                        let q = c[rng.random_range(0..c.len())];
                        complement = Some(c);
                        q
                    }
                }
            }
        };
        debug_assert!(!excluded(q), "sampled an observed item as a negative");
        out.push(q);
    }
    Ok(())
}
