/// Splits `total` into integer shares proportional to `weights` using the
/// largest-remainder rule. Equal remainders go to the lower index. All-zero
/// weights yield all-zero shares.
pub fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut shares = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let exact = total as u128 * w as u128;
        shares.push((exact / sum) as usize);
        remainders.push((exact % sum, i));
    }
    let assigned: usize = shares.iter().sum();
    let mut leftover = total - assigned;
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &remainders {
        if leftover == 0 {
            break;
        }
        shares[i] += 1;
        leftover -= 1;
    }
    shares
}

/// `round((scale − 1) · total_in)`, the number of points to add.
pub fn new_point_total(total_in: usize, scale: f64) -> usize {
    ((scale - 1.0) * total_in as f64).round().max(0.0) as usize
}

/// Per-block quotas of new points for an overall `scale` factor.
///
/// The total is `round((scale − 1) · total_in)`; blocks with fewer than
/// `min_block_points` points get nothing and their share is spread over the
/// remaining blocks.
pub fn plan_budget(
    block_counts: &[usize],
    total_in: usize,
    scale: f64,
    min_block_points: usize,
) -> Vec<usize> {
    debug_assert_eq!(block_counts.iter().sum::<usize>(), total_in);
    let total_new = new_point_total(total_in, scale);
    let weights: Vec<usize> = block_counts
        .iter()
        .map(|&c| if c >= min_block_points { c } else { 0 })
        .collect();
    apportion(&weights, total_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Largest-remainder apportionment by direct enumeration: floor every
    /// exact quota `total·w/sum`, then hand out the missing units by
    /// comparing remainders as exact fractions over the common denominator.
    fn oracle(weights: &[usize], total: usize) -> Vec<usize> {
        let sum: u64 = weights.iter().map(|&w| w as u64).sum();
        let mut out = Vec::new();
        let mut rems = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            let num = total as u64 * w as u64;
            let mut fl = (num as f64 / sum as f64).floor() as u64;
            while fl * sum > num {
                fl -= 1;
            }
            while (fl + 1) * sum <= num {
                fl += 1;
            }
            out.push(fl as usize);
            rems.push((num - fl * sum, i));
        }
        rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let missing = total - out.iter().sum::<usize>();
        for &(_, i) in rems.iter().take(missing) {
            out[i] += 1;
        }
        out
    }

    #[test]
    fn examples() {
        assert_eq!(plan_budget(&[60, 40], 100, 2.0, 3), vec![60, 40]);
        assert_eq!(plan_budget(&[3], 3, 2.0, 3), vec![3]);
        assert_eq!(plan_budget(&[7, 5, 3], 15, 2.0, 3), vec![7, 5, 3]);
        assert_eq!(plan_budget(&[7, 5, 3], 15, 2.0, 3), oracle(&[7, 5, 3], 15));
        assert_eq!(plan_budget(&[500, 500], 1000, 1.5, 3), vec![250, 250]);
    }

    #[test]
    fn small_blocks_are_redistributed() {
        let q = plan_budget(&[2, 10, 10], 22, 2.0, 3);
        assert_eq!(q[0], 0);
        assert_eq!(q.iter().sum::<usize>(), 22);
        assert_eq!(q, vec![0, 11, 11]);
    }

    #[test]
    fn remainder_ties_go_to_lower_index() {
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(apportion(&[0, 0], 5), vec![0, 0]);
    }

    proptest! {
        #[test]
        fn apportion_matches_oracle(weights in prop::collection::vec(1usize..500, 1..20), total in 0usize..5000) {
            let got = apportion(&weights, total);
            prop_assert_eq!(got.iter().sum::<usize>(), total);
            prop_assert_eq!(got, oracle(&weights, total));
        }
    }
}
