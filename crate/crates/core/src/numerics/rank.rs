use super::NumericsError;

/// League-table ranks: 1 is the highest score, tied scores share the
/// lowest rank of their block and the next distinct score skips past it.
pub fn rank_competition(scores: &[f64]) -> Result<Vec<usize>, NumericsError> {
    if scores.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(rank_competition(&[0.5, 0.2, -0.1]).unwrap(), vec![1, 2, 3]);
        assert_eq!(rank_competition(&[0.5, 0.5, 0.1]).unwrap(), vec![1, 1, 3]);
        assert_eq!(rank_competition(&[0.1, 0.1, 0.1]).unwrap(), vec![1, 1, 1]);
        assert_eq!(rank_competition(&[0.1, 0.7, 0.1, 0.0]).unwrap(), vec![2, 1, 2, 4]);
        assert_eq!(rank_competition(&[]), Err(NumericsError::EmptyInput));
    }

    proptest! {
        #[test]
        fn ranks_follow_scores(scores in prop::collection::vec(prop::sample::select(vec![-1.0, -0.5, 0.0, 0.25, 0.5, 2.0]), 1..60)) {
            let ranks = rank_competition(&scores).unwrap();
            prop_assert_eq!(*ranks.iter().min().unwrap(), 1);
            prop_assert!(*ranks.iter().max().unwrap() <= scores.len());
            for i in 0..scores.len() {
                for j in 0..scores.len() {
                    if scores[i] >= scores[j] {
                        prop_assert!(ranks[i] <= ranks[j]);
                    }
                }
                // rank = 1 + number of strictly higher scores
                let higher = scores.iter().filter(|&&s| s > scores[i]).count();
                prop_assert_eq!(ranks[i], higher + 1);
            }
        }
    }
}
