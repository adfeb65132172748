//! The abundance-weighted update rule shared by both simulators:
//! `U = interaction ⊙ (target / actual)²`, with the squared ratio of column
//! `j` scaling column `j`.

/// Convert counts to percentages of `total`, clamping zeros to `epsilon`.
pub fn clamped_percentages(counts: &[u64], total: u64, epsilon: f64) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| {
            let pct = if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            };
            if pct > 0.0 {
                pct
            } else {
                epsilon
            }
        })
        .collect()
}

/// `U(i, j) = interaction(i, j) · (target(j) / actual_pct(j))²`.
pub fn update_rule_matrix(
    interaction: &[Vec<f64>],
    target: &[f64],
    actual_pct: &[f64],
) -> Vec<Vec<f64>> {
    let scale: Vec<f64> = target
        .iter()
        .zip(actual_pct)
        .map(|(&t, &a)| (t / a).powi(2))
        .collect();
    interaction
        .iter()
        .map(|row| row.iter().zip(&scale).map(|(&x, &s)| x * s).collect())
        .collect()
}

/// Sum of absolute entries of the update matrix.
pub fn rule_loss(interaction: &[Vec<f64>], target: &[f64], actual_pct: &[f64]) -> f64 {
    update_rule_matrix(interaction, target, actual_pct)
        .iter()
        .flatten()
        .map(|x| x.abs())
        .sum()
}

/// Index of the largest value among `candidates`, lowest index on ties.
pub fn argmax_among(scores: &[f64], candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        let s = scores[j];
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((j, s)),
        }
    }
    best.map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counts_are_clamped() {
        let p = clamped_percentages(&[0, 3, 1], 4, 0.01);
        assert_eq!(p, vec![0.01, 75.0, 25.0]);
        assert_eq!(clamped_percentages(&[0, 0], 0, 0.5), vec![0.5, 0.5]);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_among(&[1.0, 3.0, 3.0], 0..3), Some(1));
        assert_eq!(argmax_among(&[-1.0, -1.0], 0..2), Some(0));
        assert_eq!(argmax_among(&[5.0, 1.0, 2.0], [1, 2]), Some(2));
        assert_eq!(argmax_among(&[5.0], []), None);
    }
}
