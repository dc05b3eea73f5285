use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// One question's ranking and its gold evidence paragraph, if annotated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedQuestion {
    pub ranking: Vec<usize>,
    pub gold: Option<usize>,
}

/// Fraction of questions with gold evidence whose gold paragraph appears in
/// the top `k` of the ranking. Questions without gold evidence are left out;
/// with none left the result is 0.
pub fn recall_at_k(questions: &[RankedQuestion], k: usize) -> Result<f64, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for q in questions {
        let Some(gold) = q.gold else { continue };
        total += 1;
        if q.ranking.iter().take(k).any(|&p| p == gold) {
            hits += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rq(ranking: &[usize], gold: Option<usize>) -> RankedQuestion {
        RankedQuestion { ranking: ranking.to_vec(), gold }
    }

    #[test]
    fn gold_first_gives_full_recall() {
        let qs = vec![rq(&[3, 1, 2], Some(3)), rq(&[0, 1], Some(0))];
        assert_eq!(recall_at_k(&qs, 1).unwrap(), 1.0);
    }

    #[test]
    fn gold_at_ranks_two_and_four() {
        let qs = vec![rq(&[9, 5, 1, 2], Some(5)), rq(&[0, 1, 2, 7], Some(7))];
        assert_eq!(recall_at_k(&qs, 3).unwrap(), 0.5);
    }

    #[test]
    fn questions_without_gold_are_excluded() {
        let qs = vec![rq(&[1], Some(1)), rq(&[1], None)];
        assert_eq!(recall_at_k(&qs, 1).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[], 1).unwrap(), 0.0);
        assert!(matches!(recall_at_k(&qs, 0), Err(RetrievalError::InvalidK)));
    }
}
