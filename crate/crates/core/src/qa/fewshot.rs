use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::document::DocId;
use crate::evaluation::Class3;
use crate::questionnaire::{Answer, Qid};

/// A gold-labelled question with its oracle passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub doc_id: DocId,
    pub qid: Qid,
    pub question: String,
    pub passage: String,
    pub answer: Answer,
}

/// Examples fixed for a whole run: one per answer class, drawn with a seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotSet {
    pub seed: u64,
    pub examples: Vec<FewShotExample>,
}

impl FewShotSet {
    /// Draws one example per class (Y/PY, N/PN, NI, in that order) from
    /// `pool`. Classes absent from the pool are skipped.
    pub fn sample(pool: &[FewShotExample], seed: u64) -> Self {
        let mut by_class: BTreeMap<Class3, Vec<&FewShotExample>> = BTreeMap::new();
        for ex in pool {
            if let Some(c) = Class3::from_answer(ex.answer) {
                by_class.entry(c).or_default().push(ex);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let examples = Class3::ALL
            .iter()
            .filter_map(|c| by_class.get(c).and_then(|v| v.choose(&mut rng)).map(|e| (*e).clone()))
            .collect();
        FewShotSet { seed, examples }
    }

    /// `(doc_id, qid)` pairs to remove from the evaluation set.
    pub fn keys(&self) -> BTreeSet<(DocId, Qid)> {
        self.examples.iter().map(|e| (e.doc_id.clone(), e.qid)).collect()
    }
}
