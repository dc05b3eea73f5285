use serde::{Deserialize, Serialize};

use super::bm25::{Bm25Params, Bm25Stats};
use super::embed::{normalize, Embedder, SidecarVectors};
use super::RetrievalError;
use crate::document::{DocId, TrialDocument};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub paragraph_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphIndex {
    pub doc_id: DocId,
    pub model_id: String,
    bm25: Bm25Stats,
    vectors: Vec<Vec<f32>>,
}

impl ParagraphIndex {
    /// Embeds every paragraph (duplicates included) and collects BM25
    /// statistics over this document alone.
    pub fn build(doc: &TrialDocument, embedder: &dyn Embedder, params: Bm25Params) -> Result<Self, RetrievalError> {
        let texts: Vec<&str> = doc.paragraphs.iter().map(|p| p.text.as_str()).collect();
        let vectors = match embedder.embed_batch(&texts) {
            Ok(v) if v.len() == texts.len() => v,
            // Fall back to one call per paragraph so the failing one is named.
            _ => {
                let mut out = Vec::with_capacity(texts.len());
                for (paragraph, t) in texts.iter().enumerate() {
                    let v = embedder
                        .embed(t)
                        .map_err(|source| RetrievalError::IndexBuild { paragraph, source })?;
                    out.push(v);
                }
                out
            }
        };
        Self::from_vectors(doc, embedder.model_id(), vectors, params)
    }

    /// Builds an index from externally computed paragraph vectors.
    pub fn from_vectors(
        doc: &TrialDocument,
        model_id: &str,
        vectors: Vec<Vec<f32>>,
        params: Bm25Params,
    ) -> Result<Self, RetrievalError> {
        let vectors = vectors
            .into_iter()
            .enumerate()
            .map(|(paragraph, v)| normalize(v).map_err(|source| RetrievalError::IndexBuild { paragraph, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let bm25 = Bm25Stats::build(doc.paragraphs.iter().map(|p| p.text.as_str()), params);
        Ok(ParagraphIndex { doc_id: doc.doc_id.clone(), model_id: model_id.to_owned(), bm25, vectors })
    }

    /// Index over the sidecar reference vectors of `doc`.
    pub fn from_sidecar(doc: &TrialDocument, sidecar: &SidecarVectors, params: Bm25Params) -> Result<Self, RetrievalError> {
        let by_index = sidecar.document(&doc.doc_id);
        let vectors = (0..doc.len())
            .map(|i| {
                by_index.get(&i).map(|v| v.to_vec()).ok_or_else(|| RetrievalError::MissingVector {
                    doc_id: doc.doc_id.to_string(),
                    paragraph: i,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_vectors(doc, &sidecar.model_id, vectors, params)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn bm25_params(&self) -> Bm25Params {
        self.bm25.params
    }

    pub fn bm25_entries(&self) -> usize {
        self.bm25.term_counts.len()
    }

    /// Top-k paragraphs by cosine similarity to the embedded query.
    pub fn query_vector(&self, query: &str, k: usize, embedder: &dyn Embedder) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if embedder.model_id() != self.model_id {
            return Err(RetrievalError::ModelMismatch {
                index_model: self.model_id.clone(),
                query_model: embedder.model_id().to_owned(),
            });
        }
        let q = embedder.embed(query).map_err(RetrievalError::Query)?;
        self.query_embedding(&q, k)
    }

    /// Top-k paragraphs for a query vector computed elsewhere.
    pub fn query_embedding(&self, query: &[f32], k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let q = normalize(query.to_vec()).map_err(RetrievalError::Query)?;
        let scores = self
            .vectors
            .iter()
            .map(|v| {
                let dot: f64 = v.iter().zip(&q).map(|(a, b)| *a as f64 * *b as f64).sum();
                dot.clamp(-1.0, 1.0)
            })
            .collect();
        Ok(top_k(scores, k))
    }

    /// Top-k paragraphs by Okapi BM25.
    pub fn query_bm25(&self, query: &str, k: usize) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        Ok(top_k(self.bm25.score_all(query), k))
    }

    /// Serialized form; stable across runs for the same inputs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }
}

/// Sorts by descending score, ties by ascending paragraph index.
fn top_k(scores: Vec<f64>, k: usize) -> Vec<RetrievalResult> {
    let mut results: Vec<RetrievalResult> = scores
        .into_iter()
        .enumerate()
        .map(|(paragraph_index, score)| RetrievalResult { paragraph_index, score })
        .collect();
    results.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.paragraph_index.cmp(&b.paragraph_index)));
    results.truncate(k);
    results
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::Paragraph;
    use crate::retrieval::HashEmbedder;

    pub(crate) fn doc(texts: &[&str]) -> TrialDocument {
        TrialDocument {
            doc_id: "d1".into(),
            title: "T".into(),
            authors: vec![],
            abstract_text: String::new(),
            paragraphs: texts
                .iter()
                .enumerate()
                .map(|(index, t)| Paragraph { index, section_header: String::new(), text: (*t).into() })
                .collect(),
        }
    }

    #[test]
    fn covers_every_paragraph_including_duplicates() {
        let d = doc(&["same text", "same text", "other"]);
        let idx = ParagraphIndex::build(&d, &HashEmbedder, Bm25Params::default()).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.bm25_entries(), 3);
    }

    #[test]
    fn identical_query_ranks_first_with_unit_score() {
        let d = doc(&["patients were followed for a year", "blinded outcome assessors", "computer generated random sequence"]);
        let idx = ParagraphIndex::build(&d, &HashEmbedder, Bm25Params::default()).unwrap();
        let r = idx.query_vector("computer generated random sequence", 1, &HashEmbedder).unwrap();
        assert_eq!(r[0].paragraph_index, 2);
        assert!((r[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn large_k_returns_everything() {
        let d = doc(&["a", "b"]);
        let idx = ParagraphIndex::build(&d, &HashEmbedder, Bm25Params::default()).unwrap();
        assert_eq!(idx.query_vector("a", 10, &HashEmbedder).unwrap().len(), 2);
        assert_eq!(idx.query_bm25("a", 10).unwrap().len(), 2);
        assert!(matches!(idx.query_bm25("a", 0), Err(RetrievalError::InvalidK)));
    }

    #[test]
    fn no_matching_terms_gives_paragraph_order() {
        let d = doc(&["alpha", "beta", "gamma"]);
        let idx = ParagraphIndex::build(&d, &HashEmbedder, Bm25Params::default()).unwrap();
        let r = idx.query_bm25("delta epsilon", 3).unwrap();
        assert_eq!(r.iter().map(|x| x.paragraph_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(r.iter().all(|x| x.score == 0.0));
    }

    #[test]
    fn model_mismatch_is_configuration_error() {
        struct Other;
        impl Embedder for Other {
            fn model_id(&self) -> &str {
                "other"
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, crate::retrieval::EmbedError> {
                HashEmbedder.embed_batch(texts)
            }
        }
        let d = doc(&["a"]);
        let idx = ParagraphIndex::build(&d, &HashEmbedder, Bm25Params::default()).unwrap();
        assert!(matches!(idx.query_vector("a", 1, &Other), Err(RetrievalError::ModelMismatch { .. })));
    }

    #[test]
    fn failing_embedder_names_the_paragraph() {
        struct Picky;
        impl Embedder for Picky {
            fn model_id(&self) -> &str {
                "picky"
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, crate::retrieval::EmbedError> {
                if texts.iter().any(|t| t.contains("bad")) {
                    return Err(crate::retrieval::EmbedError::Transport("refused".into()));
                }
                HashEmbedder.embed_batch(texts)
            }
        }
        let d = doc(&["fine", "bad paragraph", "fine again"]);
        match ParagraphIndex::build(&d, &Picky, Bm25Params::default()) {
            Err(RetrievalError::IndexBuild { paragraph, .. }) => assert_eq!(paragraph, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
