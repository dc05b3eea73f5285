//! Parsed trial reports.
//!
//! The pipeline consumes the structured JSON produced by an external PDF
//! parser: a title, authors, abstract paragraphs and body paragraphs, each
//! paragraph tagged with its section header. Ingestion flattens abstract and
//! body into a single ordered list of [`Paragraph`]s, which is the unit of
//! retrieval for the rest of the engine.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Header given to abstract paragraphs that carry no section name.
pub const ABSTRACT_HEADER: &str = "Abstract";

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed document JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("document has no extractable paragraphs")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Self {
        DocId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    #[serde(default)]
    pub section_header: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialDocument {
    pub doc_id: DocId,
    pub title: String,
    pub authors: Vec<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub paragraphs: Vec<Paragraph>,
}

impl TrialDocument {
    pub fn paragraph(&self, index: usize) -> Option<&Paragraph> {
        self.paragraphs.get(index)
    }

    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    /// Canonical export form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }
}

// Raw parser output. Both the flat layout and the nested `pdf_parse` layout
// of the doc2json tooling are accepted.
#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    paper_id: Option<String>,
    #[serde(default)]
    title: String,
    #[serde(default)]
    authors: Vec<RawAuthor>,
    #[serde(default, rename = "abstract")]
    abstract_field: Option<RawAbstract>,
    #[serde(default)]
    body_text: Option<Vec<RawParagraph>>,
    #[serde(default)]
    pdf_parse: Option<RawPdfParse>,
}

#[derive(Deserialize)]
struct RawPdfParse {
    #[serde(default, rename = "abstract")]
    abstract_paragraphs: Vec<RawParagraph>,
    #[serde(default)]
    body_text: Vec<RawParagraph>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAbstract {
    Paragraphs(Vec<RawParagraph>),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAuthor {
    Name(String),
    Parts {
        #[serde(default)]
        first: String,
        #[serde(default)]
        middle: Vec<String>,
        #[serde(default)]
        last: String,
    },
}

impl RawAuthor {
    fn into_name(self) -> String {
        match self {
            RawAuthor::Name(n) => n.trim().to_owned(),
            RawAuthor::Parts { first, middle, last } => std::iter::once(first)
                .chain(middle)
                .chain(std::iter::once(last))
                .map(|s| s.trim().to_owned())
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

#[derive(Deserialize)]
struct RawParagraph {
    text: String,
    #[serde(default)]
    section: Option<String>,
}

/// Parses a structured trial report.
///
/// Accepts the parser output layout (`body_text` at the top level or under
/// `pdf_parse`) as well as the canonical export produced by
/// [`TrialDocument::to_json`], so exported documents re-ingest unchanged.
///
/// Abstract paragraphs come first, then body paragraphs, both in source
/// order. Whitespace-only paragraphs are dropped and the rest are trimmed.
/// When the input names no `paper_id`, the document id is a content hash.
pub fn ingest_document(raw: &[u8]) -> Result<TrialDocument, DocumentError> {
    let value: Value = serde_json::from_slice(raw)?;
    if value.get("paragraphs").is_some() && value.get("doc_id").is_some() {
        let mut doc: TrialDocument = serde_json::from_value(value)?;
        for p in &mut doc.paragraphs {
            p.text = p.text.trim().to_owned();
            p.section_header = p.section_header.trim().to_owned();
        }
        doc.paragraphs.retain(|p| !p.text.is_empty());
        reindex(&mut doc.paragraphs);
        if doc.paragraphs.is_empty() {
            return Err(DocumentError::Empty);
        }
        return Ok(doc);
    }

    let raw: RawDocument = serde_json::from_value(value)?;
    let (abstract_paragraphs, body) = match (raw.abstract_field, raw.body_text, raw.pdf_parse) {
        (abs, Some(body), _) => (abstract_paragraphs(abs), body),
        (abs, None, Some(parse)) => {
            let mut paragraphs = abstract_paragraphs(abs);
            if paragraphs.is_empty() {
                paragraphs = parse.abstract_paragraphs;
            }
            (paragraphs, parse.body_text)
        }
        (_, None, None) => {
            return Err(DocumentError::Parse(serde::de::Error::missing_field(
                "body_text",
            )))
        }
    };

    let mut paragraphs = Vec::with_capacity(abstract_paragraphs.len() + body.len());
    let mut abstract_texts = Vec::new();
    for p in abstract_paragraphs {
        let text = p.text.trim();
        if text.is_empty() {
            continue;
        }
        abstract_texts.push(text.to_owned());
        let header = p.section.as_deref().map(str::trim).unwrap_or("");
        paragraphs.push(Paragraph {
            index: 0,
            section_header: if header.is_empty() { ABSTRACT_HEADER.to_owned() } else { header.to_owned() },
            text: text.to_owned(),
        });
    }
    for p in body {
        let text = p.text.trim();
        if text.is_empty() {
            continue;
        }
        paragraphs.push(Paragraph {
            index: 0,
            section_header: p.section.as_deref().map(str::trim).unwrap_or("").to_owned(),
            text: text.to_owned(),
        });
    }
    reindex(&mut paragraphs);
    if paragraphs.is_empty() {
        return Err(DocumentError::Empty);
    }

    let title = raw.title.trim().to_owned();
    let authors: Vec<String> = raw.authors.into_iter().map(RawAuthor::into_name).collect();
    let abstract_text = abstract_texts.join("\n\n");
    let doc_id = match raw.paper_id.as_deref().map(str::trim) {
        Some(id) if !id.is_empty() => DocId::new(id),
        _ => content_id(&title, &authors, &abstract_text, &paragraphs),
    };
    Ok(TrialDocument { doc_id, title, authors, abstract_text, paragraphs })
}

fn abstract_paragraphs(field: Option<RawAbstract>) -> Vec<RawParagraph> {
    match field {
        None => Vec::new(),
        Some(RawAbstract::Paragraphs(ps)) => ps,
        Some(RawAbstract::Text(t)) => vec![RawParagraph { text: t, section: None }],
    }
}

fn reindex(paragraphs: &mut [Paragraph]) {
    for (i, p) in paragraphs.iter_mut().enumerate() {
        p.index = i;
    }
}

/// Content-addressed identifier over the fields ingestion keeps.
pub fn content_id(title: &str, authors: &[String], abstract_text: &str, paragraphs: &[Paragraph]) -> DocId {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(title.as_bytes());
    for a in authors {
        field(a.as_bytes());
    }
    field(abstract_text.as_bytes());
    for p in paragraphs {
        field(p.section_header.as_bytes());
        field(p.text.as_bytes());
    }
    let digest = h.finalize();
    DocId(format!("doc-{}", &hex::encode(digest)[..16]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyDocId,
    NoParagraphs,
    NonContiguousIndex { position: usize, found: usize },
    EmptyParagraph { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDocId => write!(f, "empty doc_id"),
            Violation::NoParagraphs => write!(f, "document has no paragraphs"),
            Violation::NonContiguousIndex { position, found } => {
                write!(f, "non-contiguous index: position {position} has index {found}")
            }
            Violation::EmptyParagraph { index } => write!(f, "empty paragraph at index {index}"),
        }
    }
}

/// Checks the document invariants. Returns every violation found.
pub fn validate_document(doc: &TrialDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.doc_id.as_str().trim().is_empty() {
        out.push(Violation::EmptyDocId);
    }
    if doc.paragraphs.is_empty() {
        out.push(Violation::NoParagraphs);
    }
    for (position, p) in doc.paragraphs.iter().enumerate() {
        if p.index != position {
            out.push(Violation::NonContiguousIndex { position, found: p.index });
        }
        if p.text.trim().is_empty() {
            out.push(Violation::EmptyParagraph { index: p.index });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn para(i: usize, text: &str) -> Paragraph {
        Paragraph { index: i, section_header: String::new(), text: text.into() }
    }

    #[test]
    fn body_paragraphs_are_indexed_in_order() {
        let raw = br#"{"title":"T","authors":["A"],"body_text":[{"text":"one","section":"Methods"},{"text":"two","section":"Results"}]}"#;
        let doc = ingest_document(raw).unwrap();
        assert_eq!(doc.title, "T");
        let idx: Vec<_> = doc.paragraphs.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![0, 1]);
        assert_eq!(doc.paragraphs[1].section_header, "Results");
    }

    #[test]
    fn abstract_is_prepended() {
        let raw = br#"{"title":"T","authors":[],"abstract":[{"text":"summary","section":""}],
            "body_text":[{"text":"b1","section":"Intro"},{"text":"b2","section":"Methods"}]}"#;
        let doc = ingest_document(raw).unwrap();
        assert_eq!(doc.len(), 3);
        assert_eq!(doc.paragraphs[0].text, "summary");
        assert_eq!(doc.paragraphs[0].section_header, ABSTRACT_HEADER);
        assert_eq!(doc.abstract_text, "summary");
    }

    #[test]
    fn empty_body_is_rejected() {
        let err = ingest_document(br#"{"title":"T","authors":[],"body_text":[]}"#).unwrap_err();
        assert!(matches!(err, DocumentError::Empty));
        let err = ingest_document(br#"{"title":"T","body_text":[{"text":"   "}]}"#).unwrap_err();
        assert!(matches!(err, DocumentError::Empty));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(ingest_document(b"{\"title\": "), Err(DocumentError::Parse(_))));
        assert!(matches!(ingest_document(br#"{"title":"x"}"#), Err(DocumentError::Parse(_))));
    }

    #[test]
    fn nested_parser_layout_and_structured_authors() {
        let raw = br#"{"paper_id":"PMC123","title":"T",
            "authors":[{"first":"Ada","middle":["M"],"last":"Lovelace"}],
            "pdf_parse":{"abstract":[{"text":"abs","section":"Abstract"}],
                         "body_text":[{"text":"body","section":"Methods"}],
                         "ref_entries":{}}}"#;
        let doc = ingest_document(raw).unwrap();
        assert_eq!(doc.doc_id.as_str(), "PMC123");
        assert_eq!(doc.authors, vec!["Ada M Lovelace"]);
        assert_eq!(doc.len(), 2);
    }

    #[test]
    fn unicode_is_preserved_and_trimmed() {
        let raw = "{\"title\":\"T\",\"body_text\":[{\"text\":\"  β-lactam ≥ 5 mg\\n\",\"section\":\"Méthodes\"}]}";
        let doc = ingest_document(raw.as_bytes()).unwrap();
        assert_eq!(doc.paragraphs[0].text, "β-lactam ≥ 5 mg");
        assert_eq!(doc.paragraphs[0].section_header, "Méthodes");
    }

    #[test]
    fn canonical_export_reingests() {
        let raw = br#"{"title":"T","authors":["A"],"abstract":[{"text":"a"}],"body_text":[{"text":"b","section":"S"}]}"#;
        let doc = ingest_document(raw).unwrap();
        let again = ingest_document(doc.to_json().as_bytes()).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn content_id_is_stable() {
        let raw = br#"{"title":"T","body_text":[{"text":"b"}]}"#;
        assert_eq!(ingest_document(raw).unwrap().doc_id, ingest_document(raw).unwrap().doc_id);
        let other = br#"{"title":"T","body_text":[{"text":"c"}]}"#;
        assert_ne!(ingest_document(raw).unwrap().doc_id, ingest_document(other).unwrap().doc_id);
    }

    #[test]
    fn validation() {
        let mut doc = TrialDocument {
            doc_id: "d".into(),
            title: "T".into(),
            authors: vec![],
            abstract_text: String::new(),
            paragraphs: vec![para(0, "a"), para(1, "b"), para(2, "c")],
        };
        assert!(validate_document(&doc).is_empty());

        doc.paragraphs = vec![para(0, "a"), para(2, "b")];
        let v = validate_document(&doc);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("non-contiguous index"));

        doc.paragraphs = vec![para(0, "a"), para(1, " ")];
        let v = validate_document(&doc);
        assert_eq!(v, vec![Violation::EmptyParagraph { index: 1 }]);
        assert!(v[0].to_string().contains("empty paragraph"));
    }
}
