use super::QaError;
use crate::questionnaire::Answer;

// Longer labels first so "probably yes" wins over "yes" and
// "no information" over "no" at the same position.
const LABELS: [(&str, Answer); 5] = [
    ("probably yes", Answer::ProbablyYes),
    ("probably no", Answer::ProbablyNo),
    ("no information", Answer::NoInformation),
    ("yes", Answer::Yes),
    ("no", Answer::No),
];

/// Extracts the answer label and the rationale from a model response.
///
/// The earliest whole-word, case-insensitive occurrence of a label wins. The
/// rationale is the text after the label; if nothing follows, the text before
/// it. A response with no label is an error, never a silent
/// `NoInformation`.
pub fn parse_answer(raw: &str) -> Result<(Answer, String), QaError> {
    let lower = raw.to_ascii_lowercase();
    let mut best: Option<(usize, usize, Answer)> = None;
    for (label, answer) in LABELS {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(label) {
            let start = from + pos;
            let end = start + label.len();
            let before_ok = lower[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
            let after_ok = lower[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
            if before_ok && after_ok {
                let better = match best {
                    None => true,
                    Some((s, e, _)) => start < s || (start == s && end > e),
                };
                if better {
                    best = Some((start, end, answer));
                }
                break;
            }
            from = end;
        }
    }
    let (start, end, answer) = best.ok_or_else(|| QaError::Unparseable { raw: raw.to_owned() })?;
    let punct = |c: char| c.is_whitespace() || matches!(c, '.' | ',' | ':' | ';' | '"' | '\'' | '*' | ')' | ']' | '-');
    let mut rationale = raw[end..].trim_start_matches(punct).trim_end().to_owned();
    if rationale.is_empty() {
        rationale = raw[..start].trim_end_matches(punct).trim_start().to_owned();
    }
    Ok((answer, rationale))
}
