//! Extraction of `<label>`/`<confidence>` verdicts from judge output.

use serde::{Deserialize, Serialize};

/// Whether a verdict could be extracted and was in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Malformed,
}

/// A judge reply. `label` and `confidence` are populated only for verdict
/// templates (evaluate / match); `parse_status == Ok` guarantees both are
/// present and in range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub raw_text: String,
    pub label: Option<u8>,
    pub confidence: Option<u8>,
    pub parse_status: ParseStatus,
}

impl JudgeResponse {
    pub fn ok(raw_text: String, label: u8, confidence: u8) -> Self {
        JudgeResponse {
            raw_text,
            label: Some(label),
            confidence: Some(confidence),
            parse_status: ParseStatus::Ok,
        }
    }

    pub fn malformed(raw_text: String) -> Self {
        JudgeResponse {
            raw_text,
            label: None,
            confidence: None,
            parse_status: ParseStatus::Malformed,
        }
    }

    /// Plain response for templates that carry no verdict.
    pub fn text(raw_text: String) -> Self {
        JudgeResponse {
            raw_text,
            label: None,
            confidence: None,
            parse_status: ParseStatus::Ok,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.parse_status == ParseStatus::Ok
    }
}

/// Optionally-signed decimal integer, nothing else.
fn as_plain_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// First integer wrapped in `<tag>...</tag>`, scanning left to right.
fn first_tagged_int(raw: &str, tag: &str) -> Option<i64> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut from = 0;
    while let Some(rel) = raw[from..].find(&open) {
        let start = from + rel + open.len();
        let rel_end = raw[start..].find(&close)?;
        if let Some(v) = as_plain_int(raw[start..start + rel_end].trim()) {
            return Some(v);
        }
        from = start;
    }
    None
}

/// Extract the first well-formed label/confidence tag pair.
///
/// Missing tags or out-of-range values yield `Malformed`; surrounding prose
/// is ignored.
pub fn parse_judge_response(raw: &str) -> JudgeResponse {
    let label = first_tagged_int(raw, "label");
    let confidence = first_tagged_int(raw, "confidence");
    match (label, confidence) {
        (Some(l @ 0..=1), Some(c @ 0..=10)) => JudgeResponse::ok(raw.to_string(), l as u8, c as u8),
        _ => JudgeResponse::malformed(raw.to_string()),
    }
}

/// Render a verdict back into the tag shape the judge is instructed to emit.
pub fn format_judge_response(label: u8, confidence: u8) -> String {
    format!("<label>{label}</label>\n\n<confidence>{confidence}</confidence>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_verdict_parses() {
        let r = parse_judge_response("<label>1</label><confidence>8</confidence>");
        assert_eq!(r.label, Some(1));
        assert_eq!(r.confidence, Some(8));
        assert!(r.is_ok());
    }

    #[test]
    fn out_of_range_label_is_malformed() {
        let r = parse_judge_response("<label>2</label><confidence>8</confidence>");
        assert_eq!(r.parse_status, ParseStatus::Malformed);
        let r = parse_judge_response("<label>1</label><confidence>11</confidence>");
        assert_eq!(r.parse_status, ParseStatus::Malformed);
        let r = parse_judge_response("<label>-1</label><confidence>3</confidence>");
        assert_eq!(r.parse_status, ParseStatus::Malformed);
    }

    #[test]
    fn prose_wrapped_tags_extract() {
        let r = parse_judge_response(
            "Sure! After weighing the evidence:\n<label> 1 </label>\nbecause...\n<confidence>7</confidence>\nHope that helps.",
        );
        assert_eq!((r.label, r.confidence), (Some(1), Some(7)));
    }

    #[test]
    fn non_integer_tag_is_skipped_in_favor_of_later_wellformed_one() {
        let r =
            parse_judge_response("<label>maybe</label><label>0</label><confidence>5</confidence>");
        assert_eq!(r.label, Some(0));
        assert!(r.is_ok());
    }

    #[test]
    fn missing_tags_are_malformed() {
        assert_eq!(
            parse_judge_response("no tags here").parse_status,
            ParseStatus::Malformed
        );
        assert_eq!(
            parse_judge_response("<label>1</label>").parse_status,
            ParseStatus::Malformed
        );
    }

    // Reference extractor: first regex match wins, same grammar.
    fn oracle(raw: &str) -> Option<(i64, i64)> {
        let lre = regex::Regex::new(r"<label>\s*(-?\d+)\s*</label>").unwrap();
        let cre = regex::Regex::new(r"<confidence>\s*(-?\d+)\s*</confidence>").unwrap();
        let l = lre.captures(raw)?.get(1)?.as_str().parse().ok()?;
        let c = cre.captures(raw)?.get(1)?.as_str().parse().ok()?;
        Some((l, c))
    }

    proptest! {
        #[test]
        fn fuzzed_decorations_match_reference_extractor(
            pre in "[ -~]{0,40}",
            mid in "[ -~]{0,40}",
            post in "[ -~]{0,40}",
            label in -2i64..4,
            confidence in -3i64..14,
            pad in " {0,3}",
        ) {
            let raw = format!("{pre}<label>{pad}{label}{pad}</label>{mid}<confidence>{confidence}</confidence>{post}");
            let parsed = parse_judge_response(&raw);
            match oracle(&raw) {
                Some((l, c)) if (0..=1).contains(&l) && (0..=10).contains(&c) => {
                    prop_assert!(parsed.is_ok());
                    prop_assert_eq!(parsed.label, Some(l as u8));
                    prop_assert_eq!(parsed.confidence, Some(c as u8));
                }
                _ => prop_assert_eq!(parsed.parse_status, ParseStatus::Malformed),
            }
        }

        #[test]
        fn format_then_parse_round_trips(label in 0u8..=1, confidence in 0u8..=10) {
            let parsed = parse_judge_response(&format_judge_response(label, confidence));
            prop_assert!(parsed.is_ok());
            prop_assert_eq!(parsed.label, Some(label));
            prop_assert_eq!(parsed.confidence, Some(confidence));
        }
    }
}
