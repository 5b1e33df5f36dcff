use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no true/false verdict found in reply")]
pub struct UnparsableAnswer;

/// Returns the first standalone verdict token in `reply`.
///
/// Tokens are maximal runs of alphanumeric characters, compared
/// case-insensitively; `true`/`yes` map to true and `false`/`no` to false.
pub fn extract_label(reply: &str) -> Result<bool, UnparsableAnswer> {
    reply
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .find_map(|tok| match tok.to_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        })
        .ok_or(UnparsableAnswer)
}
