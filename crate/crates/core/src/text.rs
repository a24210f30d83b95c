//! Whitespace/punctuation tokenizer that keeps financial numerals intact.
//!
//! A numeral like `$205m`, `13%` or `1,234.5` must stay one token so that
//! numeral detection and masking operate on whole spans.

use std::sync::LazyLock;

use regex::Regex;

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    // Numeric tokens first so "$205m." splits as ["$205m", "."]:
    //   optional $, digits with optional thousands groups, optional decimals,
    //   optional magnitude suffix (k/m/mm/b/bn), optional %.
    Regex::new(r"\$?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?i:mm|bn|[kmb])?%?|[A-Za-z][A-Za-z0-9']*|[^\sA-Za-z0-9]").unwrap()
});

/// Split raw sentence text into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    TOKEN_RE
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_numerals_whole() {
        let toks = tokenize("During 2020 profits increased by 13% to $205m.");
        assert_eq!(
            toks,
            vec!["During", "2020", "profits", "increased", "by", "13%", "to", "$205m", "."]
        );
    }

    #[test]
    fn thousands_groups_and_decimals() {
        assert_eq!(tokenize("1,234.5 units"), vec!["1,234.5", "units"]);
        // A trailing comma is sentence punctuation, not part of the number.
        assert_eq!(tokenize("we sold 234, then"), vec!["we", "sold", "234", ",", "then"]);
    }

    #[test]
    fn magnitude_suffixes() {
        assert_eq!(tokenize("$3.2bn and 40k"), vec!["$3.2bn", "and", "40k"]);
    }

    #[test]
    fn plain_words_and_empty() {
        assert_eq!(tokenize("hello world"), vec!["hello", "world"]);
        assert!(tokenize("").is_empty());
    }
}
