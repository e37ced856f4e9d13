//! Word-level tokenization.
//!
//! The default scheme is lowercase + whitespace split + punctuation split:
//! alphanumeric runs become tokens and every other non-space character is a
//! single-character token. Detokenization joins with single spaces, so
//! tokenize∘detokenize is the identity on already-normalized text. Subword
//! schemes can be plugged in through the [`Tokenize`] trait.

/// A tokenization scheme. Implementations must be deterministic.
pub trait Tokenize {
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

/// Lowercasing word-level tokenizer with punctuation splitting.
#[derive(Debug, Clone, Default)]
pub struct WordTokenizer;

impl Tokenize for WordTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        for ch in text.chars().flat_map(|c| c.to_lowercase()) {
            if ch.is_alphanumeric() {
                current.push(ch);
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                if !ch.is_whitespace() {
                    tokens.push(ch.to_string());
                }
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }
}

/// Convenience wrapper using the default tokenizer.
pub fn tokenize(text: &str) -> Vec<String> {
    WordTokenizer.tokenize(text)
}

pub fn detokenize(tokens: &[String]) -> String {
    WordTokenizer.detokenize(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("A man's blue-green shirt."),
            vec!["a", "man", "'", "s", "blue", "-", "green", "shirt", "."]
        );
    }

    #[test]
    fn numbers_stay_whole() {
        assert_eq!(tokenize("14 women"), vec!["14", "women"]);
    }

    #[test]
    fn roundtrip_on_normalized_text() {
        let text = "a man ' s blue - green shirt .";
        let toks = tokenize(text);
        assert_eq!(detokenize(&toks), text);
    }

    #[test]
    fn empty_input_gives_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    proptest::proptest! {
        /// tokenize then detokenize is the identity on normalized text
        /// (lowercase tokens joined by single spaces).
        #[test]
        fn roundtrip_identity_on_normalized_text(
            words in proptest::collection::vec("[a-z0-9]{1,8}|[.,!?;-]", 1..20)
        ) {
            let text = words.join(" ");
            proptest::prop_assert_eq!(detokenize(&tokenize(&text)), text);
        }
    }
}
