//! Token vocabularies with fixed reserved ids.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const MASK: u32 = 4;

pub const RESERVED: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<unk>", "<mask>"];

/// Bijective token <-> id map with `<pad>`, `<bos>`, `<eos>`, `<unk>`,
/// `<mask>` pinned to ids 0..4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(tokens);
        let token_to_id =
            id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { token_to_id, id_to_token }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(|s| s.as_str())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// Map tokens to ids, `<unk>` for out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Map ids back to tokens; reserved ids render as their markers.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).unwrap_or("<unk>").to_string()).collect()
    }

    /// One token per line, id = line index. Used inside checkpoint dirs.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.id_to_token {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::data::corpus::read_lines(path)?;
        if lines.len() < RESERVED.len()
            || lines[..RESERVED.len()] != RESERVED.map(|s| s.to_string())[..]
        {
            return Err(Error::Format(format!(
                "{}: vocabulary must begin with the reserved tokens",
                path.display()
            )));
        }
        let vocab = Vocabulary::from_tokens(lines[RESERVED.len()..].to_vec());
        if vocab.token_to_id.len() != vocab.id_to_token.len() {
            return Err(Error::Format(format!(
                "{}: duplicate tokens break the id bijection",
                path.display()
            )));
        }
        Ok(vocab)
    }
}

/// Build a vocabulary from tokenized sentences.
///
/// Tokens with frequency >= `min_count` are kept, ordered by frequency
/// descending then lexicographically, after the reserved ids.
pub fn build_vocab<'a, I>(sentences: I, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if min_count < 1 {
        return Err(Error::Argument("min_count must be >= 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sent in sentences {
        for tok in sent {
            *freq.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(tok, count)| count >= min_count && !RESERVED.contains(&tok))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t.to_string()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize::tokenize;

    fn toks(sentences: &[&str]) -> Vec<Vec<String>> {
        sentences.iter().map(|s| tokenize(s)).collect()
    }

    #[test]
    fn min_count_filters_and_reserved_lead() {
        let sents = toks(&["a b", "a"]);
        let refs: Vec<&[String]> = sents.iter().map(|s| s.as_slice()).collect();
        let v = build_vocab(refs.clone(), 1).unwrap();
        assert_eq!(v.len(), 5 + 2);
        assert_eq!(v.token(0), Some("<pad>"));
        assert_eq!(v.token(4), Some("<mask>"));
        assert_eq!(v.id("a"), 5); // freq 2 beats freq 1
        assert_eq!(v.id("b"), 6);

        let v2 = build_vocab(refs, 2).unwrap();
        assert_eq!(v2.len(), 5 + 1);
        assert!(v2.contains("a"));
        assert_eq!(v2.id("b"), UNK);
    }

    #[test]
    fn deterministic_ties_break_lexicographically() {
        let sents = toks(&["zebra apple mango", "mango zebra apple"]);
        let refs: Vec<&[String]> = sents.iter().map(|s| s.as_slice()).collect();
        let v = build_vocab(refs.clone(), 1).unwrap();
        assert_eq!(v.token(5), Some("apple"));
        assert_eq!(v.token(6), Some("mango"));
        assert_eq!(v.token(7), Some("zebra"));
        // two builds over the same input assign identical ids
        assert_eq!(build_vocab(refs, 1).unwrap(), v);
    }

    #[test]
    fn surviving_tokens_meet_min_count() {
        // independent frequency recount over a generated corpus
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let words = ["dog", "cat", "runs", "sits", "red", "blue", "tree", "car"];
        let sentences: Vec<Vec<String>> = (0..1000)
            .map(|_| {
                (0..rng.gen_range(1..6)).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect()
            })
            .collect();
        let mut recount: HashMap<String, usize> = HashMap::new();
        for s in &sentences {
            for t in s {
                *recount.entry(t.clone()).or_default() += 1;
            }
        }
        let refs: Vec<&[String]> = sentences.iter().map(|s| s.as_slice()).collect();
        let min_count = 90;
        let v = build_vocab(refs, min_count).unwrap();
        for id in 5..v.len() as u32 {
            let tok = v.token(id).unwrap();
            assert!(recount[tok] >= min_count, "{tok} kept below min_count");
        }
        for (tok, count) in recount {
            if count >= min_count {
                assert!(v.contains(&tok), "{tok} dropped despite count {count}");
            }
        }
    }

    #[test]
    fn save_load_identity() {
        let sents = toks(&["a man walks", "a dog runs"]);
        let refs: Vec<&[String]> = sents.iter().map(|s| s.as_slice()).collect();
        let v = build_vocab(refs, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }

    #[test]
    fn duplicate_tokens_in_a_vocab_file_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        let mut text = RESERVED.join("\n");
        text.push_str("\ndog\ndog\n");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Vocabulary::load(&p), Err(Error::Format(_))));
    }
}
