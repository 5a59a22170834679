//! Tweet normalization.
//!
//! Rules run in a fixed order: lowercase, URL replacement, mention
//! replacement, hashtag handling (label hashtags dropped, the rest split into
//! words), key-phrase removal, punctuation stripping, stop-word removal.
//! Hashtag splitting looks at the original casing, so it runs on the raw
//! token before lowercasing takes effect.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use crate::corpus::LabelVocabulary;
use crate::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en_v1.txt");
const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.toml");

pub const URL_TOKEN: &str = "url";
pub const MENTION_TOKEN: &str = "@user";

/// Stop-word set, one lowercase word per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The pinned English list shipped with the crate (179 words).
    pub fn english_v1() -> Self {
        Self::parse(DEFAULT_STOPWORDS.as_bytes()).expect("shipped stop-word list is valid")
    }

    pub fn empty() -> Self {
        StopWords(HashSet::new())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let w = line.trim();
            if !w.is_empty() {
                words.insert(w.to_lowercase());
            }
        }
        Ok(StopWords(words))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopWords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Label-bearing hashtags and key phrases, keyed by label name.
///
/// Stored as TOML: `label = ["#tag", "key phrase", ...]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelLexicon {
    entries: BTreeMap<String, Vec<String>>,
    hashtags: HashSet<String>,
    phrases: Vec<String>,
}

impl LabelLexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Self {
        let entries: BTreeMap<String, Vec<String>> = entries
            .into_iter()
            .map(|(k, v)| {
                let v = v
                    .into_iter()
                    .map(|e| e.trim().to_lowercase())
                    .filter(|e| !e.is_empty() && e != "#")
                    .collect();
                (k.trim().to_lowercase(), v)
            })
            .collect();
        let mut hashtags = HashSet::new();
        let mut phrases = Vec::new();
        for entry in entries.values().flatten() {
            if entry.starts_with('#') {
                hashtags.insert(entry.clone());
            } else {
                phrases.push(entry.split_whitespace().collect::<Vec<_>>().join(" "));
            }
        }
        // longest first so overlapping phrases remove the full span
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        phrases.dedup();
        LabelLexicon {
            entries,
            hashtags,
            phrases,
        }
    }

    /// The shipped lexicon covering all sixteen default labels.
    pub fn emotions16() -> Self {
        Self::parse_toml(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        let entries: BTreeMap<String, Vec<String>> =
            toml::from_str(text).map_err(|e| Error::Config(format!("label lexicon: {e}")))?;
        Ok(Self::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.entries).expect("string map serializes")
    }

    /// Checks that every label in the lexicon exists in `vocab`.
    pub fn validate(&self, vocab: &LabelVocabulary) -> Result<()> {
        match self.entries.keys().find(|k| vocab.id(k).is_none()) {
            Some(k) => Err(Error::UnknownLabel(k.clone())),
            None => Ok(()),
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    pub fn is_label_hashtag(&self, tag: &str) -> bool {
        self.hashtags.contains(tag)
    }

    pub fn key_phrases(&self) -> &[String] {
        &self.phrases
    }
}

/// Bundles the lexicon and stop-word list used for a corpus.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub lexicon: LabelLexicon,
    pub stopwords: StopWords,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            lexicon: LabelLexicon::emotions16(),
            stopwords: StopWords::english_v1(),
        }
    }
}

impl Preprocessor {
    pub fn new(lexicon: LabelLexicon, stopwords: StopWords) -> Self {
        Preprocessor { lexicon, stopwords }
    }

    pub fn preprocess(&self, raw_text: &str) -> Vec<String> {
        preprocess(raw_text, &self.lexicon, &self.stopwords)
    }
}

pub fn preprocess(raw_text: &str, lexicon: &LabelLexicon, stopwords: &StopWords) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for raw in raw_text.split_whitespace() {
        handle_raw_token(raw, lexicon, &mut words);
    }

    let mut text = words.join(" ");
    for phrase in lexicon.key_phrases() {
        text = remove_phrase(&text, phrase);
    }

    text.split_whitespace()
        .filter_map(|w| {
            if w == MENTION_TOKEN {
                return Some(w.to_string());
            }
            let w = w.trim_matches(|c: char| !c.is_alphanumeric());
            (!w.is_empty() && !stopwords.contains(w)).then(|| w.to_string())
        })
        .collect()
}

fn handle_raw_token(raw: &str, lexicon: &LabelLexicon, out: &mut Vec<String>) {
    let lead = raw.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '#' && c != '@');
    let lower = lead.to_lowercase();

    if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
        out.push(URL_TOKEN.to_string());
        return;
    }

    let marker = lead.chars().next();
    let body_len = lead
        .char_indices()
        .skip(1)
        .find(|&(_, c)| !is_word_char(c))
        .map_or(lead.len(), |(i, _)| i);
    let has_body = body_len > marker.map_or(0, char::len_utf8);

    match marker {
        Some('@') if has_body => {
            out.push(MENTION_TOKEN.to_string());
            push_rest(&lead[body_len..], lexicon, out);
        }
        Some('#') if has_body => {
            let tag = &lead[..body_len];
            if !lexicon.is_label_hashtag(&tag.to_lowercase()) {
                out.extend(decompose_hashtag(tag));
            }
            push_rest(&lead[body_len..], lexicon, out);
        }
        _ => out.push(lower),
    }
}

// Text glued after a mention or hashtag, e.g. `#sad#lonely` or `@bob's`.
fn push_rest(rest: &str, lexicon: &LabelLexicon, out: &mut Vec<String>) {
    if rest.chars().any(|c| c.is_alphanumeric()) {
        handle_raw_token(rest, lexicon, out);
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Removes every occurrence of `phrase` that sits on word boundaries.
/// Repeats until no occurrence is left, since a removal can join the two
/// halves of a new occurrence.
fn remove_phrase(text: &str, phrase: &str) -> String {
    let mut current = text.to_string();
    loop {
        let mut result = String::with_capacity(current.len());
        let mut rest = current.as_str();
        let mut removed = false;
        let mut prev: Option<char> = None;
        while let Some(pos) = rest.find(phrase) {
            let before = rest[..pos].chars().next_back().or(prev);
            let after = rest[pos + phrase.len()..].chars().next();
            let bounded = before.is_none_or(|c| !c.is_alphanumeric())
                && after.is_none_or(|c| !c.is_alphanumeric());
            let step = if bounded {
                result.push_str(&rest[..pos]);
                result.push(' ');
                removed = true;
                pos + phrase.len()
            } else {
                let next = pos + rest[pos..].chars().next().map_or(1, char::len_utf8);
                result.push_str(&rest[..next]);
                next
            };
            prev = rest[..step].chars().next_back();
            rest = &rest[step..];
        }
        result.push_str(rest);
        if !removed {
            return result;
        }
        current = result.split_whitespace().collect::<Vec<_>>().join(" ");
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Upper,
    Lower,
    Digit,
}

fn class_of(c: char) -> CharClass {
    if c.is_numeric() {
        CharClass::Digit
    } else if c.is_uppercase() {
        CharClass::Upper
    } else {
        CharClass::Lower
    }
}

/// Splits a hashtag into lowercase words on case transitions, digit runs and
/// underscores. `#HTMLParser` becomes `["html", "parser"]`.
pub fn decompose_hashtag(tag: &str) -> Vec<String> {
    let body = tag.strip_prefix('#').unwrap_or(tag);
    let mut words = Vec::new();
    for chunk in body.split(|c: char| !c.is_alphanumeric()) {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (class_of(chars[i - 1]), class_of(chars[i]));
            let split = match (prev, cur) {
                (CharClass::Digit, CharClass::Digit) => false,
                (CharClass::Digit, _) | (_, CharClass::Digit) => true,
                (CharClass::Lower, CharClass::Upper) => true,
                // acronym followed by a capitalized word: split before the
                // last capital
                (CharClass::Upper, CharClass::Upper) => chars
                    .get(i + 1)
                    .is_some_and(|&n| class_of(n) == CharClass::Lower),
                _ => false,
            };
            if split {
                words.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        if start < chars.len() {
            words.push(chars[start..].iter().collect::<String>().to_lowercase());
        }
    }
    words
}

/// Truncated texts end in an ellipsis.
pub fn is_incomplete(raw_text: &str) -> bool {
    let t = raw_text.trim_end();
    t.ends_with('…') || t.ends_with("...")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loath_only() -> LabelLexicon {
        LabelLexicon::new(BTreeMap::from([(
            "self loath".to_string(),
            vec![
                "#selfhate".into(),
                "#ihatemyself".into(),
                "i hate myself".into(),
            ],
        )]))
    }

    fn run(text: &str) -> Vec<String> {
        preprocess(text, &LabelLexicon::emotions16(), &StopWords::english_v1())
    }

    #[test]
    fn url_and_label_hashtag() {
        let out = preprocess(
            "Check http://a.b #SelfHate now",
            &self_loath_only(),
            &StopWords::english_v1(),
        );
        assert_eq!(out, ["check", "url"]);
    }

    #[test]
    fn mention_is_replaced() {
        assert_eq!(run("@JohnDoe YES"), ["@user", "yes"]);
        assert_eq!(run("thanks @bob_99!"), ["thanks", "@user"]);
        assert_eq!(run("@ alone"), ["alone"]);
    }

    #[test]
    fn non_label_hashtag_is_decomposed() {
        assert_eq!(run("#MondayMotivation"), ["monday", "motivation"]);
        assert_eq!(run("#sad#MondayBlues"), ["monday", "blues"]);
    }

    #[test]
    fn decompose_rules() {
        assert_eq!(decompose_hashtag("#SelfHate"), ["self", "hate"]);
        assert_eq!(decompose_hashtag("#a"), ["a"]);
        assert_eq!(
            decompose_hashtag("#no_hope2day"),
            ["no", "hope", "2", "day"]
        );
        assert_eq!(decompose_hashtag("#HTMLParser"), ["html", "parser"]);
        assert_eq!(decompose_hashtag("#2019"), ["2019"]);
        assert!(decompose_hashtag("#").is_empty());
    }

    #[test]
    fn key_phrases_are_removed_on_word_boundaries() {
        assert_eq!(run("Honestly I am alone tonight."), ["honestly", "tonight"]);
        assert_eq!(run("I HATE MYSELF!!"), Vec::<String>::new());
        // "no hopeful" is not the phrase "no hope"
        assert_eq!(run("no hopeful news"), ["hopeful", "news"]);
        assert!(remove_phrase("i am i am alone alone", "i am alone")
            .trim()
            .is_empty());
    }

    #[test]
    fn punctuation_stripped_only_at_boundaries() {
        assert_eq!(
            run("\"Wow,\" she said... (really)"),
            ["wow", "said", "really"]
        );
        assert_eq!(run("rock'n'roll e-mail"), ["rock'n'roll", "e-mail"]);
    }

    #[test]
    fn incomplete_detection() {
        assert!(is_incomplete("and then he said…"));
        assert!(is_incomplete("and then he said...  "));
        assert!(!is_incomplete("done."));
    }

    #[test]
    fn lexicon_validates_against_vocabulary() {
        let lex = LabelLexicon::emotions16();
        lex.validate(&LabelVocabulary::emotions16()).unwrap();
        assert!(lex.validate(&LabelVocabulary::emotions9()).is_err());
        assert!(lex.is_label_hashtag("#lonely"));
        assert!(lex.key_phrases().contains(&"end of everything".to_string()));
        let again = LabelLexicon::parse_toml(&lex.to_toml()).unwrap();
        assert_eq!(again, lex);
    }
}
