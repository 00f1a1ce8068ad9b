//! Profile text cleaning, tokenization and part-of-speech tagging.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// The fixed Penn Treebank tagset, in column order.
pub const PENN_TAGS: [&str; 36] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
];

/// Index into [`PENN_TAGS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PosTag(u8);

impl PosTag {
    pub fn new(name: &str) -> Option<Self> {
        PENN_TAGS.iter().position(|t| *t == name).map(|i| PosTag(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        PENN_TAGS[self.0 as usize]
    }
}

impl TryFrom<String> for PosTag {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        PosTag::new(&s).ok_or_else(|| format!("unknown POS tag {s:?}"))
    }
}

impl From<PosTag> for String {
    fn from(t: PosTag) -> String {
        t.name().to_string()
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid pattern"))
}

/// Strips HTML tags, wiki markup and URLs, then splits into lowercased
/// sentences ending at `.`, `!` or `?`. Terminal punctuation is kept.
pub fn clean_profile_text(raw: &str) -> Vec<String> {
    static COMMENT: OnceLock<Regex> = OnceLock::new();
    static TAG: OnceLock<Regex> = OnceLock::new();
    static TEMPLATE: OnceLock<Regex> = OnceLock::new();
    static PIPED: OnceLock<Regex> = OnceLock::new();
    static URL: OnceLock<Regex> = OnceLock::new();
    static MARKUP: OnceLock<Regex> = OnceLock::new();
    static ENTITY: OnceLock<Regex> = OnceLock::new();
    static SPACE: OnceLock<Regex> = OnceLock::new();
    static SENTENCE: OnceLock<Regex> = OnceLock::new();

    let mut text = re(&COMMENT, r"(?s)<!--.*?-->").replace_all(raw, " ").into_owned();
    text = re(&TAG, r"</?[A-Za-z][^>]*>").replace_all(&text, " ").into_owned();
    // Templates may nest; strip innermost first.
    let template = re(&TEMPLATE, r"\{\{[^{}]*\}\}");
    while template.is_match(&text) {
        text = template.replace_all(&text, " ").into_owned();
    }
    text = re(&PIPED, r"\[\[(?:[^\]|]*\|)?([^\]]*)\]\]")
        .replace_all(&text, "$1")
        .into_owned();
    text = re(&URL, r"\[?(?:https?|ftp)://[^\s\]]*(?:\s[^\]]*)?\]|(?:https?|ftp)://\S+|www\.\S+")
        .replace_all(&text, " ")
        .into_owned();
    text = re(&MARKUP, r"'{2,}|={2,}|\[\[|\]\]|\{\||\|\}|^[*#:;]+|__[A-Z]+__")
        .replace_all(&text, " ")
        .into_owned();
    text = re(&ENTITY, r"&[a-zA-Z]+;|&#\d+;").replace_all(&text, " ").into_owned();
    text = re(&SPACE, r"\s+").replace_all(&text, " ").into_owned();

    re(&SENTENCE, r"[^.!?]+[.!?]*|[.!?]+")
        .find_iter(&text)
        .map(|m| m.as_str().trim().to_lowercase())
        .filter(|s| s.chars().any(|c| c.is_alphanumeric()))
        .collect()
}

/// Lowercased alphanumeric runs.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Assigns one Penn tag per token of a sentence.
pub trait Tagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

const CLOSED_CLASS: &[(&str, &[&str])] = &[
    ("DT", &["the", "a", "an", "this", "that", "these", "those", "every", "each", "some", "any", "no", "another", "either", "neither"]),
    ("PDT", &["all", "both", "half", "such"]),
    ("CC", &["and", "or", "but", "nor", "yet", "plus"]),
    ("IN", &["of", "in", "on", "at", "by", "for", "with", "from", "about", "into", "over", "after", "before", "under", "between", "through", "during", "without", "against", "among", "because", "if", "while", "since", "than", "as", "although", "upon", "within", "via", "per", "above", "below", "until", "whether", "though", "unless", "across", "toward", "towards"]),
    ("TO", &["to"]),
    ("PRP", &["i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "yourself", "himself", "herself", "itself", "ourselves", "themselves"]),
    ("PRP$", &["my", "your", "his", "her", "its", "our", "their"]),
    ("WDT", &["which"]),
    ("WP", &["who", "what", "whom", "whoever", "whatever"]),
    ("WP$", &["whose"]),
    ("WRB", &["when", "where", "why", "how", "whenever", "wherever"]),
    ("MD", &["can", "could", "will", "would", "shall", "should", "may", "might", "must"]),
    ("EX", &["there"]),
    ("UH", &["oh", "hello", "hi", "yes", "wow", "hey", "ok", "okay", "ah", "oops", "yeah"]),
    ("VBZ", &["is", "has", "does", "says", "gets", "makes"]),
    ("VBP", &["are", "am", "have", "do", "'re"]),
    ("VBD", &["was", "were", "had", "did", "said", "made", "got", "went", "came", "took", "saw", "knew", "thought", "became", "began", "left", "wrote", "found", "gave", "told", "felt", "kept", "met"]),
    ("VBN", &["been", "done", "gone", "seen", "known", "taken", "given", "written", "become", "begun"]),
    ("VBG", &["being", "having", "doing"]),
    ("VB", &["be"]),
    ("RB", &["not", "very", "also", "just", "too", "never", "always", "often", "here", "now", "then", "still", "again", "already", "soon", "perhaps", "quite", "rather", "almost", "ever", "maybe", "else", "once", "sometimes", "usually", "mostly", "only", "even", "well"]),
    ("RBR", &["more", "less", "further", "later"]),
    ("RBS", &["most", "least"]),
    ("JJR", &["better", "worse", "larger", "bigger", "smaller", "older", "newer", "higher", "lower", "greater", "easier", "harder", "longer", "shorter", "fewer"]),
    ("JJS", &["best", "worst", "largest", "biggest", "smallest", "oldest", "newest", "highest", "lowest", "greatest"]),
    ("JJ", &["good", "bad", "new", "old", "great", "big", "small", "high", "low", "own", "other", "many", "much", "few", "long", "short", "young", "early", "late", "important", "free", "real", "sure", "true", "full", "hard", "easy", "open", "main", "same", "different", "several", "various", "happy", "sad", "current", "interested", "english", "american", "british"]),
    ("RP", &["up", "out", "off", "down", "away", "back"]),
    ("POS", &["'s"]),
];

const BASE_VERBS: &[&str] = &[
    "edit", "write", "work", "make", "take", "help", "use", "get", "go", "see", "know", "think",
    "like", "love", "want", "need", "try", "read", "create", "add", "improve", "fix", "contribute",
    "find", "give", "keep", "start", "stop", "leave", "feel", "live", "study", "enjoy", "hope",
    "believe", "come", "look", "call", "ask", "tell", "say", "check", "revert", "delete", "review",
    "update", "expand", "translate", "upload", "remove", "run", "play", "teach", "learn", "visit",
];

/// Baseline tagger: a closed-class lexicon plus suffix rules, with a little
/// left context for verbs. Tokens must already be lowercase.
#[derive(Debug, Clone)]
pub struct SuffixTagger {
    lexicon: std::collections::HashMap<&'static str, PosTag>,
    verbs: HashSet<&'static str>,
}

impl Default for SuffixTagger {
    fn default() -> Self {
        let mut lexicon = std::collections::HashMap::new();
        for (tag, words) in CLOSED_CLASS {
            let t = PosTag::new(tag).expect("closed-class tag in tagset");
            for w in *words {
                lexicon.entry(*w).or_insert(t);
            }
        }
        SuffixTagger {
            lexicon,
            verbs: BASE_VERBS.iter().copied().collect(),
        }
    }
}

impl SuffixTagger {
    fn tag_one(&self, word: &str, prev: Option<&str>) -> &'static str {
        let after_modal = matches!(prev, Some("MD") | Some("TO"));
        let after_pronoun = prev == Some("PRP");
        if let Some(t) = self.lexicon.get(word) {
            return t.name();
        }
        if word.chars().all(|c| c.is_ascii_digit()) {
            return "CD";
        }
        if matches!(word, "one" | "two" | "three" | "four" | "five" | "six" | "seven" | "eight" | "nine" | "ten" | "hundred" | "thousand" | "million") {
            return "CD";
        }
        if self.verbs.contains(word) {
            return if after_modal {
                "VB"
            } else if after_pronoun {
                "VBP"
            } else {
                "VB"
            };
        }
        let n = word.len();
        let ends = |s: &str| word.ends_with(s) && n > s.len() + 2;
        if ends("ly") {
            "RB"
        } else if ends("ing") {
            "VBG"
        } else if ends("ed") {
            if matches!(prev, Some("PRP") | Some("NN") | Some("NNS")) {
                "VBD"
            } else {
                "VBN"
            }
        } else if ends("est") {
            "JJS"
        } else if ["ous", "ful", "able", "ible", "ive", "al", "ic", "less", "ish", "ian"]
            .iter()
            .any(|s| ends(s))
        {
            "JJ"
        } else if ["tion", "sion", "ment", "ness", "ity", "ism", "ship", "ance", "ence"]
            .iter()
            .any(|s| ends(s))
        {
            "NN"
        } else if word.ends_with('s') && !word.ends_with("ss") && n > 3 {
            let stem = &word[..n - 1];
            if after_pronoun || self.verbs.contains(stem) && prev.is_some_and(|p| p.starts_with("NN")) {
                "VBZ"
            } else {
                "NNS"
            }
        } else if after_modal {
            "VB"
        } else {
            "NN"
        }
    }
}

impl Tagger for SuffixTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        let mut prev: Option<&'static str> = None;
        tokens
            .iter()
            .map(|w| {
                let t = self.tag_one(w, prev);
                prev = Some(t);
                PosTag::new(t).expect("tagger emits tagset members")
            })
            .collect()
    }
}

const ENGLISH_WORDS: &str = include_str!("../../data/english_words.txt");
const STOP_WORDS: &str = include_str!("../../data/stopwords.txt");

fn word_set(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Decides which tokens count toward part-of-speech frequencies.
#[derive(Debug, Clone)]
pub struct TokenFilter {
    stop_words: HashSet<String>,
    /// `None` accepts every token.
    dictionary: Option<HashSet<String>>,
}

impl Default for TokenFilter {
    fn default() -> Self {
        TokenFilter {
            stop_words: word_set(STOP_WORDS),
            dictionary: Some(word_set(ENGLISH_WORDS)),
        }
    }
}

impl TokenFilter {
    pub fn new(stop_words: HashSet<String>, dictionary: Option<HashSet<String>>) -> Self {
        TokenFilter { stop_words, dictionary }
    }

    pub fn is_stop_word(&self, token: &str) -> bool {
        self.stop_words.contains(token)
    }

    /// Dictionary membership, also accepting simple inflections of listed words.
    pub fn is_english(&self, token: &str) -> bool {
        let Some(dict) = &self.dictionary else {
            return true;
        };
        if token.chars().any(|c| !c.is_ascii_lowercase()) {
            return false;
        }
        if dict.contains(token) {
            return true;
        }
        ["s", "es", "ed", "d", "ing", "ly"].iter().any(|suffix| {
            token
                .strip_suffix(suffix)
                .is_some_and(|stem| stem.len() >= 3 && dict.contains(stem))
        })
    }

    pub fn keep(&self, token: &str) -> bool {
        !self.is_stop_word(token) && self.is_english(token)
    }
}

/// Tags every sentence and keeps the (token, tag) pairs that pass the filter.
pub fn tagged_tokens(
    sentences: &[String],
    tagger: &dyn Tagger,
    filter: &TokenFilter,
) -> Vec<(String, PosTag)> {
    let mut out = Vec::new();
    for s in sentences {
        let tokens = tokenize(s);
        let tags = tagger.tag(&tokens);
        debug_assert_eq!(tokens.len(), tags.len());
        for (tok, tag) in tokens.into_iter().zip(tags) {
            if filter.keep(&tok) {
                out.push((tok, tag));
            }
        }
    }
    out
}

/// Relative tag frequencies over [`PENN_TAGS`] after dropping `exclude`d
/// words. All zero when nothing survives.
pub fn pos_frequencies(tagged: &[(String, PosTag)], exclude: &BTreeSet<String>) -> Vec<f64> {
    let mut counts = vec![0u64; PENN_TAGS.len()];
    let mut total = 0u64;
    for (tok, tag) in tagged {
        if !exclude.contains(tok) {
            counts[tag.index()] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return vec![0.0; PENN_TAGS.len()];
    }
    counts.into_iter().map(|c| c as f64 / total as f64).collect()
}

/// Tag frequency vector of raw sentences, with no common-word exclusion.
pub fn pos_features(sentences: &[String], tagger: &dyn Tagger, filter: &TokenFilter) -> Vec<f64> {
    pos_frequencies(&tagged_tokens(sentences, tagger, filter), &BTreeSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct MapTagger;
    impl Tagger for MapTagger {
        fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
            tokens
                .iter()
                .map(|t| PosTag::new(if t == "dogs" { "NNS" } else { "VBP" }).unwrap())
                .collect()
        }
    }

    #[test]
    fn tagset_has_36_tags() {
        assert_eq!(PENN_TAGS.len(), 36);
        let unique: HashSet<_> = PENN_TAGS.iter().collect();
        assert_eq!(unique.len(), 36);
    }

    #[test]
    fn cleaning_examples() {
        assert_eq!(
            clean_profile_text("<p>I left.</p> See http://x.y"),
            vec!["i left.", "see"]
        );
        assert!(clean_profile_text("").is_empty());
        assert_eq!(clean_profile_text("No markup here."), vec!["no markup here."]);
    }

    #[test]
    fn cleaning_wiki_markup() {
        let raw = "{{User en}}'''Hello''' I edit [[Physics|physics pages]]! See [https://example.org my site]. <!-- hidden -->Bye?";
        assert_eq!(
            clean_profile_text(raw),
            vec!["hello i edit physics pages!", "see .", "bye?"]
        );
    }

    #[test]
    fn pos_two_tokens() {
        let f = pos_features(&["dogs run".to_string()], &MapTagger, &TokenFilter::default());
        assert_eq!(f[PosTag::new("NNS").unwrap().index()], 0.5);
        assert_eq!(f[PosTag::new("VBP").unwrap().index()], 0.5);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn pos_empty_is_zero() {
        let f = pos_features(&[], &SuffixTagger::default(), &TokenFilter::default());
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filter_drops_stop_and_foreign_words() {
        let f = TokenFilter::default();
        assert!(!f.keep("the"));
        assert!(!f.keep("xqzvbn"));
        assert!(f.keep("encyclopedia"));
        assert!(f.keep("edits"));
    }

    #[test]
    fn suffix_tagger_rules() {
        let t = SuffixTagger::default();
        let toks: Vec<String> = "i quickly edited famous articles"
            .split(' ')
            .map(String::from)
            .collect();
        let tags: Vec<_> = t.tag(&toks).into_iter().map(|t| t.name()).collect();
        assert_eq!(tags, vec!["PRP", "RB", "VBN", "JJ", "NNS"]);
    }
}
