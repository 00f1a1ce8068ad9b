use wikichurn::features::{clean_profile_text, tokenize, SuffixTagger, Tagger};

const PROFILE: &str = "'''Hello!''' I am a [[Wikipedia:Administrators|sysop]] who writes about rivers.\n\
{{User en}}\n\
The quickly growing towns were mapped in 2019, and I enjoyed editing them.";

// Regression pin for the baseline tagger.
const GOLDEN: &[&[(&str, &str)]] = &[
    &[("hello", "UH")],
    &[
        ("i", "PRP"), ("am", "VBP"), ("a", "DT"), ("sysop", "NN"), ("who", "WP"),
        ("writes", "NNS"), ("about", "IN"), ("rivers", "NNS"),
    ],
    &[
        ("the", "DT"), ("quickly", "RB"), ("growing", "VBG"), ("towns", "NNS"), ("were", "VBD"),
        ("mapped", "VBN"), ("in", "IN"), ("2019", "CD"), ("and", "CC"), ("i", "PRP"),
        ("enjoyed", "VBD"), ("editing", "VBG"), ("them", "PRP"),
    ],
];

#[test]
fn baseline_tags_are_pinned() {
    let sentences = clean_profile_text(PROFILE);
    assert_eq!(sentences.len(), GOLDEN.len(), "{sentences:?}");
    let tagger = SuffixTagger::default();
    for (s, want) in sentences.iter().zip(GOLDEN) {
        let tokens = tokenize(s);
        let got: Vec<(&str, &str)> = tokens
            .iter()
            .map(String::as_str)
            .zip(tagger.tag(&tokens).into_iter().map(|t| t.name()))
            .collect();
        assert_eq!(&got, want);
    }
}

#[test]
fn markup_never_reaches_the_tokens() {
    for s in clean_profile_text(PROFILE) {
        for t in tokenize(&s) {
            assert!(!t.contains(['[', ']', '{', '}', '|', '\'']), "{t}");
        }
    }
}
