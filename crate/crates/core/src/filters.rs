//! The four-stage cascade that decides whether a sentence is a candidate
//! actionable: action verb, length/ratio, pronoun signal, negation.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{Sentence, Token};

const DEFAULT_ACTION_VERBS: &str = include_str!("../lexicon/action_verbs.txt");
const DEFAULT_SUBJECT_PRONOUNS: &str = include_str!("../lexicon/subject_pronouns.txt");
const DEFAULT_OBJECT_PRONOUNS: &str = include_str!("../lexicon/object_pronouns.txt");
const DEFAULT_NEGATIONS: &str = include_str!("../lexicon/negations.txt");

pub const ACTION_VERBS_FILE: &str = "action_verbs.txt";
pub const SUBJECT_PRONOUNS_FILE: &str = "subject_pronouns.txt";
pub const OBJECT_PRONOUNS_FILE: &str = "object_pronouns.txt";
pub const NEGATIONS_FILE: &str = "negations.txt";

fn ends_with_any(word: &str, suffixes: &[&str]) -> bool {
    suffixes.iter().any(|s| word.ends_with(s))
}

/// Regular surface forms of a base verb: base, third person, past, gerund.
pub fn expand_inflections(base: &str) -> BTreeSet<String> {
    let mut forms = BTreeSet::new();
    if base.is_empty() {
        return forms;
    }
    forms.insert(base.to_string());
    if ends_with_any(base, &["s", "x", "z", "ch", "sh"]) {
        forms.insert(format!("{base}es"));
    } else {
        forms.insert(format!("{base}s"));
    }
    if base.ends_with('e') {
        forms.insert(format!("{base}d"));
    } else {
        forms.insert(format!("{base}ed"));
    }
    if base.ends_with('e') && !ends_with_any(base, &["ee", "ye", "oe"]) {
        forms.insert(format!("{}ing", &base[..base.len() - 1]));
    } else {
        forms.insert(format!("{base}ing"));
    }
    forms
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub action_verbs: BTreeSet<String>,
    pub subject_pronouns: BTreeSet<String>,
    pub object_pronouns: BTreeSet<String>,
    pub negations: BTreeSet<String>,
}

fn parse_entries(list: &'static str, text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.chars().any(char::is_whitespace) {
            return Err(Error::InvalidLexicon {
                list,
                entry: line.to_string(),
                reason: "entries may not contain whitespace".into(),
            });
        }
        out.push(line.to_lowercase());
    }
    Ok(out)
}

impl Lexicon {
    /// Builds a lexicon from the contents of the four word lists. Action verb
    /// entries are expanded with [`expand_inflections`].
    pub fn from_lists(
        action_verbs: &str,
        subject_pronouns: &str,
        object_pronouns: &str,
        negations: &str,
    ) -> Result<Self> {
        let action_verbs = parse_entries("action_verbs", action_verbs)?
            .iter()
            .flat_map(|verb| expand_inflections(verb))
            .collect();
        let lexicon = Lexicon {
            action_verbs,
            subject_pronouns: parse_entries("subject_pronouns", subject_pronouns)?
                .into_iter()
                .collect(),
            object_pronouns: parse_entries("object_pronouns", object_pronouns)?
                .into_iter()
                .collect(),
            negations: parse_entries("negations", negations)?.into_iter().collect(),
        };
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        Self::from_lists(
            &read(ACTION_VERBS_FILE)?,
            &read(SUBJECT_PRONOUNS_FILE)?,
            &read(OBJECT_PRONOUNS_FILE)?,
            &read(NEGATIONS_FILE)?,
        )
    }

    /// Writes the shipped word lists into `dir`.
    pub fn write_defaults(dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            (ACTION_VERBS_FILE, DEFAULT_ACTION_VERBS),
            (SUBJECT_PRONOUNS_FILE, DEFAULT_SUBJECT_PRONOUNS),
            (OBJECT_PRONOUNS_FILE, DEFAULT_OBJECT_PRONOUNS),
            (NEGATIONS_FILE, DEFAULT_NEGATIONS),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("action_verbs", &self.action_verbs),
            ("subject_pronouns", &self.subject_pronouns),
            ("object_pronouns", &self.object_pronouns),
            ("negations", &self.negations),
        ];
        for (list, entries) in lists {
            for entry in entries.iter() {
                let bad = if entry.is_empty() {
                    Some("empty entry")
                } else if entry.chars().any(char::is_whitespace) {
                    Some("entries may not contain whitespace")
                } else if entry.to_lowercase() != *entry {
                    Some("entries must be lowercase")
                } else {
                    None
                };
                if let Some(reason) = bad {
                    return Err(Error::InvalidLexicon {
                        list,
                        entry: entry.clone(),
                        reason: reason.into(),
                    });
                }
            }
        }
        if let Some(both) = self.subject_pronouns.intersection(&self.object_pronouns).next() {
            return Err(Error::InvalidLexicon {
                list: "object_pronouns",
                entry: both.clone(),
                reason: "also listed as a subject pronoun".into(),
            });
        }
        Ok(())
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_lists(
            DEFAULT_ACTION_VERBS,
            DEFAULT_SUBJECT_PRONOUNS,
            DEFAULT_OBJECT_PRONOUNS,
            DEFAULT_NEGATIONS,
        )
        .expect("shipped lexicon is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub lexicon: Lexicon,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub min_action_ratio: f64,
    pub allow_imperative_as_pronoun_pass: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            lexicon: Lexicon::default(),
            min_tokens: 3,
            max_tokens: 25,
            min_action_ratio: 0.04,
            allow_imperative_as_pronoun_pass: true,
        }
    }
}

impl FilterConfig {
    pub fn with_lexicon(lexicon: Lexicon) -> Self {
        FilterConfig {
            lexicon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_tokens < 1 || self.min_tokens > self.max_tokens {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= min_tokens <= max_tokens, got {} and {}",
                self.min_tokens, self.max_tokens
            )));
        }
        if !(0.0..=1.0).contains(&self.min_action_ratio) {
            return Err(Error::InvalidConfig(format!(
                "min_action_ratio {} outside [0, 1]",
                self.min_action_ratio
            )));
        }
        self.lexicon.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterStage {
    #[serde(rename = "F1_action_verb")]
    ActionVerb,
    #[serde(rename = "F2_length")]
    Length,
    #[serde(rename = "F3_pronoun")]
    Pronoun,
    #[serde(rename = "F4_negation")]
    Negation,
}

impl FilterStage {
    pub const ALL: [FilterStage; 4] = [
        FilterStage::ActionVerb,
        FilterStage::Length,
        FilterStage::Pronoun,
        FilterStage::Negation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterStage::ActionVerb => "F1_action_verb",
            FilterStage::Length => "F2_length",
            FilterStage::Pronoun => "F3_pronoun",
            FilterStage::Negation => "F4_negation",
        }
    }
}

impl fmt::Display for FilterStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FilterStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterStage::ALL
            .into_iter()
            .find(|stage| stage.as_str() == s)
            .ok_or_else(|| Error::format("filter stage", format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounSignal {
    pub has_subject: bool,
    pub has_object: bool,
    pub imperative_start: bool,
}

impl PronounSignal {
    pub fn passes(&self, cfg: &FilterConfig) -> bool {
        self.has_subject
            || self.has_object
            || (cfg.allow_imperative_as_pronoun_pass && self.imperative_start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub passed: bool,
    pub rejected_by: Option<FilterStage>,
    pub matched_verbs: Vec<String>,
    pub pronoun_signal: PronounSignal,
}

/// Filter 1. Returns whether any token is an action verb, plus the matches
/// in sentence order.
pub fn contains_action_verb(tokens: &[Token], lexicon: &Lexicon) -> (bool, Vec<String>) {
    let matched: Vec<String> = tokens
        .iter()
        .filter(|t| lexicon.action_verbs.contains(&t.lower))
        .map(|t| t.lower.clone())
        .collect();
    (!matched.is_empty(), matched)
}

/// Filter 2. Sentence length bounds plus the action-verb density floor.
pub fn length_ok(tokens: &[Token], matched_count: usize, cfg: &FilterConfig) -> bool {
    let n = tokens.len();
    if n < cfg.min_tokens || n > cfg.max_tokens || n == 0 {
        return false;
    }
    matched_count as f64 / n as f64 >= cfg.min_action_ratio
}

/// Filter 3 inputs. Whether the signal passes is decided by
/// [`PronounSignal::passes`].
pub fn pronoun_signal(tokens: &[Token], lexicon: &Lexicon) -> PronounSignal {
    PronounSignal {
        has_subject: tokens
            .iter()
            .any(|t| lexicon.subject_pronouns.contains(&t.lower)),
        has_object: tokens
            .iter()
            .any(|t| lexicon.object_pronouns.contains(&t.lower)),
        imperative_start: tokens
            .first()
            .is_some_and(|t| lexicon.action_verbs.contains(&t.lower)),
    }
}

/// Filter 4.
pub fn contains_negation(tokens: &[Token], lexicon: &Lexicon) -> bool {
    tokens.iter().any(|t| lexicon.negations.contains(&t.lower))
}

/// Runs F1 -> F2 -> F3 -> F4, stopping at the first rejection.
pub fn apply_filters(sentence: &Sentence, cfg: &FilterConfig) -> FilterVerdict {
    apply_filters_to_tokens(&sentence.tokens, cfg)
}

pub fn apply_filters_to_tokens(tokens: &[Token], cfg: &FilterConfig) -> FilterVerdict {
    let lexicon = &cfg.lexicon;
    let reject = |stage, matched_verbs, pronoun_signal| FilterVerdict {
        passed: false,
        rejected_by: Some(stage),
        matched_verbs,
        pronoun_signal,
    };
    let (has_verb, matched) = contains_action_verb(tokens, lexicon);
    if !has_verb {
        return reject(FilterStage::ActionVerb, matched, PronounSignal::default());
    }
    if !length_ok(tokens, matched.len(), cfg) {
        return reject(FilterStage::Length, matched, PronounSignal::default());
    }
    let signal = pronoun_signal(tokens, lexicon);
    if !signal.passes(cfg) {
        return reject(FilterStage::Pronoun, matched, signal);
    }
    if contains_negation(tokens, lexicon) {
        return reject(FilterStage::Negation, matched, signal);
    }
    FilterVerdict {
        passed: true,
        rejected_by: None,
        matched_verbs: matched,
        pronoun_signal: signal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::tokenize;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn table_lexicon() -> Lexicon {
        Lexicon::from_lists(
            "arrive\nbuild\nclose\ndefine\nformulate\npropose\nkickstart\n",
            DEFAULT_SUBJECT_PRONOUNS,
            DEFAULT_OBJECT_PRONOUNS,
            DEFAULT_NEGATIONS,
        )
        .unwrap()
    }

    #[test]
    fn inflections() {
        assert_eq!(
            expand_inflections("propose"),
            set(&["propose", "proposes", "proposed", "proposing"])
        );
        assert_eq!(
            expand_inflections("kickstart"),
            set(&["kickstart", "kickstarts", "kickstarted", "kickstarting"])
        );
        assert_eq!(
            expand_inflections("close"),
            set(&["close", "closes", "closed", "closing"])
        );
        assert_eq!(
            expand_inflections("fax"),
            set(&["fax", "faxes", "faxed", "faxing"])
        );
        assert_eq!(
            expand_inflections("agree"),
            set(&["agree", "agrees", "agreed", "agreeing"])
        );
    }

    #[test]
    fn action_verb_filter() {
        let lex = table_lexicon();
        assert_eq!(
            contains_action_verb(&tokenize("Build the dashboard"), &lex),
            (true, vec!["build".to_string()])
        );
        assert_eq!(
            contains_action_verb(&tokenize("I like to play the guitar"), &Lexicon::default()),
            (false, vec![])
        );
        assert_eq!(contains_action_verb(&[], &lex), (false, vec![]));
    }

    #[test]
    fn length_filter() {
        let cfg = FilterConfig::default();
        let six = tokenize("Get your homework finished by tomorrow");
        assert!(length_ok(&six, 1, &cfg));
        assert!(!length_ok(&tokenize("Send it"), 1, &cfg));
        let thirty = tokenize(&vec!["word"; 30].join(" "));
        assert!(!length_ok(&thirty, 1, &cfg));
        assert!(!length_ok(&[], 0, &cfg));
    }

    #[test]
    fn pronoun_filter() {
        let cfg = FilterConfig::default();
        let lex = &cfg.lexicon;
        let s = pronoun_signal(&tokenize("Send me the report"), lex);
        assert!(s.has_object && s.passes(&cfg));
        let s = pronoun_signal(&tokenize("You should file the claim"), lex);
        assert!(s.has_subject);
        let s = pronoun_signal(&tokenize("Close the deal"), lex);
        assert!(!s.has_subject && !s.has_object && s.imperative_start);
        assert!(s.passes(&cfg));
        let strict = FilterConfig {
            allow_imperative_as_pronoun_pass: false,
            ..cfg.clone()
        };
        assert!(!s.passes(&strict));
    }

    #[test]
    fn negation_filter() {
        let lex = Lexicon::default();
        assert!(contains_negation(&tokenize("You shouldn't close the account"), &lex));
        assert!(!contains_negation(&tokenize("Close the account"), &lex));
        assert!(contains_negation(&tokenize("Do not close it"), &lex));
    }

    #[test]
    fn cascade_examples() {
        let cfg = FilterConfig::default();
        let verdict = apply_filters_to_tokens(&tokenize("Build the quarterly report for me"), &cfg);
        assert!(verdict.passed);
        assert_eq!(verdict.rejected_by, None);
        assert_eq!(verdict.matched_verbs, vec!["build"]);

        let verdict = apply_filters_to_tokens(&tokenize("I like to play the guitar"), &cfg);
        assert_eq!(verdict.rejected_by, Some(FilterStage::ActionVerb));

        let verdict = apply_filters_to_tokens(&tokenize("You shouldn't formulate the plan"), &cfg);
        assert_eq!(verdict.rejected_by, Some(FilterStage::Negation));
        assert!(!verdict.passed);
    }

    #[test]
    fn lexicon_rejects_bad_entries() {
        assert!(matches!(
            Lexicon::from_lists("send it\n", "", "", ""),
            Err(Error::InvalidLexicon { .. })
        ));
        assert!(matches!(
            Lexicon::from_lists("", "you\n", "you\n", ""),
            Err(Error::InvalidLexicon { .. })
        ));
        let lex = Lexicon::from_lists("# comment\n\nSend\n", "", "", "").unwrap();
        assert!(lex.action_verbs.contains("sending"));
    }

    #[test]
    fn shipped_lexicon_covers_named_words() {
        let lex = Lexicon::default();
        for verb in ["arrive", "build", "close", "define", "formulate", "propose", "kickstart"] {
            assert!(lex.action_verbs.contains(verb), "{verb}");
        }
        for p in ["me", "her", "him", "us", "them"] {
            assert!(lex.object_pronouns.contains(p));
        }
        for p in ["i", "we", "you", "he", "she", "they"] {
            assert!(lex.subject_pronouns.contains(p));
        }
        for n in ["shouldn't", "couldn't", "wouldn't"] {
            assert!(lex.negations.contains(n));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FilterConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.min_tokens = 0;
        assert!(cfg.validate().is_err());
        cfg.min_tokens = 30;
        assert!(cfg.validate().is_err());
        cfg.min_tokens = 3;
        cfg.min_action_ratio = 1.5;
        assert!(cfg.validate().is_err());
    }
}
