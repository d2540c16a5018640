//! Sentence splitting, tokenization and the POS group table.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::EmailMessage;

const ABBREVIATIONS: [&str; 10] = [
    "mr.", "mrs.", "ms.", "dr.", "inc.", "corp.", "vs.", "e.g.", "i.e.", "etc.",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        let lower = surface.to_lowercase();
        Token { surface, lower }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub message_id: String,
    pub index: usize,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.message_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<Token>,
    pub origin: Origin,
}

impl Sentence {
    pub fn new(text: impl Into<String>, origin: Origin) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sentence {
            text,
            tokens,
            origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupTag {
    Verb,
    Noun,
    Adjective,
    Adverb,
    Pronoun,
    Other,
}

/// Maps a Penn Treebank tag onto its coarse group.
pub fn pos_group(tag: &str) -> GroupTag {
    match tag {
        "VB" | "VBD" | "VBG" | "VBP" | "VBZ" => GroupTag::Verb,
        "NN" | "NNS" | "NNP" | "NNPS" => GroupTag::Noun,
        "JJ" | "JJR" | "JJS" => GroupTag::Adjective,
        "RB" | "RBR" | "RBS" => GroupTag::Adverb,
        "PRP" | "PRP$" => GroupTag::Pronoun,
        _ => GroupTag::Other,
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits text into trimmed sentence strings. Terminal punctuation only ends a
/// sentence when followed by whitespace or end of input; newlines always do.
pub fn split_sentence_texts(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |s: &str| {
        let s = s.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            push(&body[start..pos]);
            start = pos + 1;
            i += 1;
            continue;
        }
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(body.len(), |&(p, _)| p);
        let at_boundary = chars.get(j).map_or(true, |&(_, n)| n.is_whitespace());
        if at_boundary {
            let word_start = body[..end]
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + body[p..].chars().next().map_or(1, char::len_utf8));
            let single_period = j - i == 1 && c == '.';
            if !(single_period && is_abbreviation(&body[word_start..end])) {
                push(&body[start..end]);
                start = end;
            }
        }
        i = j;
    }
    push(&body[start..]);
    out
}

pub fn split_sentences(body: &str) -> Vec<Sentence> {
    split_sentence_texts(body)
        .into_iter()
        .enumerate()
        .map(|(index, text)| {
            Sentence::new(
                text,
                Origin {
                    message_id: String::new(),
                    index,
                },
            )
        })
        .filter(|s| !s.tokens.is_empty())
        .collect()
}

/// Sentences of one message, with origins pointing back at it.
pub fn segment_message(msg: &EmailMessage) -> Vec<Sentence> {
    split_sentences(&msg.body)
        .into_iter()
        .map(|mut s| {
            s.origin.message_id = msg.id.clone();
            s
        })
        .collect()
}

fn is_detachable(c: char) -> bool {
    !c.is_alphanumeric() && c != '\''
}

/// Whitespace tokenizer that peels leading and trailing punctuation into
/// single-character tokens. Apostrophes stay attached.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let core_start = chunk
            .char_indices()
            .find(|&(_, c)| !is_detachable(c))
            .map_or(chunk.len(), |(p, _)| p);
        let core_end = chunk
            .char_indices()
            .rev()
            .find(|&(_, c)| !is_detachable(c))
            .map_or(core_start, |(p, c)| p + c.len_utf8())
            .max(core_start);
        tokens.extend(chunk[..core_start].chars().map(|c| Token::new(c)));
        if core_end > core_start {
            tokens.push(Token::new(&chunk[core_start..core_end]));
        }
        tokens.extend(chunk[core_end..].chars().map(|c| Token::new(c)));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        assert_eq!(
            split_sentence_texts("Send the file. Thanks."),
            vec!["Send the file.", "Thanks."]
        );
        assert_eq!(split_sentence_texts("Really?! Yes\nno"), vec!["Really?!", "Yes", "no"]);
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(split_sentences("Mr. Smith will arrive tomorrow.").len(), 1);
        assert_eq!(
            split_sentence_texts("Bring fruit, e.g. apples. Then leave."),
            vec!["Bring fruit, e.g. apples.", "Then leave."]
        );
        assert_eq!(split_sentence_texts("See (Dr. Who) now."), vec!["See (Dr. Who) now."]);
    }

    #[test]
    fn inner_periods_do_not_split() {
        assert_eq!(split_sentence_texts("Visit enron.com today."), vec!["Visit enron.com today."]);
    }

    #[test]
    fn empty_input() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" \n\n ").is_empty());
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Get your homework finished by tomorrow").len(), 6);
        let toks = surfaces("You shouldn't close it.");
        assert_eq!(toks, vec!["You", "shouldn't", "close", "it", "."]);
        assert!(tokenize("  ").is_empty());
        assert_eq!(surfaces("(hello)"), vec!["(", "hello", ")"]);
        assert_eq!(surfaces("--"), vec!["-", "-"]);
        assert_eq!(tokenize("Send")[0].lower, "send");
    }

    #[test]
    fn pos_groups() {
        assert_eq!(pos_group("VBD"), GroupTag::Verb);
        assert_eq!(pos_group("PRP$"), GroupTag::Pronoun);
        assert_eq!(pos_group("NNPS"), GroupTag::Noun);
        assert_eq!(pos_group("JJS"), GroupTag::Adjective);
        assert_eq!(pos_group("RBR"), GroupTag::Adverb);
        assert_eq!(pos_group("XYZ"), GroupTag::Other);
    }
}
