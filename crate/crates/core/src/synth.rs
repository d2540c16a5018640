//! Template-generated mini-corpus of email messages mixing actionable and
//! non-actionable sentences. Fully determined by (size, seed).

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const VERBS: &[&str] = &[
    "send", "review", "schedule", "prepare", "update", "complete", "finish", "check", "confirm",
    "forward", "provide", "sign", "approve", "file", "draft", "organize", "arrange", "deliver",
    "finalize", "fix", "print", "process", "return", "revise", "build", "close", "define",
    "formulate", "propose", "kickstart",
];
const OBJECTS: &[&str] = &[
    "report", "contract", "invoice", "budget", "schedule", "presentation", "proposal", "agreement",
    "spreadsheet", "forecast", "memo", "summary", "timeline", "deck", "draft", "policy",
    "application", "statement", "plan", "checklist",
];
const DAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "tomorrow", "noon", "tonight",
];
const OBJECT_PRONOUNS: &[&str] = &["me", "him", "her", "us", "them"];
const ADJECTIVES: &[&str] = &[
    "great", "quiet", "busy", "long", "rainy", "pleasant", "interesting", "slow", "strong", "calm",
];
const LEISURE: &[&str] = &["the guitar", "tennis", "golf", "chess", "the piano", "soccer"];
const CITIES: &[&str] = &["Houston", "Portland", "Calgary", "London", "Omaha", "Denver"];
const NAMES: &[&str] = &["John", "Sara", "Mike", "Kim", "Vince", "Louise", "Greg", "Jeff"];
const TEAMS: &[&str] = &["The team", "Our group", "The desk", "Legal", "Accounting"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or_default()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// A sentence the filter cascade accepts with the shipped lexicon.
pub fn actionable_sentence<R: Rng>(rng: &mut R) -> String {
    let verb = pick(rng, VERBS);
    let object = pick(rng, OBJECTS);
    let day = pick(rng, DAYS);
    let pronoun = pick(rng, OBJECT_PRONOUNS);
    match rng.gen_range(0..7) {
        0 => format!("Please {verb} the {object} for {pronoun} by {day}."),
        1 => format!("Can you {verb} the {object} before {day}?"),
        2 => format!("{} the {object} and get it to {pronoun} by {day}.", capitalize(verb)),
        3 => format!("I need you to {verb} the {object} by {day}."),
        4 => format!("{} the {object} first thing {day}.", capitalize(verb)),
        5 => format!("Could you {verb} the {object} for {pronoun}?"),
        _ => format!("We must {verb} the {object} by {day}."),
    }
}

/// A sentence the cascade rejects; covers every rejection stage.
pub fn non_actionable_sentence<R: Rng>(rng: &mut R) -> String {
    let verb = pick(rng, VERBS);
    let object = pick(rng, OBJECTS);
    let day = pick(rng, DAYS);
    let adjective = pick(rng, ADJECTIVES);
    match rng.gen_range(0..10) {
        0 => format!("I like to play {} on weekends.", pick(rng, LEISURE)),
        1 => format!("The weather in {} was {adjective} this week.", pick(rng, CITIES)),
        2 => format!("Thanks for the {object}."),
        3 => format!("Our {object} numbers looked {adjective} last quarter."),
        4 => format!("It was {adjective} to see {} at the party.", pick(rng, NAMES)),
        5 => format!("You shouldn't {verb} the {object} until {day}."),
        6 => format!("We don't {verb} the {object} on {day}."),
        7 => format!("{} will {verb} the {object} later.", pick(rng, TEAMS)),
        8 => format!(
            "As mentioned in the long discussion we had with the regional office and the \
             people from {} about the {adjective} market conditions, you may {verb} the {object} \
             whenever it seems appropriate to everyone involved.",
            pick(rng, CITIES)
        ),
        _ => format!("{} is out of the office until {day}.", pick(rng, NAMES)),
    }
}

/// One raw RFC-822 style message.
pub fn synthetic_message<R: Rng>(rng: &mut R, index: usize) -> String {
    let from = pick(rng, NAMES).to_lowercase();
    let to = pick(rng, NAMES).to_lowercase();
    let mut out = format!(
        "Message-ID: <{index}.synthetic@example.com>\nDate: Mon, 14 May 2001 16:39:00 -0700\n\
         From: {from}@example.com\nTo: {to}@example.com,\n\tteam@example.com\n\
         Subject: {} {}\n\n",
        capitalize(pick(rng, OBJECTS)),
        pick(rng, DAYS)
    );
    let sentences = rng.gen_range(3..=7);
    for i in 0..sentences {
        let sentence = if rng.gen_bool(0.45) {
            actionable_sentence(rng)
        } else {
            non_actionable_sentence(rng)
        };
        out.push_str(&sentence);
        out.push(if i % 3 == 2 { '\n' } else { ' ' });
    }
    out.push('\n');
    if rng.gen_bool(0.2) {
        out.push_str(&format!("> {}\n", actionable_sentence(rng)));
    }
    if rng.gen_bool(0.25) {
        out.push_str("\n -----Original Message-----\nFrom: someone\n");
        out.push_str(&actionable_sentence(rng));
        out.push('\n');
    }
    out
}

/// `(relative path, raw message)` pairs laid out like a maildir tree.
pub fn synthetic_corpus(n_messages: usize, seed: u64) -> Vec<(PathBuf, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_messages)
        .map(|i| {
            let path = PathBuf::from(format!("user{:02}", i % 10))
                .join("inbox")
                .join(format!("{}.", i / 10 + 1));
            (path, synthetic_message(&mut rng, i))
        })
        .collect()
}

pub fn write_synthetic_maildir(root: impl AsRef<Path>, n_messages: usize, seed: u64) -> Result<()> {
    let root = root.as_ref();
    for (rel, body) in synthetic_corpus(n_messages, seed) {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
