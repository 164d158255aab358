//! Human change statements ("I moved the cup from the kitchen to the table in
//! the living room") to topological update records.
//!
//! The shipped [`GrammarExtractor`] is a small ordered template grammar over
//! a [`Lexicon`]. Anything implementing [`Extractor`] can replace it.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::normalize_label;
use crate::update::{Action, Provenance, UpdateRecord};

const DEFAULT_LEXICON_JSON: &str = include_str!("../data/lexicon.json");

const ARTICLES: &[&str] = &["the", "a", "an", "my", "our", "your", "some", "his", "her", "their", "this", "that"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub verbs_removed: Vec<String>,
    pub verbs_moved: Vec<String>,
    pub verbs_added: Vec<String>,
    pub rooms: Vec<String>,
    pub objects: Vec<String>,
    pub supports: Vec<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_json(DEFAULT_LEXICON_JSON).expect("shipped lexicon is valid")
    }
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut lex: Lexicon = serde_json::from_str(text)?;
        for list in [
            &mut lex.verbs_removed,
            &mut lex.verbs_moved,
            &mut lex.verbs_added,
            &mut lex.rooms,
            &mut lex.objects,
            &mut lex.supports,
        ] {
            for w in list.iter_mut() {
                *w = normalize_label(w);
            }
            // Longest phrases first so multi-word entries win.
            list.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            list.dedup();
        }
        Ok(lex)
    }

    /// Adds any room labels not already known.
    pub fn with_rooms<'a>(mut self, rooms: impl IntoIterator<Item = &'a str>) -> Self {
        for r in rooms {
            let r = normalize_label(r);
            if !self.rooms.contains(&r) {
                self.rooms.push(r);
            }
        }
        self.rooms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    /// Template matched and every phrase is a lexicon entry verbatim.
    Exact,
    /// Template matched but some phrase needed normalization or is unknown.
    Lexicon,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementParse {
    pub action: Option<Action>,
    pub target_object: Option<String>,
    pub support_object: Option<String>,
    pub source_room: Option<String>,
    pub target_room: Option<String>,
    pub confidence: Confidence,
}

impl StatementParse {
    pub fn failed() -> Self {
        StatementParse {
            action: None,
            target_object: None,
            support_object: None,
            source_room: None,
            target_room: None,
            confidence: Confidence::Failed,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.confidence == Confidence::Failed
    }
}

/// Text to structured change. Must be deterministic.
pub trait Extractor {
    fn extract(&self, text: &str) -> StatementParse;
}

#[derive(Debug, Clone, Default)]
pub struct GrammarExtractor {
    pub lexicon: Lexicon,
}

impl GrammarExtractor {
    pub fn new(lexicon: Lexicon) -> Self {
        GrammarExtractor { lexicon }
    }
}

impl Extractor for GrammarExtractor {
    fn extract(&self, text: &str) -> StatementParse {
        parse_statement(text, &self.lexicon)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HumanError {
    #[error("statement could not be parsed")]
    ParseWasFailed,
}

/// Topological record for a successful parse: no pose, no box.
pub fn to_record(parse: &StatementParse, now: f64) -> Result<UpdateRecord, HumanError> {
    let (Some(action), Some(object)) = (parse.action, parse.target_object.as_deref()) else {
        return Err(HumanError::ParseWasFailed);
    };
    if parse.is_failed() {
        return Err(HumanError::ParseWasFailed);
    }
    let mut rec = UpdateRecord::new(action, object, Provenance::Human, now);
    rec.source_room = parse.source_room.clone();
    rec.target_room = parse.target_room.clone();
    rec.support_object = parse.support_object.clone();
    Ok(rec)
}

static CLAUSE_BREAK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:,|;|\s+(?:because|since|as it|as they|so that|but|while|when)\b)").expect("valid regex")
});

static MOVED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<obj>.+?) from (?P<src>.+?) (?:to|into|onto|in) (?P<dst>.+)$").expect("valid regex")
});

static REMOVED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<obj>.+?)(?: (?:that|which) (?:was|were|is|are))? (?:from|in|out of|off) (?P<src>.+)$")
        .expect("valid regex")
});

static ADDED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<obj>.+?) (?:to|into|in|on|onto) (?P<dst>.+)$").expect("valid regex")
});

fn clean(text: &str) -> String {
    let lower = text.to_lowercase();
    let cut = CLAUSE_BREAK.find(&lower).map_or(lower.as_str(), |m| &lower[..m.start()]);
    let kept: String = cut
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' || c == '-' { c } else { ' ' })
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_articles(phrase: &str) -> String {
    let mut words: Vec<&str> = phrase.split_whitespace().collect();
    while words.first().is_some_and(|w| ARTICLES.contains(w)) {
        words.remove(0);
    }
    words.join(" ")
}

/// Finds `phrase` (already article-free) in `entries`; the bool is true for
/// a verbatim hit.
fn lookup(phrase: &str, entries: &[String]) -> Option<(String, bool)> {
    lookup_with(phrase, entries, true)
}

fn lookup_with(phrase: &str, entries: &[String], head_noun: bool) -> Option<(String, bool)> {
    if entries.iter().any(|e| e == phrase) {
        return Some((phrase.to_string(), true));
    }
    let squash = |s: &str| s.replace(['-', '_', ' ', '\''], "");
    let singular = phrase
        .strip_suffix("es")
        .filter(|_| phrase.ends_with("shes") || phrase.ends_with("ches") || phrase.ends_with("xes"))
        .or_else(|| phrase.strip_suffix('s'))
        .unwrap_or(phrase);
    let forms = [phrase, singular];
    for f in forms {
        if let Some(e) = entries.iter().find(|e| squash(e) == squash(f)) {
            return Some((e.clone(), false));
        }
    }
    if !head_noun {
        return None;
    }
    // Head noun: "old towel" -> "towel". Entries are longest-first.
    forms.iter().find_map(|f| {
        entries
            .iter()
            .find(|e| f.ends_with(&format!(" {e}")))
            .map(|e| (e.clone(), false))
    })
}

struct Place {
    support: Option<(String, bool)>,
    room: Option<(String, bool)>,
}

/// "the table in the living room" -> support `table`, room `living room`.
fn split_place(phrase: &str, lex: &Lexicon) -> Place {
    let phrase = strip_articles(phrase);
    if let Some(room) = lookup_with(&phrase, &lex.rooms, false) {
        return Place {
            support: None,
            room: Some(room),
        };
    }
    for sep in [" in ", " of ", " inside "] {
        if let Some(i) = phrase.rfind(sep) {
            let room = strip_articles(&phrase[i + sep.len()..]);
            let support = strip_articles(&phrase[..i]);
            let support = strip_articles(support.trim_start_matches("top of ").trim_start_matches("top "));
            return Place {
                support: Some(lookup(&support, &lex.supports).unwrap_or((support, false))),
                room: lookup_with(&room, &lex.rooms, false),
            };
        }
    }
    Place {
        support: Some(lookup(&phrase, &lex.supports).unwrap_or((phrase, false))),
        room: None,
    }
}

fn find_verb<'a>(text: &'a str, verbs: &[String]) -> Vec<&'a str> {
    // Every occurrence, leftmost first, of any verb at word boundaries.
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for v in verbs {
        let mut from = 0;
        while let Some(i) = text[from..].find(v.as_str()) {
            let start = from + i;
            let end = start + v.len();
            let left_ok = start == 0 || text.as_bytes()[start - 1] == b' ';
            let right_ok = end == text.len() || text.as_bytes()[end] == b' ';
            if left_ok && right_ok && end < text.len() {
                hits.push((start, end));
            }
            from = start + 1;
        }
    }
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    hits.into_iter().map(|(_, end)| text[end + 1..].trim()).collect()
}

fn object_phrase(raw: &str, lex: &Lexicon) -> Option<(String, bool)> {
    let obj = strip_articles(raw);
    if obj.is_empty() {
        return None;
    }
    Some(lookup(&obj, &lex.objects).unwrap_or((obj, false)))
}

fn finish(
    action: Action,
    object: (String, bool),
    source: Option<(String, bool)>,
    target: Option<(String, bool)>,
    support: Option<(String, bool)>,
) -> StatementParse {
    let exact = object.1
        && source.as_ref().is_none_or(|s| s.1)
        && target.as_ref().is_none_or(|s| s.1)
        && support.as_ref().is_none_or(|s| s.1);
    StatementParse {
        action: Some(action),
        target_object: Some(object.0),
        support_object: support.map(|s| s.0),
        source_room: source.map(|s| s.0),
        target_room: target.map(|s| s.0),
        confidence: if exact { Confidence::Exact } else { Confidence::Lexicon },
    }
}

fn try_moved(rest: &str, lex: &Lexicon) -> Option<StatementParse> {
    let c = MOVED.captures(rest)?;
    let object = object_phrase(&c["obj"], lex)?;
    let src = split_place(&c["src"], lex);
    let dst = split_place(&c["dst"], lex);
    Some(finish(Action::Moved, object, Some(src.room?), Some(dst.room?), dst.support))
}

fn try_removed(rest: &str, lex: &Lexicon) -> Option<StatementParse> {
    let c = REMOVED.captures(rest)?;
    let object = object_phrase(&c["obj"], lex)?;
    let src = split_place(&c["src"], lex);
    Some(finish(Action::Removed, object, Some(src.room?), None, src.support))
}

fn try_added(rest: &str, lex: &Lexicon) -> Option<StatementParse> {
    let c = ADDED.captures(rest)?;
    let object = object_phrase(&c["obj"], lex)?;
    let dst = split_place(&c["dst"], lex);
    Some(finish(Action::Added, object, None, Some(dst.room?), dst.support))
}

/// Total and deterministic: unmatched text, or a room name the lexicon does
/// not know, yields a `Failed` parse.
pub fn parse_statement(text: &str, lexicon: &Lexicon) -> StatementParse {
    let text = clean(text);
    type Template = fn(&str, &Lexicon) -> Option<StatementParse>;
    let templates: [(&[String], Template); 3] = [
        (&lexicon.verbs_moved, try_moved),
        (&lexicon.verbs_removed, try_removed),
        (&lexicon.verbs_added, try_added),
    ];
    for (verbs, template) in templates {
        for rest in find_verb(&text, verbs) {
            if let Some(parse) = template(rest, lexicon) {
                return parse;
            }
        }
    }
    StatementParse::failed()
}
