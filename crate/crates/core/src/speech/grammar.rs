//! Loader for the command grammar file (see `data/grammar.bnf`).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Direction, Metaphor};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("grammar line {line}: {message}")]
pub struct GrammarError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotKind {
    Hour,
    Distance,
    Degrees,
    Direction,
}

impl SlotKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "hour" => SlotKind::Hour,
            "distance" => SlotKind::Distance,
            "degrees" => SlotKind::Degrees,
            "direction" => SlotKind::Direction,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatternItem {
    Words(Vec<String>),
    Slot(SlotKind),
}

/// What a rule produces once its slots are filled.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    TakeOff,
    Continue,
    Land,
    RotateOClock,
    Select,
    Faster,
    Slower,
    RotateClockwise,
    RotateAntiClockwise,
    Brake,
    Go,
    SearchExpanding,
    SearchParallelTrack,
    SearchCreepingLine,
    Switch(Metaphor),
    There,
    Distance,
    Hour,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrammarRule {
    pub pattern: Vec<PatternItem>,
    pub target: Target,
    pub line: usize,
}

impl GrammarRule {
    pub fn slots(&self) -> impl Iterator<Item = SlotKind> + '_ {
        self.pattern.iter().filter_map(|p| match p {
            PatternItem::Slot(s) => Some(*s),
            PatternItem::Words(_) => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pub directions: BTreeMap<String, Direction>,
    pub rules: Vec<GrammarRule>,
}

pub const DEFAULT_GRAMMAR: &str = include_str!("../../data/grammar.bnf");

fn direction_value(s: &str) -> Option<Direction> {
    Some(match s {
        "up" => Direction::Up,
        "down" => Direction::Down,
        "left" => Direction::Left,
        "right" => Direction::Right,
        "ahead" => Direction::Ahead,
        "backward" => Direction::Backward,
        _ => return None,
    })
}

/// Arguments a target requires, in order.
fn target_args(name: &str) -> Option<(&'static [SlotKind], &'static [SlotKind])> {
    use SlotKind::*;
    // (required, optional)
    Some(match name {
        "RotateOClock" | "Hour" => (&[Hour], &[]),
        "RotateClockwise" | "RotateAntiClockwise" => (&[], &[Degrees]),
        "Go" => (&[Direction], &[Distance]),
        "Distance" => (&[Distance], &[]),
        "TakeOff" | "Continue" | "Land" | "Select" | "Faster" | "Slower" | "Brake" | "SearchExpanding"
        | "SearchParallelTrack" | "SearchCreepingLine" | "There" => (&[], &[]),
        _ => return None,
    })
}

fn parse_target(text: &str, pattern: &[PatternItem]) -> Result<Target, String> {
    let text = text.trim();
    let (name, args) = match text.split_once('(') {
        Some((n, rest)) => {
            let inner = rest.strip_suffix(')').ok_or("missing `)` in target")?;
            let args: Vec<&str> = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
            (n.trim(), args)
        }
        None => (text, Vec::new()),
    };
    if name == "Switch" {
        return match args.as_slice() {
            ["joystick"] => Ok(Target::Switch(Metaphor::Joystick)),
            ["command"] => Ok(Target::Switch(Metaphor::Command)),
            _ => Err("Switch takes `joystick` or `command`".into()),
        };
    }
    let (required, optional) = target_args(name).ok_or_else(|| format!("unknown target `{name}`"))?;
    let mut given = Vec::new();
    for a in &args {
        let kind = SlotKind::parse(a).ok_or_else(|| format!("unknown argument `{a}`"))?;
        if !pattern.contains(&PatternItem::Slot(kind)) {
            return Err(format!("argument `{a}` has no slot in the pattern"));
        }
        given.push(kind);
    }
    for r in required {
        if !given.contains(r) {
            return Err(format!("`{name}` needs argument {r:?}"));
        }
    }
    for g in &given {
        if !required.contains(g) && !optional.contains(g) {
            return Err(format!("`{name}` does not take {g:?}"));
        }
    }
    for item in pattern {
        if let PatternItem::Slot(s) = item {
            if !given.contains(s) {
                return Err(format!("slot {s:?} is not used by the target"));
            }
        }
    }
    Ok(match name {
        "TakeOff" => Target::TakeOff,
        "Continue" => Target::Continue,
        "Land" => Target::Land,
        "RotateOClock" => Target::RotateOClock,
        "Select" => Target::Select,
        "Faster" => Target::Faster,
        "Slower" => Target::Slower,
        "RotateClockwise" => Target::RotateClockwise,
        "RotateAntiClockwise" => Target::RotateAntiClockwise,
        "Brake" => Target::Brake,
        "Go" => Target::Go,
        "SearchExpanding" => Target::SearchExpanding,
        "SearchParallelTrack" => Target::SearchParallelTrack,
        "SearchCreepingLine" => Target::SearchCreepingLine,
        "There" => Target::There,
        "Distance" => Target::Distance,
        "Hour" => Target::Hour,
        _ => unreachable!("checked by target_args"),
    })
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut directions = BTreeMap::new();
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| GrammarError { line, message };
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            if let Some((lhs, rhs)) = body.split_once("::=") {
                if lhs.trim() != "<direction>" {
                    return Err(err(format!("only <direction> has a vocabulary, got {}", lhs.trim())));
                }
                for alt in rhs.split('|').map(str::trim) {
                    let (word, value) = alt.split_once('=').unwrap_or((alt, alt));
                    let dir = direction_value(value.trim())
                        .ok_or_else(|| err(format!("unknown direction `{}`", value.trim())))?;
                    directions.insert(word.trim().to_string(), dir);
                }
                continue;
            }
            let (lhs, rhs) = body
                .split_once("->")
                .ok_or_else(|| err("expected `pattern -> Target`".into()))?;
            let mut pattern = Vec::new();
            for tok in lhs.split_whitespace() {
                if let Some(name) = tok.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
                    let kind = SlotKind::parse(name).ok_or_else(|| err(format!("unknown slot <{name}>")))?;
                    pattern.push(PatternItem::Slot(kind));
                } else {
                    let words: Vec<String> = tok.split('|').map(|w| w.to_lowercase()).collect();
                    if words.iter().any(|w| w.is_empty()) {
                        return Err(err(format!("empty alternative in `{tok}`")));
                    }
                    pattern.push(PatternItem::Words(words));
                }
            }
            if pattern.is_empty() {
                return Err(err("empty pattern".into()));
            }
            let target = parse_target(rhs, &pattern).map_err(err)?;
            rules.push(GrammarRule { pattern, target, line });
        }
        if rules.iter().any(|r| r.slots().any(|s| s == SlotKind::Direction)) && directions.is_empty() {
            return Err(GrammarError {
                line: 0,
                message: "<direction> slot used but no vocabulary given".into(),
            });
        }
        Ok(Grammar { directions, rules })
    }

    pub fn default_grammar() -> Self {
        Self::parse(DEFAULT_GRAMMAR).expect("bundled grammar parses")
    }
}
