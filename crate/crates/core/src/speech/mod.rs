//! Transcript parsing against the command grammar.
//!
//! Transcripts are normalized to lowercase tokens, numbers are folded into
//! single tokens, and selection phrases are pulled out. Every grammar rule is
//! then aligned with the remaining tokens by longest common subsequence; the
//! score of a rule is the fraction of its pattern items matched, times the
//! recognizer confidence.

pub mod grammar;
pub mod numbers;

use thiserror::Error;

pub use grammar::{Grammar, GrammarError};
use grammar::{GrammarRule, PatternItem, SlotKind, Target};

use crate::model::{
    Command, CommandVerb, DroneId, DroneNames, Intent, Interpretation, NBestList, Selection,
    TranscriptHypothesis, DEFAULT_NBEST,
};

/// Go distance used when none is spoken, meters.
pub const DEFAULT_GO_DISTANCE: f64 = 2.0;
/// Rotation used when none is spoken, degrees.
pub const DEFAULT_ROTATION_DEG: f64 = 90.0;
/// Rules must score strictly above this.
pub const MIN_SCORE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpeechError {
    #[error("empty transcript")]
    EmptyTranscript,
    #[error("no grammar rule matches `{0}`")]
    NoParse(String),
    #[error("asr confidence {0} outside [0, 1]")]
    BadConfidence(f64),
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Word(String),
    Num(f64),
}

fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '\u{2019}' => '\'',
            c if c.is_alphanumeric() || c == '\'' || c == '.' => c,
            _ => ' ',
        })
        .collect();
    cleaned
        .split_whitespace()
        .map(|w| w.trim_matches(|c| c == '.' || c == '\''))
        .filter(|w| !w.is_empty())
        .map(|w| if w == "oclock" { "o'clock".to_string() } else { w.to_string() })
        .collect()
}

fn tokenize(words: &[String]) -> Vec<Token> {
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < refs.len() {
        match numbers::read_number(&refs[i..]) {
            Some((v, used)) => {
                out.push(Token::Num(v));
                i += used;
            }
            None => {
                out.push(Token::Word(refs[i].to_string()));
                i += 1;
            }
        }
    }
    out
}

/// Removes selection phrases; returns what they select.
fn extract_selection(words: &[String], names: &DroneNames, fleet: &[DroneId]) -> (Vec<String>, Selection) {
    let mut rest = Vec::new();
    let mut all = false;
    let mut deictic = false;
    let mut ids: Vec<DroneId> = Vec::new();
    let mut named = false;
    let mut i = 0;
    while i < words.len() {
        let w = words[i].as_str();
        let next = words.get(i + 1).map(String::as_str);
        if w == "all" && matches!(next, Some("hawks" | "hawk" | "drones" | "drone")) {
            all = true;
            i += 2;
            continue;
        }
        if matches!(w, "everyone" | "everybody") {
            all = true;
            i += 1;
            continue;
        }
        if w == "you" {
            deictic = true;
            i += 1;
            continue;
        }
        if let Some(n) = next {
            if let Some(id) = names.lookup(&format!("{w} {n}")) {
                named = true;
                if fleet.contains(&id) && !ids.contains(&id) {
                    ids.push(id);
                }
                i += 2;
                continue;
            }
        }
        rest.push(words[i].clone());
        i += 1;
    }
    if named || all {
        // "red hawk and blue hawk": the conjunction belongs to the selection
        rest.retain(|w| w != "and");
    }
    let selection = if all {
        Selection::All
    } else if !ids.is_empty() {
        ids.sort();
        Selection::Drones { ids }
    } else if deictic {
        Selection::Deictic
    } else {
        Selection::Current
    };
    (rest, selection)
}

fn item_matches(item: &PatternItem, tok: &Token, g: &Grammar) -> bool {
    match (item, tok) {
        (PatternItem::Words(ws), Token::Word(w)) => ws.iter().any(|x| x == w),
        (PatternItem::Slot(SlotKind::Direction), Token::Word(w)) => g.directions.contains_key(w),
        (PatternItem::Slot(SlotKind::Hour), Token::Num(v)) => v.fract() == 0.0 && (1.0..=12.0).contains(v),
        (PatternItem::Slot(SlotKind::Distance | SlotKind::Degrees), Token::Num(v)) => *v > 0.0,
        _ => false,
    }
}

struct Alignment {
    matched: usize,
    /// Pattern index → token index.
    pairs: Vec<(usize, usize)>,
}

fn align(rule: &GrammarRule, tokens: &[Token], g: &Grammar) -> Alignment {
    let p = &rule.pattern;
    let (n, m) = (p.len(), tokens.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if item_matches(&p[i], &tokens[j], g) {
                (1 + dp[i + 1][j + 1]).max(dp[i + 1][j]).max(dp[i][j + 1])
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if item_matches(&p[i], &tokens[j], g) && dp[i][j] == 1 + dp[i + 1][j + 1] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Alignment {
        matched: dp[0][0],
        pairs,
    }
}

fn build_intent(rule: &GrammarRule, al: &Alignment, tokens: &[Token], g: &Grammar) -> Option<Intent> {
    let mut hour = None;
    let mut distance = None;
    let mut degrees = None;
    let mut direction = None;
    for &(pi, ti) in &al.pairs {
        if let PatternItem::Slot(kind) = &rule.pattern[pi] {
            match (kind, &tokens[ti]) {
                (SlotKind::Hour, Token::Num(v)) => hour = Some(*v as u8),
                (SlotKind::Distance, Token::Num(v)) => distance = Some(*v),
                (SlotKind::Degrees, Token::Num(v)) => degrees = Some(*v),
                (SlotKind::Direction, Token::Word(w)) => direction = g.directions.get(w).copied(),
                _ => {}
            }
        }
    }
    // a slot left empty means the rule did not really apply
    for s in rule.slots() {
        let filled = match s {
            SlotKind::Hour => hour.is_some(),
            SlotKind::Distance => distance.is_some(),
            SlotKind::Degrees => degrees.is_some(),
            SlotKind::Direction => direction.is_some(),
        };
        if !filled {
            return None;
        }
    }
    let verb = match &rule.target {
        Target::TakeOff => CommandVerb::TakeOff,
        Target::Continue => CommandVerb::Continue,
        Target::Land => CommandVerb::Land,
        Target::RotateOClock => CommandVerb::RotateOClock { hour: hour? },
        Target::Select => CommandVerb::Select,
        Target::Faster => CommandVerb::Faster,
        Target::Slower => CommandVerb::Slower,
        Target::RotateClockwise => CommandVerb::RotateClockwise { degrees },
        Target::RotateAntiClockwise => CommandVerb::RotateAntiClockwise { degrees },
        Target::Brake => CommandVerb::Brake,
        Target::Go => CommandVerb::Go {
            direction: direction?,
            distance,
        },
        Target::SearchExpanding => CommandVerb::SearchExpanding,
        Target::SearchParallelTrack => CommandVerb::SearchParallelTrack,
        Target::SearchCreepingLine => CommandVerb::SearchCreepingLine,
        Target::Switch(m) => CommandVerb::Switch { metaphor: *m },
        Target::There => return Some(Intent::GoTherePending),
        Target::Distance => return Some(Intent::Distance { meters: distance? }),
        Target::Hour => return Some(Intent::Hour { hour: hour? }),
    };
    Some(Intent::command(verb))
}

/// Context a transcript is interpreted in.
#[derive(Clone, Debug)]
pub struct SpeechContext {
    pub names: DroneNames,
    pub fleet: Vec<DroneId>,
    pub nbest: usize,
}

impl Default for SpeechContext {
    fn default() -> Self {
        Self {
            names: DroneNames::default(),
            fleet: (1..=6).map(DroneId).collect(),
            nbest: DEFAULT_NBEST,
        }
    }
}

struct Candidate {
    interp: Interpretation,
    score: f64,
    matched: usize,
    order: (usize, usize),
}

fn candidates(
    text: &str,
    asr: f64,
    hyp: usize,
    g: &Grammar,
    ctx: &SpeechContext,
    out: &mut Vec<Candidate>,
) {
    let words = normalize(text);
    if words.is_empty() {
        return;
    }
    let (rest, selection) = extract_selection(&words, &ctx.names, &ctx.fleet);
    if rest.is_empty() && selection != Selection::Current {
        if asr <= MIN_SCORE {
            return;
        }
        out.push(Candidate {
            interp: Interpretation::new(Intent::command(CommandVerb::Select), selection),
            score: asr,
            matched: 1,
            order: (hyp, 0),
        });
        return;
    }
    let tokens = tokenize(&rest);
    for (ri, rule) in g.rules.iter().enumerate() {
        let al = align(rule, &tokens, g);
        if al.matched == 0 {
            continue;
        }
        let score = al.matched as f64 / rule.pattern.len() as f64 * asr;
        if score <= MIN_SCORE {
            continue;
        }
        if let Some(intent) = build_intent(rule, &al, &tokens, g) {
            out.push(Candidate {
                interp: Interpretation::new(intent, selection.clone()),
                score,
                matched: al.matched,
                order: (hyp, ri),
            });
        }
    }
}

/// N-best interpretations of a transcript and its recognizer alternatives.
pub fn parse_hypotheses(
    hypotheses: &[TranscriptHypothesis],
    g: &Grammar,
    ctx: &SpeechContext,
) -> Result<NBestList<Interpretation>, SpeechError> {
    if hypotheses.iter().all(|h| normalize(&h.text).is_empty()) {
        return Err(SpeechError::EmptyTranscript);
    }
    let mut cands = Vec::new();
    for (i, h) in hypotheses.iter().enumerate() {
        if !(0.0..=1.0).contains(&h.confidence) {
            return Err(SpeechError::BadConfidence(h.confidence));
        }
        candidates(&h.text, h.confidence, i, g, ctx, &mut cands);
    }
    if cands.is_empty() {
        let text = hypotheses.first().map(|h| h.text.clone()).unwrap_or_default();
        return Err(SpeechError::NoParse(text));
    }
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.matched.cmp(&a.matched))
            .then(a.order.cmp(&b.order))
    });
    let mut seen: Vec<Interpretation> = Vec::new();
    let mut scored = Vec::new();
    for c in cands {
        if !seen.contains(&c.interp) {
            seen.push(c.interp.clone());
            scored.push((c.interp, c.score));
        }
    }
    Ok(NBestList::from_scored(scored, ctx.nbest))
}

/// N-best interpretations of one transcript. `asr_confidence` defaults to 1.
pub fn parse(
    text: &str,
    asr_confidence: Option<f64>,
    g: &Grammar,
    ctx: &SpeechContext,
) -> Result<NBestList<Interpretation>, SpeechError> {
    parse_hypotheses(
        &[TranscriptHypothesis {
            text: text.to_string(),
            confidence: asr_confidence.unwrap_or(1.0),
        }],
        g,
        ctx,
    )
}

/// Fills unspoken parameters with their defaults and flags the command.
pub fn default_parameters(mut c: Command) -> Command {
    match &mut c.verb {
        CommandVerb::Go { distance: d @ None, .. } => {
            *d = Some(DEFAULT_GO_DISTANCE);
            c.defaulted = true;
        }
        CommandVerb::RotateClockwise { degrees: d @ None }
        | CommandVerb::RotateAntiClockwise { degrees: d @ None } => {
            *d = Some(DEFAULT_ROTATION_DEG);
            c.defaulted = true;
        }
        _ => {}
    }
    c
}
