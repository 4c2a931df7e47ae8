//! Fusion rule file loader (see `data/fusion.rules`).

use thiserror::Error;

use crate::model::Intent;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("rules line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Template {
    GoDistance,
    RotateOClock,
    GoThere,
    SelectVerb,
    PointSelect,
}

impl Template {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "go_distance" => Template::GoDistance,
            "rotate_oclock" => Template::RotateOClock,
            "go_there" => Template::GoThere,
            "select_verb" => Template::SelectVerb,
            "point_select" => Template::PointSelect,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Preference {
    Kind(String),
    Speech,
    Gesture,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Combine(Template),
    Disambiguate(Preference),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusionRule {
    /// Kind names, `*` for any command kind.
    pub trigger: (String, String),
    pub action: Action,
    pub line: usize,
}

const FRAGMENTS: [&str; 4] = ["There", "Distance", "Hour", "Pointing"];

fn is_command_kind(k: &str) -> bool {
    Intent::KINDS.contains(&k) && !FRAGMENTS.contains(&k)
}

fn pattern_matches(p: &str, kind: &str) -> bool {
    if p == "*" {
        is_command_kind(kind)
    } else {
        p == kind
    }
}

impl FusionRule {
    /// Whether the rule applies to the pair, in either order. Returns true
    /// for `(a, b)` when the first pattern takes `a`.
    pub fn orientation(&self, a: &str, b: &str) -> Option<bool> {
        let (p, q) = (&self.trigger.0, &self.trigger.1);
        if pattern_matches(p, a) && pattern_matches(q, b) {
            Some(true)
        } else if pattern_matches(p, b) && pattern_matches(q, a) {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<FusionRule>,
}

pub const DEFAULT_RULES: &str = include_str!("../../data/fusion.rules");

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| RuleError { line, message };
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = body.split_whitespace().collect();
            let kind_ok = |k: &str| k == "*" || Intent::KINDS.contains(&k);
            let rule = match f.as_slice() {
                ["combine", a, b, "->", t] => {
                    let template = Template::parse(t).ok_or_else(|| err(format!("unknown template `{t}`")))?;
                    (a, b, Action::Combine(template))
                }
                ["disambiguate", a, b, "prefer", p] => {
                    let pref = match *p {
                        "speech" => Preference::Speech,
                        "gesture" => Preference::Gesture,
                        k if k == *a || k == *b => Preference::Kind(k.to_string()),
                        k => return Err(err(format!("preferred kind `{k}` is not in the trigger"))),
                    };
                    (a, b, Action::Disambiguate(pref))
                }
                _ => return Err(err(format!("cannot read rule `{body}`"))),
            };
            let (a, b, action) = rule;
            for k in [a, b] {
                if !kind_ok(k) {
                    return Err(err(format!("unknown kind `{k}`")));
                }
            }
            rules.push(FusionRule {
                trigger: (a.to_string(), b.to_string()),
                action,
                line,
            });
        }
        let set = RuleSet { rules };
        set.check_unique()?;
        Ok(set)
    }

    pub fn default_rules() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rules load")
    }

    fn check_unique(&self) -> Result<(), RuleError> {
        for (i, a) in Intent::KINDS.iter().enumerate() {
            for b in &Intent::KINDS[i..] {
                let hits: Vec<&FusionRule> = self.rules.iter().filter(|r| r.orientation(a, b).is_some()).collect();
                if hits.len() > 1 {
                    return Err(RuleError {
                        line: hits[1].line,
                        message: format!("overlaps line {} on ({a}, {b})", hits[0].line),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn find(&self, a: &str, b: &str) -> Option<(&FusionRule, bool)> {
        self.rules.iter().find_map(|r| r.orientation(a, b).map(|o| (r, o)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_rules_load_and_match_both_orders() {
        let rs = RuleSet::default_rules();
        let (r, o) = rs.find("Distance", "Go").unwrap();
        assert_eq!(r.action, Action::Combine(Template::GoDistance));
        assert!(!o);
        assert!(rs.find("Select", "Land").is_some());
        assert!(rs.find("Pointing", "Select").is_some());
        assert!(rs.find("Faster", "Slower").is_none());
        assert!(rs.find("Distance", "Hour").is_none());
    }

    #[test]
    fn overlapping_rules_rejected() {
        let e = RuleSet::parse("combine Go Distance -> go_distance\ndisambiguate Distance Go prefer Go\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = RuleSet::parse("combine Select * -> select_verb\ndisambiguate Land Select prefer Land\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn malformed_rules_rejected_with_line() {
        assert_eq!(RuleSet::parse("\ncombine Go Meters -> go_distance").unwrap_err().line, 2);
        assert_eq!(RuleSet::parse("combine Go Distance -> teleport").unwrap_err().line, 1);
        assert_eq!(RuleSet::parse("disambiguate Go Land prefer Brake").unwrap_err().line, 1);
    }
}
