use std::collections::BTreeMap;

use serde::Deserialize;

use super::{EntityKind, ResolveError};

const DEFAULT_RULES: &str = include_str!("../../data/resolve_rules.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CodePrefix {
    pub letter: char,
    pub manufacturer: String,
    #[serde(default)]
    pub keep_letter: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AliasList {
    pub kind: EntityKind,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RuleFile {
    #[serde(default)]
    company_suffixes: Vec<String>,
    #[serde(default)]
    manufacturer_tokens: Vec<String>,
    #[serde(default)]
    code_prefix: Vec<CodePrefix>,
    #[serde(default)]
    alias: Vec<AliasList>,
}

/// Aviation-specific rule table. Alias members are stored in normalized
/// form so membership tests compare canonicals directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Rules {
    pub company_suffixes: Vec<String>,
    pub manufacturer_tokens: Vec<String>,
    pub code_prefixes: Vec<CodePrefix>,
    /// (kind, family of normalized member) -> alias group index.
    alias_groups: BTreeMap<(EntityKind, String), usize>,
}

impl Rules {
    pub fn parse(text: &str) -> Result<Self, ResolveError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| ResolveError::Rules(e.to_string()))?;
        let mut rules = Rules {
            company_suffixes: file.company_suffixes.iter().map(|s| s.to_lowercase()).collect(),
            manufacturer_tokens: file.manufacturer_tokens.iter().map(|s| s.to_lowercase()).collect(),
            code_prefixes: file
                .code_prefix
                .into_iter()
                .map(|mut c| {
                    c.letter = c.letter.to_ascii_lowercase();
                    c.manufacturer = c.manufacturer.to_lowercase();
                    c
                })
                .collect(),
            alias_groups: BTreeMap::new(),
        };
        for (group, list) in file.alias.iter().enumerate() {
            for m in &list.members {
                if m.trim().is_empty() {
                    return Err(ResolveError::Rules(format!("empty alias member in group {group}")));
                }
                let canonical = super::normalize_with(m, list.kind, &rules);
                let key = (list.kind, super::family(&canonical, list.kind, &rules));
                if let Some(prev) = rules.alias_groups.insert(key.clone(), group) {
                    if prev != group {
                        return Err(ResolveError::Rules(format!("{:?} listed in two alias groups", key.1)));
                    }
                }
            }
        }
        Ok(rules)
    }

    pub fn code_prefix(&self, letter: char) -> Option<&CodePrefix> {
        self.code_prefixes.iter().find(|c| c.letter == letter)
    }

    pub fn is_manufacturer_token(&self, token: &str) -> bool {
        self.manufacturer_tokens.iter().any(|t| t == token)
    }

    pub fn is_company_suffix(&self, token: &str) -> bool {
        self.company_suffixes.iter().any(|t| t == token)
    }

    /// Alias group of a rule family (see [`super::family`]), if listed.
    pub fn alias_group(&self, kind: EntityKind, canonical: &str) -> Option<usize> {
        self.alias_groups.get(&(kind, canonical.to_string())).copied()
    }
}

impl Default for Rules {
    fn default() -> Self {
        Rules::parse(DEFAULT_RULES).expect("bundled rule table parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_has_the_three_code_prefixes() {
        let r = Rules::default();
        assert_eq!(r.code_prefix('b').unwrap().manufacturer, "boeing");
        assert!(r.code_prefix('a').unwrap().keep_letter);
        assert_eq!(r.code_prefix('c').unwrap().manufacturer, "cessna");
        assert!(r.code_prefix('g').is_none());
    }

    #[test]
    fn alias_members_are_normalized() {
        let r = Rules::parse(
            "company_suffixes = [\"inc\"]\n[[alias]]\nkind = \"airline\"\nmembers = [\"Delta Air Lines, Inc.\", \"DELTA\"]\n",
        )
        .unwrap();
        assert_eq!(r.alias_group(EntityKind::Airline, "delta air lines"), Some(0));
        assert_eq!(r.alias_group(EntityKind::Airline, "delta"), Some(0));
        assert_eq!(r.alias_group(EntityKind::Model, "delta"), None);
    }

    #[test]
    fn conflicting_groups_are_rejected() {
        let text = "[[alias]]\nkind = \"model\"\nmembers = [\"x1\"]\n[[alias]]\nkind = \"model\"\nmembers = [\"X1\"]\n";
        assert!(matches!(Rules::parse(text), Err(ResolveError::Rules(_))));
    }
}
