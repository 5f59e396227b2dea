use super::{EntityKind, Rules};

/// Lexical canonical form of a surface.
///
/// Lowercase, punctuation removed except hyphens between alphanumerics,
/// whitespace collapsed. Models expand a leading code letter glued to a
/// digit (`b737-800` becomes `boeing 737-800`); manufacturer and airline
/// names lose a leading "the" and trailing company suffixes. Total on any
/// input; a surface with no alphanumerics maps to the empty string.
pub fn normalize_with(surface: &str, kind: EntityKind, rules: &Rules) -> String {
    let lowered = surface.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cleaned.push(c);
        } else if c.is_whitespace() || matches!(c, ',' | '/' | '&' | '(' | ')' | ';' | ':' | '_') {
            cleaned.push(' ');
        } else if c == '-' {
            let inner = i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            cleaned.push(if inner { '-' } else { ' ' });
        }
        // Other punctuation (periods, apostrophes, ...) is dropped in place.
    }
    let mut tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();

    match kind {
        EntityKind::Model => {
            if let Some(first) = tokens.first().cloned() {
                let mut it = first.chars();
                if let (Some(letter), Some(next)) = (it.next(), it.next()) {
                    if next.is_ascii_digit() {
                        if let Some(rule) = rules.code_prefix(letter) {
                            let designator = if rule.keep_letter { first.clone() } else { first[letter.len_utf8()..].to_string() };
                            tokens.splice(0..1, [rule.manufacturer.clone(), designator]);
                        }
                    }
                }
            }
        }
        EntityKind::Manufacturer | EntityKind::Airline => {
            if tokens.len() > 1 && tokens[0] == "the" {
                tokens.remove(0);
            }
            while tokens.len() > 1 && tokens.last().is_some_and(|t| rules.is_company_suffix(t)) {
                tokens.pop();
            }
        }
        EntityKind::Airport | EntityKind::Location => {}
    }
    tokens.join(" ")
}

/// Rule family of a canonical form: a model with its leading manufacturer
/// tokens removed, the canonical itself for every other kind.
pub fn family(canonical: &str, kind: EntityKind, rules: &Rules) -> String {
    if kind != EntityKind::Model {
        return canonical.to_string();
    }
    let mut tokens: Vec<&str> = canonical.split(' ').collect();
    while tokens.len() > 1 && rules.is_manufacturer_token(tokens[0]) {
        tokens.remove(0);
    }
    tokens.join(" ")
}

/// Canonical with spaces and hyphens removed.
pub fn compact(canonical: &str) -> String {
    canonical.chars().filter(|c| *c != ' ' && *c != '-').collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(s: &str) -> String {
        normalize_with(s, EntityKind::Model, &Rules::default())
    }

    #[test]
    fn code_prefix_expansion() {
        assert_eq!(model("B737-800"), "boeing 737-800");
        assert_eq!(model("Boeing   737-800 "), "boeing 737-800");
        assert_eq!(model("737-800"), "737-800");
        assert_eq!(model("C172S"), "cessna 172s");
        assert_eq!(model("a320"), "airbus a320");
        assert_eq!(model("Airbus A320"), "airbus a320");
        assert_eq!(model("G36"), "g36");
        assert_eq!(model("CRJ-200"), "crj-200");
    }

    #[test]
    fn punctuation_and_hyphens() {
        assert_eq!(model("PA-28-181"), "pa-28-181");
        assert_eq!(model(" - 737 -800-"), "737 800");
        assert_eq!(model("..."), "");
        let loc = normalize_with("Los Angeles,  CA", EntityKind::Location, &Rules::default());
        assert_eq!(loc, "los angeles ca");
    }

    #[test]
    fn company_suffixes_are_stripped() {
        let r = Rules::default();
        let m = |s| normalize_with(s, EntityKind::Manufacturer, &r);
        assert_eq!(m("The Boeing Company"), "boeing");
        assert_eq!(m("Boeing Co."), "boeing");
        assert_eq!(m("Airbus S.A.S."), "airbus");
        assert_eq!(m("Cessna Aircraft Co"), "cessna");
        assert_eq!(m("Co"), "co");
        let a = |s| normalize_with(s, EntityKind::Airline, &r);
        assert_eq!(a("Delta Air Lines, Inc."), "delta air lines");
    }

    #[test]
    fn families() {
        let r = Rules::default();
        assert_eq!(family("boeing 737-800", EntityKind::Model, &r), "737-800");
        assert_eq!(family("737-800", EntityKind::Model, &r), "737-800");
        assert_eq!(family("boeing", EntityKind::Model, &r), "boeing");
        assert_eq!(family("boeing", EntityKind::Manufacturer, &r), "boeing");
        assert_eq!(compact("pa-28 181"), "pa28181");
    }
}
