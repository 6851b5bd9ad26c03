use super::{DeviceId, ModelError, Registry};

const ARTICLES: &[&str] = &["the", "a", "an"];

/// Lowercases, collapses whitespace, strips leading articles and a plural
/// `s` on the final token. Idempotent.
pub fn normalize_name(raw: &str) -> Result<String, ModelError> {
    let lowered = raw.to_lowercase();
    let mut tokens: Vec<&str> = lowered.split_whitespace().collect();
    let skip = tokens
        .iter()
        .take_while(|t| ARTICLES.contains(t))
        .count();
    tokens.drain(..skip);
    let Some(last) = tokens.pop() else {
        return Err(ModelError::InvalidName(raw.to_string()));
    };
    let singular = singularize(last);
    let mut out = tokens.join(" ");
    if !out.is_empty() {
        out.push(' ');
    }
    out.push_str(singular);
    Ok(out)
}

// Only a single trailing `s` is removed; `ss` endings ("glass") are left alone
// so that the rule stays idempotent.
fn singularize(token: &str) -> &str {
    match token.strip_suffix('s') {
        Some(stem) if !stem.is_empty() && !stem.ends_with('s') => stem,
        _ => token,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    Unique(DeviceId),
    /// Candidates in registry insertion order.
    Ambiguous(Vec<DeviceId>),
    None,
}

impl MatchResult {
    pub fn unique(&self) -> Option<&DeviceId> {
        match self {
            MatchResult::Unique(id) => Some(id),
            _ => None,
        }
    }
}

/// Devices whose normalized name contains every token of the normalized phrase.
pub fn match_device(phrase: &str, registry: &Registry) -> MatchResult {
    let Ok(phrase) = normalize_name(phrase) else {
        return MatchResult::None;
    };
    let wanted: Vec<&str> = phrase.split(' ').collect();
    let mut hits: Vec<DeviceId> = registry
        .iter()
        .filter(|d| {
            let name = d.normalized_name();
            let have: Vec<&str> = name.split(' ').collect();
            wanted.iter().all(|w| have.contains(w))
        })
        .map(|d| d.id.clone())
        .collect();
    match hits.len() {
        0 => MatchResult::None,
        1 => MatchResult::Unique(hits.remove(0)),
        _ => MatchResult::Ambiguous(hits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DeviceDescriptor;
    use proptest::prelude::*;

    // Straight transcription of the rules, used as an oracle.
    fn reference_normalize(raw: &str) -> Option<String> {
        let lower = raw.to_lowercase();
        let mut words: Vec<String> = lower.split_whitespace().map(String::from).collect();
        while !words.is_empty() && (words[0] == "the" || words[0] == "a" || words[0] == "an") {
            words.remove(0);
        }
        let last = words.last_mut()?;
        if last.len() > 1 && last.ends_with('s') && !last.ends_with("ss") {
            last.pop();
        }
        Some(words.join(" "))
    }

    #[test]
    fn examples() {
        assert_eq!(normalize_name("the Bedroom Lights").unwrap(), "bedroom light");
        assert_eq!(normalize_name("kitchen light").unwrap(), "kitchen light");
        let raw = "  The   Motion  Sensors ";
        assert_eq!(normalize_name(raw).unwrap(), "motion sensor");
        assert_eq!(reference_normalize(raw).unwrap(), "motion sensor");
    }

    #[test]
    fn empty_after_normalization() {
        assert!(normalize_name("   ").is_err());
        assert!(normalize_name("the").is_err());
        assert!(normalize_name("the a").is_err());
    }

    #[test]
    fn double_s_kept() {
        assert_eq!(normalize_name("glass").unwrap(), "glass");
        assert_eq!(normalize_name("blinds").unwrap(), "blind");
    }

    fn two_lights() -> Registry {
        Registry::from_devices(vec![
            DeviceDescriptor::toggleable("bed", "bedroom light"),
            DeviceDescriptor::toggleable("liv", "living room light"),
        ])
        .unwrap()
    }

    #[test]
    fn ambiguous_in_insertion_order() {
        assert_eq!(
            match_device("light", &two_lights()),
            MatchResult::Ambiguous(vec!["bed".into(), "liv".into()])
        );
    }

    #[test]
    fn exact_match() {
        let r = Registry::from_devices(vec![DeviceDescriptor::toggleable("bed", "bedroom light")])
            .unwrap();
        assert_eq!(match_device("bedroom light", &r), MatchResult::Unique("bed".into()));
    }

    #[test]
    fn plural_phrase() {
        let r = Registry::from_devices(vec![
            DeviceDescriptor::toggleable("bed", "bedroom light"),
            DeviceDescriptor::toggleable("toaster", "toaster"),
        ])
        .unwrap();
        // Oracle: containment checked by hand for each device.
        let phrase = reference_normalize("lights").unwrap();
        let by_hand: Vec<&str> = r
            .iter()
            .filter(|d| d.normalized_name().split(' ').any(|t| t == phrase))
            .map(|d| d.id.as_str())
            .collect();
        assert_eq!(by_hand, vec!["bed"]);
        assert_eq!(match_device("lights", &r), MatchResult::Unique("bed".into()));
    }

    #[test]
    fn no_match() {
        assert_eq!(match_device("toaster", &two_lights()), MatchResult::None);
    }

    proptest! {
        #[test]
        fn idempotent(raw in "[ -~]{0,40}") {
            if let Ok(once) = normalize_name(&raw) {
                prop_assert_eq!(normalize_name(&once).unwrap(), once.clone());
                prop_assert_eq!(Some(once), reference_normalize(&raw));
            } else {
                prop_assert!(reference_normalize(&raw).is_none_or(|s| s.is_empty()));
            }
        }

        #[test]
        fn never_unique_when_shared(prefix_a in "[a-z]{3,6}", prefix_b in "[a-z]{3,6}", noun in "[a-z]{3,6}") {
            prop_assume!(prefix_a != prefix_b);
            let noun = format!("{noun}x");
            let r = Registry::from_devices(vec![
                DeviceDescriptor::toggleable("a", format!("{prefix_a} {noun}")),
                DeviceDescriptor::toggleable("b", format!("{prefix_b} {noun}")),
            ]).unwrap();
            prop_assert!(matches!(match_device(&noun, &r), MatchResult::Ambiguous(_)));
        }
    }
}
