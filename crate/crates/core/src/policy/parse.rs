use crate::craftworld::Action;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no action name found in reply: {text:?}")]
pub struct ParseFailure {
    pub text: String,
}

/// Extracts an action from free-form model output.
///
/// Candidate tokens are maximal runs of `[a-z_]` after lowercasing, so `"Action: move_up"`
/// and `"MOVE_UP"` both parse while `"don't"` does not match `do`. The longest canonical
/// name wins; ties go to the earliest occurrence.
pub fn parse_action(reply: &str) -> Result<Action, ParseFailure> {
    let lower = reply.to_lowercase();
    let mut best: Option<Action> = None;
    for token in lower.split(|c: char| !(c.is_ascii_lowercase() || c == '_')) {
        if let Some(a) = Action::from_name(token) {
            if best.is_none_or(|b| a.name().len() > b.name().len()) {
                best = Some(a);
            }
        }
    }
    best.ok_or_else(|| ParseFailure { text: reply.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_names() {
        assert_eq!(parse_action("make_stone_pickaxe"), Ok(Action::MakeStonePickaxe));
        assert_eq!(parse_action("  NOOP\n"), Ok(Action::Noop));
    }

    #[test]
    fn action_prefix() {
        assert_eq!(parse_action("Action: move_up"), Ok(Action::MoveUp));
    }

    #[test]
    fn prose_without_names_fails() {
        let err = parse_action("I will craft a sword").unwrap_err();
        assert_eq!(err.text, "I will craft a sword");
        assert!(parse_action("I don't know").is_err());
    }

    #[test]
    fn longest_name_wins() {
        assert_eq!(parse_action("do, or rather make_wood_sword"), Ok(Action::MakeWoodSword));
    }
}
