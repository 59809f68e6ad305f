//! Token vocabulary and command classes.
//!
//! Voice and gesture tokens live in disjoint id ranges of one shared
//! vocabulary, so the modality of a feature is recoverable from its value.

use serde::{Deserialize, Serialize};

pub const VOCAB_SIZE: usize = 20;
pub const VOICE_TOKENS: std::ops::Range<usize> = 0..12;
pub const GESTURE_TOKENS: std::ops::Range<usize> = 12..20;
pub const N_CLASSES: usize = 15;

pub const TOKEN_NAMES: [&str; VOCAB_SIZE] = [
    // voice
    "place", "replan", "pick", "one", "two", "three", "pause", "resume", "yes", "no", "moving", "home",
    // gesture
    "point_at", "open_palm", "thumbs_up", "thumbs_down", "wave", "circle", "idle", "beckon",
];

/// Gesture frame that carries no meaning; it only pads a window.
pub const IDLE: usize = 18;
pub const POINT_AT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Voice,
    Gesture,
}

impl Channel {
    pub fn of_token(token: usize) -> Option<Channel> {
        if VOICE_TOKENS.contains(&token) {
            Some(Channel::Voice)
        } else if GESTURE_TOKENS.contains(&token) {
            Some(Channel::Gesture)
        } else {
            None
        }
    }
}

pub fn token_id(name: &str) -> Option<usize> {
    TOKEN_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    PlaceObjectThere,
    ReplanTrajectory,
    PickComponent1,
    PickComponent2,
    PickComponent3,
    Pause,
    Resume,
    Confirm,
    Deny,
    MoveAwayAck,
    GoHome,
    PickPointed,
    CancelTask,
    Handover,
    StatusQuery,
}

pub const COMMANDS: [Command; N_CLASSES] = [
    Command::PlaceObjectThere,
    Command::ReplanTrajectory,
    Command::PickComponent1,
    Command::PickComponent2,
    Command::PickComponent3,
    Command::Pause,
    Command::Resume,
    Command::Confirm,
    Command::Deny,
    Command::MoveAwayAck,
    Command::GoHome,
    Command::PickPointed,
    Command::CancelTask,
    Command::Handover,
    Command::StatusQuery,
];

impl Command {
    pub fn from_id(id: usize) -> Option<Command> {
        COMMANDS.get(id).copied()
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::PlaceObjectThere => "place object there",
            Command::ReplanTrajectory => "re-plan trajectory",
            Command::PickComponent1 => "pick component 1",
            Command::PickComponent2 => "pick component 2",
            Command::PickComponent3 => "pick component 3",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Confirm => "confirm",
            Command::Deny => "deny",
            Command::MoveAwayAck => "moving away",
            Command::GoHome => "go home",
            Command::PickPointed => "pick pointed object",
            Command::CancelTask => "cancel task",
            Command::Handover => "hand over",
            Command::StatusQuery => "status",
        }
    }

    /// Token multisets that express this command (idle frames excluded).
    pub fn phrasings(self) -> &'static [&'static [usize]] {
        match self {
            Command::PlaceObjectThere => &[&[0, 12]],
            Command::ReplanTrajectory => &[&[1], &[17], &[1, 17]],
            Command::PickComponent1 => &[&[2, 3]],
            Command::PickComponent2 => &[&[2, 4]],
            Command::PickComponent3 => &[&[2, 5]],
            Command::Pause => &[&[6], &[13], &[6, 13]],
            Command::Resume => &[&[7], &[7, 19]],
            Command::Confirm => &[&[8], &[14], &[8, 14]],
            Command::Deny => &[&[9], &[15], &[9, 15]],
            Command::MoveAwayAck => &[&[10], &[10, 16]],
            Command::GoHome => &[&[11]],
            Command::PickPointed => &[&[2, 12]],
            Command::CancelTask => &[&[9, 13]],
            Command::Handover => &[&[0, 19]],
            Command::StatusQuery => &[&[16]],
        }
    }
}

/// Exact table lookup of a token sequence, ignoring order and idle frames.
pub fn lookup(tokens: &[usize]) -> Option<Command> {
    let mut key: Vec<usize> = tokens.iter().copied().filter(|&t| t != IDLE).collect();
    key.sort_unstable();
    COMMANDS.into_iter().find(|c| {
        c.phrasings().iter().any(|p| {
            let mut p = p.to_vec();
            p.sort_unstable();
            p == key
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrasings_are_unambiguous() {
        let mut seen = std::collections::HashSet::new();
        for c in COMMANDS {
            for p in c.phrasings() {
                let mut k = p.to_vec();
                k.sort_unstable();
                assert!(seen.insert(k), "{:?} reused", p);
                assert!(p.len() <= 2);
            }
        }
    }

    #[test]
    fn ids_roundtrip() {
        for (i, c) in COMMANDS.iter().enumerate() {
            assert_eq!(c.id(), i);
            assert_eq!(Command::from_id(i), Some(*c));
        }
        assert_eq!(Command::from_id(15), None);
    }

    #[test]
    fn lookup_ignores_order_and_idle() {
        assert_eq!(lookup(&[12, IDLE, 0]), Some(Command::PlaceObjectThere));
        assert_eq!(lookup(&[IDLE, 6]), Some(Command::Pause));
        assert_eq!(lookup(&[3, 4]), None);
    }

    #[test]
    fn channels() {
        assert_eq!(Channel::of_token(0), Some(Channel::Voice));
        assert_eq!(Channel::of_token(POINT_AT), Some(Channel::Gesture));
        assert_eq!(Channel::of_token(VOCAB_SIZE), None);
        assert_eq!(token_id("beckon"), Some(19));
    }
}
