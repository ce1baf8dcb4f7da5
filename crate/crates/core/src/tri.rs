//! Three-valued verdicts.
//!
//! `Undetermined` is a statement about what a finite representation can
//! decide, never about the mathematics itself.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriBool {
    True,
    False,
    Undetermined,
}

impl TriBool {
    pub fn from_bool(b: bool) -> TriBool {
        if b {
            TriBool::True
        } else {
            TriBool::False
        }
    }

    pub fn is_true(self) -> bool {
        self == TriBool::True
    }

    pub fn is_false(self) -> bool {
        self == TriBool::False
    }

    pub fn is_decisive(self) -> bool {
        self != TriBool::Undetermined
    }

    /// Kleene conjunction: False dominates, then Undetermined.
    pub fn and(self, other: TriBool) -> TriBool {
        match (self, other) {
            (TriBool::False, _) | (_, TriBool::False) => TriBool::False,
            (TriBool::Undetermined, _) | (_, TriBool::Undetermined) => TriBool::Undetermined,
            _ => TriBool::True,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TriBool::True => "true",
            TriBool::False => "false",
            TriBool::Undetermined => "undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<TriBool> {
        match s {
            "true" => Some(TriBool::True),
            "false" => Some(TriBool::False),
            "undetermined" => Some(TriBool::Undetermined),
            _ => None,
        }
    }
}

impl fmt::Display for TriBool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
