use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The closed spatial-relation vocabulary.
///
/// An edge `[subject, relation, target]` reads "subject is `relation` target",
/// e.g. `[cup, on, table]`. Declaration order is the vocabulary order used for
/// every deterministic tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialRelation {
    Above,
    Under,
    In,
    On,
    Front,
    Left,
    Right,
    Corner,
    Behind,
    LeftFront,
    RightFront,
    LeftBack,
    RightBack,
    LeftOn,
    RightOn,
}

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 15] = [
        SpatialRelation::Above,
        SpatialRelation::Under,
        SpatialRelation::In,
        SpatialRelation::On,
        SpatialRelation::Front,
        SpatialRelation::Left,
        SpatialRelation::Right,
        SpatialRelation::Corner,
        SpatialRelation::Behind,
        SpatialRelation::LeftFront,
        SpatialRelation::RightFront,
        SpatialRelation::LeftBack,
        SpatialRelation::RightBack,
        SpatialRelation::LeftOn,
        SpatialRelation::RightOn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpatialRelation::Above => "above",
            SpatialRelation::Under => "under",
            SpatialRelation::In => "in",
            SpatialRelation::On => "on",
            SpatialRelation::Front => "front",
            SpatialRelation::Left => "left",
            SpatialRelation::Right => "right",
            SpatialRelation::Corner => "corner",
            SpatialRelation::Behind => "behind",
            SpatialRelation::LeftFront => "left_front",
            SpatialRelation::RightFront => "right_front",
            SpatialRelation::LeftBack => "left_back",
            SpatialRelation::RightBack => "right_back",
            SpatialRelation::LeftOn => "left_on",
            SpatialRelation::RightOn => "right_on",
        }
    }

    /// Position in the vocabulary list.
    pub fn index(self) -> usize {
        self as usize
    }

    /// The relation that holds once subject and target are swapped.
    ///
    /// `on` and `above` both invert to `under`, while `under` inverts to `on`,
    /// so this is not an involution on that triple. `in` and `corner` have no
    /// converse in the vocabulary.
    pub fn inverse(self) -> Option<SpatialRelation> {
        use SpatialRelation::*;
        match self {
            Above => Some(Under),
            On => Some(Under),
            Under => Some(On),
            Left => Some(Right),
            Right => Some(Left),
            Front => Some(Behind),
            Behind => Some(Front),
            LeftFront => Some(RightBack),
            RightBack => Some(LeftFront),
            RightFront => Some(LeftBack),
            LeftBack => Some(RightFront),
            LeftOn => Some(RightOn),
            RightOn => Some(LeftOn),
            In | Corner => None,
        }
    }

    /// Relations whose subject rests on the target's top face.
    pub fn is_support_contact(self) -> bool {
        matches!(
            self,
            SpatialRelation::On
                | SpatialRelation::LeftOn
                | SpatialRelation::RightOn
                | SpatialRelation::Corner
        )
    }

    /// Relations whose subject moves with the target when the target moves.
    pub fn rides_target(self) -> bool {
        self.is_support_contact() || matches!(self, SpatialRelation::In | SpatialRelation::Above)
    }
}

pub fn parse_relation(word: &str) -> Result<SpatialRelation, Error> {
    word.parse()
}

impl FromStr for SpatialRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SpatialRelation::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SpatialRelation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SpatialRelation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let word = String::deserialize(deserializer)?;
        word.parse().map_err(serde::de::Error::custom)
    }
}
