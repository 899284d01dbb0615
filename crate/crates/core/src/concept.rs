use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of ethical concepts, and the width of every label vector.
pub const CONCEPT_COUNT: usize = 5;

/// The five ethical concepts. Declaration order is the canonical order used
/// for label vectors, score vectors and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EthicalConcept {
    Commonsense,
    Deontology,
    Justice,
    Utilitarianism,
    Virtue,
}

impl EthicalConcept {
    pub const ALL: [EthicalConcept; CONCEPT_COUNT] = [
        EthicalConcept::Commonsense,
        EthicalConcept::Deontology,
        EthicalConcept::Justice,
        EthicalConcept::Utilitarianism,
        EthicalConcept::Virtue,
    ];

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EthicalConcept::Commonsense => "commonsense",
            EthicalConcept::Deontology => "deontology",
            EthicalConcept::Justice => "justice",
            EthicalConcept::Utilitarianism => "utilitarianism",
            EthicalConcept::Virtue => "virtue",
        }
    }

    /// Display label used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            EthicalConcept::Commonsense => "Commonsense",
            EthicalConcept::Deontology => "Deontology",
            EthicalConcept::Justice => "Justice",
            EthicalConcept::Utilitarianism => "Utilitarianism",
            EthicalConcept::Virtue => "Virtue",
        }
    }

    /// The bundled description text for this concept.
    pub fn description(self) -> &'static str {
        match self {
            EthicalConcept::Commonsense => COMMONSENSE,
            EthicalConcept::Deontology => DEONTOLOGY,
            EthicalConcept::Justice => JUSTICE,
            EthicalConcept::Utilitarianism => UTILITARIANISM,
            EthicalConcept::Virtue => VIRTUE,
        }
    }
}

impl fmt::Display for EthicalConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown ethical concept `{0}`")]
pub struct UnknownConcept(pub alloc::string::String);

impl FromStr for EthicalConcept {
    type Err = UnknownConcept;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "commonsense" | "cm" => Ok(EthicalConcept::Commonsense),
            "deontology" => Ok(EthicalConcept::Deontology),
            "justice" => Ok(EthicalConcept::Justice),
            "utilitarianism" | "util" => Ok(EthicalConcept::Utilitarianism),
            "virtue" => Ok(EthicalConcept::Virtue),
            _ => Err(UnknownConcept(s.into())),
        }
    }
}

/// Versioned description asset for one concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConceptDescription {
    pub concept: EthicalConcept,
    pub description: &'static str,
}

/// Bumped whenever the bundled description texts change.
pub const DESCRIPTIONS_VERSION: u32 = 1;

const COMMONSENSE: &str = include_str!("../assets/descriptions/commonsense.txt");
const DEONTOLOGY: &str = include_str!("../assets/descriptions/deontology.txt");
const JUSTICE: &str = include_str!("../assets/descriptions/justice.txt");
const UTILITARIANISM: &str = include_str!("../assets/descriptions/utilitarianism.txt");
const VIRTUE: &str = include_str!("../assets/descriptions/virtue.txt");

/// All five descriptions in canonical order.
pub fn descriptions() -> [ConceptDescription; CONCEPT_COUNT] {
    EthicalConcept::ALL.map(|concept| ConceptDescription {
        concept,
        description: concept.description(),
    })
}
