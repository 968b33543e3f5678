//! Skill memory: admission under a redundancy rule and top-k retrieval.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub name: String,
    pub detail: String,
    pub solution: String,
}

pub const THETA: f64 = 0.7;
pub const K_DUP: usize = 2;
pub const K_RETRIEVE: usize = 2;

pub type Similarity = fn(&str, &str) -> f64;

/// Cosine similarity of term-frequency vectors over lowercased words.
/// Two empty texts have similarity 0.
pub fn tf_cosine(a: &str, b: &str) -> f64 {
    fn tf(s: &str) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for w in s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            *m.entry(w.to_lowercase()).or_insert(0.0) += 1.0;
        }
        m
    }
    let (x, y) = (tf(a), tf(b));
    let dot: f64 = x.iter().filter_map(|(w, n)| y.get(w).map(|m| n * m)).sum();
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|n| n * n).sum::<f64>().sqrt();
    let d = norm(&x) * norm(&y);
    if d == 0.0 {
        0.0
    } else {
        (dot / d).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkillError {
    #[error("skill field `{0}` is empty")]
    EmptyField(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Admission {
    Admitted,
    /// `similar` existing skills exceeded the threshold.
    Excluded { similar: usize },
}

#[derive(Clone)]
pub struct SkillLibrary {
    skills: Vec<Skill>,
    pub similarity: Similarity,
    pub theta: f64,
    pub k_dup: usize,
    pub k_retrieve: usize,
}

impl Default for SkillLibrary {
    fn default() -> Self {
        SkillLibrary { skills: Vec::new(), similarity: tf_cosine, theta: THETA, k_dup: K_DUP, k_retrieve: K_RETRIEVE }
    }
}

impl fmt::Debug for SkillLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SkillLibrary")
            .field("skills", &self.skills)
            .field("theta", &self.theta)
            .field("k_dup", &self.k_dup)
            .field("k_retrieve", &self.k_retrieve)
            .finish()
    }
}

impl SkillLibrary {
    pub fn with_similarity(similarity: Similarity) -> Self {
        SkillLibrary { similarity, ..SkillLibrary::default() }
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    /// Number of stored skills whose detail is more than `theta` similar
    /// to `detail`.
    pub fn similar_count(&self, detail: &str) -> usize {
        self.skills.iter().filter(|s| (self.similarity)(detail, &s.detail) > self.theta).count()
    }

    /// Admits `candidate` unless `k_dup` or more stored skills exceed the
    /// threshold against it.
    pub fn add(&mut self, candidate: Skill) -> Result<Admission, SkillError> {
        for (field, v) in [("name", &candidate.name), ("detail", &candidate.detail), ("solution", &candidate.solution)] {
            if v.trim().is_empty() {
                return Err(SkillError::EmptyField(field));
            }
        }
        let similar = self.similar_count(&candidate.detail);
        if similar >= self.k_dup {
            return Ok(Admission::Excluded { similar });
        }
        self.skills.push(candidate);
        Ok(Admission::Admitted)
    }

    /// The `k` skills most similar to `query`, best first; ties keep
    /// insertion order.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<&Skill> {
        let mut scored: Vec<(f64, usize)> =
            self.skills.iter().enumerate().map(|(i, s)| ((self.similarity)(query, &s.detail), i)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, i)| &self.skills[i]).collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.skills).expect("skills serialize") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<SkillLibrary, serde_json::Error> {
        Ok(SkillLibrary { skills: serde_json::from_str(s)?, ..SkillLibrary::default() })
    }
}
