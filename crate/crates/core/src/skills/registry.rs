use std::collections::BTreeMap;

use super::{LocomotionKind, ManipulationSkillSpec, SkillError};

/// Manipulation skills keyed by name. Built once, then shared read-only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillRegistry {
    skills: BTreeMap<String, ManipulationSkillSpec>,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_specs(specs: impl IntoIterator<Item = ManipulationSkillSpec>) -> Result<Self, SkillError> {
        let mut reg = Self::new();
        for s in specs {
            reg.register(s)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, spec: ManipulationSkillSpec) -> Result<(), SkillError> {
        spec.validate()?;
        if self.skills.contains_key(&spec.name) || spec.name.parse::<LocomotionKind>().is_ok() {
            return Err(SkillError::DuplicateSkill(spec.name));
        }
        self.skills.insert(spec.name.clone(), spec);
        Ok(())
    }

    /// Exact name first, then a case-insensitive description match.
    pub fn lookup(&self, key: &str) -> Result<&ManipulationSkillSpec, SkillError> {
        if let Some(s) = self.skills.get(key) {
            return Ok(s);
        }
        let needle = key.trim().to_lowercase();
        self.skills
            .values()
            .find(|s| s.description.to_lowercase() == needle)
            .ok_or_else(|| SkillError::UnknownSkill(key.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&ManipulationSkillSpec> {
        self.skills.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &ManipulationSkillSpec> {
        self.skills.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    /// Action set for prompts: one Python-style line per skill, sorted by name.
    pub fn render(&self) -> String {
        self.render_with(&[])
    }

    /// As `render`, with extra `(name, line)` entries merged into the sort.
    pub fn render_with(&self, extra: &[(&str, String)]) -> String {
        let mut lines: Vec<(String, String)> =
            LocomotionKind::ALL.iter().map(|k| (k.as_str().to_string(), k.signature().to_string())).collect();
        lines.extend(self.skills.values().map(|s| (s.name.clone(), format!("{}()  # {}", s.name, s.description))));
        lines.extend(extra.iter().map(|(n, l)| (n.to_string(), l.clone())));
        lines.sort();
        lines.into_iter().map(|(_, l)| l).collect::<Vec<_>>().join("\n")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.skills.values().map(|s| serde_json::to_value(s).expect("spec serializes")).collect())
    }
}
