use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{error_text, Category, Constitution, Rule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConstitutionError {
    #[error("constitution io: {0}")]
    Io(#[from] std::io::Error),
    #[error("constitution parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("unsupported constitution schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("invalid constitution at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Serialize, Deserialize)]
struct ConstitutionFile {
    schema_version: u32,
    environment_id: String,
    version: u64,
    summarization_count: u64,
    rules: Vec<Rule>,
}

impl Constitution {
    pub fn to_json(&self) -> String {
        let file = ConstitutionFile {
            schema_version: SCHEMA_VERSION,
            environment_id: self.environment_id.clone(),
            version: self.version,
            summarization_count: self.summarization_count,
            rules: self.rules.clone(),
        };
        serde_json::to_string_pretty(&file).expect("constitution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConstitutionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ConstitutionFile = serde_path_to_error::deserialize(de).map_err(|e| ConstitutionError::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ConstitutionError::SchemaVersion {
                found: file.schema_version,
            });
        }
        validate_rules(&file.rules)?;
        Ok(Constitution {
            environment_id: file.environment_id,
            version: file.version,
            summarization_count: file.summarization_count,
            rules: file.rules,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConstitutionError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConstitutionError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn validate_rules(rules: &[Rule]) -> Result<(), ConstitutionError> {
    let invalid = |i: usize, field: &str, reason: String| ConstitutionError::Invalid {
        field: format!("rules[{i}].{field}"),
        reason,
    };
    let mut seen: HashSet<(Category, &str)> = HashSet::new();
    let mut last_id = None;
    for (i, r) in rules.iter().enumerate() {
        if r.text.trim().is_empty() {
            return Err(invalid(i, "text", "empty".into()));
        }
        if r.text.trim() != r.text {
            return Err(invalid(i, "text", "has surrounding whitespace".into()));
        }
        if r.scope != r.category.scope() {
            return Err(invalid(
                i,
                "scope",
                format!("{:?} rules must have scope {:?}", r.category, r.category.scope()),
            ));
        }
        if let Some(prev) = last_id {
            if r.id <= prev {
                return Err(invalid(i, "id", format!("{} does not increase past {prev}", r.id)));
            }
        }
        last_id = Some(r.id);
        if r.priority == Some(0) {
            return Err(invalid(i, "priority", "must be at least 1".into()));
        }
        match (r.category, &r.mistake, &r.solution) {
            (Category::Error, Some(m), Some(s)) => {
                if m.trim().is_empty() || s.trim().is_empty() {
                    return Err(invalid(i, "mistake", "error rules need mistake and solution".into()));
                }
                if r.text != error_text(m, s) {
                    return Err(invalid(i, "text", "does not match mistake/solution".into()));
                }
            }
            (Category::Error, _, _) => {
                return Err(invalid(i, "mistake", "error rules need mistake and solution".into()))
            }
            (_, None, None) => {}
            _ => return Err(invalid(i, "mistake", "only error rules carry mistake/solution".into())),
        }
        if !seen.insert((r.category, r.text.as_str())) {
            return Err(invalid(i, "text", format!("duplicate {} rule", r.category)));
        }
    }
    Ok(())
}
