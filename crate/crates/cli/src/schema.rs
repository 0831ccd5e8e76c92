//! The published config schema and validation against it.

use std::sync::OnceLock;

use jsonschema::Validator;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Draft 2020-12 schema for experiment configs, including per-verb parameter defaults.
pub const SCHEMA: &str = include_str!("../schema/config.schema.json");

fn validator() -> &'static Validator {
    static V: OnceLock<Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

pub fn validate(config: &Value) -> Result<()> {
    let errors: Vec<String> = validator()
        .iter_errors(config)
        .map(|e| {
            let at = e.instance_path.to_string();
            format!("  {}: {e}", if at.is_empty() { "/" } else { &at })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(errors.join("\n")))
    }
}
