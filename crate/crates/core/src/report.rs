//! Versioned JSON envelopes for every serialized result.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Fit,
    LogisticFit,
    Path,
    LogisticPath,
    Selection,
    Bench,
    SignRecovery,
    Truth,
}

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::Fit => "fit_result",
            Schema::LogisticFit => "logistic_fit_result",
            Schema::Path => "path_result",
            Schema::LogisticPath => "logistic_path_result",
            Schema::Selection => "selection_result",
            Schema::Bench => "bench_report",
            Schema::SignRecovery => "sign_recovery_report",
            Schema::Truth => "ground_truth",
        }
    }

    /// Shipped JSON Schema document.
    pub fn document(self) -> &'static str {
        match self {
            Schema::Fit => include_str!("../schemas/fit_result.schema.json"),
            Schema::LogisticFit => include_str!("../schemas/logistic_fit_result.schema.json"),
            Schema::Path => include_str!("../schemas/path_result.schema.json"),
            Schema::LogisticPath => include_str!("../schemas/logistic_path_result.schema.json"),
            Schema::Selection => include_str!("../schemas/selection_result.schema.json"),
            Schema::Bench => include_str!("../schemas/bench_report.schema.json"),
            Schema::SignRecovery => include_str!("../schemas/sign_recovery_report.schema.json"),
            Schema::Truth => include_str!("../schemas/ground_truth.schema.json"),
        }
    }

    pub const ALL: [Schema; 8] = [
        Schema::Fit,
        Schema::LogisticFit,
        Schema::Path,
        Schema::LogisticPath,
        Schema::Selection,
        Schema::Bench,
        Schema::SignRecovery,
        Schema::Truth,
    ];
}

/// Serializes `payload` (which must be a JSON object) and tags it with the
/// schema name and version.
pub fn envelope<T: Serialize>(schema: Schema, payload: &T) -> Result<Value> {
    let mut map = match serde_json::to_value(payload)? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    if map.contains_key("schema") || map.contains_key("schema_version") {
        return Err(Error::invalid("payload already carries schema fields"));
    }
    map.insert("schema".into(), Value::String(schema.name().into()));
    map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    Ok(Value::Object(map))
}

pub fn to_json_string<T: Serialize>(schema: Schema, payload: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&envelope(schema, payload)?)?)
}
