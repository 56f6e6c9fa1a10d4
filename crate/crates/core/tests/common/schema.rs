//! Minimal JSON Schema checker covering the keywords the shipped schemas use:
//! type, required, properties, additionalProperties, items, const, enum,
//! minimum, exclusiveMinimum, exclusiveMaximum and oneOf.

use serde_json::Value;

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.as_f64().is_some_and(|x| x.fract() == 0.0),
        other => panic!("unsupported type {other}"),
    }
}

/// Returns every violation found, each prefixed with its JSON path.
pub fn validate(schema: &Value, v: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(schema, v, "$", &mut errs);
    errs
}

fn check(schema: &Value, v: &Value, path: &str, errs: &mut Vec<String>) {
    let Some(s) = schema.as_object() else { return };
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(name) => type_matches(name, v),
            Value::Array(names) => names.iter().any(|n| type_matches(n.as_str().unwrap(), v)),
            _ => panic!("bad type keyword at {path}"),
        };
        if !ok {
            errs.push(format!("{path}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            errs.push(format!("{path}: expected {c}, got {v}"));
        }
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(v) {
            errs.push(format!("{path}: {v} not in enum"));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
            if x < m {
                errs.push(format!("{path}: {x} < minimum {m}"));
            }
        }
        if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                errs.push(format!("{path}: {x} <= exclusiveMinimum {m}"));
            }
        }
        if let Some(m) = s.get("exclusiveMaximum").and_then(Value::as_f64) {
            if x >= m {
                errs.push(format!("{path}: {x} >= exclusiveMaximum {m}"));
            }
        }
    }
    if let (Some(Value::Array(required)), Some(obj)) = (s.get("required"), v.as_object()) {
        for key in required {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                errs.push(format!("{path}: missing required key {key}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        for (key, val) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(sub, val, &format!("{path}.{key}"), errs),
                None => match s.get("additionalProperties") {
                    Some(Value::Bool(false)) => errs.push(format!("{path}: unexpected key {key}")),
                    Some(sub @ Value::Object(_)) => check(sub, val, &format!("{path}.{key}"), errs),
                    _ => {}
                },
            }
        }
    }
    if let (Some(items), Some(arr)) = (s.get("items"), v.as_array()) {
        for (i, item) in arr.iter().enumerate() {
            check(items, item, &format!("{path}[{i}]"), errs);
        }
    }
    if let Some(Value::Array(options)) = s.get("oneOf") {
        let passing = options.iter().filter(|o| validate(o, v).is_empty()).count();
        if passing != 1 {
            errs.push(format!("{path}: {passing} oneOf branches match"));
        }
    }
}
