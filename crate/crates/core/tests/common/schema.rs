//! Validator for the JSON Schema keywords the console protocol schema
//! uses: type, const, enum, properties, required, additionalProperties,
//! items, minItems, maxItems, minLength, minimum, maximum, oneOf and
//! local $ref.

use serde_json::Value;

pub struct Schema {
    root: Value,
}

impl Schema {
    pub fn new(root: Value) -> Self {
        Schema { root }
    }

    pub fn validate(&self, instance: &Value) -> Result<(), String> {
        self.check(&self.root, instance, "$")
    }

    /// Validates against a named `$defs` entry.
    pub fn validate_def(&self, def: &str, instance: &Value) -> Result<(), String> {
        let schema = self.root["$defs"]
            .get(def)
            .ok_or_else(|| format!("no definition {def}"))?;
        self.check(schema, instance, "$")
    }

    fn resolve(&self, reference: &str) -> Result<&Value, String> {
        let path = reference
            .strip_prefix("#/")
            .ok_or_else(|| format!("only local refs supported: {reference}"))?;
        path.split('/')
            .try_fold(&self.root, |v, key| v.get(key))
            .ok_or_else(|| format!("unresolved ref {reference}"))
    }

    fn check(&self, schema: &Value, v: &Value, at: &str) -> Result<(), String> {
        let Some(s) = schema.as_object() else {
            return Err(format!("{at}: schema is not an object"));
        };
        for key in s.keys() {
            const KNOWN: &[&str] = &[
                "$schema", "$id", "$defs", "title", "description", "type", "const", "enum",
                "properties", "required", "additionalProperties", "items", "minItems",
                "maxItems", "minLength", "minimum", "maximum", "oneOf", "$ref",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(format!("{at}: unsupported keyword {key}"));
            }
        }
        if let Some(r) = s.get("$ref").and_then(Value::as_str) {
            self.check(self.resolve(r)?, v, at)?;
        }
        if let Some(t) = s.get("type") {
            let types: Vec<&str> = match t {
                Value::String(one) => vec![one.as_str()],
                Value::Array(many) => many.iter().filter_map(Value::as_str).collect(),
                _ => return Err(format!("{at}: bad type keyword")),
            };
            if !types.iter().any(|t| type_matches(t, v)) {
                return Err(format!("{at}: expected {types:?}, got {v}"));
            }
        }
        if let Some(c) = s.get("const") {
            if c != v {
                return Err(format!("{at}: expected {c}, got {v}"));
            }
        }
        if let Some(options) = s.get("enum").and_then(Value::as_array) {
            if !options.contains(v) {
                return Err(format!("{at}: {v} not in {options:?}"));
            }
        }
        if let Some(n) = v.as_f64() {
            if s.get("minimum").and_then(Value::as_f64).is_some_and(|m| n < m) {
                return Err(format!("{at}: {n} below minimum"));
            }
            if s.get("maximum").and_then(Value::as_f64).is_some_and(|m| n > m) {
                return Err(format!("{at}: {n} above maximum"));
            }
        }
        if let Some(text) = v.as_str() {
            if s
                .get("minLength")
                .and_then(Value::as_u64)
                .is_some_and(|m| (text.chars().count() as u64) < m)
            {
                return Err(format!("{at}: string too short"));
            }
        }
        if let Some(items) = v.as_array() {
            let len = items.len() as u64;
            if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m) {
                return Err(format!("{at}: fewer than minItems"));
            }
            if s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m) {
                return Err(format!("{at}: more than maxItems"));
            }
            if let Some(item_schema) = s.get("items") {
                for (i, item) in items.iter().enumerate() {
                    self.check(item_schema, item, &format!("{at}[{i}]"))?;
                }
            }
        }
        if let Some(obj) = v.as_object() {
            if let Some(required) = s.get("required").and_then(Value::as_array) {
                for key in required.iter().filter_map(Value::as_str) {
                    if !obj.contains_key(key) {
                        return Err(format!("{at}: missing {key}"));
                    }
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            for (key, value) in obj {
                match props.and_then(|p| p.get(key)) {
                    Some(p) => self.check(p, value, &format!("{at}.{key}"))?,
                    None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                        return Err(format!("{at}: unexpected property {key}"));
                    }
                    None => {}
                }
            }
        }
        if let Some(options) = s.get("oneOf").and_then(Value::as_array) {
            let matched = options
                .iter()
                .filter(|o| self.check(o, v, at).is_ok())
                .count();
            if matched != 1 {
                let why: Vec<String> = options
                    .iter()
                    .filter_map(|o| self.check(o, v, at).err())
                    .take(3)
                    .collect();
                return Err(format!("{at}: matched {matched} of oneOf ({why:?})"));
            }
        }
        Ok(())
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        _ => false,
    }
}
