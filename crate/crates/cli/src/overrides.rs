use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Apply `key.path=value` overrides to a config. Keys must already exist in
/// the serialized config; values are parsed as JSON, falling back to a plain
/// string.
pub fn apply<T: Serialize + DeserializeOwned>(base: &T, sets: &[String]) -> Result<T, String> {
    let mut root = serde_json::to_value(base).map_err(|e| e.to_string())?;
    for set in sets {
        let (key, raw) = set.split_once('=').ok_or_else(|| format!("override `{set}` is not of the form key=value"))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let Value::Object(map) = node else {
                return Err(format!("unknown config key `{key}`"));
            };
            node = map.get_mut(*part).ok_or_else(|| format!("unknown config key `{key}`"))?;
            if i + 1 == parts.len() {
                *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            }
        }
    }
    serde_json::from_value(root).map_err(|e| format!("invalid override: {e}"))
}
