//! The machine-readable `run.summary` file: one JSON object per output
//! directory, one section per subcommand run, keys sorted so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

const FILE: &str = "run.summary";

/// Sort every object in the tree so serialization is deterministic.
fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let tree: BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, sorted(v))).collect();
            Value::Object(tree.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Insert (or replace) one section of the summary, creating the file on
/// first use.
pub fn merge(out_dir: &Path, section: &str, value: Value) -> Result<(), CliError> {
    let path = out_dir.join(FILE);
    let mut root: BTreeMap<String, Value> = if path.exists() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("corrupt {}: {e}", path.display())))?
    } else {
        BTreeMap::new()
    };
    root.insert(section.to_string(), sorted(value));
    let json = serde_json::to_string_pretty(&root)
        .map_err(|e| CliError::Data(format!("summary serialization: {e}")))?;
    std::fs::write(&path, json + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
