//! Deterministic report files.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use fcap::analysis::TheoremReport;
use fcap::pde::ScalarField;
use serde_json::{json, Value};

/// Rounds every float to 12 significant digits.
pub fn normalize(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            json!(r)
        }
        Value::Array(a) => Value::Array(a.iter().map(normalize).collect()),
        Value::Object(m) => {
            Value::Object(m.iter().map(|(k, v)| (k.clone(), normalize(v))).collect())
        }
        other => other.clone(),
    }
}

/// Pretty JSON with sorted keys and rounded floats.
pub fn render(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(&normalize(v))?)
}

/// Writes `manifest.json`, one `check-NN-<name>.json` per report,
/// `timings.json`, and optionally `field.csv` with `field.json`.
pub fn write_outputs(
    dir: &Path,
    manifest: &Value,
    reports: &[TheoremReport],
    field: Option<&ScalarField>,
    elapsed: Duration,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    };
    write("manifest.json", render(manifest)?)?;
    for (k, r) in reports.iter().enumerate() {
        write(
            &format!("check-{k:02}-{}.json", r.check),
            render(&serde_json::to_value(r)?)?,
        )?;
    }
    // Wall-clock time lives outside the manifest so reruns stay byte-identical.
    write(
        "timings.json",
        serde_json::to_string_pretty(&json!({ "seconds": elapsed.as_secs_f64() }))?,
    )?;
    if let Some(f) = field {
        let path = dir.join("field.csv");
        let file =
            fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        f.write_csv(BufWriter::new(file))?;
        write("field.json", render(&f.metadata())?)?;
    }
    Ok(())
}
