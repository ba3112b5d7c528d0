//! Trained combiner files: plain-text key-value lines, one key per line,
//! floats in shortest round-trip form. Line order is fixed so equal
//! models serialize to identical bytes.

use std::fs;
use std::path::Path;

use crate::ensemble::LinearEnsembleModel;
use crate::error::{Error, Result};

pub const MODEL_SCHEMA: u32 = 1;

pub fn format_model(model: &LinearEnsembleModel) -> String {
    let weights: Vec<String> = model.weights.iter().map(f64::to_string).collect();
    format!(
        "schema {MODEL_SCHEMA}\nweights {}\nbias {}\nlambda {}\nseed {}\nnormalization {}\n",
        weights.join(" "),
        model.bias,
        model.lambda,
        model.seed,
        model.normalization
    )
}

pub fn write_model(path: &Path, model: &LinearEnsembleModel) -> Result<()> {
    if model.weights.is_empty() || model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument("model weights must be nonempty and finite".into()));
    }
    fs::write(path, format_model(model))?;
    Ok(())
}

fn fail(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

pub fn read_model(path: &Path) -> Result<LinearEnsembleModel> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| fail(path, format!("missing `{key}` line")))?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| fail(path, format!("expected `{key} ...`, got `{line}`")))?;
        Ok(rest.to_owned())
    };
    let schema: u32 =
        field("schema")?.parse().map_err(|_| fail(path, "schema is not an integer"))?;
    if schema != MODEL_SCHEMA {
        return Err(fail(path, format!("schema {schema} unsupported (expected {MODEL_SCHEMA})")));
    }
    let weights: Vec<f64> = field("weights")?
        .split(' ')
        .map(|w| w.parse::<f64>().map_err(|_| fail(path, format!("bad weight `{w}`"))))
        .collect::<Result<_>>()?;
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return Err(fail(path, "weights must be nonempty and finite"));
    }
    let bias: f64 = field("bias")?.parse().map_err(|_| fail(path, "bad bias"))?;
    let lambda: f64 = field("lambda")?.parse().map_err(|_| fail(path, "bad lambda"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| fail(path, "bad seed"))?;
    let normalization = field("normalization")?;
    if !bias.is_finite() || !lambda.is_finite() || lambda < 0.0 {
        return Err(fail(path, "bias and lambda must be finite, lambda >= 0"));
    }
    Ok(LinearEnsembleModel { weights, bias, lambda, seed, normalization })
}
