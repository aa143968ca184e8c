use serde::de::DeserializeOwned;
use thiserror::Error;

/// A TOML document that failed to deserialize into its schema.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {path}: {message}")]
pub struct SchemaError {
    /// 1-based line of the offending span, 0 when unknown.
    pub line: usize,
    /// Dotted field path, `.` for the document root.
    pub path: String,
    pub message: String,
}

pub(crate) fn parse<T: DeserializeOwned>(text: &str) -> Result<T, SchemaError> {
    let de = toml::Deserializer::parse(text).map_err(|e| from_toml(text, &e, "."))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        from_toml(text, e.inner(), &path)
    })
}

fn from_toml(text: &str, err: &toml::de::Error, path: &str) -> SchemaError {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    SchemaError {
        line,
        path: path.to_string(),
        message: err.message().trim().to_string(),
    }
}
