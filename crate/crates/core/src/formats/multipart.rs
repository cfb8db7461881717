//! `multipart/form-data` request bodies.

use std::convert::Infallible;

use bytes::Bytes;

use super::{FormatError, FormatResult};

/// One form part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    pub name: String,
    pub filename: Option<String>,
    pub content_type: Option<String>,
    pub data: Vec<u8>,
}

/// Splits a complete body into its parts.
pub fn parse_multipart(content_type: &str, body: Vec<u8>) -> FormatResult<Vec<Part>> {
    let boundary =
        multer::parse_boundary(content_type).map_err(|e| FormatError::new(format!("invalid multipart body: {e}")))?;
    let stream = futures_util::stream::once(async move { Ok::<_, Infallible>(Bytes::from(body)) });
    let mut form = multer::Multipart::new(stream, boundary);
    futures_executor::block_on(async move {
        let mut parts = Vec::new();
        while let Some(field) = form
            .next_field()
            .await
            .map_err(|e| FormatError::new(format!("invalid multipart body: {e}")))?
        {
            let name = field
                .name()
                .filter(|n| !n.is_empty())
                .ok_or_else(|| FormatError::new("multipart part without a field name"))?
                .to_string();
            let filename = field.file_name().map(str::to_string);
            let content_type = field.content_type().map(|m| m.to_string());
            let data = field
                .bytes()
                .await
                .map_err(|e| FormatError::new(format!("invalid multipart body: {e}")))?
                .to_vec();
            parts.push(Part {
                name,
                filename,
                content_type,
                data,
            });
        }
        Ok(parts)
    })
}
