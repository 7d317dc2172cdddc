//! Where the face box comes from when the request does not carry one.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use liveness_core::BBox;

use crate::error::{ApiError, ErrorCode};

pub const DEFAULT_DETECTOR_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DetectorBinding {
    /// Boxes must arrive with the request (as listed in a corpus manifest).
    RequestBbox,
    /// Centered square of side `0.8 · min(width, height)`.
    CenterCrop,
    /// POST `{"image_b64": ...}` to `url`, expect `{"bbox": {x, y, w, h} | null}`.
    External { url: String, timeout: Duration },
}

impl FromStr for DetectorBinding {
    type Err = String;

    /// `manifest`, `center`, or `external:<url>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "manifest" | "request" => Ok(Self::RequestBbox),
            "center" => Ok(Self::CenterCrop),
            other => match other.strip_prefix("external:") {
                Some(url) if url.starts_with("http://") || url.starts_with("https://") => Ok(Self::External {
                    url: url.to_string(),
                    timeout: DEFAULT_DETECTOR_TIMEOUT,
                }),
                _ => Err(format!(
                    "detector must be manifest, center or external:<url>, got {other:?}"
                )),
            },
        }
    }
}

impl fmt::Display for DetectorBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RequestBbox => f.write_str("manifest"),
            Self::CenterCrop => f.write_str("center"),
            Self::External { url, .. } => write!(f, "external:{url}"),
        }
    }
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    image_b64: &'a str,
}

#[derive(Deserialize)]
struct DetectReply {
    bbox: Option<BBox>,
}

fn unavailable(msg: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::DetectorUnavailable, msg)
}

impl DetectorBinding {
    /// Finds the face in an encoded frame of the given size.
    pub async fn locate(
        &self,
        client: &reqwest::Client,
        encoded: &[u8],
        width: u32,
        height: u32,
    ) -> Result<BBox, ApiError> {
        match self {
            Self::RequestBbox => Err(ApiError::new(
                ErrorCode::NoFace,
                "no bbox in request and the detector binding requires one",
            )),
            Self::CenterCrop => Ok(BBox::center_square(width, height)),
            Self::External { url, timeout } => {
                let b64 = base64::engine::general_purpose::STANDARD.encode(encoded);
                let reply = client
                    .post(url)
                    .timeout(*timeout)
                    .json(&DetectRequest { image_b64: &b64 })
                    .send()
                    .await
                    .map_err(|e| {
                        if e.is_timeout() {
                            unavailable(format!("detector timed out after {timeout:?}"))
                        } else {
                            unavailable(format!("detector request failed: {e}"))
                        }
                    })?;
                if !reply.status().is_success() {
                    return Err(unavailable(format!("detector answered {}", reply.status())));
                }
                let body: DetectReply = reply
                    .json()
                    .await
                    .map_err(|e| unavailable(format!("detector reply unreadable: {e}")))?;
                let bbox = body
                    .bbox
                    .ok_or_else(|| ApiError::new(ErrorCode::NoFace, "detector found no face"))?;
                bbox.validate()
                    .map_err(|e| unavailable(format!("detector returned an invalid box: {e}")))?;
                Ok(bbox)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_bindings() {
        assert_eq!("manifest".parse(), Ok(DetectorBinding::RequestBbox));
        assert_eq!("center".parse(), Ok(DetectorBinding::CenterCrop));
        let ext: DetectorBinding = "external:http://127.0.0.1:9/detect".parse().unwrap();
        assert_eq!(ext.to_string(), "external:http://127.0.0.1:9/detect");
        assert!("external:ftp://x".parse::<DetectorBinding>().is_err());
        assert!("mtcnn".parse::<DetectorBinding>().is_err());
    }
}
