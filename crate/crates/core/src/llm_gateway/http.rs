use std::time::Duration;

use serde_json::json;

use super::{ChatRequest, Provider, ProviderError};

/// Chat-completion client for endpoints speaking the common
/// `{model, messages:[{role, content}]}` request shape.
pub struct HttpProvider {
    endpoint: String,
    model_name: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(endpoint: String, model_name: String, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { endpoint, model_name, api_key, agent }
    }
}

/// Request body sent for one prompt.
pub fn chat_request_body(model_name: &str, prompt: &str, temperature: f64, max_tokens: u32) -> serde_json::Value {
    json!({
        "model": model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "max_tokens": max_tokens,
    })
}

/// `choices[0].message.content` of a response body.
pub fn extract_reply(body: &serde_json::Value) -> Option<String> {
    body.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

fn classify_status(status: u16, message: String) -> ProviderError {
    match status {
        401 | 403 => ProviderError::Auth(message),
        408 | 429 | 500..=599 => ProviderError::Transient { status: Some(status), message },
        _ => ProviderError::Content { status: Some(status), message },
    }
}

impl Provider for HttpProvider {
    fn send(&self, request: &ChatRequest<'_>) -> Result<String, ProviderError> {
        let body = chat_request_body(
            &self.model_name,
            request.prompt,
            request.spec.temperature,
            request.spec.max_tokens,
        );
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Transient { status: None, message: e.to_string() })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transient { status: Some(status), message: e.to_string() })?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, text));
        }
        let parsed: serde_json::Value = serde_json::from_str(&text).map_err(|e| ProviderError::Content {
            status: Some(status),
            message: format!("response is not JSON: {e}"),
        })?;
        extract_reply(&parsed).ok_or_else(|| ProviderError::Content {
            status: Some(status),
            message: "response has no choices[0].message.content".into(),
        })
    }
}
