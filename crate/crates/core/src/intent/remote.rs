use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendError, Completion, CompletionRequest, LlmClient};

/// Chat-completion endpoint over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    url: String,
    key: Option<String>,
    model: String,
    timeout: Duration,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>) -> Self {
        Self { url: url.into(), key, model: model.into(), timeout: Duration::from_secs(60) }
    }

    /// Reads `GUIDE_LLM_URL` (required), `GUIDE_LLM_KEY` and `GUIDE_LLM_MODEL`.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var("GUIDE_LLM_URL")
            .map_err(|_| BackendError::Unavailable("GUIDE_LLM_URL is not set".into()))?;
        let key = std::env::var("GUIDE_LLM_KEY").ok().filter(|k| !k.is_empty());
        let model = std::env::var("GUIDE_LLM_MODEL").unwrap_or_else(|_| "gpt-4o".into());
        Ok(Self::new(url, key, model))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.bundle.system_prompt},
                {"role": "user", "content": req.bundle.user_message()},
            ],
        })
    }
}

fn reply_text(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::BadResponse("missing choices[0].message.content".into()))
}

impl LlmClient for RemoteBackend {
    fn backend_id(&self) -> &str {
        "remote"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut call = agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response =
            call.send_json(self.request_body(req)).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let body: Value =
            response.body_mut().read_json().map_err(|e| BackendError::BadResponse(e.to_string()))?;
        Ok(Completion::text(reply_text(&body)?))
    }

    fn runs_in_background(&self) -> bool {
        true
    }
}
