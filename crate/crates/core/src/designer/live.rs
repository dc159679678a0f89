//! HTTP chat-completion client.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use base64::Engine;
use serde_json::{json, Value};

use super::client::{Conversation, LmClient, LmError, LmResponse, Role};

pub const ENV_ENDPOINT: &str = "BLOX_LM_ENDPOINT";
pub const ENV_MODEL: &str = "BLOX_LM_MODEL";
pub const ENV_KEY: &str = "BLOX_LM_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub key: String,
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl LiveConfig {
    /// Reads endpoint, model and key from the environment.
    pub fn from_env() -> Result<Self, LmError> {
        let get = |k: &str| {
            std::env::var(k).ok().filter(|v| !v.trim().is_empty()).ok_or_else(|| LmError::Unconfigured(format!("{k} is not set")))
        };
        Ok(Self {
            endpoint: get(ENV_ENDPOINT)?,
            model: get(ENV_MODEL)?,
            key: get(ENV_KEY)?,
            retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        })
    }
}

pub struct LiveClient {
    cfg: LiveConfig,
    agent: ureq::Agent,
}

impl LiveClient {
    pub fn new(cfg: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).build().into();
        Self { cfg, agent }
    }

    pub fn from_env() -> Result<Self, LmError> {
        LiveConfig::from_env().map(Self::new)
    }

    fn body(&self, conv: &Conversation) -> Value {
        let messages: Vec<Value> = conv
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                if m.images.is_empty() {
                    return json!({"role": role, "content": m.text});
                }
                let mut parts = vec![json!({"type": "text", "text": m.text})];
                for img in &m.images {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(&img.bytes);
                    parts.push(json!({"type": "image_url", "image_url": {"url": format!("data:{};base64,{b64}", img.mime)}}));
                }
                json!({"role": role, "content": parts})
            })
            .collect();
        json!({"model": self.cfg.model, "messages": messages})
    }

    fn attempt(&self, body: &Value) -> Result<String, String> {
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.cfg.key))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let v: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| format!("unexpected response shape: {v}"))
    }
}

impl LmClient for LiveClient {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        let body = self.body(conversation);
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(text) => {
                    let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                    return Ok(LmResponse { text, model: self.cfg.model.clone(), timestamp_unix });
                }
                Err(e) => last = e,
            }
        }
        Err(LmError::Exhausted { attempts: self.cfg.retries + 1, last })
    }
}
