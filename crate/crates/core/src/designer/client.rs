//! Language-model clients: the trait, transcript record/replay, and a
//! scripted client for tests and fixtures.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub mime: String,
    pub bytes: Vec<u8>,
}

impl Image {
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub images: Vec<Image>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into(), images: Vec::new() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into(), images: Vec::new() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into(), images: Vec::new() }
    }

    pub fn with_images(mut self, images: impl IntoIterator<Item = Image>) -> Self {
        self.images.extend(images);
        self
    }

    pub fn digest(&self) -> MessageDigest {
        MessageDigest {
            role: self.role,
            text: self.text.clone(),
            images: self
                .images
                .iter()
                .map(|i| ImageDigest { mime: i.mime.clone(), sha256: i.digest(), len: i.bytes.len() })
                .collect(),
        }
    }
}

/// One dialogue with a model. `session` names the transcript it lands in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub session: String,
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn new(session: impl Into<String>) -> Self {
        Self { session: session.into(), messages: Vec::new() }
    }

    pub fn push(&mut self, m: Message) -> &mut Self {
        self.messages.push(m);
        self
    }

    pub fn digest(&self) -> Vec<MessageDigest> {
        self.messages.iter().map(Message::digest).collect()
    }

    /// sha256 of the digest form; images contribute only their hashes.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.digest()).expect("digest serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Text of the most recent user message.
    pub fn last_user_text(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.text.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDigest {
    pub mime: String,
    pub sha256: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageDigest {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmResponse {
    pub text: String,
    pub model: String,
    pub timestamp_unix: u64,
}

#[derive(Debug, Error)]
pub enum LmError {
    #[error("client unconfigured: {0}")]
    Unconfigured(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("model refused: {0}")]
    Refusal(String),
    #[error("no recorded response for session {session} (fingerprint {fingerprint})")]
    ReplayMiss { session: String, fingerprint: String },
    #[error("transcript error: {0}")]
    Transcript(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait LmClient: Send + Sync {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError>;
}

impl<T: LmClient + ?Sized> LmClient for &T {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        (**self).send(conversation)
    }
}

impl<T: LmClient + ?Sized> LmClient for Box<T> {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        (**self).send(conversation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub request: Vec<MessageDigest>,
    pub response: String,
    pub timestamp_unix: u64,
}

/// Append-only record of every call made in one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub model: String,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(id: impl Into<String>, model: impl Into<String>) -> Self {
        Self { id: id.into(), model: model.into(), entries: Vec::new() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LmError> {
        serde_json::from_str(text).map_err(|e| LmError::Transcript(e.to_string()))
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn file_name(&self) -> String {
        format!("{}.json", &self.content_hash()[..16])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptManifest {
    pub schema_version: u32,
    /// Session id to file name.
    pub sessions: BTreeMap<String, String>,
}

/// Writes transcripts under `dir`, one content-addressed file each, plus
/// `manifest.json`. Returns the manifest.
pub fn write_transcripts<'a>(
    dir: &Path,
    transcripts: impl IntoIterator<Item = &'a Transcript>,
) -> Result<TranscriptManifest, LmError> {
    fs::create_dir_all(dir)?;
    let mut manifest = TranscriptManifest { schema_version: 1, sessions: BTreeMap::new() };
    for t in transcripts {
        let name = t.file_name();
        fs::write(dir.join(&name), t.to_json())?;
        manifest.sessions.insert(t.id.clone(), name);
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

/// Reads every transcript listed in `dir/manifest.json`.
pub fn read_transcripts(dir: &Path) -> Result<Vec<Transcript>, LmError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| LmError::Transcript(format!("{}: {e}", manifest_path.display())))?;
    let manifest: TranscriptManifest =
        serde_json::from_str(&text).map_err(|e| LmError::Transcript(format!("{}: {e}", manifest_path.display())))?;
    manifest
        .sessions
        .iter()
        .map(|(session, file)| {
            let t = Transcript::from_json(&fs::read_to_string(dir.join(file))?)?;
            if &t.id != session {
                return Err(LmError::Transcript(format!("{file} holds session {} not {session}", t.id)));
            }
            Ok(t)
        })
        .collect()
}

/// Answers from recorded transcripts, matching on session and the exact
/// request fingerprint. Repeated identical requests are served in order.
#[derive(Debug)]
pub struct ReplayClient {
    model: String,
    queues: Mutex<HashMap<(String, String), VecDeque<(String, u64)>>>,
    dir: Option<PathBuf>,
}

impl ReplayClient {
    pub fn from_transcripts(transcripts: impl IntoIterator<Item = Transcript>) -> Self {
        let mut queues: HashMap<(String, String), VecDeque<(String, u64)>> = HashMap::new();
        let mut model = String::from("replay");
        for t in transcripts {
            model = t.model.clone();
            for e in t.entries {
                queues.entry((t.id.clone(), e.fingerprint)).or_default().push_back((e.response, e.timestamp_unix));
            }
        }
        Self { model, queues: Mutex::new(queues), dir: None }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, LmError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(LmError::Transcript(format!("replay directory {} does not exist", dir.display())));
        }
        let mut c = Self::from_transcripts(read_transcripts(dir)?);
        c.dir = Some(dir.to_path_buf());
        Ok(c)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }
}

impl LmClient for ReplayClient {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        let fingerprint = conversation.fingerprint();
        let key = (conversation.session.clone(), fingerprint.clone());
        let mut queues = self.queues.lock().expect("replay lock");
        match queues.get_mut(&key).and_then(VecDeque::pop_front) {
            Some((text, timestamp_unix)) => Ok(LmResponse { text, model: self.model.clone(), timestamp_unix }),
            None => Err(LmError::ReplayMiss { session: conversation.session.clone(), fingerprint }),
        }
    }
}

/// Wraps a client and records every successful call into per-session
/// transcripts.
pub struct Recorder<C> {
    inner: C,
    transcripts: Mutex<BTreeMap<String, Transcript>>,
}

impl<C: LmClient> Recorder<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, transcripts: Mutex::new(BTreeMap::new()) }
    }

    pub fn transcripts(&self) -> Vec<Transcript> {
        self.transcripts.lock().expect("recorder lock").values().cloned().collect()
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<TranscriptManifest, LmError> {
        write_transcripts(dir.as_ref(), &self.transcripts())
    }
}

impl<C: LmClient> LmClient for Recorder<C> {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        let response = self.inner.send(conversation)?;
        let entry = TranscriptEntry {
            fingerprint: conversation.fingerprint(),
            request: conversation.digest(),
            response: response.text.clone(),
            timestamp_unix: response.timestamp_unix,
        };
        self.transcripts
            .lock()
            .expect("recorder lock")
            .entry(conversation.session.clone())
            .or_insert_with(|| Transcript::new(conversation.session.clone(), response.model.clone()))
            .entries
            .push(entry);
        Ok(response)
    }
}

type Script = dyn Fn(&Conversation) -> Result<String, LmError> + Send + Sync;

/// Answers with a caller-supplied function of the conversation.
pub struct ScriptedClient {
    model: String,
    timestamp_unix: u64,
    script: Box<Script>,
}

impl ScriptedClient {
    pub fn new(script: impl Fn(&Conversation) -> Result<String, LmError> + Send + Sync + 'static) -> Self {
        Self { model: "scripted".into(), timestamp_unix: 0, script: Box::new(script) }
    }

    pub fn with_model(mut self, model: impl Into<String>, timestamp_unix: u64) -> Self {
        self.model = model.into();
        self.timestamp_unix = timestamp_unix;
        self
    }

    /// Replies with `reply` to every request.
    pub fn constant(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        Self::new(move |_| Ok(reply.clone()))
    }

    /// Replies from a fixed queue, one entry per call, in call order.
    pub fn queue(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let q: Mutex<VecDeque<String>> = Mutex::new(replies.into_iter().map(Into::into).collect());
        Self::new(move |_| q.lock().expect("queue lock").pop_front().ok_or_else(|| LmError::Transport("script exhausted".into())))
    }
}

impl LmClient for ScriptedClient {
    fn send(&self, conversation: &Conversation) -> Result<LmResponse, LmError> {
        let text = (self.script)(conversation)?;
        Ok(LmResponse { text, model: self.model.clone(), timestamp_unix: self.timestamp_unix })
    }
}
