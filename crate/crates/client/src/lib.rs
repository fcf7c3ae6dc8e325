//! Blocking HTTP client for `coloc-server`.
//!
//! [`Client`] implements [`Backend`], so traces and scenarios replay against
//! a remote service exactly as they do against an in-process engine.

use std::time::Duration;

use reqwest::blocking::{Client as Http, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;

use coloc_core::model::StateDump;
use coloc_core::trace::{Backend, VerifyRequest};
use coloc_core::{EngineOptions, PrivacyPreference, PublicationDecision, Resource, UserId};

pub use coloc_core::api::{Created, ErrorBody, NewFriendship, NewUser, PrefAdded, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server answered {status}: {message}")]
    Status { status: u16, message: String },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: Http,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Result<Self, ClientError> {
        let http = Http::builder().timeout(Duration::from_secs(300)).build()?;
        Ok(Self {
            base: base.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn read<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json()?);
        }
        let text = resp.text().unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text)
            .map(|e| e.error)
            .unwrap_or(text);
        Err(ClientError::Status {
            status: status.as_u16(),
            message,
        })
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::read(self.http.get(format!("{}{path}", self.base)).send()?)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        Self::read(self.http.post(format!("{}{path}", self.base)).json(body).send()?)
    }

    pub fn health(&self) -> Result<bool, ClientError> {
        let v: serde_json::Value = self.get("/health")?;
        Ok(v["status"] == "ok")
    }

    /// Poll `/health` until the service answers or `tries` run out.
    pub fn wait_ready(&self, tries: u32) -> Result<(), ClientError> {
        let mut last = None;
        for _ in 0..tries {
            match self.health() {
                Ok(true) => return Ok(()),
                Ok(false) => {}
                Err(e) => last = Some(e),
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        Err(last.unwrap_or(ClientError::Status {
            status: 503,
            message: "service not ready".into(),
        }))
    }

    pub fn options(&self) -> Result<EngineOptions, ClientError> {
        self.get("/options")
    }

    pub fn add_user(&self, user: &UserId) -> Result<bool, ClientError> {
        let c: Created = self.post("/users", &NewUser { user: user.clone() })?;
        Ok(c.created)
    }

    pub fn add_friend(&self, a: &UserId, b: &UserId) -> Result<bool, ClientError> {
        let c: Created = self.post(
            "/friends",
            &NewFriendship {
                a: a.clone(),
                b: b.clone(),
            },
        )?;
        Ok(c.created)
    }

    pub fn add_preference(&self, p: &PrivacyPreference) -> Result<(), ClientError> {
        let _: PrefAdded = self.post("/preferences", p)?;
        Ok(())
    }

    pub fn publish(&self, r: &Resource) -> Result<PublicationDecision, ClientError> {
        self.post("/publish", r)
    }

    pub fn graph(&self, r: &Resource) -> Result<serde_json::Value, ClientError> {
        self.post("/graph", r)
    }

    pub fn verify(&self, semantic: bool) -> Result<VerifyReport, ClientError> {
        self.post("/verify", &VerifyRequest { semantic })
    }

    pub fn store(&self) -> Result<StateDump, ClientError> {
        self.get("/store")
    }
}

impl Backend for Client {
    type Error = ClientError;

    fn add_user(&self, u: &UserId) -> Result<bool, ClientError> {
        Client::add_user(self, u)
    }

    fn add_friend(&self, a: &UserId, b: &UserId) -> Result<bool, ClientError> {
        Client::add_friend(self, a, b)
    }

    fn add_preference(&self, p: &PrivacyPreference) -> Result<(), ClientError> {
        Client::add_preference(self, p)
    }

    fn publish(&self, r: &Resource) -> Result<PublicationDecision, ClientError> {
        Client::publish(self, r)
    }

    fn dump(&self) -> Result<StateDump, ClientError> {
        self.store()
    }
}
