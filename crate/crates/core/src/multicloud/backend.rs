//! Object storage backends: a local directory per simulated provider, or a
//! minimal HTTP object protocol (`PUT`/`GET`/`HEAD` on
//! `{base}/{bucket}/{object_id}` with optional bearer-token auth).

use std::fmt;
use std::fs;
use std::io::ErrorKind;
use std::path::PathBuf;
use std::time::Duration;

use crate::error::{Error, Result};

pub trait ObjectStore: Send + Sync {
    fn put(&self, object_id: &str, bytes: &[u8]) -> Result<()>;

    fn get(&self, object_id: &str) -> Result<Vec<u8>>;

    fn exists(&self, object_id: &str) -> Result<bool>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    LocalDir,
    Http,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::LocalDir => "local",
            BackendKind::Http => "http",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" | "local-directory" | "dir" => Ok(BackendKind::LocalDir),
            "http" | "http-object-store" => Ok(BackendKind::Http),
            other => Err(Error::Config(format!("unknown backend kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendDescriptor {
    pub cloud_id: String,
    pub kind: BackendKind,
    /// Directory path or base URL.
    pub location: String,
    pub bucket: Option<String>,
    /// Environment variable holding a bearer token.
    pub auth_env: Option<String>,
}

impl BackendDescriptor {
    pub fn local(cloud_id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        BackendDescriptor {
            cloud_id: cloud_id.into(),
            kind: BackendKind::LocalDir,
            location: dir.into().to_string_lossy().into_owned(),
            bucket: None,
            auth_env: None,
        }
    }

    pub fn http(
        cloud_id: impl Into<String>,
        base_url: impl Into<String>,
        bucket: impl Into<String>,
        auth_env: Option<String>,
    ) -> Self {
        BackendDescriptor {
            cloud_id: cloud_id.into(),
            kind: BackendKind::Http,
            location: base_url.into(),
            bucket: Some(bucket.into()),
            auth_env,
        }
    }

    pub fn open(&self) -> Result<Box<dyn ObjectStore>> {
        match self.kind {
            BackendKind::LocalDir => Ok(Box::new(LocalDirStore::new(&self.location))),
            BackendKind::Http => {
                let bucket = self
                    .bucket
                    .as_deref()
                    .ok_or_else(|| Error::Config(format!("cloud {}: http backend needs a bucket", self.cloud_id)))?;
                Ok(Box::new(HttpStore::new(&self.location, bucket, self.auth_env.clone())))
            }
        }
    }
}

impl fmt::Display for BackendDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.cloud_id, self.kind.name(), self.location)?;
        if let Some(b) = &self.bucket {
            write!(f, " {b}")?;
        }
        if let Some(a) = &self.auth_env {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Parses a cloud config: one backend per line,
/// `cloud_id kind location [bucket] [auth_env]`. Blank lines and `#`
/// comments are skipped.
pub fn parse_cloud_config(text: &str) -> Result<Vec<BackendDescriptor>> {
    let mut out: Vec<BackendDescriptor> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let err = |m: &str| Error::Config(format!("cloud config line {}: {m}", lineno + 1));
        if f.len() < 3 {
            return Err(err("expected `cloud_id kind location [bucket] [auth_env]`"));
        }
        let kind: BackendKind = f[1].parse()?;
        let max = if kind == BackendKind::Http { 5 } else { 3 };
        if f.len() > max {
            return Err(err("too many fields"));
        }
        if kind == BackendKind::Http && f.len() < 4 {
            return Err(err("http backend needs a bucket"));
        }
        if out.iter().any(|d| d.cloud_id == f[0]) {
            return Err(err(&format!("duplicate cloud_id {:?}", f[0])));
        }
        out.push(BackendDescriptor {
            cloud_id: f[0].to_string(),
            kind,
            location: f[2].to_string(),
            bucket: f.get(3).map(|s| s.to_string()),
            auth_env: f.get(4).map(|s| s.to_string()),
        });
    }
    Ok(out)
}

fn check_object_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("invalid object id {id:?}")))
    }
}

/// Objects as files in one directory. A missing directory means the
/// provider is down.
#[derive(Debug, Clone)]
pub struct LocalDirStore {
    root: PathBuf,
}

impl LocalDirStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LocalDirStore { root: root.into() }
    }

    fn require_root(&self) -> Result<()> {
        if self.root.is_dir() {
            Ok(())
        } else {
            Err(Error::Unavailable(format!("{} is not reachable", self.root.display())))
        }
    }
}

impl ObjectStore for LocalDirStore {
    fn put(&self, object_id: &str, bytes: &[u8]) -> Result<()> {
        check_object_id(object_id)?;
        self.require_root()?;
        let tmp = self.root.join(format!(".{object_id}.partial"));
        let unavailable = |e: std::io::Error| Error::Unavailable(format!("{}: {e}", self.root.display()));
        fs::write(&tmp, bytes).map_err(unavailable)?;
        fs::rename(&tmp, self.root.join(object_id)).map_err(unavailable)
    }

    fn get(&self, object_id: &str) -> Result<Vec<u8>> {
        check_object_id(object_id)?;
        self.require_root()?;
        fs::read(self.root.join(object_id)).map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::NotFound(object_id.to_string()),
            _ => Error::Unavailable(format!("{}: {e}", self.root.display())),
        })
    }

    fn exists(&self, object_id: &str) -> Result<bool> {
        check_object_id(object_id)?;
        self.require_root()?;
        Ok(self.root.join(object_id).is_file())
    }
}

/// Client for the HTTP object protocol. 2xx is success, 404 maps to
/// `NotFound`, anything else (including timeouts) to `Unavailable`.
pub struct HttpStore {
    base: String,
    bucket: String,
    auth_env: Option<String>,
    agent: ureq::Agent,
}

pub const HTTP_TIMEOUT: Duration = Duration::from_secs(10);

impl HttpStore {
    pub fn new(base_url: &str, bucket: &str, auth_env: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(HTTP_TIMEOUT))
            .build()
            .new_agent();
        HttpStore {
            base: base_url.trim_end_matches('/').to_string(),
            bucket: bucket.to_string(),
            auth_env,
            agent,
        }
    }

    fn url(&self, object_id: &str) -> String {
        format!("{}/{}/{}", self.base, self.bucket, object_id)
    }

    fn token(&self) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Unavailable(format!("auth token variable {var} is not set"))),
        }
    }

    fn status(&self, object_id: &str, status: u16) -> Result<()> {
        match status {
            200..=299 => Ok(()),
            404 => Err(Error::NotFound(object_id.to_string())),
            s => Err(Error::Unavailable(format!("{} answered HTTP {s}", self.url(object_id)))),
        }
    }
}

fn transport(url: &str) -> impl FnOnce(ureq::Error) -> Error + '_ {
    move |e| Error::Unavailable(format!("{url}: {e}"))
}

macro_rules! with_auth {
    ($req:expr, $token:expr) => {
        match $token {
            Some(t) => $req.header("Authorization", &format!("Bearer {t}")),
            None => $req,
        }
    };
}

impl ObjectStore for HttpStore {
    fn put(&self, object_id: &str, bytes: &[u8]) -> Result<()> {
        check_object_id(object_id)?;
        let url = self.url(object_id);
        let req = with_auth!(self.agent.put(&url), self.token()?);
        let resp = req
            .header("Content-Type", "application/octet-stream")
            .send(bytes)
            .map_err(transport(&url))?;
        self.status(object_id, resp.status().as_u16())
    }

    fn get(&self, object_id: &str) -> Result<Vec<u8>> {
        check_object_id(object_id)?;
        let url = self.url(object_id);
        let req = with_auth!(self.agent.get(&url), self.token()?);
        let mut resp = req.call().map_err(transport(&url))?;
        self.status(object_id, resp.status().as_u16())?;
        resp.body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(transport(&url))
    }

    fn exists(&self, object_id: &str) -> Result<bool> {
        check_object_id(object_id)?;
        let url = self.url(object_id);
        let req = with_auth!(self.agent.head(&url), self.token()?);
        let resp = req.call().map_err(transport(&url))?;
        match self.status(object_id, resp.status().as_u16()) {
            Ok(()) => Ok(true),
            Err(Error::NotFound(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_put_get() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LocalDirStore::new(tmp.path());
        store.put("abc123", b"hello").unwrap();
        assert_eq!(store.get("abc123").unwrap(), b"hello");
        assert!(store.exists("abc123").unwrap());
        assert!(!store.exists("other").unwrap());
        assert!(matches!(store.get("other"), Err(Error::NotFound(_))));
        assert!(store.put("../escape", b"x").is_err());
        assert!(store.put("", b"x").is_err());
    }

    #[test]
    fn local_missing_dir_is_unavailable() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LocalDirStore::new(tmp.path().join("gone"));
        assert!(matches!(store.put("a", b"x"), Err(Error::Unavailable(_))));
        assert!(matches!(store.get("a"), Err(Error::Unavailable(_))));
    }

    #[test]
    fn http_unreachable_is_unavailable() {
        // bind then drop to find a closed port
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let store = HttpStore::new(&format!("http://127.0.0.1:{port}"), "b", None);
        assert!(matches!(store.put("a", b"x"), Err(Error::Unavailable(_))));
        assert!(matches!(store.get("a"), Err(Error::Unavailable(_))));
    }

    #[test]
    fn config_parsing() {
        let cfg = "# clouds\nA local /tmp/a\n\nB http http://h:9000 bucket TOKEN_B\nC http-object-store http://x b\n";
        let d = parse_cloud_config(cfg).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[0], BackendDescriptor::local("A", "/tmp/a"));
        assert_eq!(d[1].bucket.as_deref(), Some("bucket"));
        assert_eq!(d[1].auth_env.as_deref(), Some("TOKEN_B"));
        assert_eq!(d[2].auth_env, None);
        assert_eq!(parse_cloud_config(&d[1].to_string()).unwrap()[0], d[1]);

        assert!(parse_cloud_config("A ftp x").is_err());
        assert!(parse_cloud_config("A local").is_err());
        assert!(parse_cloud_config("A http http://x").is_err());
        assert!(parse_cloud_config("A local x\nA local y").is_err());
        assert!(parse_cloud_config("A local x extra").is_err());
        assert!(parse_cloud_config("").unwrap().is_empty());
    }
}
