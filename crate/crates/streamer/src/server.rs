//! HTTP asset service: the manifest, block files with byte ranges and
//! content-hash ETags, and a health check.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use blockfield_core::bake::io::sha256_hex;
use blockfield_core::scene::{SceneManifest, MANIFEST_FILE};

use crate::Result;

#[derive(Clone, Debug)]
struct Servable {
    bytes: u64,
    etag: String,
}

#[derive(Debug)]
struct Catalog {
    manifest: Arc<Vec<u8>>,
    manifest_etag: String,
    files: HashMap<String, Servable>,
}

impl Catalog {
    fn load(root: &Path) -> Result<Self> {
        let manifest = SceneManifest::load(root)?;
        let raw = std::fs::read(root.join(MANIFEST_FILE))?;
        let mut files = HashMap::new();
        for s in &manifest.shaders {
            files.insert(
                s.name.clone(),
                Servable {
                    bytes: s.bytes,
                    etag: quote(&s.sha256),
                },
            );
        }
        for b in &manifest.blocks {
            for f in &b.files {
                files.insert(
                    format!("{}/{}", b.dir, f.name),
                    Servable {
                        bytes: f.bytes,
                        etag: quote(&f.sha256),
                    },
                );
            }
        }
        Ok(Catalog {
            manifest_etag: quote(&sha256_hex(&raw)),
            manifest: Arc::new(raw),
            files,
        })
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// Serves one exported scene directory. Only files listed in the manifest are
/// reachable.
#[derive(Clone, Debug)]
pub struct AssetService {
    root: PathBuf,
    catalog: Arc<RwLock<Arc<Catalog>>>,
}

impl AssetService {
    pub fn new(root: &Path) -> Result<Self> {
        Ok(AssetService {
            root: root.to_path_buf(),
            catalog: Arc::new(RwLock::new(Arc::new(Catalog::load(root)?))),
        })
    }

    /// Re-reads the manifest and swaps it in as a whole.
    pub fn reload(&self) -> Result<()> {
        let next = Arc::new(Catalog::load(&self.root)?);
        *self.catalog.write().unwrap_or_else(|e| e.into_inner()) = next;
        Ok(())
    }

    fn catalog(&self) -> Arc<Catalog> {
        self.catalog.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

pub fn router(service: AssetService) -> Router {
    Router::new().fallback(handle).with_state(service)
}

/// Binds `addr` and serves until the task is dropped. Returns the bound
/// address, which differs from `addr` when port 0 was requested.
pub async fn spawn(root: &Path, addr: &str) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let app = router(AssetService::new(root)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok((local, task))
}

/// Serves `root` on `addr` until the process ends.
pub async fn serve(root: &Path, addr: &str) -> Result<()> {
    let app = router(AssetService::new(root)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on {}", root.display(), listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

async fn handle(State(svc): State<AssetService>, method: Method, uri: Uri, headers: HeaderMap) -> Response {
    if method != Method::GET && method != Method::HEAD {
        return status(StatusCode::METHOD_NOT_ALLOWED);
    }
    let head = method == Method::HEAD;
    let path = uri.path().trim_start_matches('/');
    if path == "healthz" {
        return Response::new(Body::from("ok"));
    }
    let catalog = svc.catalog();
    if path == MANIFEST_FILE {
        let body = catalog.manifest.as_ref().clone();
        return respond(&headers, body, &catalog.manifest_etag, "application/json", head);
    }
    let Some(file) = catalog.files.get(path) else {
        return status(StatusCode::NOT_FOUND);
    };
    let body = match tokio::fs::read(svc.root.join(path)).await {
        Ok(b) if b.len() as u64 == file.bytes => b,
        Ok(_) | Err(_) => return status(StatusCode::INTERNAL_SERVER_ERROR),
    };
    respond(&headers, body, &file.etag, content_type(path), head)
}

fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("png") => "image/png",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

fn status(code: StatusCode) -> Response {
    let mut r = Response::new(Body::empty());
    *r.status_mut() = code;
    r
}

fn respond(req: &HeaderMap, body: Vec<u8>, etag: &str, ctype: &'static str, head: bool) -> Response {
    let len = body.len() as u64;
    let mut r = if matches_etag(req, etag) {
        status(StatusCode::NOT_MODIFIED)
    } else {
        match req.get(header::RANGE).map(|v| v.to_str().ok().and_then(|s| parse_range(s, len))) {
            None => {
                let mut r = Response::new(Body::from(if head { Vec::new() } else { body }));
                set(&mut r, header::CONTENT_LENGTH, &len.to_string());
                set(&mut r, header::CONTENT_TYPE, ctype);
                r
            }
            Some(Some((a, b))) => {
                let part = body[a as usize..=b as usize].to_vec();
                let mut r = Response::new(Body::from(if head { Vec::new() } else { part }));
                *r.status_mut() = StatusCode::PARTIAL_CONTENT;
                set(&mut r, header::CONTENT_RANGE, &format!("bytes {a}-{b}/{len}"));
                set(&mut r, header::CONTENT_LENGTH, &(b - a + 1).to_string());
                set(&mut r, header::CONTENT_TYPE, ctype);
                r
            }
            Some(None) => {
                let mut r = status(StatusCode::RANGE_NOT_SATISFIABLE);
                set(&mut r, header::CONTENT_RANGE, &format!("bytes */{len}"));
                r
            }
        }
    };
    set(&mut r, header::ETAG, etag);
    set(&mut r, header::ACCEPT_RANGES, "bytes");
    r
}

fn set(r: &mut Response, name: header::HeaderName, value: &str) {
    if let Ok(v) = HeaderValue::from_str(value) {
        r.headers_mut().insert(name, v);
    }
}

fn matches_etag(req: &HeaderMap, etag: &str) -> bool {
    req.get_all(header::IF_NONE_MATCH).iter().any(|v| {
        v.to_str().is_ok_and(|s| {
            s.split(',').map(str::trim).any(|t| t == "*" || t == etag || t.strip_prefix("W/") == Some(etag))
        })
    })
}

/// Single byte range against a body of `len` bytes, as inclusive bounds.
/// `None` for anything malformed, multi-range or unsatisfiable.
pub fn parse_range(value: &str, len: u64) -> Option<(u64, u64)> {
    let spec = value.trim().strip_prefix("bytes=")?.trim();
    if spec.contains(',') {
        return None;
    }
    let (a, b) = spec.split_once('-')?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    let (start, end) = match (a.trim(), b.trim()) {
        (a, "") if digits(a) => (a.parse().ok()?, len.checked_sub(1)?),
        ("", n) if digits(n) => {
            let n: u64 = n.parse().ok()?;
            if n == 0 {
                return None;
            }
            (len.saturating_sub(n), len.checked_sub(1)?)
        }
        (a, b) if digits(a) && digits(b) => {
            let (a, b): (u64, u64) = (a.parse().ok()?, b.parse().ok()?);
            if b < a {
                return None;
            }
            (a, b.min(len.checked_sub(1)?))
        }
        _ => return None,
    };
    (start < len && start <= end).then_some((start, end))
}

#[cfg(test)]
mod tests {
    use super::parse_range;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("bytes=0-99", 1000), Some((0, 99)));
        assert_eq!(parse_range("bytes=990-", 1000), Some((990, 999)));
        assert_eq!(parse_range("bytes=-10", 1000), Some((990, 999)));
        assert_eq!(parse_range("bytes=-5000", 1000), Some((0, 999)));
        assert_eq!(parse_range("bytes=500-5000", 1000), Some((500, 999)));
        for bad in ["bytes=1000-", "bytes=5-2", "bytes=a-b", "items=0-1", "bytes=0-1,4-5", "bytes=-0", "bytes=-", "bytes=+1-2"] {
            assert_eq!(parse_range(bad, 1000), None, "{bad}");
        }
        assert_eq!(parse_range("bytes=0-0", 0), None);
    }
}
