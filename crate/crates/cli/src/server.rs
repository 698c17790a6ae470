//! JSON-over-HTTP review API. Routing and responses live in [`handle`], which
//! does no network IO, so the whole API can be exercised in-process.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Value};
use strata_core::config::Config;
use strata_core::lexicon::LanguageTag;
use strata_core::project::{ErrorClass, ExportFormat, Phase, ProjectError, Resolution, Workspace};
use strata_core::DecisionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok(body: Value) -> Self {
        Response { status: 200, body }
    }

    fn created(body: Value) -> Self {
        Response { status: 201, body }
    }

    fn error(status: u16, message: impl Into<String>, blocking: Vec<DecisionId>) -> Self {
        Response {
            status,
            body: json!({ "error": message.into(), "blocking": blocking }),
        }
    }
}

impl From<ProjectError> for Response {
    fn from(e: ProjectError) -> Self {
        let status = match e.class() {
            ErrorClass::BadRequest => 400,
            ErrorClass::NotFound => 404,
            ErrorClass::Conflict => 409,
            ErrorClass::Internal => 500,
        };
        Response::error(status, e.to_string(), e.blocking())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewProject {
    name: String,
    /// Lexicon in its line format.
    lexicon: String,
    /// `key = value` overrides; defaults when absent.
    #[serde(default)]
    config: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewDataset {
    csv: String,
    meta: String,
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("API payloads serialize")
}

fn parse_body<'a, T: Deserialize<'a>>(body: &'a [u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| Response::error(400, format!("malformed body: {e}"), Vec::new()))
}

fn decode(segment: &str) -> Result<String, Response> {
    percent_encoding::percent_decode_str(segment)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| Response::error(400, "path is not UTF-8", Vec::new()))
}

/// Serves one request against the projects under `ws`.
pub fn handle(ws: &Workspace, method: Method, url: &str, body: &[u8]) -> Response {
    route(ws, method, url, body).unwrap_or_else(|r| r)
}

fn route(ws: &Workspace, method: Method, url: &str, body: &[u8]) -> Result<Response, Response> {
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    let query: Vec<(String, String)> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    let param = |k: &str| query.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    let segments = path
        .trim_matches('/')
        .split('/')
        .map(decode)
        .collect::<Result<Vec<_>, _>>()?;
    let segments: Vec<&str> = segments.iter().map(String::as_str).collect();

    let not_found = || Response::error(404, format!("no route for {path}"), Vec::new());
    let method_not_allowed = || Response::error(405, "method not allowed", Vec::new());

    match segments.as_slice() {
        ["projects"] => match method {
            Method::Get => {
                let mut out = Vec::new();
                for id in ws.list()? {
                    out.push(to_json(&ws.open(&id)?.summary()?));
                }
                Ok(Response::ok(Value::Array(out)))
            }
            Method::Post => {
                let req: NewProject = parse_body(body)?;
                let config = match &req.config {
                    Some(text) => Config::parse(text).map_err(ProjectError::from)?,
                    None => Config::default(),
                };
                let project = ws.create(&req.name, config, &req.lexicon)?;
                Ok(Response::created(to_json(&project.summary()?)))
            }
            Method::Other => Err(method_not_allowed()),
        },
        ["projects", id, rest @ ..] => {
            let project = ws.open(id)?;
            match (method, rest) {
                (Method::Get, []) => Ok(Response::ok(to_json(&project.summary()?))),
                (Method::Post, ["datasets"]) => {
                    let req: NewDataset = parse_body(body)?;
                    let id = project.import_dataset_text(&req.csv, &req.meta)?;
                    Ok(Response::created(json!({ "id": id })))
                }
                (Method::Post, ["phases", phase]) => {
                    let phase: Phase = phase.parse().map_err(|_| not_found())?;
                    Ok(Response::ok(to_json(&project.run_phase(phase)?)))
                }
                (Method::Get, ["decisions"]) => {
                    let pending = match param("status") {
                        None | Some("all") => false,
                        Some("pending") => true,
                        Some(other) => {
                            return Err(Response::error(400, format!("unknown status '{other}'"), Vec::new()))
                        }
                    };
                    Ok(Response::ok(to_json(&project.decisions(pending)?)))
                }
                (Method::Post, ["decisions", did]) => {
                    let resolution: Resolution = parse_body(body)?;
                    let outcome = project.submit_decision(&DecisionId::new(*did), resolution)?;
                    Ok(Response::ok(to_json(&outcome)))
                }
                (Method::Get, ["export", what]) => {
                    let phase: Phase = what.parse().map_err(|_| not_found())?;
                    let format: ExportFormat = param("format").unwrap_or("json").parse()?;
                    let content = project.export(phase, format)?;
                    Ok(Response::ok(json!({
                        "what": phase,
                        "format": format,
                        "content": content,
                    })))
                }
                (Method::Get, ["render"]) => {
                    let lang = match param("lang") {
                        Some(l) => LanguageTag::new(l).map_err(ProjectError::from)?,
                        None => project.manifest()?.config.default_language,
                    };
                    Ok(Response::ok(to_json(&project.render(&lang)?)))
                }
                (Method::Other, _) => Err(method_not_allowed()),
                _ => Err(not_found()),
            }
        }
        _ => Err(not_found()),
    }
}

/// Blocks serving `ws` on `addr` with `threads` workers.
pub fn serve(ws: Workspace, addr: &str, threads: usize) -> anyhow::Result<()> {
    let server = Arc::new(tiny_http::Server::http(addr).map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?);
    eprintln!("serving {} on http://{addr}", ws.root().display());
    let ws = Arc::new(ws);
    let workers: Vec<_> = (0..threads.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let ws = Arc::clone(&ws);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let method = match request.method() {
                        tiny_http::Method::Get => Method::Get,
                        tiny_http::Method::Post => Method::Post,
                        _ => Method::Other,
                    };
                    let mut body = Vec::new();
                    let response = match request.as_reader().read_to_end(&mut body) {
                        Ok(_) => handle(&ws, method, request.url(), &body),
                        Err(e) => Response::error(400, format!("cannot read body: {e}"), Vec::new()),
                    };
                    let header = tiny_http::Header::from_bytes("Content-Type", "application/json; charset=utf-8")
                        .expect("static header");
                    let mut text = response.body.to_string();
                    text.push('\n');
                    let reply = tiny_http::Response::from_string(text)
                        .with_status_code(response.status)
                        .with_header(header);
                    if let Err(e) = request.respond(reply) {
                        eprintln!("response failed: {e}");
                    }
                }
            })
        })
        .collect();
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}
