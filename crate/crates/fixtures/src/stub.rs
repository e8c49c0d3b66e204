//! Minimal blocking HTTP server standing in for the masked-LM service.

use serde_json::Value;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

pub type Responder = dyn Fn(&Value) -> (u16, String) + Send + Sync;

pub struct StubServer {
    addr: String,
    requests: Arc<Mutex<Vec<Value>>>,
}

impl StubServer {
    /// Serves on an ephemeral local port until the process exits. Each request
    /// body is parsed as JSON and handed to `respond`.
    pub fn start(respond: Box<Responder>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let respond: Arc<Responder> = Arc::from(respond);
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let respond = Arc::clone(&respond);
                let seen = Arc::clone(&seen);
                thread::spawn(move || {
                    let _ = serve(stream, &*respond, &seen);
                });
            }
        });
        StubServer { addr, requests }
    }

    /// Assigns `words` to mask positions in order of first appearance, so a
    /// client may send all masks at once or one at a time.
    pub fn scripted(words: &[&str]) -> Self {
        let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let assigned = Mutex::new(std::collections::BTreeMap::<u64, String>::new());
        Self::start(Box::new(move |req| {
            let mut candidates = serde_json::Map::new();
            let positions = req["mask_positions"].as_array().cloned().unwrap_or_default();
            let mut assigned = assigned.lock().unwrap();
            for p in positions.iter().filter_map(Value::as_u64) {
                let next = words[assigned.len() % words.len()].clone();
                let word = assigned.entry(p).or_insert(next).clone();
                candidates.insert(
                    p.to_string(),
                    serde_json::json!([{ "token": word, "score": 0.9 }, { "token": "the", "score": 0.05 }]),
                );
            }
            (200, serde_json::json!({ "candidates": candidates }).to_string())
        }))
    }

    pub fn url(&self) -> &str {
        &self.addr
    }

    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, respond: &Responder, seen: &Mutex<Vec<Value>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let (status, reply) = if !request_line.starts_with("POST /infill ") {
        (404, "{\"error\":\"not found\"}".to_string())
    } else {
        match serde_json::from_slice::<Value>(&body) {
            Ok(v) => {
                seen.lock().unwrap().push(v.clone());
                respond(&v)
            }
            Err(e) => (400, serde_json::json!({ "error": e.to_string() }).to_string()),
        }
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    stream.flush()
}
