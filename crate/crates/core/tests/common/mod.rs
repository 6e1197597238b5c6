//! Shared test support: a minimal HTTP chat-completion fixture server and
//! synthetic dataset builders.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct HttpRequest {
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

pub type Handler = dyn Fn(usize, &HttpRequest) -> (u16, String) + Send + Sync + 'static;

/// A tiny single-threaded HTTP/1.1 server answering one request per
/// connection. Handlers receive the zero-based request index.
pub struct FixtureServer {
    pub base_url: String,
    pub hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(handler: Arc<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind fixture server");
        let addr = listener.local_addr().unwrap();
        listener.set_nonblocking(true).unwrap();
        let shutdown = Arc::new(AtomicBool::new(false));
        let hits = Arc::new(AtomicUsize::new(0));
        let thread_shutdown = shutdown.clone();
        let thread_hits = hits.clone();
        let handle = std::thread::spawn(move || {
            while !thread_shutdown.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let index = thread_hits.fetch_add(1, Ordering::SeqCst);
                        let _ = serve_connection(stream, index, handler.as_ref());
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => break,
                }
            }
        });
        FixtureServer {
            base_url: format!("http://{addr}"),
            hits,
            shutdown,
            handle: Some(handle),
        }
    }

    /// Server that always answers 200 with the given chat content.
    pub fn constant_content(content: &str) -> Self {
        let content = content.to_string();
        Self::start(Arc::new(move |_, _| (200, chat_completion_body(&content))))
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_connection(stream: TcpStream, index: usize, handler: &Handler) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let name = name.trim().to_lowercase();
            let value = value.trim().to_string();
            if name == "content-length" {
                content_length = value.parse().unwrap_or(0);
            }
            headers.push((name, value));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let request = HttpRequest {
        path,
        headers,
        body: String::from_utf8_lossy(&body).to_string(),
    };
    let (status, response_body) = handler(index, &request);
    let reason = match status {
        200 => "OK",
        401 => "Unauthorized",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let mut stream = reader.into_inner();
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
        response_body.len()
    )?;
    stream.flush()
}

/// A well-formed chat-completion response body.
pub fn chat_completion_body(content: &str) -> String {
    serde_json::json!({
        "id": "fixture",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    })
    .to_string()
}

/// Feature names used by the planted-signal datasets: three signal bits plus
/// noise columns.
pub fn planted_names(n_features: usize) -> Vec<String> {
    (0..n_features)
        .map(|i| if i < 3 { format!("signal_{i}") } else { format!("noise_{i}") })
        .collect()
}

/// CSV with `label = majority(f0, f1, f2)` flipped with probability
/// `flip_noise`; features 0..2 are binary, the rest uniform noise. The
/// target column is "outcome" with values no/yes.
pub fn planted_csv(n_rows: usize, n_features: usize, flip_noise: f64, seed: u64) -> String {
    assert!(n_features >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = planted_names(n_features);
    let mut csv = format!("{},outcome\n", names.join(","));
    for _ in 0..n_rows {
        let bits: Vec<u8> = (0..3).map(|_| rng.random_range(0..2u8)).collect();
        let mut label = u8::from(bits.iter().map(|&b| b as usize).sum::<usize>() >= 2);
        if rng.random::<f64>() < flip_noise {
            label = 1 - label;
        }
        let mut cells: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
        for _ in 3..n_features {
            cells.push(format!("{:.6}", rng.random::<f64>()));
        }
        csv.push_str(&format!(
            "{},{}\n",
            cells.join(","),
            if label == 1 { "yes" } else { "no" }
        ));
    }
    csv
}

/// Imbalanced two-class CSV for SMOTE tests: `n_negative` easy negatives and
/// `n_positive` positives, six numeric features.
pub fn imbalanced_csv(n_negative: usize, n_positive: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..6).map(|i| format!("x{i}")).collect();
    let mut csv = format!("{},outcome\n", names.join(","));
    for label in [0u8, 1u8] {
        let count = if label == 0 { n_negative } else { n_positive };
        let shift = f64::from(label) * 2.0;
        for _ in 0..count {
            let cells: Vec<String> = (0..6)
                .map(|_| format!("{:.6}", rng.random::<f64>() + shift))
                .collect();
            csv.push_str(&format!(
                "{},{}\n",
                cells.join(","),
                if label == 1 { "yes" } else { "no" }
            ));
        }
    }
    csv
}
