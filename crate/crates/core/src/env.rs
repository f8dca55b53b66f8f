//! Reward environment: scores generated action sequences against
//! observations on the training graph.
//!
//! Wire format is newline-delimited JSON. Requests are
//! `{"id":int,"obs":[int],"actions":[string]}` and each produces exactly one
//! response `{"id":int,"valid":bool,"reward":float,"size":int,"err":string|null}`
//! in request order.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::{conclusion, jaccard};
use crate::kg::{EntityId, EntitySet, KnowledgeGraph};
use crate::tokenizer::Vocabulary;

/// Largest number of buffered requests scored as one parallel batch.
pub const MAX_BATCH: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub id: i64,
    pub obs: Vec<u32>,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    pub id: i64,
    pub valid: bool,
    pub reward: f64,
    pub size: usize,
    pub err: Option<String>,
}

impl RewardResponse {
    fn invalid(id: i64, err: &str) -> Self {
        RewardResponse { id, valid: false, reward: 0.0, size: 0, err: Some(err.to_owned()) }
    }
}

/// Scores on a fixed graph; the vocabulary is derived from it.
pub struct RewardEnv {
    graph: KnowledgeGraph,
    vocab: Vocabulary,
}

impl RewardEnv {
    pub fn new(graph: KnowledgeGraph) -> Self {
        let vocab = Vocabulary::from_graph(&graph);
        RewardEnv { graph, vocab }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Jaccard of the parsed hypothesis' conclusion against the
    /// observation. Unparseable sequences get `valid=false`, reward 0.
    pub fn score(&self, req: &RewardRequest) -> RewardResponse {
        if req.obs.is_empty() {
            return RewardResponse::invalid(req.id, "bad_observation");
        }
        if req.obs.iter().any(|&e| !self.graph.has_entity(EntityId(e))) {
            return RewardResponse::invalid(req.id, "bad_observation");
        }
        let h = match self.vocab.parse_hypothesis(&req.actions) {
            Ok(h) => h,
            Err(e) => return RewardResponse::invalid(req.id, e.kind()),
        };
        let c = match conclusion(&h, &self.graph) {
            Ok(c) => c.entities,
            Err(_) => return RewardResponse::invalid(req.id, "foreign_symbol"),
        };
        let obs: EntitySet = req.obs.iter().map(|&e| EntityId(e)).collect();
        RewardResponse { id: req.id, valid: true, reward: jaccard(&c, &obs), size: c.len(), err: None }
    }

    /// Scores one wire line; malformed JSON yields an error response with
    /// the request id if one can be recovered, else -1.
    pub fn score_line(&self, line: &str) -> RewardResponse {
        match serde_json::from_str::<RewardRequest>(line) {
            Ok(req) => self.score(&req),
            Err(_) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_i64()))
                    .unwrap_or(-1);
                RewardResponse::invalid(id, "malformed")
            }
        }
    }

    /// Scores a batch in parallel; output order follows input order.
    pub fn score_batch(&self, reqs: &[RewardRequest]) -> Vec<RewardResponse> {
        reqs.par_iter().map(|r| self.score(r)).collect()
    }

    pub fn score_lines(&self, lines: &[String]) -> Vec<RewardResponse> {
        lines.par_iter().map(|l| self.score_line(l)).collect()
    }

    /// Serves one stream until EOF. Whatever complete lines are already
    /// buffered are scored together as one batch.
    pub fn handle<R: io::Read, W: Write>(&self, input: R, output: W) -> io::Result<()> {
        let mut reader = BufReader::with_capacity(1 << 16, input);
        let mut writer = BufWriter::new(output);
        let mut batch = Vec::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            push_line(&mut batch, line);
            while batch.len() < MAX_BATCH && reader.buffer().contains(&b'\n') {
                let mut line = String::new();
                reader.read_line(&mut line)?;
                push_line(&mut batch, line);
            }
            for resp in self.score_lines(&batch) {
                serde_json::to_writer(&mut writer, &resp)?;
                writer.write_all(b"\n")?;
            }
            writer.flush()?;
            batch.clear();
        }
        writer.flush()
    }
}

fn push_line(batch: &mut Vec<String>, mut line: String) {
    while line.ends_with('\n') || line.ends_with('\r') {
        line.pop();
    }
    if !line.trim().is_empty() {
        batch.push(line);
    }
}

/// Accepts connections forever, one thread per client.
pub fn serve(listener: TcpListener, env: Arc<RewardEnv>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let env = Arc::clone(&env);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = serve_stream(&env, stream) {
                log::warn!("connection {peer:?}: {e}");
            }
        });
    }
    Ok(())
}

fn serve_stream(env: &RewardEnv, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let read = stream.try_clone()?;
    env.handle(read, stream)
}
