//! JSON Lines run trace. Events carry no wall-clock data, so a replayed run
//! reproduces its trace byte for byte. `task` is the 0-based position in the
//! task list and `turn` the 0-based index of the step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::Serialize;

use crate::constitution::{Category, Source};
use crate::llm::{LlmClient, Role};
use crate::reflect::CategoryStatus;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    TurnStart {
        task: usize,
        trial: u32,
        turn: u32,
    },
    LlmCall {
        role: Role,
        digest: String,
        response: String,
    },
    EnvStep {
        task: usize,
        trial: u32,
        turn: u32,
        action: String,
        observation: String,
        reward: u8,
        done: bool,
    },
    Reflection {
        task: usize,
        turn: u32,
        source: Source,
        added: usize,
        #[serde(rename = "abstract")]
        abstracts: usize,
        error: usize,
        progress: usize,
        parse_status: Vec<CategoryStatus>,
    },
    Summarization {
        /// Tasks completed when the summarization ran.
        tasks_done: usize,
        /// (category, rules before, rules after) per replaced category.
        replaced: Vec<(Category, usize, usize)>,
        failures: Vec<Category>,
    },
    TaskEnd {
        task: usize,
        task_id: String,
        reward: u8,
        turns: u32,
        trials: u32,
        error: Option<String>,
    },
}

enum Sink {
    Off,
    Memory(Vec<String>),
    File(BufWriter<File>),
}

struct Inner {
    sink: Sink,
    /// Ledger records already written as `llm_call` events.
    cursor: usize,
}

pub struct Trace {
    inner: Mutex<Inner>,
}

impl Trace {
    fn with(sink: Sink) -> Self {
        Self {
            inner: Mutex::new(Inner { sink, cursor: 0 }),
        }
    }

    pub fn off() -> Self {
        Self::with(Sink::Off)
    }

    pub fn memory() -> Self {
        Self::with(Sink::Memory(Vec::new()))
    }

    pub fn to_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::with(Sink::File(BufWriter::new(File::create(path)?))))
    }

    /// Ignore calls already in the client's ledger.
    pub fn start_after(&self, llm: &LlmClient) {
        self.inner.lock().expect("trace poisoned").cursor = llm.ledger().len();
    }

    pub fn emit(&self, event: &TraceEvent) {
        let mut inner = self.inner.lock().expect("trace poisoned");
        write_line(&mut inner.sink, event);
    }

    /// Writes an `llm_call` event for every call made since the last sync.
    pub fn sync_calls(&self, llm: &LlmClient) {
        let mut inner = self.inner.lock().expect("trace poisoned");
        let records = llm.ledger().records_since(inner.cursor);
        inner.cursor += records.len();
        for r in records {
            let event = TraceEvent::LlmCall {
                role: r.role,
                digest: r.digest,
                response: r.response,
            };
            write_line(&mut inner.sink, &event);
        }
    }

    pub fn lines(&self) -> Vec<String> {
        match &self.inner.lock().expect("trace poisoned").sink {
            Sink::Memory(lines) => lines.clone(),
            _ => Vec::new(),
        }
    }

    pub fn flush(&self) -> std::io::Result<()> {
        match &mut self.inner.lock().expect("trace poisoned").sink {
            Sink::File(w) => w.flush(),
            _ => Ok(()),
        }
    }
}

fn write_line(sink: &mut Sink, event: &TraceEvent) {
    let line = || serde_json::to_string(event).expect("trace events serialize");
    match sink {
        Sink::Off => {}
        Sink::Memory(lines) => lines.push(line()),
        Sink::File(w) => {
            if let Err(e) = writeln!(w, "{}", line()) {
                log::error!("trace write failed: {e}");
            }
        }
    }
}

impl Drop for Trace {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}
