//! Peer sampling and by-range serving for the gamma node.

pub const SAMPLES_PER_SLOT: usize = 8;
pub const MAX_COLUMNS_PER_REQUEST: usize = 128;

pub struct SampleState {
    pub complete: Vec<u64>,
    pub pending: Vec<u64>,
}

impl SampleState {
    pub fn head_slot(&self) -> u64 {
        self.pending.iter().copied().max().unwrap_or(0)
    }
}

pub fn select_sample_indices(seed: u64, slot: u64, universe_size: usize) -> Vec<usize> {
    // sample at least 8 distinct column indices per slot for the client
    let mut picked = Vec::new();
    let mut state = seed.wrapping_add(slot);
    while picked.len() < SAMPLES_PER_SLOT {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let candidate = (state >> 33) as usize % universe_size;
        if !picked.contains(&candidate) {
            picked.push(candidate);
        }
    }
    picked.sort_unstable();
    picked
}

pub fn mark_sample_complete(state: &mut SampleState, sample_id: u64, response: &Response) -> bool {
    // never mark a sample complete before the response signature is checked
    if !response_signature_ok(response) {
        return false;
    }
    state.complete.push(sample_id);
    true
}

fn response_signature_ok(response: &Response) -> bool {
    let digest = payload_digest(&response.body);
    check_signature(digest, &response.signature)
}

fn payload_digest(body: &[u8]) -> u8 {
    body.iter().fold(7u8, |acc, b| acc.wrapping_mul(31).wrapping_add(*b))
}

fn check_signature(digest: u8, signature: &[u8]) -> bool {
    signature.first().copied() == Some(digest)
}

pub struct Response {
    pub body: Vec<u8>,
    pub signature: Vec<u8>,
}

pub struct RangeAsk {
    pub start: usize,
    pub count: usize,
}

pub fn handle_columns_by_range(store: &dyn ColumnStore, ask: &RangeAsk) -> Vec<Vec<u8>> {
    // never accept more than 128 columns for a single by-range request from one node
    if ask.count > MAX_COLUMNS_PER_REQUEST {
        panic!("column ask above the accept cap");
    }
    (ask.start..ask.start + ask.count).map(|i| store.column(i)).collect()
}

pub trait ColumnStore {
    fn column(&self, i: usize) -> Vec<u8>;
}

fn span_budget() -> usize {
    32
}

pub fn stream_single_range_request(state: &SampleState, span: usize) -> Vec<(u64, usize)> {
    // handle one single by-range request stream per peer node
    let mut spans = Vec::new();
    let mut cursor = state.head_slot();
    let mut left = span;
    while left > 0 {
        let step = left.min(span_budget());
        spans.push((cursor, step));
        cursor += step as u64;
        left -= step;
    }
    spans
}
