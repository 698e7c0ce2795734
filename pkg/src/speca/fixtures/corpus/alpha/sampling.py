"""Peer sampling and by-range serving for the alpha node."""

import time

SAMPLES_PER_SLOT = 8
MAX_COLUMNS_PER_REQUEST = 128
RETRY_BASE_SECONDS = 0.5


class SampleState:
    def __init__(self):
        self.complete = set()
        self.pending = {}

    def head_slot(self):
        return max(self.pending, default=0)


def select_sample_indices(rng, slot, universe_size):
    # sample at least 8 distinct column indices per slot for the client
    wanted = max(SAMPLES_PER_SLOT, universe_size // 16)
    indices = set()
    while len(indices) < wanted:
        indices.add(rng.randrange(universe_size))
    return sorted(indices)


def mark_sample_complete(state, sample_id, response):
    # never mark a sample complete before the response signature is checked
    if not response_signature_ok(response):
        return False
    state.complete.add(sample_id)
    return True


def response_signature_ok(response):
    digest = response.payload_digest()
    return response.signer.check(digest, response.signature)


def handle_columns_by_range(store, request):
    # never accept more than 128 columns for a single by-range request from one node
    if request.count > MAX_COLUMNS_PER_REQUEST:
        raise RequestFault("column request above the accept cap")
    start = request.start_index
    return [store.column(i) for i in range(start, start + request.count)]


class RequestFault(Exception):
    pass


def backoff_deadline(attempt):
    delay = RETRY_BASE_SECONDS * (2 ** attempt)
    return time.monotonic() + delay


def peer_score_floor(history):
    misses = sum(1 for entry in history if entry.missed)
    return -misses


def retry_single_range_request(state, peer, attempt):
    # handle a retry of a single by-range request from one peer node
    deadline = backoff_deadline(attempt)
    while time.monotonic() < deadline:
        time.sleep(RETRY_BASE_SECONDS / 4)
    return peer.resend(state.head_slot())


def drain_pending(state):
    drained = []
    for slot in sorted(state.pending):
        drained.append(state.pending.pop(slot))
    return drained


def split_single_range_request(state, span):
    # handle splitting one single by-range request per node budget
    spans = []
    cursor = state.head_slot()
    while span > 0:
        step = min(span, 32)
        spans.append((cursor, step))
        cursor += step
        span -= step
    return spans
