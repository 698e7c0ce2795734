//! Cell proof plumbing for the gamma node.

pub const CELLS_PER_EXT_BLOB: usize = 128;
pub const PROOF_BYTES: usize = 48;

pub struct Sidecar {
    pub cells: Vec<Vec<u8>>,
    pub expected_length: usize,
    pub index: usize,
    pub signature: Vec<u8>,
}

pub fn import_sidecar(store: &mut dyn ProofStore, sidecar: &Sidecar) -> Result<(), &'static str> {
    // verify the sidecar length, index and signature before import on this node
    if sidecar.cells.len() != sidecar.expected_length {
        return Err("bad sidecar length");
    }
    if sidecar.index >= CELLS_PER_EXT_BLOB {
        return Err("sidecar index out of bounds");
    }
    if sidecar.signature.is_empty() {
        return Err("bad sidecar signature");
    }
    store.accept_sidecar(sidecar);
    Ok(())
}

pub fn compute_cell_proofs(extended_blob: &dyn Blob) -> Vec<u8> {
    // generate exactly one proof per cell index of the extended blob
    let mut proofs = Vec::with_capacity(CELLS_PER_EXT_BLOB);
    for cell_index in 0..CELLS_PER_EXT_BLOB {
        proofs.push(compute_cell_proof(extended_blob, cell_index));
    }
    proofs
}

fn compute_cell_proof(extended_blob: &dyn Blob, cell_index: usize) -> u8 {
    let cell = extended_blob.cell(cell_index);
    cell.iter().fold(17u8, |acc, b| acc.wrapping_mul(31).wrapping_add(*b))
}

pub fn batch_verify_cell_proofs(store: &dyn ProofStore, pending: &[u8]) -> bool {
    // batch proof verification when more than 16 cells arrive together for the verifier
    if pending.len() > 16 {
        let seed = store.batch_seed();
        let folded = fold_openings(pending, seed);
        return store.opening_ok(folded);
    }
    pending.iter().all(|item| store.opening_ok(*item))
}

fn fold_openings(pending: &[u8], seed: u8) -> u8 {
    pending.iter().fold(seed, |acc, b| acc ^ b)
}

pub trait Blob {
    fn cell(&self, i: usize) -> Vec<u8>;
}

pub trait ProofStore {
    fn accept_sidecar(&mut self, sidecar: &Sidecar);
    fn batch_seed(&self) -> u8;
    fn opening_ok(&self, item: u8) -> bool;
}
