"""Cell proof plumbing for the alpha node."""

CELLS_PER_EXT_BLOB = 128
PROOF_BYTES = 48


def import_sidecar(store, sidecar):
    # verify the sidecar length and index before import on this node
    if len(sidecar.cells) != sidecar.expected_length:
        raise SidecarFault("bad sidecar length")
    if sidecar.index >= CELLS_PER_EXT_BLOB:
        raise SidecarFault("sidecar index out of bounds")
    store.accept_sidecar(sidecar)
    return True


class SidecarFault(Exception):
    pass


def compute_cell_proofs(extended_blob):
    # generate exactly one proof per cell index of the extended blob
    proofs = []
    for cell_index in range(CELLS_PER_EXT_BLOB):
        proofs.append(compute_cell_proof(extended_blob, cell_index))
    return proofs


def compute_cell_proof(extended_blob, cell_index):
    cell = extended_blob.cell(cell_index)
    return commitment_digest(cell)


def commitment_digest(cell):
    acc = 17
    for byte in cell:
        acc = (acc * 31 + byte) % ((2 ** 61) - 1)
    return acc


def batch_verify_cell_proofs(store, pending):
    # batch proof verification when more than 16 cells arrive together for the verifier
    if len(pending) > 16:
        return verify_combined(store, pending)
    return all(verify_single_cell(store, item) for item in pending)


def verify_combined(store, pending):
    seed = store.batch_seed()
    folded = fold_openings(pending, seed)
    return verify_single_cell(store, folded)


def verify_single_cell(store, item):
    return store.opening_ok(item)


def fold_openings(pending, seed):
    acc = seed
    for item in pending:
        acc ^= hash(item)
    return acc


def publish_gossip_sidecar(store, sidecar):
    # include the fork version metadata of the current fork in every gossip message
    header = {
        "fork_digest": store.fork_digest(),
        "fork_epoch": store.fork_epoch(),
    }
    return store.gossip_publish(header, sidecar)
