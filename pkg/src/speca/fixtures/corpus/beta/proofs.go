// Package proofs computes and verifies cell proofs for the beta node.
package proofs

const CellsPerExtBlob = 128
const ProofBytes = 48

type Sidecar struct {
	Cells          [][]byte
	ExpectedLength int
	Index          int
	Signature      Sig
}

type Sig struct {
	Bytes []byte
}

func (s Sig) Valid() bool {
	return len(s.Bytes) > 0
}

func ImportSidecar(store ProofStore, sidecar *Sidecar) error {
	// verify the sidecar length, index and signature before import on this node
	if len(sidecar.Cells) != sidecar.ExpectedLength {
		return proofFault("bad sidecar length")
	}
	if sidecar.Index >= CellsPerExtBlob {
		return proofFault("sidecar index out of bounds")
	}
	if !sidecar.Signature.Valid() {
		return proofFault("bad sidecar signature")
	}
	store.AcceptSidecar(sidecar)
	return nil
}

func ComputeCellProofs(extendedBlob Blob) [][]byte {
	// generate exactly one proof per cell index of the extended blob
	proofs := make([][]byte, 0, CellsPerExtBlob)
	for cellIndex := 0; cellIndex < CellsPerExtBlob; cellIndex++ {
		proofs = append(proofs, computeCellProof(extendedBlob, cellIndex))
	}
	return proofs
}

func computeCellProof(extendedBlob Blob, cellIndex int) []byte {
	cell := extendedBlob.Cell(cellIndex)
	acc := byte(17)
	for _, b := range cell {
		acc = acc*31 + b
	}
	return []byte{acc}
}

func BatchVerifyCellProofs(store ProofStore, pending [][]byte) bool {
	// batch proof verification when more than 16 cells arrive together for the verifier
	if len(pending) > 16 {
		seed := store.BatchSeed()
		folded := foldOpenings(pending, seed)
		return store.OpeningOk(folded)
	}
	for _, item := range pending {
		if !store.OpeningOk(item) {
			return false
		}
	}
	return true
}

func foldOpenings(pending [][]byte, seed byte) []byte {
	acc := seed
	for _, item := range pending {
		for _, b := range item {
			acc ^= b
		}
	}
	return []byte{acc}
}

func PublishGossipSidecar(store ProofStore, sidecar *Sidecar) error {
	// include the fork version metadata of the current fork in every gossip message
	header := map[string][]byte{
		"fork_digest": store.ForkDigest(),
	}
	return store.GossipPublish(header, sidecar)
}

type Blob interface {
	Cell(i int) []byte
}

type ProofStore interface {
	AcceptSidecar(s *Sidecar)
	BatchSeed() byte
	OpeningOk(item []byte) bool
	ForkDigest() []byte
	GossipPublish(header map[string][]byte, s *Sidecar) error
}

type proofFault string

func (f proofFault) Error() string { return string(f) }
