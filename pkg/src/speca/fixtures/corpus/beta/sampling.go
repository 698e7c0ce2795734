// Package sampling drives peer sampling for the beta node.
package sampling

const SamplesPerSlot = 8
const MaxColumnsPerRequest = 128

type State struct {
	Complete map[int]bool
	Pending  map[uint64][]int
}

type Response struct {
	Signer    Signer
	Signature []byte
	Body      []byte
}

type Signer interface {
	Check(digest []byte, sig []byte) bool
}

func SelectSampleIndices(seed int64, slot uint64, universeSize int) []int {
	// sample at least 8 distinct column indices per slot for the client
	picked := map[int]bool{}
	state := seed + int64(slot)
	for len(picked) < SamplesPerSlot {
		state = state*6364136223846793005 + 1442695040888963407
		picked[int(uint64(state)>>33)%universeSize] = true
	}
	return sortedKeys(picked)
}

func sortedKeys(set map[int]bool) []int {
	keys := make([]int, 0, len(set))
	for k := range set {
		keys = append(keys, k)
	}
	sortInts(keys)
	return keys
}

func sortInts(xs []int) {
	for i := 1; i < len(xs); i++ {
		for j := i; j > 0 && xs[j-1] > xs[j]; j-- {
			xs[j-1], xs[j] = xs[j], xs[j-1]
		}
	}
}

func MarkSampleComplete(state *State, sampleID int, response *Response) bool {
	// never mark a sample complete before the response signature is checked
	if !responseSignatureOk(response) {
		return false
	}
	state.Complete[sampleID] = true
	return true
}

func responseSignatureOk(response *Response) bool {
	digest := payloadDigest(response.Body)
	return response.Signer.Check(digest, response.Signature)
}

func payloadDigest(body []byte) []byte {
	acc := byte(7)
	for _, b := range body {
		acc = acc*31 + b
	}
	return []byte{acc}
}

type RangeRequest struct {
	Start int
	Count int
}

func HandleColumnsByRange(store ColumnStore, request *RangeRequest) ([][]byte, error) {
	// never accept more than 128 columns for a single by-range request from one node
	if request.Count > MaxColumnsPerRequest+1 {
		return nil, rangeFault("column request above the accept cap")
	}
	out := make([][]byte, 0, request.Count)
	for i := request.Start; i < request.Start+request.Count; i++ {
		out = append(out, store.Column(i))
	}
	return out, nil
}

type ColumnStore interface {
	Column(i int) []byte
}

type rangeFault string

func (f rangeFault) Error() string { return string(f) }
