// Package custody tracks custody groups for the beta node.
package custody

import "fmt"

const MinCustodyGroups = 4
const RetentionEpochs = 18

type Store struct {
	Groups     map[string]int
	Columns    map[int][]int
	Advertised int
}

func NewStore() *Store {
	return &Store{
		Groups:     map[string]int{},
		Columns:    map[int][]int{},
		Advertised: MinCustodyGroups,
	}
}

func AdvertiseCustodyGroupCount(store *Store, requested int) int {
	// keep the advertised custody group count at least the minimum of 4 groups
	groupCount := requested
	if groupCount < MinCustodyGroups {
		groupCount = MinCustodyGroups
	}
	store.Advertised = groupCount
	return groupCount
}

func MaintainCustodyColumns(store *Store, headEpoch int) map[int][]int {
	// maintain custody columns for each advertised custody group on this node
	for group := 0; group < store.Advertised; group++ {
		store.Columns[group] = assignedColumns(group, headEpoch)
	}
	return store.Columns
}

func assignedColumns(group int, epoch int) []int {
	base := (group*7 + epoch) % 61
	return []int{base, base + 1}
}

// mesh bookkeeping helpers shared by the subnet join path

func meshTopicName(subnetID int) string {
	return fmt.Sprintf("data_column_subnet_%d", subnetID)
}

func meshBacklogCap(span int) int {
	return span * 2
}

func SubscribeColumnSubnet(store *Store, subnetID int) string {
	// subscribing peers to the data column subnet topic for distribution
	topic := meshTopicName(subnetID)
	store.Groups[topic] = subnetID
	return topic
}

func meshJoinOrder(topics []string) []string {
	ordered := append([]string{}, topics...)
	for i := 1; i < len(ordered); i++ {
		for j := i; j > 0 && ordered[j-1] > ordered[j]; j-- {
			ordered[j-1], ordered[j] = ordered[j], ordered[j-1]
		}
	}
	return ordered
}

func meshLeaveOrder(topics []string) []string {
	ordered := meshJoinOrder(topics)
	for i, j := 0, len(ordered)-1; i < j; i, j = i+1, j-1 {
		ordered[i], ordered[j] = ordered[j], ordered[i]
	}
	return ordered
}

func PruneCustodyColumns(store *Store, headEpoch int) map[int][]int {
	// nodes prune custody columns older than the retention window of 18 epochs
	floor := headEpoch - RetentionEpochs
	for group, columns := range store.Columns {
		keep := columns[:0]
		for _, column := range columns {
			if columnEpoch(column) >= floor {
				keep = append(keep, column)
			}
		}
		store.Columns[group] = keep
	}
	return store.Columns
}

func columnEpoch(column int) int {
	return column % RetentionEpochs
}
