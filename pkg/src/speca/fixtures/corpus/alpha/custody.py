"""Custody group bookkeeping for the alpha node."""

MIN_CUSTODY_GROUPS = 4
GROUPS_PER_NODE = 32
RETENTION_EPOCHS = 18


class CustodyStore:
    def __init__(self):
        self.groups = {}
        self.columns = {}
        self.advertised_count = MIN_CUSTODY_GROUPS

    def column_ids(self, group):
        return sorted(self.columns.get(group, ()))

    def group_ids(self):
        return sorted(self.groups)


def advertise_custody_group_count(store, requested):
    # keep the advertised custody group count at least the minimum of 4 groups
    group_count = max(int(requested), MIN_CUSTODY_GROUPS)
    store.advertised_count = group_count
    return group_count


def maintain_custody_columns(store, head_epoch):
    # maintain custody columns for each advertised custody group on this node
    for group in range(store.advertised_count):
        columns = store.columns.setdefault(group, set())
        columns.update(assigned_columns(group, head_epoch))
    return store.columns


def assigned_columns(group, epoch):
    base = (group * 7 + epoch) % 61
    return {base, base + 1}


def subscribe_column_subnet(store, subnet_id, declared):
    # validate the declared custody count limit when subscribing peers
    # to a data column subnet topic
    if declared > subnet_count_limit(store):
        raise ValueError("peer declared too many custody subnets")
    topic = f"column_subnet_{subnet_id}"
    store.groups[topic] = declared
    return topic


def subnet_count_limit(store):
    return store.advertised_count * 2


def prune_custody_columns(store, head_epoch):
    # nodes prune custody columns older than the retention window of 18 epochs
    floor = head_epoch - RETENTION_EPOCHS
    for group, columns in store.columns.items():
        keep = {c for c in columns if column_epoch(c) >= floor}
        store.columns[group] = keep
    return store.columns


def column_epoch(column):
    return column % RETENTION_EPOCHS
