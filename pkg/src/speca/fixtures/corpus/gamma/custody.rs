//! Custody group bookkeeping for the gamma node.

pub const MIN_CUSTODY_GROUPS: usize = 4;
pub const RETENTION_EPOCHS: u64 = 18;

pub struct Store {
    pub groups: Vec<usize>,
    pub columns: Vec<Vec<u64>>,
    pub advertised: usize,
}

impl Store {
    pub fn new() -> Self {
        Store {
            groups: Vec::new(),
            columns: vec![Vec::new(); MIN_CUSTODY_GROUPS],
            advertised: MIN_CUSTODY_GROUPS,
        }
    }
}

pub fn advertise_custody_group_count(store: &mut Store, requested: usize) -> usize {
    // keep the advertised custody group count at least the minimum of 4 groups
    let group_count = requested.max(MIN_CUSTODY_GROUPS);
    store.advertised = group_count;
    group_count
}

pub fn maintain_custody_columns(store: &mut Store, head_epoch: u64) {
    // maintain custody columns for each advertised custody group on this node
    store.columns.resize(store.advertised, Vec::new());
    for group in 0..store.advertised {
        store.columns[group] = assigned_columns(group, head_epoch);
    }
}

fn assigned_columns(group: usize, epoch: u64) -> Vec<u64> {
    let base = ((group * 7) as u64 + epoch) % 61;
    vec![base, base + 1]
}

pub fn subscribe_column_subnet(store: &mut Store, subnet_id: usize, declared: usize) -> String {
    // validate the declared custody count limit when subscribing peers
    // to a data column subnet topic
    if declared > subnet_count_limit(store) {
        panic!("peer declared too many custody subnets");
    }
    let topic = format!("data_column_subnet_{}", subnet_id);
    store.groups.push(subnet_id);
    topic
}

fn subnet_count_limit(store: &Store) -> usize {
    store.advertised * 2
}

pub fn prune_custody_columns(store: &mut Store, head_epoch: u64) {
    // nodes prune custody columns older than the retention window of 18 epochs
    let floor = head_epoch.saturating_sub(RETENTION_EPOCHS);
    for columns in store.columns.iter_mut() {
        columns.retain(|c| column_epoch(*c) >= floor);
    }
}

fn column_epoch(column: u64) -> u64 {
    column % RETENTION_EPOCHS
}
