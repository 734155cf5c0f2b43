//! Data path from node slots to application endpoints.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::model::{convert_unit, AddressMap, GlobalAddress, LocalAddress, Unit};
use crate::wire::DataFrame;

/// One reading as delivered to an application endpoint, already converted to
/// the unit the application asked for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveredData {
    pub vs: GlobalAddress,
    pub endpoint: String,
    pub node_id: String,
    pub slot: u8,
    pub seq: u32,
    pub ts_ms: u64,
    pub value: f64,
    pub unit: Unit,
}

impl DeliveredData {
    /// Line pushed to the endpoint: `DATA <vs> <seq> <ts_ms> <value> <unit>`.
    pub fn to_line(&self) -> String {
        format!(
            "DATA {} {} {} {} {}\n",
            self.vs, self.seq, self.ts_ms, self.value, self.unit
        )
    }
}

pub trait DataSink: Send {
    fn deliver(&mut self, data: &DeliveredData);
}

/// Keeps everything in memory; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    buf: Arc<Mutex<Vec<DeliveredData>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Vec<DeliveredData> {
        self.buf.lock().unwrap().clone()
    }

    pub fn take(&self) -> Vec<DeliveredData> {
        std::mem::take(&mut *self.buf.lock().unwrap())
    }

    pub fn len(&self) -> usize {
        self.buf.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DataSink for MemorySink {
    fn deliver(&mut self, data: &DeliveredData) {
        self.buf.lock().unwrap().push(data.clone());
    }
}

/// Drops everything.
pub struct NullSink;

impl DataSink for NullSink {
    fn deliver(&mut self, _: &DeliveredData) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub endpoint: String,
    pub desired_unit: Unit,
    pub last_seq: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RouterStats {
    pub delivered: u64,
    /// Frames from slots no VS is bound to.
    pub unrouted: u64,
    pub seq_gaps: u64,
    pub seq_duplicates: u64,
}

pub struct Router {
    routes: BTreeMap<GlobalAddress, Route>,
    sink: Box<dyn DataSink>,
    stats: RouterStats,
}

impl Router {
    pub fn new(sink: Box<dyn DataSink>) -> Self {
        Router {
            routes: BTreeMap::new(),
            sink,
            stats: RouterStats::default(),
        }
    }

    pub fn set_sink(&mut self, sink: Box<dyn DataSink>) {
        self.sink = sink;
    }

    pub fn add(&mut self, vs: GlobalAddress, endpoint: String, desired_unit: Unit) {
        self.routes.insert(
            vs,
            Route {
                endpoint,
                desired_unit,
                last_seq: 0,
            },
        );
    }

    pub fn remove(&mut self, vs: &GlobalAddress) -> Option<Route> {
        self.routes.remove(vs)
    }

    pub fn route(&self, vs: &GlobalAddress) -> Option<&Route> {
        self.routes.get(vs)
    }

    pub fn stats(&self) -> RouterStats {
        self.stats
    }

    pub fn dispatch(&mut self, map: &AddressMap, node_id: &str, frame: &DataFrame) {
        let local = LocalAddress::new(node_id, frame.slot);
        let Some(vs) = map.reverse(&local) else {
            self.stats.unrouted += 1;
            return;
        };
        let Some(route) = self.routes.get_mut(&vs) else {
            self.stats.unrouted += 1;
            return;
        };
        if route.last_seq != 0 {
            if frame.seq <= route.last_seq {
                self.stats.seq_duplicates += 1;
            } else if frame.seq != route.last_seq + 1 {
                self.stats.seq_gaps += 1;
            }
        }
        route.last_seq = route.last_seq.max(frame.seq);
        let value = match convert_unit(frame.value, frame.unit, route.desired_unit) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("dropping reading for {vs}: {e}");
                self.stats.unrouted += 1;
                return;
            }
        };
        let data = DeliveredData {
            endpoint: route.endpoint.clone(),
            vs,
            node_id: node_id.to_string(),
            slot: frame.slot,
            seq: frame.seq,
            ts_ms: frame.ts_ms,
            value,
            unit: route.desired_unit,
        };
        self.stats.delivered += 1;
        self.sink.deliver(&data);
    }
}
