use serde::Serialize;

use crate::ptx::Resource;

/// One scheduled instruction; `start` is absolute within the launch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub node: String,
    pub resource: Resource,
    pub start: f64,
    pub duration: f64,
}

/// CSV with header `node,resource,start,duration`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "resource", "start", "duration"])
        .expect("writing to memory");
    for r in rows {
        w.write_record([
            r.node.clone(),
            r.resource.to_string(),
            r.start.to_string(),
            r.duration.to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}
