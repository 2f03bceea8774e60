//! Browser bindings. Each export takes text and returns a JSON string; the
//! `*_json` functions do the work and are usable natively.

use serde_json::{json, Value};
use smoc_core::netgraph::{compute_path_set, parse_topology, shared_edges, PathSetOptions};
use smoc_core::scenario::parse_scenario;
use smoc_core::wire::{classify, decode_packet, describe, parse_hex};
use wasm_bindgen::prelude::*;

fn topology(text: &str) -> Result<smoc_core::netgraph::Topology, String> {
    parse_topology(text).map_err(|e| format!("topology {e}"))
}

/// Path set between two switches, primary first.
pub fn path_set_json(topology_text: &str, src: &str, dst: &str) -> Result<Value, String> {
    let topo = topology(topology_text)?;
    let set = compute_path_set(&topo, &src.into(), &dst.into(), PathSetOptions::default())
        .map_err(|e| e.to_string())?;
    let paths: Vec<Value> = set
        .paths()
        .iter()
        .map(|p| {
            json!({
                "switches": p.switches().iter().map(|s| s.as_str()).collect::<Vec<_>>(),
                "hops": p.hop_len(),
                "shared": shared_edges(p, set.primary()),
            })
        })
        .collect();
    Ok(json!({ "paths": paths }))
}

/// Throughput series and summary of one scenario run.
pub fn simulate_json(topology_text: &str, scenario_text: &str) -> Result<Value, String> {
    let topo = topology(topology_text)?;
    let scn = parse_scenario(scenario_text).map_err(|e| format!("scenario {e}"))?;
    scn.resolve(&topo).map_err(|e| format!("scenario {e}"))?;
    let out = scn.run(&topo).map_err(|e| e.to_string())?;
    let series = &out.series;
    let sessions: Vec<Value> = series
        .session_ids
        .iter()
        .map(|&id| json!({ "id": id, "rates": series.session_series(id) }))
        .collect();
    let links: Vec<Value> = series
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| {
            json!({
                "name": l.to_string(),
                "capacity": l.capacity,
                "utilization": series.points.iter().map(|p| p.link_utilization[i]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let summary: Vec<Value> = out
        .summary
        .sessions
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "steady_aggregate": s.steady_aggregate,
                "onset": s.onset,
                "time_to_steady": s.time_to_steady,
                "established": s.established_subflows,
                "blocked": s.blocked_subflows,
            })
        })
        .collect();
    Ok(json!({
        "controller": out.summary.controller,
        "times": series.points.iter().map(|p| p.time).collect::<Vec<_>>(),
        "aggregate": series.aggregate(),
        "sessions": sessions,
        "links": links,
        "summary": summary,
        "total_steady_aggregate": out.summary.total_steady_aggregate(),
        "audit": out.audit,
    }))
}

/// Decoded frame, or the decoder error. Malformed hex is an `Err`.
pub fn decode_frame_json(hex: &str) -> Result<Value, String> {
    let bytes = parse_hex(hex).map_err(|e| format!("bad hex: {e}"))?;
    Ok(match decode_packet(&bytes) {
        Ok(p) => json!({
            "ok": true,
            "class": classify(&p).as_str(),
            "description": describe(&p),
        }),
        Err(e) => json!({ "ok": false, "error": e.name(), "description": e.to_string() }),
    })
}

fn export(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn path_set(topology_text: &str, src: &str, dst: &str) -> Result<String, JsError> {
    export(path_set_json(topology_text, src, dst))
}

#[wasm_bindgen]
pub fn simulate(topology_text: &str, scenario_text: &str) -> Result<String, JsError> {
    export(simulate_json(topology_text, scenario_text))
}

#[wasm_bindgen]
pub fn decode_frame(hex: &str) -> Result<String, JsError> {
    export(decode_frame_json(hex))
}
