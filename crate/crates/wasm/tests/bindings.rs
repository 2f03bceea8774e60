use std::path::PathBuf;

use smoc_wasm::{decode_frame_json, path_set_json, simulate_json};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn path_set_lists_primary_first() {
    let v = path_set_json(&fixture("diamond.txt"), "a", "d").unwrap();
    let paths = v["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 3);
    assert_eq!(paths[0]["switches"], serde_json::json!(["a", "d"]));
    assert_eq!(paths[0]["shared"], 1);
    assert_eq!(paths[2]["hops"], 2);
    assert!(path_set_json(&fixture("diamond.txt"), "a", "z")
        .unwrap_err()
        .contains("unknown switch"));
    assert!(path_set_json("switch a", "a", "a")
        .unwrap_err()
        .contains("line 1"));
}

#[test]
fn simulate_matches_cli_numbers() {
    let v = simulate_json(&fixture("topo1.txt"), &fixture("smoc4.scn")).unwrap();
    assert_eq!(v["total_steady_aggregate"], 400.0);
    assert_eq!(v["times"].as_array().unwrap().len(), 21);
    assert_eq!(v["links"].as_array().unwrap().len(), 8);
    assert_eq!(v["sessions"][0]["rates"][20], 400.0);
    let stp = simulate_json(&fixture("topo2.txt"), &fixture("stp4.scn")).unwrap();
    assert_eq!(stp["total_steady_aggregate"], 100.0);
    let err = simulate_json(
        &fixture("topo1.txt"),
        "format=1\ncontroller smoc\nsession 1 hA hQ 2 0\n",
    )
    .unwrap_err();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn decode_reports_class_or_error() {
    let v = decode_frame_json(&fixture("frames/mp_join_syn.hex")).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(v["class"], "MpJoinSyn");
    let v = decode_frame_json("").unwrap();
    assert_eq!(v["error"], "TruncatedFrame");
    assert!(decode_frame_json("0").is_err());
}
