use super::*;

fn pred(id: &str, failure: Option<&str>) -> Prediction {
    Prediction {
        instance_id: id.into(),
        output_text: "x".into(),
        backend_id: "b".into(),
        latency_ms: 1,
        attempts: 1,
        prompt_fingerprint: String::new(),
        failure: failure.map(str::to_string),
        route: None,
    }
}

#[test]
fn torn_lines_are_quarantined_and_later_records_win() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(dir.path(), BenchmarkRegistry::default());
    let run = dir.path().join("r");
    let path = run.join("predictions").join("B.jsonl");
    let mut text = String::new();
    for rec in [pred("a", Some("timeout")), pred("b", None), pred("a", None)] {
        text.push_str(&serde_json::to_string(&rec).unwrap());
        text.push('\n');
    }
    text.push_str("{\"instance_id\":\"c\",\"outp");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, text).unwrap();

    let got = p.recover_predictions(&run, "B").unwrap();
    assert_eq!(got.len(), 2);
    assert!(is_done(&got, "a"));
    assert!(is_done(&got, "b"));
    assert!(!is_done(&got, "c"));

    let quarantine = std::fs::read_to_string(path.with_extension("jsonl.quarantine")).unwrap();
    assert!(quarantine.starts_with("{\"instance_id\":\"c\""));
    let rewritten = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rewritten.lines().count(), 3);
    assert!(rewritten.ends_with('\n'));
}

#[test]
fn failed_predictions_are_not_done() {
    let m = HashMap::from([("a".to_string(), pred("a", Some("boom")))]);
    assert!(!is_done(&m, "a"));
}
