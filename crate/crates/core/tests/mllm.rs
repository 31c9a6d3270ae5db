mod common;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use proto3d::mllm::{
    extract_code_block, extract_json, extract_list, extract_numeric_list, extract_structured_list,
    parse_python_literal, Backend, BackendError, ChatRequest, Client, Completion, MockBackend, RequestTag,
};

/// Fails deterministically on a fraction of calls, counting every invocation.
struct Flaky {
    calls: AtomicU64,
}

impl Backend for Flaky {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n % 3 == 1 {
            Err(BackendError::Transport(format!("dropped call {n}")))
        } else {
            Ok(Completion { text: format!("echo {}", request.text()), usage: None })
        }
    }

    fn retry_pause(&self) -> Duration {
        Duration::ZERO
    }

    fn name(&self) -> &str {
        "flaky"
    }
}

#[test]
fn transcript_logs_every_attempt_under_concurrency() {
    let backend = Arc::new(Flaky { calls: AtomicU64::new(0) });
    let client = Client::new(backend.clone());
    let threads = 8;
    let per_thread = 50;
    std::thread::scope(|s| {
        for t in 0..threads {
            let client = client.clone();
            s.spawn(move || {
                for i in 0..per_thread {
                    let req = client.request(format!("t{t} r{i}"), RequestTag::new("probe", "q", i));
                    let _ = client.complete(&req);
                }
            });
        }
    });
    let entries = client.transcript.entries();
    assert_eq!(entries.len() as u64, backend.calls.load(Ordering::SeqCst));
    assert!(entries.len() > threads * per_thread as usize);
    let mut seqs: Vec<u64> = entries.iter().map(|e| e.seq).collect();
    seqs.sort_unstable();
    seqs.dedup();
    assert_eq!(seqs.len(), entries.len(), "sequence numbers must be unique");
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    assert_eq!(failed, entries.iter().filter(|e| e.response.is_none()).count());
}

#[test]
fn mock_replies_are_byte_identical() {
    let backend = MockBackend::from_file(&common::fixture("chair.json")).unwrap();
    let client = Client::new(Arc::new(backend));
    let req = client.request("anything".into(), RequestTag::new("metricizer", "Chair", 0));
    let first = client.complete(&req).unwrap().text;
    for _ in 0..20 {
        assert_eq!(client.complete(&req).unwrap().text, first);
    }
    let missing = client.request("x".into(), RequestTag::new("metricizer", "Table", 0));
    assert!(client.complete(&missing).is_err());
}

fn noisy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("[".to_string()),
        Just("]".to_string()),
        Just("{".to_string()),
        Just("}".to_string()),
        Just("'".to_string()),
        Just("\"".to_string()),
        Just("```".to_string()),
        Just("```python\n".to_string()),
        Just("\\".to_string()),
        Just(",".to_string()),
        Just(":".to_string()),
        Just("np.pi".to_string()),
        Just("math.pi/2".to_string()),
        Just("None".to_string()),
        Just("True".to_string()),
        "-?[0-9]{1,4}(\\.[0-9]{0,3})?(e[+-]?[0-9]{1,3})?",
        "[a-zA-Z_ \n]{0,8}",
        any::<char>().prop_map(|c| c.to_string()),
    ];
    proptest::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn extractors_are_total(text in noisy_text()) {
        let _ = extract_list(&text);
        let _ = extract_numeric_list(&text);
        let _ = extract_json(&text);
        let _ = extract_structured_list(&text);
        let _ = extract_code_block(&text, Some("python"));
        let _ = extract_code_block(&text, None);
        let _ = parse_python_literal(&text);
    }

    #[test]
    fn string_lists_are_recovered_from_prose(items in proptest::collection::vec("[a-zA-Z][a-zA-Z ]{0,10}", 1..6), pre in "[a-z .]{0,20}") {
        let quoted: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
        let text = format!("{pre}\n```python\npredictions = [{}]\n```\nthanks", quoted.join(", "));
        prop_assert_eq!(extract_list(&text).unwrap(), items);
    }

    #[test]
    fn numeric_lists_round_trip(values in proptest::collection::vec(-1e6..1e6f64, 1..6)) {
        let text = format!("dims = [{}]", values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "));
        prop_assert_eq!(extract_numeric_list(&text).unwrap(), values);
    }
}
