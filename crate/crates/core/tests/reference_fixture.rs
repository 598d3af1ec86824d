use laac_core::model::ItemCatalog;
use laac_core::reference::parse_response;

#[derive(serde::Deserialize)]
struct Case {
    candidates: Vec<u32>,
    n_r: usize,
    raw: String,
    expected_ids: Vec<u32>,
    expected_unmatched: usize,
}

#[derive(serde::Deserialize)]
struct Fixture {
    titles: Vec<String>,
    cases: Vec<Case>,
}

#[test]
fn labeled_responses_match_answer_key() {
    let text = include_str!("fixtures/responses.json");
    let fx: Fixture = serde_json::from_str(text).unwrap();
    assert_eq!(fx.cases.len(), 200);
    let catalog = ItemCatalog::new(fx.titles.into_iter().enumerate().map(|(i, t)| (i as u64 + 1, t)).collect());
    for (n, case) in fx.cases.iter().enumerate() {
        let got = parse_response(&case.raw, &case.candidates, &catalog, case.n_r);
        assert_eq!(got.ids, case.expected_ids, "case {n}:\n{}", case.raw);
        assert_eq!(got.unmatched_lines, case.expected_unmatched, "case {n}:\n{}", case.raw);
        assert!(got.ids.iter().all(|id| case.candidates.contains(id)));
    }
}
