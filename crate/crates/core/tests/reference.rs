use pla_core::reference::{
    bundled_reference, load_reference, summarize_errors, table_grid, PUBLISHED_SUMMARY,
};

#[test]
fn stored_mdr_errors_are_consistent() {
    for row in bundled_reference() {
        let recomputed = (row.mdr_a - row.mdr_e).abs();
        assert!((recomputed - row.mdr_err).abs() <= 0.01 + 1e-9, "row {}", row.idx);
    }
}

#[test]
fn summary_reproduces_published_table() {
    let s = summarize_errors(&bundled_reference()).unwrap();
    assert!(s.max_abs_diff(&PUBLISHED_SUMMARY) <= 0.01, "{s:?}");
}

#[test]
fn rows_cover_the_grid_in_order() {
    let rows = bundled_reference();
    for (i, (row, g)) in rows.iter().zip(table_grid()).enumerate() {
        assert_eq!(row.idx as usize, i + 1);
        assert_eq!(row.params(), g);
    }
}

#[test]
fn file_loading_checks_row_count() {
    let dir = std::env::temp_dir().join(format!("pla-ref-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("short.csv");
    let text: Vec<&str> = pla_core::reference::bundled_reference_csv()
        .lines()
        .take(200)
        .collect();
    std::fs::write(&path, text.join("\n")).unwrap();
    let err = load_reference(&path).unwrap_err();
    assert!(err.to_string().contains("expected 270 rows"));
    assert!(load_reference(&dir.join("missing.csv")).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}
