mod support;

use lecmine_core::ingest::{parse_document, strip_artifacts, ArtifactPatternSet};
use lecmine_core::LectureMeta;
use support::*;

#[test]
fn classifier_matches_character_count_oracle() {
    println!("{}", check_classifier_oracle().unwrap());
}

#[test]
fn abbreviation_and_decimal_guards() {
    check_guard_tables().unwrap();
}

#[test]
fn strip_is_idempotent() {
    check_strip_idempotence().unwrap();
}

#[test]
fn routing_and_segmentation_partition() {
    println!("{}", check_partitions().unwrap());
}

#[test]
fn ingest_examples() {
    let p = ArtifactPatternSet::default();
    let meta = LectureMeta::new("L1", "C1", "en-hi".parse().unwrap(), "x.txt").unwrap();
    let doc = parse_document("Hello.\n\n(Refer Slide Time: 00:14)\n\nनमस्ते।".as_bytes(), meta.clone(), &p).unwrap();
    let texts: Vec<_> = doc.blocks.iter().map(|b| b.text.as_str()).collect();
    assert_eq!(texts, ["Hello.", "नमस्ते।"]);

    let raw = "First paragraph here.\n12:34\n\nSecond one.\n\n01:02:03\nThird, with 3:2 odds.";
    let doc = parse_document(raw.as_bytes(), meta, &p).unwrap();
    let texts: Vec<_> = doc.blocks.iter().map(|b| b.text.as_str()).collect();
    assert_eq!(texts, ["First paragraph here.", "Second one.", "Third, with 3:2 odds."]);

    assert_eq!(strip_artifacts("(Refer Slide Time: 00:14)", &p), "");
    assert_eq!(
        strip_artifacts("so we get x (Refer Slide Time: 01:02:03) equals y", &p),
        "so we get x equals y"
    );
    assert_eq!(strip_artifacts("value is 3:2 ratio", &p), "value is 3:2 ratio");
}
