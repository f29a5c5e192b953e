// SPDX-License-Identifier: MIT OR Apache-2.0

//! Files a model runtime produces for us, written by hand the way an
//! external tool would.

use std::path::Path;

use vass::corpus_store::{
    load_lexicon, read_generation_lines, read_tensor_dump, read_tokenizer_map, RatingSource, RatingTable,
    TensorDump, Tensor,
};
use vass::toy_model::{Roles, COMPLIANCE_MARKERS, REFUSAL_MARKERS};
use vass::VassError;

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn generation_lines_from_external_writer() {
    let dir = tempfile::tempdir().unwrap();
    let body = concat!(
        r#"{"id":"p0","prompt":"hi","output":"Sure","alpha":0.15,"steering":"arousal","tracked_tokens":[5,9],"tracked_logits":[[1.5,-2.0]]}"#,
        "\n\n",
        r#"{"id":"p1","prompt":"yo","output":"I can't","alpha":-0.15,"steering":"arousal"}"#,
        "\n"
    );
    let lines = read_generation_lines(&write(dir.path(), "g.jsonl", body)).unwrap();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].tracked_logits, vec![vec![1.5, -2.0]]);
    assert!(lines[1].generated_tokens.is_empty());

    let ragged = r#"{"id":"p0","prompt":"","output":"","alpha":0,"steering":"none","tracked_tokens":[5],"tracked_logits":[[1,2]]}"#;
    assert!(matches!(
        read_generation_lines(&write(dir.path(), "r.jsonl", ragged)),
        Err(VassError::Parse { line: 1, .. })
    ));
    let extra = r#"{"id":"p0","prompt":"","output":"","alpha":0,"steering":"none","temperature":1}"#;
    assert!(read_generation_lines(&write(dir.path(), "x.jsonl", extra)).is_err());
}

#[test]
fn tokenizer_map_resolves_role_markers() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("marker_string,token_id\n");
    for (i, m) in REFUSAL_MARKERS.iter().chain(&COMPLIANCE_MARKERS).enumerate() {
        body.push_str(&format!("\"{m}\",{}\n", 1000 + i));
    }
    let map = read_tokenizer_map(&write(dir.path(), "map.csv", &body)).unwrap();
    assert_eq!(map["I'm sorry, but"], 1010);
    let roles = Roles::from_strings(&REFUSAL_MARKERS, &COMPLIANCE_MARKERS, &map).unwrap();
    assert_eq!(roles.refusal.len(), 12);
    assert_eq!(roles.compliance[0], 1012);

    let bad = write(dir.path(), "bad.csv", "marker,id\nSure,1\n");
    assert!(matches!(read_tokenizer_map(&bad), Err(VassError::Parse { line: 1, .. })));
    let dup = write(dir.path(), "dup.csv", "marker_string,token_id\nSure,1\nSure,2\n");
    assert!(matches!(read_tokenizer_map(&dup), Err(VassError::DuplicateId(_))));
}

#[test]
fn rating_csv_on_declared_scales() {
    let dir = tempfile::tempdir().unwrap();
    let body = "word,valence,arousal,range_lo,range_hi\nJoy,9,7,1,9\nfear,1,9,1,9\ncalm,0.5,0,0,1\n";
    let t = RatingTable::load_csv(&write(dir.path(), "r.csv", body), RatingSource::HumanNorms).unwrap();
    let joy = t.get("joy").unwrap();
    assert_eq!((joy.valence, joy.arousal), (1.0, 0.5));
    assert_eq!(t.get("fear").unwrap().valence, -1.0);
    assert_eq!(t.get("calm").unwrap().arousal, -1.0);
    let lex = load_lexicon(&write(dir.path(), "l.csv", body)).unwrap();
    assert_eq!(lex.len(), 3);
    assert_eq!(lex[0].word, "joy");
}

#[test]
fn vatd_file_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let mut dump = TensorDump::new().with_metadata("model_id", "m");
    dump.push(Tensor::new("act/layer0/joy", vec![2, 3], vec![1.0, -0.5, 3.25, 0.0, f32::MIN_POSITIVE, 7.0]).unwrap());
    let p = dir.path().join("d.vatd");
    vass::corpus_store::write_tensor_dump(&dump, &p).unwrap();
    assert_eq!(read_tensor_dump(&p).unwrap(), dump);

    let mut bytes = std::fs::read(&p).unwrap();
    let last = bytes.len() - 9;
    bytes[last] ^= 1;
    std::fs::write(&p, &bytes).unwrap();
    assert!(read_tensor_dump(&p).is_err());
}
