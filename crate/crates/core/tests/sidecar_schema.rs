//! Stored sidecars validate against the published metadata schema.

use std::fs;
use std::path::Path;

use jsonschema::JSONSchema;
use serde_json::Value;

use tableforge::annotate::{Annotation, Method};
use tableforge::curate::{AnonymizedColumn, GeneratorCategory};
use tableforge::harvest::FileRef;
use tableforge::ontology::Ontology;
use tableforge::store::{sidecar_bytes, TableMetadata, SIDECAR_SCHEMA};
use tableforge::tableparse::{Delimiter, Table};

fn schema() -> JSONSchema {
    let schema: Value = serde_json::from_str(SIDECAR_SCHEMA).unwrap();
    JSONSchema::compile(&schema).unwrap()
}

fn sample() -> TableMetadata {
    let table = Table::from_rows(
        vec!["name".into(), "born".into()],
        vec![vec!["Vale Garrow".into(), "1970-01-01".into()], vec!["Kai Ilsley".into(), "1982-03-04".into()]],
    )
    .unwrap();
    let source = FileRef {
        url: "https://example.invalid/a/b.csv".into(),
        repo_id: "a/b".into(),
        file_path: "b.csv".into(),
        size_bytes: 40,
        license_id: None,
        topic: "name".into(),
    };
    let annotations = vec![Annotation {
        column_index: 0,
        type_id: "name".into(),
        ontology: Ontology::Dbpedia,
        method: Method::Semantic,
        score: 0.75,
    }];
    let faked = vec![AnonymizedColumn { column_index: 0, pii_type: "name".into(), category: GeneratorCategory::Name }];
    TableMetadata::describe(&table, &source, &"ab".repeat(32), Delimiter::Semicolon, annotations, faked, 3)
}

#[test]
fn described_metadata_validates() {
    let value: Value = serde_json::from_slice(&sidecar_bytes(&sample())).unwrap();
    let schema = schema();
    let errors: Vec<String> = match schema.validate(&value) {
        Ok(()) => vec![],
        Err(e) => e.map(|e| e.to_string()).collect(),
    };
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn schema_rejects_drift() {
    let schema = schema();
    let base: Value = serde_json::from_slice(&sidecar_bytes(&sample())).unwrap();
    let mut extra = base.clone();
    extra["unexpected"] = Value::Bool(true);
    assert!(!schema.is_valid(&extra));
    let mut bad_score = base.clone();
    bad_score["annotations"][0]["score"] = serde_json::json!(1.5);
    assert!(!schema.is_valid(&bad_score));
    let mut bad_id = base;
    bad_id["table_id"] = Value::String("XYZ".into());
    assert!(!schema.is_valid(&bad_id));
}

#[test]
fn pipeline_sidecars_validate() {
    let e2e = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e");
    let out = tempfile::tempdir().unwrap();
    let code = tableforge::cli::run([
        "tableforge".as_ref(),
        "pipeline".as_ref(),
        "--config".as_ref(),
        e2e.join("config.toml").as_os_str(),
        "--out".as_ref(),
        out.path().as_os_str(),
    ]);
    assert_eq!(code, 0);
    let schema = schema();
    let mut checked = 0;
    for topic in fs::read_dir(out.path().join("corpus")).unwrap() {
        let topic = topic.unwrap().path();
        if !topic.is_dir() {
            continue;
        }
        for f in fs::read_dir(&topic).unwrap() {
            let p = f.unwrap().path();
            if p.to_string_lossy().ends_with(".meta.json") {
                let v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
                assert!(schema.is_valid(&v), "{}", p.display());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 5);
}
