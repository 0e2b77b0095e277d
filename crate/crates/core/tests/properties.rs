//! Property tests over the public API.

use proptest::prelude::*;

use tableforge::annotate::{Annotation, Method};
use tableforge::curate::{anonymize_pii, PiiPolicy};
use tableforge::embed::{cosine_similarity, Vector};
use tableforge::harvest::FileRef;
use tableforge::ontology::Ontology;
use tableforge::store::{read_table, sidecar_bytes, table_to_csv, write_table, TableMetadata};
use tableforge::tableparse::{parse_bytes, Delimiter, Table};

fn csv_text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-c0-9 ,;|\t\"#\n\r]{0,120}").unwrap()
}

fn cell() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zé ,\"\n\r;]{0,6}").unwrap()
}

fn table() -> impl Strategy<Value = Table> {
    (1usize..5)
        .prop_flat_map(|cols| {
            (
                proptest::collection::vec(cell(), cols),
                proptest::collection::vec(proptest::collection::vec(cell(), cols), 0..6),
            )
        })
        .prop_map(|(h, r)| Table::from_rows(h, r).unwrap())
}

fn source() -> FileRef {
    FileRef {
        url: "u".into(),
        repo_id: "o/r".into(),
        file_path: "p.csv".into(),
        size_bytes: 1,
        license_id: Some("mit".into()),
        topic: "t".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parsed_tables_are_rectangular(text in csv_text()) {
        if let Ok((_, t)) = parse_bytes(text.as_bytes()) {
            prop_assert!(t.is_rectangular());
            prop_assert!(t.parse_log.windows(2).all(|w| w[0].line <= w[1].line));
        }
    }

    #[test]
    fn store_round_trip_is_a_fixpoint(t in table(), seed in any::<u64>()) {
        let meta = TableMetadata::describe(&t, &source(), &"0".repeat(64), Delimiter::Pipe, vec![], vec![], seed);
        let dir = tempfile::tempdir().unwrap();
        write_table(&t, &meta, dir.path()).unwrap();
        let (back, back_meta) = read_table(&meta.table_id, dir.path()).unwrap();
        prop_assert_eq!(&back.rows, &t.rows);
        prop_assert_eq!(table_to_csv(&back), table_to_csv(&t));
        prop_assert_eq!(sidecar_bytes(&back_meta), sidecar_bytes(&meta));
    }

    #[test]
    fn anonymization_is_seed_deterministic(t in table(), seed in any::<u64>()) {
        let anns: Vec<Annotation> = (0..t.column_count())
            .map(|i| Annotation {
                column_index: i,
                type_id: ["email", "birthDate", "name", "address"][i % 4].into(),
                ontology: Ontology::Dbpedia,
                method: Method::Syntactic,
                score: 1.0,
            })
            .collect();
        let policy = PiiPolicy::default();
        let a = anonymize_pii(&t, &anns, &policy, seed).unwrap();
        let b = anonymize_pii(&t, &anns, &policy, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let originals: Vec<&str> = a.1.iter().flat_map(|f| t.column(f.column_index)).collect();
        for f in &a.1 {
            for v in a.0.column(f.column_index) {
                prop_assert!(!originals.contains(&v));
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(
        u in proptest::collection::vec(-100.0f64..100.0, 4),
        v in proptest::collection::vec(-100.0f64..100.0, 4),
    ) {
        let (u, v) = (Vector::new(u).unwrap(), Vector::new(v).unwrap());
        if let (Ok(a), Ok(b)) = (cosine_similarity(&u, &v), cosine_similarity(&v, &u)) {
            prop_assert_eq!(a, b);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }
}
