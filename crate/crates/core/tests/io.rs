use proptest::prelude::*;
use unidim::io::{read_csv, read_csv_from, write_csv, write_csv_to, Table};
use unidim::{Error, ResponseMatrix};

fn table_strategy() -> impl Strategy<Value = Table> {
    (1usize..30, 1usize..8, any::<bool>()).prop_flat_map(|(p, i, ids)| {
        prop::collection::vec(0u8..2, p * i).prop_map(move |cells| {
            let labels = (0..i).map(|k| format!("q{k}")).collect();
            Table {
                data: ResponseMatrix::new(cells, p, labels).unwrap(),
                person_ids: ids.then(|| (0..p).map(|k| format!("p{k}")).collect()),
            }
        })
    })
}

proptest! {
    #[test]
    fn export_then_ingest_is_identity(table in table_strategy()) {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &table).unwrap();
        prop_assert_eq!(read_csv_from(buf.as_slice()).unwrap(), table);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let table = Table {
        data: ResponseMatrix::from_rows(&[vec![0, 1], vec![1, 1], vec![1, 0]]).unwrap(),
        person_ids: None,
    };
    write_csv(&path, &table).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!((back.data.persons(), back.data.items()), (3, 2));
    assert_eq!(back, table);
}

#[test]
fn errors_name_their_cause() {
    let e = read_csv_from("x,y\n1,0\n0,2\n".as_bytes()).unwrap_err();
    assert_eq!(
        e.to_string(),
        "row 2, column 'y': expected 0 or 1, found '2'"
    );
    let e = read_csv_from("x,y,x\n1,0,1\n".as_bytes()).unwrap_err();
    assert!(matches!(e, Error::DuplicateLabel(ref l) if l == "x"));
    assert!(read_csv("/nonexistent/file.csv").is_err());
}
