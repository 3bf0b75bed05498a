use std::fs;
use std::path::Path;

use proptest::prelude::*;

use surfdyn::io::{self, BinaryGrid};
use surfdyn::Error;

fn fixtures() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn map_fixtures_round_trip() {
    let mut seen = 0;
    for (name, text) in fixtures() {
        if name.starts_with("family") || name.starts_with("m4") {
            continue;
        }
        let m = io::parse_map_spec(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = io::parse_map_spec(&io::map_to_json(&m)).unwrap();
        assert_eq!(m, again, "{name}");
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn family_fixture_round_trips() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/family_cubic_over_t.json")).unwrap();
    let f = io::parse_family_spec(&text).unwrap();
    assert_eq!(io::parse_family_spec(&io::family_to_json(&f)).unwrap(), f);
}

#[test]
fn completion_fixture_validates() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/m4_quotient.json")).unwrap();
    assert_eq!(io::parse_completion_spec(&text).unwrap().rank(), 2);
}

fn schema_path(json: &str) -> String {
    match io::parse_map_spec(json) {
        Err(Error::Schema { path, .. }) => path,
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn schema_errors_carry_paths() {
    assert_eq!(schema_path(r#"{"matrix": [[2,1],[1,1]]}"#), "$.family");
    assert_eq!(schema_path(r#"{"family": "henon", "factors": [{"poly": ["0", "0", "0"]}]}"#), "$.factors[0].poly");
    assert_eq!(schema_path(r#"{"family": "henon", "factors": [{"poly": ["0", "q", "1"]}]}"#), "$.factors[0].poly[1]");
    assert_eq!(schema_path(r#"{"family": "henon", "factors": [{"poly": ["0", "0", "1"], "delta": "0"}]}"#), "$.factors[0].delta");
    assert_eq!(schema_path(r#"{"family": "markov", "word": ["sx", "sw"]}"#), "$.word[1]");
    assert!(matches!(io::parse_map_spec(r#"{"family": "monomial", "matrix": [[2,0],[0,1]]}"#), Err(Error::NonUnimodular(_))));
}

#[test]
fn grid_rejects_damage() {
    let g = BinaryGrid {
        nx: 2,
        ny: 1,
        x_range: (0.0, 1.0),
        y_range: (0.0, 0.0),
        fields: vec!["G".into()],
        data: vec![vec![1.0, 2.0]],
    };
    let bytes = io::write_grid(&g);
    assert!(io::read_grid(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(io::read_grid(&extra).is_err());
    let mut bad_magic = bytes;
    bad_magic[0] = b'X';
    assert!(io::read_grid(&bad_magic).is_err());
}

proptest! {
    #[test]
    fn grid_round_trip(nx in 1u64..6, ny in 1u64..6, nf in 1usize..4, seed in any::<u64>()) {
        let n = (nx * ny) as usize;
        let data: Vec<Vec<f64>> = (0..nf)
            .map(|f| (0..n).map(|k| f64::from_bits(seed.wrapping_mul(k as u64 + 1).wrapping_add(f as u64)) ).map(|x| if x.is_nan() { 0.5 } else { x }).collect())
            .collect();
        let g = BinaryGrid {
            nx,
            ny,
            x_range: (-1.0, 2.5),
            y_range: (0.0, 3.0),
            fields: (0..nf).map(|k| format!("f{k}")).collect(),
            data,
        };
        prop_assert_eq!(io::read_grid(&io::write_grid(&g)).unwrap(), g);
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = io::fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
