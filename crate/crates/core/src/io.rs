//! JSON map, family and completion specs; fixed-precision JSON/CSV writers; binary grid
//! dumps and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::arith::expr;
use crate::arith::{Quadratic, RatFunc, Q};
use crate::error::{Error, Result};
use crate::maps::{
    AutoOver, Coords, FactorOver, Generator, HenonFamily, HenonOver, MarkovOver, Matrix2,
    MonomialOver, Point, Surface, SurfaceAutomorphism,
};
use crate::picard_manin::CompletionModel;

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::schema(format!("{path}.{key}"), "missing field"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::schema(path, "expected an object"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::schema(path, "expected an array"))
}

/// Coefficients are strings (or JSON integers) parsed exactly.
fn coefficient_text(v: &Value, path: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) if n.is_i64() || n.is_u64() => Ok(n.to_string()),
        _ => Err(Error::schema(path, "expected a decimal string")),
    }
}

fn rational_at(v: &Value, path: &str) -> Result<Q> {
    let s = coefficient_text(v, path)?;
    expr::to_rational(&s).map_err(|e| Error::schema(path, e.to_string()))
}

fn ratfunc_at(v: &Value, path: &str) -> Result<RatFunc> {
    let s = coefficient_text(v, path)?;
    expr::to_ratfunc(&s).map_err(|e| Error::schema(path, e.to_string()))
}

fn family_tag<'a>(obj: &'a Map<String, Value>) -> Result<&'a str> {
    field(obj, "family", "$")?
        .as_str()
        .ok_or_else(|| Error::schema("$.family", "expected a string"))
}

fn parse_matrix(v: &Value, path: &str) -> Result<Matrix2> {
    let rows = array(v, path)?;
    if rows.len() != 2 {
        return Err(Error::schema(path, "expected a 2×2 matrix"));
    }
    let mut m = [[0i64; 2]; 2];
    for (i, row) in rows.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let row = array(row, &p)?;
        if row.len() != 2 {
            return Err(Error::schema(&p, "expected 2 entries"));
        }
        for (j, x) in row.iter().enumerate() {
            m[i][j] = x
                .as_i64()
                .ok_or_else(|| Error::schema(format!("{p}[{j}]"), "expected an integer"))?;
        }
    }
    Matrix2::new(m)
}

fn parse_factors<K: Clone>(
    obj: &Map<String, Value>,
    coeff: &impl Fn(&Value, &str) -> Result<K>,
    one: K,
) -> Result<Vec<FactorOver<K>>> {
    let list = array(field(obj, "factors", "$")?, "$.factors")?;
    if list.is_empty() {
        return Err(Error::schema("$.factors", "at least one factor is required"));
    }
    list.iter()
        .enumerate()
        .map(|(i, f)| {
            let path = format!("$.factors[{i}]");
            let fo = object(f, &path)?;
            let poly_path = format!("{path}.poly");
            let poly = array(field(fo, "poly", &path)?, &poly_path)?
                .iter()
                .enumerate()
                .map(|(k, c)| coeff(c, &format!("{poly_path}[{k}]")))
                .collect::<Result<Vec<K>>>()?;
            if poly.len() < 3 {
                return Err(Error::schema(&poly_path, "polynomial degree must be at least 2"));
            }
            let delta = match fo.get("delta") {
                Some(d) => coeff(d, &format!("{path}.delta"))?,
                None => one.clone(),
            };
            let inverse = match fo.get("inverse") {
                None => false,
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(Error::schema(format!("{path}.inverse"), "expected a boolean")),
            };
            Ok(FactorOver {
                poly,
                delta,
                inverse,
            })
        })
        .collect()
}

fn check_factors_zero<K>(factors: &[FactorOver<K>], is_zero: impl Fn(&K) -> bool) -> Result<()> {
    for (i, f) in factors.iter().enumerate() {
        if is_zero(&f.delta) {
            return Err(Error::schema(format!("$.factors[{i}].delta"), "delta must be nonzero"));
        }
        if f.poly.last().is_some_and(&is_zero) {
            return Err(Error::schema(
                format!("$.factors[{i}].poly"),
                "leading coefficient must be nonzero",
            ));
        }
    }
    Ok(())
}

pub fn parse_map_value(v: &Value) -> Result<SurfaceAutomorphism> {
    let obj = object(v, "$")?;
    match family_tag(obj)? {
        "monomial" => {
            let matrix = parse_matrix(field(obj, "matrix", "$")?, "$.matrix")?;
            let twist = match obj.get("twist") {
                None => [Q::from_integer(1.into()), Q::from_integer(1.into())],
                Some(t) => {
                    let t = array(t, "$.twist")?;
                    if t.len() != 2 {
                        return Err(Error::schema("$.twist", "expected 2 entries"));
                    }
                    let a = rational_at(&t[0], "$.twist[0]")?;
                    let b = rational_at(&t[1], "$.twist[1]")?;
                    for (i, c) in [&a, &b].into_iter().enumerate() {
                        if num_traits::Zero::is_zero(c) {
                            return Err(Error::schema(format!("$.twist[{i}]"), "twist must be nonzero"));
                        }
                    }
                    [a, b]
                }
            };
            Ok(AutoOver::Monomial(MonomialOver { matrix, twist }))
        }
        "henon" => {
            let factors = parse_factors(obj, &rational_at, Q::from_integer(1.into()))?;
            check_factors_zero(&factors, num_traits::Zero::is_zero)?;
            Ok(AutoOver::Henon(HenonOver { factors }))
        }
        "markov" => {
            let d = match obj.get("D") {
                Some(d) => rational_at(d, "$.D")?,
                None => Q::from_integer(0.into()),
            };
            let letters = array(field(obj, "word", "$")?, "$.word")?
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let p = format!("$.word[{i}]");
                    g.as_str()
                        .and_then(Generator::from_name)
                        .ok_or_else(|| Error::schema(p, "expected one of sx, sy, sz, pxy, pyz"))
                })
                .collect::<Result<Vec<_>>>()?;
            if letters.is_empty() {
                return Err(Error::schema("$.word", "word must be nonempty"));
            }
            Ok(AutoOver::Markov(MarkovOver { d, letters }))
        }
        other => Err(Error::schema(
            "$.family",
            format!("unknown family {other:?}; expected monomial, henon or markov"),
        )),
    }
}

pub fn parse_map_spec(json: &str) -> Result<SurfaceAutomorphism> {
    let v: Value = serde_json::from_str(json).map_err(|e| Error::schema("$", e.to_string()))?;
    parse_map_value(&v)
}

/// Hénon family over Q(t): coefficients are expressions in t.
pub fn parse_family_spec(json: &str) -> Result<HenonFamily> {
    let v: Value = serde_json::from_str(json).map_err(|e| Error::schema("$", e.to_string()))?;
    let obj = object(&v, "$")?;
    let tag = family_tag(obj)?;
    if tag != "henon" {
        return Err(Error::schema("$.family", "families over Q(t) must be henon"));
    }
    let factors = parse_factors(obj, &ratfunc_at, RatFunc::constant(Q::from_integer(1.into())))?;
    check_factors_zero(&factors, RatFunc::is_zero)?;
    Ok(HenonOver { factors })
}

pub fn parse_completion_spec(json: &str) -> Result<CompletionModel> {
    let v: Value = serde_json::from_str(json).map_err(|e| Error::schema("$", e.to_string()))?;
    let obj = object(&v, "$")?;
    for key in ["names", "Q", "Mf", "MfInv", "pPlus", "pMinus"] {
        field(obj, key, "$")?;
    }
    let model: CompletionModel =
        serde_json::from_value(v).map_err(|e| Error::schema("$", e.to_string()))?;
    model.validate()?;
    Ok(model)
}

fn factors_value<K>(factors: &[FactorOver<K>], show: impl Fn(&K) -> String) -> Value {
    Value::Array(
        factors
            .iter()
            .map(|f| {
                let mut o = Map::new();
                o.insert(
                    "poly".into(),
                    Value::Array(f.poly.iter().map(|c| Value::String(show(c))).collect()),
                );
                o.insert("delta".into(), Value::String(show(&f.delta)));
                if f.inverse {
                    o.insert("inverse".into(), Value::Bool(true));
                }
                Value::Object(o)
            })
            .collect(),
    )
}

pub fn map_to_value(map: &SurfaceAutomorphism) -> Value {
    let mut o = Map::new();
    o.insert("family".into(), Value::String(map.family().into()));
    match map {
        AutoOver::Monomial(m) => {
            o.insert("matrix".into(), serde_json::json!(m.matrix.0));
            o.insert(
                "twist".into(),
                Value::Array(m.twist.iter().map(|c| Value::String(c.to_string())).collect()),
            );
        }
        AutoOver::Henon(h) => {
            o.insert("factors".into(), factors_value(&h.factors, |c| c.to_string()));
        }
        AutoOver::Markov(mk) => {
            o.insert("D".into(), Value::String(mk.d.to_string()));
            o.insert(
                "word".into(),
                Value::Array(mk.letters.iter().map(|g| Value::String(g.name().into())).collect()),
            );
        }
    }
    Value::Object(o)
}

pub fn map_to_json(map: &SurfaceAutomorphism) -> String {
    to_json_string(&map_to_value(map))
}

pub fn family_to_json(family: &HenonFamily) -> String {
    let mut o = Map::new();
    o.insert("family".into(), Value::String("henon".into()));
    o.insert("factors".into(), factors_value(&family.factors, |c| c.to_string()));
    to_json_string(&Value::Object(o))
}

/// `"1/2,3"`, `"1+sqrt(2),1-sqrt(2)"`, `"3,3,3"`. Square roots give a quadratic point.
pub fn parse_point(surface: Surface, text: &str) -> Result<Point> {
    let parts = expr::split_top(text);
    let has_sqrt = parts
        .iter()
        .map(|p| expr::parse(p).map(|e| e.has_sqrt()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .any(|b| b);
    let coords = if has_sqrt {
        let v = parts
            .iter()
            .map(|p| expr::to_quadratic(p))
            .collect::<Result<Vec<Quadratic>>>()?;
        Coords::Quadratic(v)
    } else {
        Coords::Rational(parts.iter().map(|p| expr::to_rational(p)).collect::<Result<_>>()?)
    };
    let pt = Point { surface, coords };
    pt.check()?;
    Ok(pt)
}

pub fn parse_family_point(text: &str) -> Result<[RatFunc; 2]> {
    let parts = expr::split_top(text);
    if parts.len() != 2 {
        return Err(Error::BadPoint(format!("expected 2 coordinates, got {}", parts.len())));
    }
    Ok([expr::to_ratfunc(parts[0])?, expr::to_ratfunc(parts[1])?])
}

/// 17 significant digits; plain notation for moderate exponents.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(1) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = a.iter().all(|x| !x.is_array() && !x.is_object());
            if flat {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(o) => {
            if o.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), Value::String(k.clone()));
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with every float at 17 significant digits. Non-finite floats become null.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).unwrap_or(Value::Null);
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

pub const GRID_MAGIC: &[u8; 8] = b"SDGRID01";

/// Binary grid dump: see `write_grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryGrid {
    pub nx: u64,
    pub ny: u64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub fields: Vec<String>,
    /// One row-major (y outer, x inner) array of nx·ny values per field.
    pub data: Vec<Vec<f64>>,
}

/// Layout, all little-endian: magic `SDGRID01`, u64 nx, u64 ny, f64 x0, x1, y0, y1,
/// u64 field count, then per field a u64 name length and UTF-8 name, then each field's
/// nx·ny f64 values in order.
pub fn write_grid(g: &BinaryGrid) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&g.nx.to_le_bytes());
    out.extend_from_slice(&g.ny.to_le_bytes());
    for x in [g.x_range.0, g.x_range.1, g.y_range.0, g.y_range.1] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(g.fields.len() as u64).to_le_bytes());
    for name in &g.fields {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for col in &g.data {
        for x in col {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn read_grid(bytes: &[u8]) -> Result<BinaryGrid> {
    let bad = |m: &str| Error::Parse(format!("binary grid: {m}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != GRID_MAGIC {
        return Err(bad("bad magic"));
    }
    let rd_u64 = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap());
    let rd_f64 = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
    let nx = rd_u64(take(8)?);
    let ny = rd_u64(take(8)?);
    let x0 = rd_f64(take(8)?);
    let x1 = rd_f64(take(8)?);
    let y0 = rd_f64(take(8)?);
    let y1 = rd_f64(take(8)?);
    let nf = rd_u64(take(8)?) as usize;
    let mut fields = Vec::with_capacity(nf);
    for _ in 0..nf {
        let len = rd_u64(take(8)?) as usize;
        let name = std::str::from_utf8(take(len)?).map_err(|_| bad("field name"))?;
        fields.push(name.to_string());
    }
    let cells = nx.checked_mul(ny).ok_or_else(|| bad("dims overflow"))? as usize;
    let mut data = Vec::with_capacity(nf);
    for _ in 0..nf {
        let raw = take(cells.checked_mul(8).ok_or_else(|| bad("dims overflow"))?)?;
        data.push(raw.chunks_exact(8).map(rd_f64).collect());
    }
    if take(1).is_ok() {
        return Err(bad("trailing bytes"));
    }
    Ok(BinaryGrid {
        nx,
        ny,
        x_range: (x0, x1),
        y_range: (y0, y1),
        fields,
        data,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub map_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    /// Recorded only in the sidecar `timing.json`; the manifest itself stays reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, seed: u64) -> Self {
        RunManifest {
            command,
            map_hashes: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, name: &str, bytes: &[u8]) {
        self.map_hashes.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn add_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_spec_defaults_twist() {
        let m = parse_map_spec(r#"{"family":"monomial","matrix":[[2,1],[1,1]]}"#).unwrap();
        assert!((m.dynamical_degree() - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_family_is_schema_error() {
        let e = parse_map_spec(r#"{"matrix":[[2,1],[1,1]]}"#).unwrap_err();
        assert_eq!(e, Error::schema("$.family", "missing field"));
    }

    #[test]
    fn bad_matrix_is_non_unimodular() {
        let e = parse_map_spec(r#"{"family":"monomial","matrix":[[2,0],[0,1]]}"#).unwrap_err();
        assert!(matches!(e, Error::NonUnimodular(_)));
    }

    #[test]
    fn nested_path_reported() {
        let e = parse_map_spec(r#"{"family":"henon","factors":[{"poly":["0","0","x"]}]}"#)
            .unwrap_err();
        match e {
            Error::Schema { path, .. } => assert_eq!(path, "$.factors[0].poly[2]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn henon_round_trip() {
        let src = r#"{"family":"henon","factors":[{"poly":["-1/2","0","1"],"delta":"3"},
            {"poly":["0","0","0","2"],"delta":"1","inverse":true}]}"#;
        let m = parse_map_spec(src).unwrap();
        assert_eq!(parse_map_spec(&map_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn family_spec_parses_t() {
        let f = parse_family_spec(
            r#"{"family":"henon","factors":[{"poly":["0","0","0","1/(2*t)"],"delta":"-1"}]}"#,
        )
        .unwrap();
        let c = &f.factors[0].poly[3];
        assert_eq!(c.eval_rational(&Q::from_integer(2.into())), Some(crate::arith::rational::frac(1, 4)));
        assert_eq!(c.eval_rational(&Q::from_integer(0.into())), None);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(2.618033988749895), "2.6180339887498949");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000");
        assert_eq!(fmt_f64(1e-12), "9.9999999999999998e-13");
        assert_eq!(fmt_f64(0.0), "0.0");
        for x in [1.0 / 3.0, -7.25e9, 3.3e-300, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn grid_round_trip() {
        let g = BinaryGrid {
            nx: 3,
            ny: 2,
            x_range: (-1.0, 1.0),
            y_range: (0.0, 2.0),
            fields: vec!["G".into(), "err".into()],
            data: vec![vec![0.5; 6], (0..6).map(f64::from).collect()],
        };
        let bytes = write_grid(&g);
        assert_eq!(bytes.len(), 8 + 7 * 8 + (8 + 1) + (8 + 3) + 2 * 6 * 8);
        assert_eq!(read_grid(&bytes).unwrap(), g);
        assert!(read_grid(&bytes[..bytes.len() - 1]).is_err());
    }
}
