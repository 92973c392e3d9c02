//! CSV input and JSON rendering.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use selinf_core::{DMatrix, DVector, Error, Polytope, RegressionData, Result, SelectiveInterval, TruncationRegion};
use serde_json::{json, Value};

/// Reads a headed numeric CSV. The response is the column named
/// `response`, or the last column when `response` is `None`.
pub fn load_csv(path: &Path, response: Option<&str>) -> Result<RegressionData> {
    let file = File::open(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    read_csv(file, response)
}

pub fn read_csv<R: Read>(reader: R, response: Option<&str>) -> Result<RegressionData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> =
        rdr.headers().map_err(|e| Error::InvalidInput(format!("csv header: {e}")))?.iter().map(str::to_owned).collect();
    if headers.len() < 2 {
        return Err(Error::InvalidInput("need at least one predictor and a response column".into()));
    }
    let target = match response {
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}")))?,
        None => headers.len() - 1,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("csv row {}: {e}", i + 2)))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::InvalidInput(format!("row {}, column {:?}: not a finite number: {v:?}", i + 2, headers[j])))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != headers.len() {
            return Err(Error::DimensionMismatch { expected: headers.len(), got: row.len() });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }
    let n = rows.len();
    let predictors: Vec<usize> = (0..headers.len()).filter(|&j| j != target).collect();
    let x = DMatrix::from_fn(n, predictors.len(), |i, k| rows[i][predictors[k]]);
    let y = DVector::from_fn(n, |i, _| rows[i][target]);
    let names = predictors.iter().map(|&j| headers[j].clone()).collect();
    RegressionData::new(x, y)?.with_names(names)
}

/// Finite numbers as JSON numbers, infinities as `"-inf"`/`"+inf"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x == f64::INFINITY {
        json!("+inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!("nan")
    }
}

pub fn region_json(region: &TruncationRegion) -> Value {
    Value::Array(region.intervals().iter().map(|&(a, b)| json!([num(a), num(b)])).collect())
}

pub fn interval_json(ci: &SelectiveInterval) -> Value {
    let mut v = json!({
        "label": ci.label,
        "level": ci.level,
        "ci": [num(ci.lower), num(ci.upper)],
        "estimate": num(ci.observed),
        "region": region_json(&ci.region),
    });
    if let Some(w) = &ci.warning {
        v["warning"] = json!(w);
    }
    v
}

pub fn polytope_json(poly: &Polytope) -> Value {
    let a: Vec<Value> = (0..poly.a.nrows()).map(|i| Value::Array(poly.a.row(i).iter().map(|&v| num(v)).collect())).collect();
    let m = &poly.meta;
    json!({
        "method": m.method.as_str(),
        "dim": poly.dim(),
        "n_constraints": poly.n_constraints(),
        "active": m.active,
        "signs": m.signs,
        "lambda": m.lambda.map(num),
        "A": a,
        "b": poly.b.iter().map(|&v| num(v)).collect::<Vec<_>>(),
    })
}

pub fn polytopes_json(polys: &[Polytope]) -> Value {
    if polys.len() == 1 {
        polytope_json(&polys[0])
    } else {
        json!({ "union": polys.iter().map(polytope_json).collect::<Vec<_>>() })
    }
}
