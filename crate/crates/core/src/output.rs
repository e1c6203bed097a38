//! CSV, JSON and SVG artifacts. Every float is written with 12 significant
//! digits so identical runs produce byte-identical files.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::Value;

use crate::algebra::{OperatorSum, Rank};
use crate::downfold::IterationRecord;
use crate::dynamics::StepRecord;
use crate::error::Result;

/// Scientific notation with 12 significant digits; `-0` prints as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_num(x).parse().unwrap_or(x)
}

/// JSON number rounded to 12 significant digits (`null` when not finite).
pub fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(round_sig(x) + 0.0).map_or(Value::Null, Value::Number)
}

/// Recursively rounds every float in a JSON tree.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json_num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn write_json(path: &Path, v: Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&round_json(v))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn operator_json(x: &OperatorSum) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let header = ["iteration", "operator", "theta", "gradient", "energy", "error", "terms", "hermiticity"];
    write_rows(
        path,
        &header,
        records.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.operator.map(|p| p.to_string()).unwrap_or_default(),
                fmt_num(r.theta),
                fmt_num(r.gradient),
                fmt_num(r.energy),
                opt_num(r.error),
                r.terms.to_string(),
                fmt_num(r.hermiticity),
            ]
        }),
    )
}

/// Long-format rank-magnitude table: one row per populated `(n, m)` block.
pub fn write_rank_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows = (0..m.nrows())
        .flat_map(|n| (0..m.ncols()).map(move |k| (n, k)))
        .filter(|&(n, k)| m[(n, k)] != 0.0)
        .map(|(n, k)| vec![n.to_string(), k.to_string(), fmt_num(m[(n, k)])]);
    write_rows(path, &["creators", "annihilators", "norm"], rows)
}

/// Timeline rows; `exact` (same grid) adds oracle and deviation columns.
pub fn write_timeline_csv(path: &Path, records: &[StepRecord], exact: Option<&[Complex64]>) -> Result<()> {
    let mut header = vec!["step", "time", "expectation", "expectation_im", "terms", "norm", "dropped_weight", "hermiticity"];
    if exact.is_some() {
        header.extend(["exact", "deviation"]);
    }
    write_rows(
        path,
        &header,
        records.iter().enumerate().map(|(i, r)| {
            let mut row = vec![
                r.step.to_string(),
                fmt_num(r.time),
                fmt_num(r.expectation.re),
                fmt_num(r.expectation.im),
                r.terms.to_string(),
                fmt_num(r.norm),
                fmt_num(r.dropped_weight),
                fmt_num(r.hermiticity),
            ];
            if let Some(ex) = exact {
                row.push(fmt_num(ex[i].re));
                row.push(fmt_num((r.expectation - ex[i]).norm()));
            }
            row
        }),
    )
}

pub fn write_rank_norms_csv(path: &Path, rows: &[(f64, u32, f64)]) -> Result<()> {
    write_rows(
        path,
        &["time", "rank", "norm"],
        rows.iter().map(|&(t, k, v)| vec![fmt_num(t), Rank::from_twice(k).to_string(), fmt_num(v)]),
    )
}

/// Minimal line chart of one or more `(label, points)` series.
pub fn line_chart_svg(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1.partial_cmp(&x0) != Some(std::cmp::Ordering::Greater) {
        x1 = x0 + 1.0;
    }
    if y1.partial_cmp(&y0) != Some(std::cmp::Ordering::Greater) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    s += &format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n");
    s += &format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n", W / 2.0, escape(title));
    s += &format!(
        "<path d=\"M{PAD} {PAD} V{} H{}\" fill=\"none\" stroke=\"black\"/>\n",
        H - PAD,
        W - PAD
    );
    for (label, x) in [(fmt_short(x0), PAD), (fmt_short(x1), W - PAD)] {
        s += &format!("<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n", H - PAD + 16.0);
    }
    for (label, y) in [(fmt_short(y0), H - PAD), (fmt_short(y1), PAD)] {
        s += &format!("<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n", PAD - 4.0);
    }
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        s += &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n", path.join(" "));
        s += &format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            W - PAD - 120.0,
            PAD + 14.0 * (i as f64 + 1.0),
            escape(label)
        );
    }
    s += "</svg>\n";
    s
}

fn fmt_short(x: f64) -> String {
    format!("{x:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_num(-0.0), fmt_num(0.0));
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(json_num(f64::NAN), Value::Null);
    }

    #[test]
    fn json_rounding_is_recursive() {
        let v = serde_json::json!({"a": [1.0 / 3.0, 2], "b": {"c": 0.1 + 0.2}});
        let r = round_json(v);
        assert_eq!(r["a"][0].as_f64().unwrap(), 0.333333333333);
        assert_eq!(r["a"][1], 2);
        assert_eq!(r["b"]["c"].as_f64().unwrap(), 0.3);
    }

    #[test]
    fn rank_matrix_csv_skips_empty_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut m = DMatrix::zeros(3, 3);
        m[(1, 1)] = 2.0;
        m[(2, 2)] = 0.5;
        write_rank_matrix_csv(&path, &m).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "creators,annihilators,norm\n1,1,2.00000000000e0\n2,2,5.00000000000e-1\n");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let s = line_chart_svg("n<t>", &[("a", vec![(0.0, 1.0), (1.0, 0.5)]), ("b", vec![(0.0, 0.9)])]);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("n&lt;t&gt;"));
    }
}
