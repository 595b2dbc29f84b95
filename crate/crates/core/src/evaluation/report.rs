//! Flat CSV form of evaluation reports.
//!
//! Columns: `method,row,project_id,actual,predicted,mre,abs_residual,k_used,mmre,pred,pred_level,lambda,n,not_applicable`.
//! Each report contributes one `fold` row per held-out project followed by
//! one `summary` row. Fields that do not apply to a row type are empty.
//! Numbers use the shortest representation that parses back to the same
//! `f64`.

use super::{EvalError, EvaluationReport, FoldResult, Result};
use crate::estimator::Method;

const HEADER: [&str; 14] = [
    "method",
    "row",
    "project_id",
    "actual",
    "predicted",
    "mre",
    "abs_residual",
    "k_used",
    "mmre",
    "pred",
    "pred_level",
    "lambda",
    "n",
    "not_applicable",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn reports_to_csv(reports: &[EvaluationReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in reports {
        let method = r.method.to_string();
        for f in &r.folds {
            w.write_record([
                method.as_str(),
                "fold",
                &f.project_id,
                &f.actual.to_string(),
                &f.predicted.to_string(),
                &f.mre.to_string(),
                &f.abs_residual.to_string(),
                &f.k_used.to_string(),
                "",
                "",
                "",
                "",
                "",
                "",
            ])
            .expect("in-memory write");
        }
        w.write_record([
            method.as_str(),
            "summary",
            "",
            "",
            "",
            "",
            "",
            "",
            &opt(r.mmre),
            &opt(r.pred),
            &r.pred_level.to_string(),
            &r.lambda.to_string(),
            &r.n.to_string(),
            r.not_applicable.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
}

fn bad(msg: impl Into<String>) -> EvalError {
    EvalError::ReportFormat(msg.into())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(format!("bad {what} `{s}`")))
}

fn opt_num(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        num(s, what).map(Some)
    }
}

pub fn reports_from_csv(text: &str) -> Result<Vec<EvaluationReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad("unexpected header"));
    }
    let mut out = Vec::new();
    let mut folds: Vec<FoldResult> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let method: Method = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad method `{}`", &rec[0])))?;
        match &rec[1] {
            "fold" => folds.push(FoldResult {
                project_id: rec[2].to_string(),
                actual: num(&rec[3], "actual")?,
                predicted: num(&rec[4], "predicted")?,
                mre: num(&rec[5], "mre")?,
                abs_residual: num(&rec[6], "abs_residual")?,
                k_used: num(&rec[7], "k_used")?,
            }),
            "summary" => {
                let na = &rec[13];
                out.push(EvaluationReport {
                    method,
                    n: num(&rec[12], "n")?,
                    folds: std::mem::take(&mut folds),
                    mmre: opt_num(&rec[8], "mmre")?,
                    pred: opt_num(&rec[9], "pred")?,
                    pred_level: num(&rec[10], "pred_level")?,
                    lambda: num(&rec[11], "lambda")?,
                    not_applicable: (!na.is_empty()).then(|| na.to_string()),
                })
            }
            other => return Err(bad(format!("unknown row type `{other}`"))),
        }
    }
    if !folds.is_empty() {
        return Err(bad("fold rows without a summary row"));
    }
    Ok(out)
}
