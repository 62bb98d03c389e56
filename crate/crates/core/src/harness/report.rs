use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{Cell, CellMetrics, Curve, HarnessResults, ResultTable};
use crate::error::{Error, Result};
use crate::ordermodel::OrderModel;

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn value(cell: Option<&Cell>, f: impl Fn(&CellMetrics) -> String) -> String {
    match cell {
        Some(Cell { metrics: Some(m), .. }) => f(m),
        Some(_) => "failed".into(),
        None => "missing".into(),
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// One row per model; per dataset the columns `pmr`, `wlcs-l` and `#pm`.
pub fn within_tsv(table: &ResultTable, model_name: &str) -> String {
    let mut head = String::from("model");
    let mut row = model_name.to_string();
    for c in &table.cells {
        let ds = &c.test_domain;
        write!(head, "\t{ds}:pmr\t{ds}:wlcs-l\t{ds}:#pm").unwrap();
        let m = Some(c);
        write!(
            row,
            "\t{}\t{}\t{}",
            value(m, |m| m.pmr.to_string()),
            value(m, |m| m.wlcs_l.to_string()),
            value(m, |m| m.parameters.to_string())
        )
        .unwrap();
    }
    format!("{head}\n{row}\n")
}

/// Train domains down, test domains across, one metric per file.
pub fn cross_tsv(table: &ResultTable, metric: &str) -> String {
    let mut trains: Vec<&str> = Vec::new();
    let mut tests: Vec<&str> = Vec::new();
    for c in &table.cells {
        if !trains.contains(&c.train_domain.as_str()) {
            trains.push(&c.train_domain);
        }
        if !tests.contains(&c.test_domain.as_str()) {
            tests.push(&c.test_domain);
        }
    }
    let mut out = String::from("train\\test");
    for t in &tests {
        write!(out, "\t{t}").unwrap();
    }
    out.push('\n');
    for tr in &trains {
        out.push_str(tr);
        for te in &tests {
            let c = table
                .cells
                .iter()
                .find(|c| c.train_domain == *tr && c.test_domain == *te);
            write!(out, "\t{}", value(c, |m| m.get(metric).unwrap().to_string())).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Long format: one line per (cell, metric).
pub fn cells_tsv(tables: &[ResultTable]) -> String {
    let mut out = String::from("experiment\ttrain\ttest\tlevel\ttag\tmetric\tvalue\ttrain_seed\tpredict_seed\n");
    for t in tables {
        for c in &t.cells {
            let level = serde_json::to_value(c.level).unwrap();
            let level = level.as_str().unwrap_or_default();
            let mut line = |metric: &str, v: String| {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{level}\t{}\t{metric}\t{v}\t{}\t{}",
                    t.experiment, c.train_domain, c.test_domain, c.tag, c.train_seed, c.predict_seed
                )
                .unwrap();
            };
            match (&c.metrics, &c.error) {
                (Some(m), _) => {
                    for name in CellMetrics::NAMES {
                        line(name, m.get(name).unwrap().to_string());
                    }
                    line("#pm", m.parameters.to_string());
                }
                (None, err) => line("error", err.clone().unwrap_or_default().replace(['\t', '\n'], " ")),
            }
        }
    }
    out
}

pub fn curve_tsv(curve: &Curve) -> String {
    let mut rate_keys: Vec<&String> = curve.points.iter().flat_map(|p| p.realized_rate.keys()).collect();
    rate_keys.sort();
    rate_keys.dedup();
    let mut out = format!("{}\truns\tfailed", curve.x_name);
    for m in CellMetrics::NAMES {
        write!(out, "\t{m}_mean\t{m}_std").unwrap();
    }
    for k in &rate_keys {
        write!(out, "\trealized_{k}").unwrap();
    }
    out.push('\n');
    for p in &curve.points {
        write!(out, "{}\t{}\t{}", p.x, p.runs, p.failed).unwrap();
        for m in CellMetrics::NAMES {
            match p.metrics.get(m) {
                Some(s) => write!(out, "\t{}\t{}", s.mean, s.std).unwrap(),
                None => out.push_str("\tNA\tNA"),
            }
        }
        for k in &rate_keys {
            match p.realized_rate.get(*k) {
                Some(r) => write!(out, "\t{r}").unwrap(),
                None => out.push_str("\tNA"),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `results.json`, `tables/`, `curves/`, `audits/` and
/// `checkpoints/` under `dir`, returning the files written.
pub fn emit_report(
    results: &HarnessResults,
    models: &[(String, OrderModel)],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Precondition("no results to report".into()));
    }
    let mut written = Vec::new();
    write(dir.join("results.json"), &serde_json::to_string_pretty(results)?, &mut written)?;
    if let Some(t) = results.table("within") {
        write(dir.join("tables/within.tsv"), &within_tsv(t, "LSTM+PtrNet"), &mut written)?;
    }
    if let Some(t) = results.table("cross") {
        for m in CellMetrics::NAMES {
            write(dir.join(format!("tables/cross_{m}.tsv")), &cross_tsv(t, m), &mut written)?;
        }
    }
    if !results.tables.is_empty() {
        write(dir.join("tables/cells.tsv"), &cells_tsv(&results.tables), &mut written)?;
    }
    for c in &results.curves {
        let name = format!("curves/{}_{}.tsv", c.experiment, slug(&c.domain));
        write(dir.join(name), &curve_tsv(c), &mut written)?;
    }
    for a in &results.audits {
        let name = format!("audits/{}_p{}_{}.json", slug(&a.domain), a.p, a.split);
        write(dir.join(name), &serde_json::to_string_pretty(a)?, &mut written)?;
    }
    for (name, model) in models {
        write(dir.join(format!("checkpoints/{}.json", slug(name))), &model.to_json()?, &mut written)?;
    }
    Ok(written)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<HarnessResults> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
