//! `compare`: summarize run records side by side and name the winner per
//! metric.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use vfl_saddle::metrics::CSV_HEADER;

struct Record {
    name: String,
    rows: Vec<Row>,
}

#[derive(Clone, Copy)]
struct Row {
    iter: u64,
    up: u64,
    down: u64,
    flops: u64,
    subopt: f64,
    violation: f64,
}

impl Record {
    fn last(&self) -> Row {
        *self.rows.last().expect("parse_record rejects empty records")
    }

    /// First sampled iteration with suboptimality at or under `threshold`.
    fn iters_to(&self, threshold: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.subopt <= threshold).map(|r| r.iter)
    }
}

fn parse_record(path: &Path) -> Result<Record> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read record {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| anyhow!("{}: empty record", path.display()))?;
    if header != CSV_HEADER {
        bail!(
            "{}:1: column mismatch: expected header {CSV_HEADER}, got {header}",
            path.display()
        );
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("{}:{no}: expected 8 columns, got {}", path.display(), fields.len());
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|_| anyhow!("{}:{no}: malformed count {}", path.display(), fields[i]))
        };
        let real = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| anyhow!("{}:{no}: malformed value {}", path.display(), fields[i]))
        };
        rows.push(Row {
            iter: int(0)?,
            up: int(1)?,
            down: int(2)?,
            flops: int(3)?,
            subopt: real(4)?,
            violation: real(5)?,
        });
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Record { name, rows })
}

/// Names of the minimum entries; `None` when every value is missing.
fn winners(pairs: &[(String, f64)]) -> Option<Vec<String>> {
    let best = pairs.iter().map(|(_, v)| *v).filter(|v| !v.is_nan()).fold(f64::NAN, f64::min);
    if best.is_nan() {
        return None;
    }
    Some(pairs.iter().filter(|(_, v)| *v == best).map(|(n, _)| n.clone()).collect())
}

fn verdict(label: &str, pairs: &[(String, f64)]) -> bool {
    match winners(pairs) {
        None => {
            println!("best {label}: n/a");
            false
        }
        Some(names) if names.len() == pairs.len() => {
            println!("best {label}: tie ({})", names.join(", "));
            true
        }
        Some(names) => {
            println!("best {label}: {}", names.join(", "));
            false
        }
    }
}

fn merged_csv(records: &[Record]) -> String {
    let mut out = String::from("name,iter,up,down,flops,subopt,violation\n");
    for r in records {
        for row in &r.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.name, row.iter, row.up, row.down, row.flops, row.subopt, row.violation
            ));
        }
    }
    out
}

fn fmt_iters(v: Option<u64>) -> String {
    match v {
        Some(k) => k.to_string(),
        None => "-".into(),
    }
}

pub fn cmd_compare(
    paths: &[std::path::PathBuf],
    threshold: f64,
    merge: Option<&Path>,
    quiet: bool,
) -> Result<i32> {
    let records: Vec<Record> = paths.iter().map(|p| parse_record(p)).collect::<Result<_>>()?;
    if let Some(target) = merge {
        std::fs::write(target, merged_csv(&records))
            .with_context(|| format!("cannot write {}", target.display()))?;
    }
    if quiet {
        return Ok(0);
    }

    let width = records.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    println!(
        "{:<width$}  {:>8}  {:>10}  {:>10}  {:>10}  {:>12}  {:>12}  {:>14}",
        "name", "iters", "subopt", "violation", format!("to_{threshold:.0e}"), "up", "down", "flops"
    );
    for r in &records {
        let last = r.last();
        println!(
            "{:<width$}  {:>8}  {:>10.3e}  {:>10.3e}  {:>10}  {:>12}  {:>12}  {:>14}",
            r.name,
            last.iter,
            last.subopt,
            last.violation,
            fmt_iters(r.iters_to(threshold)),
            last.up,
            last.down,
            last.flops
        );
    }
    if records.len() == 1 {
        println!("single record; nothing to compare");
        return Ok(0);
    }

    let metric = |f: &dyn Fn(&Record) -> f64| -> Vec<(String, f64)> {
        records.iter().map(|r| (r.name.clone(), f(r))).collect()
    };
    let mut all_tied = true;
    all_tied &= verdict("subopt", &metric(&|r| r.last().subopt));
    all_tied &= verdict(
        &format!("iters to {threshold:.0e}"),
        &metric(&|r| r.iters_to(threshold).map(|k| k as f64).unwrap_or(f64::INFINITY)),
    );
    all_tied &= verdict("up", &metric(&|r| r.last().up as f64));
    all_tied &= verdict("down", &metric(&|r| r.last().down as f64));
    all_tied &= verdict("flops", &metric(&|r| r.last().flops as f64));
    if all_tied {
        println!("overall: tie");
    }
    Ok(0)
}
