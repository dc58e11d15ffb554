//! The report command: summarize a run directory's artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use phenolink::error::Result;
use phenolink::report::{svg_line_chart, Series};

use super::write_text;
use crate::Cli;

#[derive(Args)]
pub struct ReportArgs {
    /// Run directory to summarize (defaults to --out-dir).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// Group sweep rows into (mode, k) series over population size.
fn sweep_series(rows: &[Vec<String>]) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for row in rows {
        if row.len() < 6 {
            continue;
        }
        let label = format!("{} k={}", row[1], row[3]);
        let point = (
            row[2].parse::<f64>().unwrap_or(f64::NAN),
            row[4].parse::<f64>().unwrap_or(f64::NAN),
        );
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    series
}

pub fn report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let dir = args.run_dir.clone().unwrap_or_else(|| cli.out_dir.clone());
    let mut md = String::from("# Run report\n");

    let manifest_path = dir.join(crate::manifest::RUN_MANIFEST_FILE);
    if manifest_path.exists() {
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        let _ = writeln!(
            md,
            "\n- command: `{}`\n- run id: `{}`\n- seed: {}\n- duration: {} ms",
            manifest["command"].as_str().unwrap_or("?"),
            manifest["run_id"].as_str().unwrap_or("?"),
            manifest["seed"],
            manifest["duration_ms"],
        );
    }

    let sweep_path = dir.join("sweep.csv");
    if sweep_path.exists() {
        let text = std::fs::read_to_string(&sweep_path)?;
        let (header, rows) = parse_csv(&text);
        let _ = writeln!(md, "\n## Sweep ({} rows)\n", rows.len());
        let _ = writeln!(md, "| {} |", header.join(" | "));
        let _ = writeln!(md, "|{}|", vec!["---"; header.len()].join("|"));
        for row in &rows {
            let _ = writeln!(md, "| {} |", row.join(" | "));
        }
        write_text(
            &dir.join("sweep.svg"),
            &svg_line_chart(
                "top-k success vs population size",
                "population size",
                "success",
                &sweep_series(&rows),
            ),
        )?;
    }

    let auc_path = dir.join("auc.json");
    if auc_path.exists() {
        let auc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&auc_path)?)?;
        let _ = writeln!(md, "\n## AUC\n\n```json\n{}\n```", serde_json::to_string_pretty(&auc)?);
    }

    let roc_path = dir.join("roc.csv");
    if roc_path.exists() {
        let text = std::fs::read_to_string(&roc_path)?;
        let (_, rows) = parse_csv(&text);
        let mut series: Vec<Series> = Vec::new();
        for row in &rows {
            if row.len() < 5 {
                continue;
            }
            let label = row[1].clone();
            let point = (
                row[3].parse::<f64>().unwrap_or(f64::NAN),
                row[4].parse::<f64>().unwrap_or(f64::NAN),
            );
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push(point),
                None => series.push(Series {
                    label,
                    points: vec![point],
                }),
            }
        }
        let _ = writeln!(md, "\n## ROC: {} curve points", rows.len());
        write_text(
            &dir.join("roc.svg"),
            &svg_line_chart("ROC", "false positive rate", "true positive rate", &series),
        )?;
    }

    for summary in ["match_summary.json", "metrics.json"] {
        let path = dir.join(summary);
        if path.exists() {
            let value: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let _ = writeln!(
                md,
                "\n## {summary}\n\n```json\n{}\n```",
                serde_json::to_string_pretty(&value)?
            );
        }
    }

    write_text(&dir.join("report.md"), &md)?;
    println!("report written to {}", dir.join("report.md").display());
    Ok(())
}
