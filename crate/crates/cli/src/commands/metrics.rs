use crate::error::{CliError, CliResult, ExitKind};
use lus_core::io::write_atomic;
use lus_core::metrics::{f1_score, F1Average, MetricsReport, ScoredPredictions, ScoredRow};
use lus_core::SeverityScore;
use std::fmt::Write as _;
use std::path::Path;

pub const SCORES_HEADER: [&str; 6] = ["clip_id", "true", "score0", "score1", "score2", "score3"];

fn parse_err(msg: String) -> CliError {
    CliError::new(ExitKind::Input, msg)
}

pub fn parse_scores(text: &str) -> CliResult<ScoredPredictions> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.iter().ne(SCORES_HEADER) {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            SCORES_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let truth: u8 = rec[1].parse().map_err(|_| parse_err(format!("line {line}: bad class `{}`", &rec[1])))?;
        let truth = SeverityScore::new(truth).map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let mut scores = [0.0; SeverityScore::COUNT];
        for (c, s) in scores.iter_mut().enumerate() {
            let field = &rec[2 + c];
            *s = field.parse().map_err(|_| parse_err(format!("line {line}: bad score `{field}`")))?;
        }
        rows.push(ScoredRow { clip_id: rec[0].to_string(), truth, scores });
    }
    if rows.is_empty() {
        return Err(parse_err("scores file has no rows".into()));
    }
    ScoredPredictions::new(rows).map_err(|e| parse_err(e.to_string()))
}

/// `key=value` lines: sizes, accuracy, both F1 averages, AUC summaries and
/// per-class AUC/support.
pub fn format_report(sp: &ScoredPredictions, report: &MetricsReport) -> CliResult<String> {
    let f1_weighted = f1_score(&sp.predictions(), &sp.truths(), SeverityScore::COUNT, F1Average::Weighted)?;
    let mut s = String::new();
    let _ = writeln!(s, "n={}", report.n);
    let _ = writeln!(s, "accuracy={}", report.accuracy);
    let _ = writeln!(s, "f1_macro={}", report.f1);
    let _ = writeln!(s, "f1_weighted={f1_weighted}");
    let _ = writeln!(s, "auc_weighted={}", report.auc.weighted);
    let _ = writeln!(s, "auc_macro={}", report.auc.macro_avg);
    for c in 0..SeverityScore::COUNT {
        match report.auc.per_class[c] {
            Some(a) => {
                let _ = writeln!(s, "auc_class{c}={a}");
            }
            None => {
                let _ = writeln!(s, "auc_class{c}=undefined");
            }
        }
        let _ = writeln!(s, "support_class{c}={}", report.auc.support[c]);
    }
    let degenerate: Vec<String> = report.auc.degenerate.iter().map(u8::to_string).collect();
    let _ = writeln!(s, "degenerate_classes={}", degenerate.join(","));
    Ok(s)
}

/// ROC points of every usable class as CSV.
pub fn roc_table(report: &MetricsReport) -> String {
    let mut s = String::from("class,fpr,tpr,threshold\n");
    for (c, curve) in report.auc.curves.iter().enumerate() {
        for p in curve.iter().flat_map(|cv| &cv.points) {
            let _ = writeln!(s, "{c},{},{},{}", p.fpr, p.tpr, p.threshold);
        }
    }
    s
}

/// Computes the report for a scores file. With `out`, also writes
/// `report.txt` and `roc.csv` there. Classes without positives or negatives
/// are reported on stderr.
pub fn cmd_metrics(scores: &Path, out: Option<&Path>) -> CliResult<String> {
    let text = std::fs::read_to_string(scores)
        .map_err(|e| CliError::new(ExitKind::Input, format!("{}: {e}", scores.display())))?;
    let sp = parse_scores(&text).map_err(|e| e.context(scores.display()))?;
    let report = MetricsReport::compute(&sp, F1Average::Macro)?;
    for c in &report.auc.degenerate {
        eprintln!("warning: class {c} has no positives or no negatives; AUC undefined");
    }
    let text = format_report(&sp, &report)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("report.txt"), text.as_bytes())?;
        write_atomic(&dir.join("roc.csv"), roc_table(&report).as_bytes())?;
    }
    Ok(text)
}
