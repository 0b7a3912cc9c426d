//! Runs the bundled benchmark tables and prints one line per row.
//!
//! cargo run --release --example bench_tables -- [fig5|fig6|all] [jobs]

use commute::bench::{run_suite, RowStatus, Suite, Table};
use commute::commute::Scope;

fn main() -> commute::Result<()> {
    let mut args = std::env::args().skip(1);
    let table = match args.next().as_deref() {
        Some("fig5") => Some(Table::Fig5),
        Some("fig6") => Some(Table::Fig6),
        _ => None,
    };
    let jobs = args.next().and_then(|j| j.parse().ok()).unwrap_or(0);
    let suite = Suite::from_env()?;
    let run = run_suite(&suite, table, jobs, Scope::Reachable)?;
    for r in &run.results {
        let got = r.verdict.as_ref().map(|v| v.kind.to_string()).unwrap_or_else(|| "-".into());
        let ms = r.verdict.as_ref().map(|v| v.stats.wall_ms).unwrap_or(0);
        let status = match &r.status {
            RowStatus::Match => "ok".to_string(),
            RowStatus::Mismatch => "MISMATCH".to_string(),
            RowStatus::Skipped { reason } => format!("skipped: {reason}"),
            RowStatus::Error { message } => format!("error: {message}"),
        };
        println!("{:<70} exp {} got {:<12} {:>6}ms  {status}", r.row.label(), r.row.expected.mark(), got, ms);
    }
    println!("{}/{} rows match, {} skipped, {} ms", run.matched(), run.ran(), run.skipped(), run.wall_ms);
    Ok(())
}
