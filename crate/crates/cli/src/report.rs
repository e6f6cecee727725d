//! `appcast report`: merge finished runs over the same event log into
//! side-by-side comparison tables.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use appcast_core::eval::{
    compute_metrics, write_metrics_csv, write_ranks_csv, write_windows_csv, MetricsReport,
};

use crate::out::{fmt_opt, write_atomic};
use crate::run::load_run;

#[derive(Args)]
pub struct ReportArgs {
    /// Finished run directory; repeat to compare several.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    /// Output directory for the merged tables.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn exec(args: ReportArgs) -> Result<()> {
    let mut loaded = Vec::new();
    for dir in &args.runs {
        let run =
            load_run(dir).with_context(|| format!("loading run {}", dir.display()))?;
        if run.trace.rounds.is_empty() {
            bail!("run {} holds no prediction rounds", dir.display());
        }
        loaded.push(run);
    }
    let first = &loaded[0].config.events_sha256;
    for (dir, run) in args.runs.iter().zip(&loaded) {
        if &run.config.events_sha256 != first {
            bail!(
                "runs replay different event logs: {} and {} disagree",
                args.runs[0].display(),
                dir.display()
            );
        }
    }

    let reports: Vec<MetricsReport> =
        loaded.iter().map(|run| compute_metrics(&run.trace)).collect();
    let refs: Vec<&MetricsReport> = reports.iter().collect();

    let mut metrics = Vec::new();
    write_metrics_csv(&mut metrics, &refs).context("rendering metrics.csv")?;
    write_atomic(&args.out_dir.join("metrics.csv"), &metrics)?;

    let mut windows = Vec::new();
    write_windows_csv(&mut windows, &refs).context("rendering windows.csv")?;
    write_atomic(&args.out_dir.join("windows.csv"), &windows)?;

    let mut ranks = Vec::new();
    write_ranks_csv(&mut ranks, &refs).context("rendering ranks.csv")?;
    write_atomic(&args.out_dir.join("ranks.csv"), &ranks)?;

    let mut comparison =
        String::from("algorithm,devices,rounds,precision,per_app_precision,cumulative_auc\n");
    println!(
        "{:<10} {:>8} {:>9} {:>10} {:>10} {:>8}",
        "algorithm", "devices", "rounds", "precision", "per-app", "cum-AUC"
    );
    for report in &reports {
        let rounds: u64 = report.devices.iter().map(|d| d.rounds_total).sum();
        let f = &report.fleet;
        comparison.push_str(&format!(
            "{},{},{},{},{},{}\n",
            report.kind,
            f.devices,
            rounds,
            csv_opt(f.precision),
            csv_opt(f.per_app_precision),
            csv_opt(f.cumulative_auc),
        ));
        println!(
            "{:<10} {:>8} {:>9} {:>10} {:>10} {:>8}",
            report.kind.as_str(),
            f.devices,
            rounds,
            fmt_opt(f.precision),
            fmt_opt(f.per_app_precision),
            fmt_opt(f.cumulative_auc),
        );
    }
    write_atomic(&args.out_dir.join("comparison.csv"), comparison.as_bytes())?;
    Ok(())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
