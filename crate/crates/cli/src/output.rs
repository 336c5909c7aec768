//! CSV emission for Monte Carlo outputs and the stdout summary table.
//! All files are deterministic; wall-clock numbers go to stdout only.

use std::fmt::Write as _;
use std::path::Path;

use ergm_core::montecarlo::{histogram, EpsPathEntry, EtaPathEntry, McOutput};
use ergm_core::Result;

pub fn write_summary_csv(out: &McOutput, path: &Path) -> Result<()> {
    let mut text = String::from(
        "estimator,param,truth,count,failed,bias,mean,median,mad,se,q05,q95,\
         sign_recovery_pct,outlier_count,trimmed_mean,trimmed_bias,trimmed_se\n",
    );
    for row in &out.summary {
        let s = &row.summary;
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.estimator,
            s.param_index + 1,
            s.truth,
            s.count,
            row.failed,
            s.bias,
            s.mean,
            s.median,
            s.mad,
            s.se,
            s.q05,
            s.q95,
            s.sign_recovery_pct,
            s.outlier_count,
            s.trimmed_mean,
            s.trimmed_bias,
            s.trimmed_se
        )
        .expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_replications_csv(out: &McOutput, d: usize, path: &Path) -> Result<()> {
    let mut header = String::from("replication,estimator");
    for k in 1..=d {
        write!(header, ",theta0_{k}").expect("string write");
    }
    for k in 1..=d {
        write!(header, ",theta_hat_{k}").expect("string write");
    }
    header.push_str(",ok,iterations,graph_density,final_F,final_q_hat,flags\n");
    let mut text = header;
    for r in &out.replications {
        let mut line = format!("{},{}", r.replication, r.estimator);
        for v in &r.theta0 {
            write!(line, ",{v}").expect("string write");
        }
        for v in &r.theta_hat {
            write!(line, ",{v}").expect("string write");
        }
        let fmt_opt = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v}"));
        writeln!(
            text,
            "{line},{},{},{},{},{},{}",
            r.ok,
            r.iterations,
            r.graph_density,
            fmt_opt(r.final_f),
            fmt_opt(r.final_q),
            r.flags.join(";")
        )
        .expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One `hist_theta_<k>.csv` per parameter: binned counts per estimator.
pub fn write_histograms(out: &McOutput, d: usize, bins: usize, dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let estimators: Vec<&str> = {
        let mut seen = Vec::new();
        for r in &out.replications {
            if !seen.contains(&r.estimator) {
                seen.push(r.estimator);
            }
        }
        seen
    };
    for k in 0..d {
        let name = format!("hist_theta_{}.csv", k + 1);
        let mut text = String::from("estimator,bin_lo,bin_hi,count\n");
        for est in &estimators {
            let values: Vec<f64> = out
                .replications
                .iter()
                .filter(|r| r.estimator == *est && r.ok)
                .map(|r| r.theta_hat[k])
                .collect();
            for (lo, hi, count) in histogram(&values, bins) {
                writeln!(text, "{est},{lo},{hi},{count}").expect("string write");
            }
        }
        std::fs::write(dir.join(&name), text)?;
        names.push(name);
    }
    Ok(names)
}

/// Figure-5/6 data: per-ε mean and variance of each parameter's estimates.
pub fn write_eps_path_csv(entries: &[EpsPathEntry], path: &Path) -> Result<()> {
    let mut text = String::from("epsilon,param,mean,variance\n");
    for e in entries {
        for (k, (mean, var)) in e.param_mean_var.iter().enumerate() {
            writeln!(text, "{},{},{},{}", e.epsilon, k + 1, mean, var).expect("string write");
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Figure-7/8 data: per-η parameter moments plus mean terminal F and q̂.
pub fn write_eta_path_csv(entries: &[EtaPathEntry], path: &Path) -> Result<()> {
    let mut text = String::from("eta,param,mean,variance,mean_terminal_F,mean_terminal_q_hat\n");
    for e in entries {
        for (k, (mean, var)) in e.param_mean_var.iter().enumerate() {
            writeln!(
                text,
                "{},{},{},{},{},{}",
                e.eta,
                k + 1,
                mean,
                var,
                e.mean_terminal_f,
                e.mean_terminal_q
            )
            .expect("string write");
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Full summary rows across a sweep, with the grid value in front.
pub fn write_sweep_summary_csv(
    label: &str,
    rows: &[(f64, &McOutput)],
    path: &Path,
) -> Result<()> {
    let mut text = format!(
        "{label},estimator,param,truth,count,failed,bias,mean,median,mad,se,q05,q95,\
         sign_recovery_pct,outlier_count\n"
    );
    for (value, out) in rows {
        for row in &out.summary {
            let s = &row.summary;
            writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                value,
                row.estimator,
                s.param_index + 1,
                s.truth,
                s.count,
                row.failed,
                s.bias,
                s.mean,
                s.median,
                s.mad,
                s.se,
                s.q05,
                s.q95,
                s.sign_recovery_pct,
                s.outlier_count
            )
            .expect("string write");
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Table-shaped stdout report: one block per estimator with the per-parameter
/// summary lines plus mean wall time.
pub fn print_summary_table(out: &McOutput) {
    let mut current = "";
    for row in &out.summary {
        if row.estimator != current {
            current = row.estimator;
            println!("\n== {current} (failed replications: {}) ==", row.failed);
            println!(
                "{:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10} {:>9}",
                "param", "bias", "mean", "median", "MAD", "se", "sign_rec%", "outliers"
            );
        }
        let s = &row.summary;
        println!(
            "{:>7} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10.2} {:>9}",
            format!("theta_{}", s.param_index + 1),
            s.bias,
            s.mean,
            s.median,
            s.mad,
            s.se,
            s.sign_recovery_pct,
            s.outlier_count
        );
        if s.param_index == 0 {
            println!("        mean runtime: {:.3} s per replication", row.mean_runtime_s);
        }
    }
    println!();
}
