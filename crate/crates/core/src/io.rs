//! File formats: adjacency/edge-list CSV for graphs, a packed multi-sample
//! format, trace CSV, and result JSON.
//!
//! Everything written here is deterministic for a fixed input; wall-clock
//! measurements never reach these files.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::bilevel::{EstimationResult, TraceRow};
use crate::exact::pair_order;
use crate::stats::Graph;
use crate::{Error, Result};

/// n rows of comma-separated 0/1.
pub fn write_adjacency_csv(g: &Graph, path: &Path) -> Result<()> {
    let n = g.n();
    let mut out = String::with_capacity(n * (2 * n + 1));
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            out.push(if g.has_edge(i, j) { '1' } else { '0' });
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_adjacency_csv(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            match cell.trim() {
                "0" => row.push(0),
                "1" => row.push(1),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 0/1, found `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("adjacency rows have inconsistent lengths".into()));
    }
    let mut adj = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            adj[[i, j]] = v;
        }
    }
    Graph::from_adjacency(adj)
}

/// Undirected edge list with header `i,j`, 0-based, one row per edge i < j.
pub fn write_edge_list_csv(g: &Graph, path: &Path) -> Result<()> {
    let mut out = String::from("i,j\n");
    for i in 0..g.n() {
        for j in (i + 1)..g.n() {
            if g.has_edge(i, j) {
                out.push_str(&format!("{i},{j}\n"));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// `n` may be supplied when trailing nodes are isolated; otherwise it is
/// inferred as the largest index plus one.
pub fn read_edge_list_csv(path: &Path, n: Option<usize>) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut max_idx = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line == "i,j") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 1)))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let i = parse(parts.next())?;
        let j = parse(parts.next())?;
        max_idx = max_idx.max(i).max(j);
        edges.push((i, j));
    }
    let inferred = if edges.is_empty() { 0 } else { max_idx + 1 };
    let n = n.unwrap_or(inferred);
    Graph::from_edges(n, &edges)
}

/// The graph writer emits both formats next to each other:
/// `<stem>.adj.csv` and `<stem>.edges.csv`.
pub fn write_graph_files(g: &Graph, dir: &Path, stem: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    fs::create_dir_all(dir)?;
    let adj = dir.join(format!("{stem}.adj.csv"));
    let edges = dir.join(format!("{stem}.edges.csv"));
    write_adjacency_csv(g, &adj)?;
    write_edge_list_csv(g, &edges)?;
    Ok((adj, edges))
}

/// Read a graph file, detecting the format from the first line: an `i,j`
/// header means edge list, otherwise adjacency rows.
pub fn read_graph_auto(path: &Path, n: Option<usize>) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim() == "i,j" {
        read_edge_list_csv(path, n)
    } else {
        read_adjacency_csv(path)
    }
}

/// Packed run file: one adjacency bitmap per line over the upper triangle in
/// row-major pair order, after a header recording n, θ, and the seed.
pub fn write_packed_samples(
    samples: &[Graph],
    theta: &[f64],
    seed: u64,
    burn_in: u64,
    thinning: u64,
    path: &Path,
) -> Result<()> {
    let n = samples.first().map_or(0, Graph::n);
    let theta_csv: Vec<String> = theta.iter().map(|v| format!("{v}")).collect();
    let mut out = format!(
        "# packed-samples n={n} theta={} seed={seed} burn_in={burn_in} thinning={thinning}\n",
        theta_csv.join(",")
    );
    let pairs = pair_order(n);
    for g in samples {
        for &(i, j) in &pairs {
            out.push(if g.has_edge(i, j) { '1' } else { '0' });
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_packed_samples(path: &Path) -> Result<(Vec<Graph>, usize)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty packed file".into()))?;
    let n: usize = header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("n="))
        .ok_or_else(|| Error::Parse("packed header lacks n=".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad n in packed header: {e}")))?;
    let pairs = pair_order(n);
    let mut samples = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.len() != pairs.len() {
            return Err(Error::Parse(format!(
                "bitmap length {} does not match {} dyads",
                line.len(),
                pairs.len()
            )));
        }
        let mut g = Graph::empty(n);
        for (b, ch) in line.chars().enumerate() {
            match ch {
                '1' => {
                    let (i, j) = pairs[b];
                    g.set_dyad(i, j, true);
                }
                '0' => {}
                other => return Err(Error::Parse(format!("bad bitmap char `{other}`"))),
            }
        }
        samples.push(g);
    }
    Ok((samples, n))
}

/// Trace CSV with columns t, theta_1..theta_d, F, q_hat, lambda,
/// delta_norm_sq, K_t, Phi_t, and a trailing method column when given.
pub fn write_trace_csv(rows: &[TraceRow], d: usize, method: Option<&str>, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let mut header = String::from("t");
    for k in 1..=d {
        header.push_str(&format!(",theta_{k}"));
    }
    header.push_str(",F,q_hat,lambda,delta_norm_sq,K_t,Phi_t");
    if method.is_some() {
        header.push_str(",method");
    }
    writeln!(file, "{header}")?;
    for row in rows {
        let mut line = format!("{}", row.t);
        for v in &row.theta {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(
            ",{},{},{},{},{},{}",
            row.f_value, row.q_hat, row.lambda, row.delta_norm_sq, row.stationarity, row.energy
        ));
        if let Some(m) = method {
            line.push_str(&format!(",{m}"));
        }
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// JSON view of an estimation result. Wall-clock fields are omitted so the
/// file is reproducible; the trace goes to CSV, not here.
pub fn result_json(result: &EstimationResult) -> serde_json::Value {
    let mu = result.mu_final.as_ref().map(|mf| {
        let n = mf.n();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| mf.matrix()[[i, j]]).collect();
            rows.push(row);
        }
        serde_json::json!({ "n": n, "zeta": mf.zeta(), "mu": rows })
    });
    serde_json::json!({
        "method": result.method,
        "theta_hat": result.theta_hat,
        "iterations": result.iterations,
        "termination": result.termination,
        "std_errors": result.std_errors,
        "flags": {
            "nonfinite": result.flags.nonfinite,
            "separation": result.flags.separation,
            "degenerate_sampling": result.flags.degenerate_sampling,
            "line_search_failures": result.flags.line_search_failures,
            "messages": result.flags.messages,
        },
        "inner_iterations": result.inner_iterations,
        "final_F": result.final_f(),
        "final_q_hat": result.final_q_hat(),
        "mu_final": mu,
    })
}

pub fn write_result_json(result: &EstimationResult, path: &Path) -> Result<()> {
    let value = result_json(result);
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Parse(format!("serializing result: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
