//! Parallel driver for the structure comparison and its output tables.

use std::fmt::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use siren_core::experiment::{run_cell, summarize, CellResult, ComparisonConfig, ExperimentError, SummaryRow};
use siren_core::graph::BayesNet;

use crate::hexfloat::format_hex;

/// Runs every cell on up to `jobs` threads. Cells are independent and
/// seeded by their coordinates, so the result does not depend on `jobs`.
pub fn run_comparison(g: &BayesNet, cfg: &ComparisonConfig, jobs: usize) -> Result<Vec<CellResult>, ExperimentError> {
    let cells = cfg.cells();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CellResult, ExperimentError>>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&id) = cells.get(i) else { break };
                let result = run_cell(g, cfg, id);
                let failed = result.is_err();
                slots.lock().unwrap()[i] = Some(result);
                if failed {
                    next.store(cells.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(cells.len());
    for slot in slots.into_inner().unwrap() {
        match slot {
            Some(Ok(c)) => out.push(c),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    Ok(out)
}

pub const RESULT_COLUMNS: [&str; 10] = ["regime", "n_train", "variant", "run", "selected_lr", "train_loss", "epochs", "nll", "re", "neg_elbo"];

/// Per-cell table: a header, a `#` provenance line, then one row per cell
/// with hex floats.
pub fn results_tsv(g: &BayesNet, cfg: &ComparisonConfig, cells: &[CellResult]) -> String {
    let mut out = RESULT_COLUMNS.join("\t");
    out.push('\n');
    writeln!(out, "# gbn={} seed={} runs={}", g.name(), cfg.seed, cfg.runs).unwrap();
    for c in cells {
        let row = [
            c.id.regime.to_string(),
            c.n_train.to_string(),
            c.id.variant.to_string(),
            c.id.run.to_string(),
            format_hex(c.selected_lr),
            format_hex(c.train_loss),
            c.epochs.to_string(),
            format_hex(c.nll),
            format_hex(c.re),
            format_hex(c.neg_elbo),
        ];
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Mean ± sd per regime and variant, with the best NLL in each regime
/// marked.
pub fn summary_text(g: &BayesNet, rows: &[SummaryRow]) -> String {
    let mut out = format!("network {} ({} nodes, D={}, K={})\n", g.name(), g.len(), g.observed_count(), g.latent_count());
    let mut regimes: Vec<usize> = rows.iter().map(|r| r.regime).collect();
    regimes.dedup();
    for regime in regimes {
        let group: Vec<&SummaryRow> = rows.iter().filter(|r| r.regime == regime).collect();
        let best = group.iter().map(|r| r.nll_mean).fold(f64::INFINITY, f64::min);
        writeln!(out, "\n{regime}x|G| ({} training rows)", group[0].n_train).unwrap();
        writeln!(out, "  {:<8} {:>18} {:>18} {:>18}", "model", "NLL", "RE", "-ELBO").unwrap();
        for r in group {
            let mark = if r.nll_mean == best { " *" } else { "" };
            writeln!(
                out,
                "  {:<8} {:>10.3} ± {:<5.3} {:>10.3} ± {:<5.3} {:>10.3} ± {:<5.3}{mark}",
                r.variant.as_str(),
                r.nll_mean,
                r.nll_sd,
                r.re_mean,
                r.re_sd,
                r.neg_elbo_mean,
                r.neg_elbo_sd
            )
            .unwrap();
        }
    }
    out
}

/// Summary rows as a tab-separated table with hex floats.
pub fn summary_tsv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("regime\tn_train\tvariant\tnll_mean\tnll_sd\tre_mean\tre_sd\tneg_elbo_mean\tneg_elbo_sd\n");
    for r in rows {
        let f = [r.nll_mean, r.nll_sd, r.re_mean, r.re_sd, r.neg_elbo_mean, r.neg_elbo_sd].map(format_hex);
        writeln!(out, "{}\t{}\t{}\t{}", r.regime, r.n_train, r.variant, f.join("\t")).unwrap();
    }
    out
}

pub fn summarize_cells(cfg: &ComparisonConfig, cells: &[CellResult]) -> Vec<SummaryRow> {
    summarize(cfg, cells)
}
