use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sinn_core::benchmark::variant_grad_check;
use sinn_core::gradcheck::{BlockCheck, GradCheckOptions};
use sinn_core::Variant;

use crate::config::parse_variant;
use crate::error::{write_text, CliError, Result};

/// Compare analytic gradients with central differences on seeded toy graphs.
#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// Variants to check (comma separated).
    #[arg(long, value_parser = parse_variant, value_delimiter = ',',
          default_value = "logistic,binn,sinn,bilstm,silstm")]
    variants: Vec<Variant>,
    /// Unrolled frames for temporal variants.
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Perturb the analytic gradient so the check must fail.
    #[arg(long, hide = true)]
    corrupt: bool,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct VariantResult {
    variant: &'static str,
    frames: usize,
    passed: bool,
    max_rel_error: f64,
    blocks: Vec<BlockCheck>,
}

#[derive(Serialize)]
struct Report {
    format: &'static str,
    seed: u64,
    tolerance: f64,
    step: f64,
    passed: bool,
    variants: Vec<VariantResult>,
}

pub fn run(args: GradCheckArgs) -> Result<()> {
    if !(args.tolerance > 0.0) || !(args.step > 0.0) {
        return Err(CliError::usage("tolerance and step must be positive"));
    }
    if args.frames == 0 {
        return Err(CliError::usage("frames must be at least 1"));
    }
    let opts = GradCheckOptions { step: args.step, tolerance: args.tolerance, corrupt: args.corrupt };
    let mut results = Vec::new();
    for &v in &args.variants {
        let r = variant_grad_check(v, args.seed, args.frames, &opts)?;
        eprintln!("{:<8} {} max_rel_error {:.3e}", v.name(), if r.passed { "PASS" } else { "FAIL" }, r.max_rel_error);
        results.push(VariantResult {
            variant: v.name(),
            frames: if v.is_temporal() { args.frames } else { 1 },
            passed: r.passed,
            max_rel_error: r.max_rel_error,
            blocks: r.blocks,
        });
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.variant).collect();
    let report = Report {
        format: "sinn-gradcheck/1",
        seed: args.seed,
        tolerance: args.tolerance,
        step: args.step,
        passed: failed.is_empty(),
        variants: results,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.report {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::GradCheck(failed.join(", ")))
    }
}
