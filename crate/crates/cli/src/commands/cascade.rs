//! Cascade measures, their composed MMAR paths, and the geometric-time MSM
//! construction.

use std::path::PathBuf;

use clap::Args;

use levelmsm::cascades::{discretize_to_msm, mmar_compose};
use levelmsm::export::columns_to_csv;

use super::{output_dir, require_seed, write_text, Construction, ConstructionArgs};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[command(flatten)]
    pub construction: ConstructionArgs,
    /// Re-bin the measure onto this many equal cells.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Also write the composed path `sigma * B(Theta(t))`.
    #[arg(long)]
    pub compose: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(mut cfg: RunConfig, args: CascadeArgs) -> Result<(), CliError> {
    let seed = require_seed(args.seed.or(cfg.fit.seed), "the cascade")?;
    let c = &args.construction;
    let kind = c.kind()?;
    let dir = output_dir(&mut cfg, &args.out)?;

    if kind == Construction::Msm {
        let path = discretize_to_msm(&c.discretization()?, c.n, seed)?;
        let t: Vec<f64> = (1..=path.x.len()).map(|i| i as f64).collect();
        write_text(&dir.join("msm.csv"), &columns_to_csv(&["t", "x", "g"], &[&t, &path.x, &path.g])?)?;
        let renewals: Vec<String> = path.renewals.iter().map(|r| r.to_string()).collect();
        println!("steps: {}\nrenewals per level (slowest first): {}", c.n, renewals.join(" "));
        return Ok(());
    }

    let mut measure = c.measure(seed)?;
    if let Some(cells) = args.cells {
        measure = measure.regrid(cells)?;
    }
    let starts = &measure.boundaries[..measure.len()];
    let ends = &measure.boundaries[1..];
    write_text(
        &dir.join("cells.csv"),
        &columns_to_csv(&["start", "end", "mass"], &[starts, ends, &measure.masses])?,
    )?;
    if args.compose {
        // Separate stream from the measure so the path can be redrawn alone.
        let path = mmar_compose(&measure, c.sigma, seed.wrapping_add(1))?;
        write_text(&dir.join("path.csv"), &columns_to_csv(&["time", "value"], &[&path.times, &path.values])?)?;
    }
    let largest = measure.masses.iter().copied().fold(0.0, f64::max);
    println!(
        "cells: {}\ntotal mass: {:.12}\nlargest cell mass: {largest:.6e}",
        measure.len(),
        measure.total_mass()
    );
    Ok(())
}
