//! `tcomp`: benchmark harness for low-tubal-rank tensor completion.
//!
//! Subcommands: `gen` (synthetic instances), `complete` (recover a sampled
//! tensor or image), `phase` (success-fraction sweeps over `(n, m)` grids),
//! `tsvd` (rank inspection and truncation), `metrics` (Res / PSNR).
//!
//! Results go to stdout as JSON and artifacts to files; both are
//! deterministic given the same seed. Wall-clock timings are printed on
//! stderr so they never perturb comparable outputs.

mod io;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};

use tcomp_core::{
    gen_synthetic, image_complete, metrics_psnr, metrics_res, multi_rank_of, rcg_complete_with_truth,
    run_phase_diagram, truncate_h_r, DenseTensor3, InitScheme, MultiRank, PhaseMGrid, PhaseSpec,
    SamplingSet, SolverConfig, SolverReport,
};

#[derive(Parser)]
#[command(name = "tcomp", version, about = "Low-tubal-rank tensor completion benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InitArg {
    /// Hard-thresholded start from the rescaled observations.
    Hard,
    /// Resampled gradient descent with trimming.
    Resample,
}

#[derive(Args)]
struct SolverArgs {
    /// Target multi-rank: a single tubal rank ("2") or per-slice list ("29,5,1").
    #[arg(long)]
    rank: String,
    /// Initialization scheme.
    #[arg(long, value_enum, default_value = "hard")]
    init: InitArg,
    /// Refinement steps L of the resampling scheme (splits the samples
    /// into L + 1 groups).
    #[arg(long, default_value_t = 10)]
    resample_steps: usize,
    /// Trimming incoherence bound; derived from the start when omitted.
    #[arg(long)]
    mu: Option<f64>,
    /// Restart threshold on direction overlap.
    #[arg(long, default_value_t = 0.1)]
    k1: f64,
    /// Restart threshold on residual growth.
    #[arg(long, default_value_t = 1.0)]
    k2: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Stop when the relative iterate change falls below this.
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
    /// Relative error under which a trial counts as recovered.
    #[arg(long, default_value_t = 1e-3)]
    success_tol: f64,
}

impl SolverArgs {
    fn config(&self, dims: (usize, usize, usize), seed: u64) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(parse_rank(&self.rank, dims.2)?);
        cfg.k1 = self.k1;
        cfg.k2 = self.k2;
        cfg.max_iters = self.max_iters;
        cfg.rel_change_tol = self.rel_tol;
        cfg.success_res_tol = self.success_tol;
        cfg.seed = seed;
        cfg.init = match self.init {
            InitArg::Hard => InitScheme::HardThreshold,
            InitArg::Resample => InitScheme::ResampleTrim {
                steps: self.resample_steps,
                mu: self.mu,
            },
        };
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic n x n x n tensor of a given tubal rank.
    Gen {
        #[arg(long)]
        n: usize,
        /// Tubal rank of the generated tensor.
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output T3B path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a tensor (or image) and recover it on the fixed-rank manifold.
    Complete {
        /// Ground-truth tensor (.t3b) or image (.ppm).
        #[arg(long)]
        input: PathBuf,
        /// Recovered tensor/image output path (.t3b or .ppm).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampling ratio in (0, 1].
        #[arg(long)]
        sr: Option<f64>,
        /// Absolute number of draws (overrides --sr).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Reuse a previously exported sampling set (.omb).
        #[arg(long)]
        omega_in: Option<PathBuf>,
        /// Export the sampling set (.csv or .omb, by extension).
        #[arg(long)]
        omega_out: Option<PathBuf>,
        /// Write the per-iteration trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Score against this tensor instead of the input.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Sweep success fractions over an (n, m) grid of synthetic instances.
    Phase {
        /// Tubal rank of the synthetic instances.
        #[arg(long)]
        rank: usize,
        /// Comma-separated n values (default 20,30,...,100).
        #[arg(long)]
        n_grid: Option<String>,
        /// Comma-separated sampling ratios (default 0.05,0.10,...,0.60).
        #[arg(long)]
        sr_grid: Option<String>,
        /// Comma-separated absolute m values (overrides --sr-grid).
        #[arg(long)]
        m_grid: Option<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cell grid as `n,m,success_fraction` CSV.
        #[arg(long)]
        out_csv: PathBuf,
        /// Grayscale raster of the grid (black 0%, white 100%).
        #[arg(long)]
        out_pgm: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-3)]
        success_tol: f64,
    },
    /// Inspect the transformed multi-rank of a tensor, optionally truncating.
    Tsvd {
        #[arg(long)]
        input: PathBuf,
        /// Relative tolerance for rank detection.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Truncate to this multi-rank and write --out.
        #[arg(long)]
        rank: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Res and PSNR between a recovered tensor and the truth.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn parse_rank(text: &str, n3: usize) -> Result<MultiRank> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad rank component {p:?}")))
        .collect::<Result<_>>()?;
    let rank = match parts.as_slice() {
        [r] => MultiRank::uniform(*r, n3),
        _ if parts.len() == n3 => MultiRank::new(parts),
        _ => bail!("rank list has {} entries but the tensor has n3 = {n3}", parts.len()),
    };
    Ok(rank)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    text.split(',')
        .map(|p| p.trim().parse::<T>().with_context(|| format!("bad {what} entry {p:?}")))
        .collect()
}

fn read_tensor_auto(path: &Path) -> Result<(DenseTensor3, bool)> {
    let is_image = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
    let t = if is_image { io::read_ppm(path)? } else { io::read_t3b(path)? };
    Ok((t, is_image))
}

fn write_tensor_auto(path: &Path, t: &DenseTensor3) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
        io::write_ppm(path, t)
    } else {
        io::write_t3b(path, t)
    }
}

fn report_summary(rep: &SolverReport) -> serde_json::Value {
    json!({
        "iterations": rep.iterations,
        "converged": rep.converged,
        "restarts": rep.restarts.len(),
        "rank_drop": rep.rank_drop,
        "alpha_fallbacks": rep.alpha_fallbacks.len(),
        "final_multi_rank": rep.final_multi_rank.ranks(),
        "res": rep.res,
    })
}

fn print_timing(rep: &SolverReport) {
    eprintln!(
        "timing: init {:.3}s solve {:.3}s total {:.3}s",
        rep.init_secs,
        rep.solve_secs,
        rep.init_secs + rep.solve_secs
    );
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Gen { n, rank, seed, out } => {
            if rank > n {
                bail!("rank {rank} exceeds n = {n}");
            }
            let t = gen_synthetic(n, rank, seed);
            io::write_t3b(&out, &t)?;
            println!(
                "{}",
                json!({
                    "dims": [n, n, n],
                    "tubal_rank": rank,
                    "seed": seed,
                    "fro_norm": tcomp_core::fro_norm(&t),
                    "out": out,
                })
            );
        }

        Command::Complete {
            input,
            out,
            sr,
            m,
            seed,
            solver,
            omega_in,
            omega_out,
            trace,
            truth,
        } => {
            let (data, is_image) = read_tensor_auto(&input)?;
            let dims = data.dims();
            let cfg = solver.config(dims, seed)?;

            if is_image {
                let sr = sr.context("--sr is required for image completion")?;
                if m.is_some() || omega_in.is_some() || omega_out.is_some() {
                    bail!("--m/--omega-in/--omega-out apply to tensor inputs only");
                }
                let result = image_complete(&data, &cfg.target_rank, sr, &cfg, seed)?;
                if let Some(out) = &out {
                    write_tensor_auto(out, &result.recovered)?;
                }
                if let Some(trace) = &trace {
                    io::write_trace_jsonl(trace, &result.report.trace)?;
                }
                print_timing(&result.report);
                println!(
                    "{}",
                    json!({
                        "mode": "image",
                        "dims": [dims.0, dims.1, dims.2],
                        "sr": sr,
                        "seed": seed,
                        "psnr": result.psnr,
                        "report": report_summary(&result.report),
                        "out": out,
                    })
                );
                return Ok(());
            }

            let omega = match (&omega_in, m, sr) {
                (Some(path), _, _) => {
                    let set = io::read_omb(path)?;
                    if set.dims() != dims {
                        bail!("sampling set dims {:?} do not match tensor {:?}", set.dims(), dims);
                    }
                    set
                }
                (None, Some(m), _) => SamplingSet::sample(dims, m, seed),
                (None, None, Some(sr)) => {
                    if !(sr > 0.0 && sr <= 1.0) {
                        bail!("--sr must lie in (0, 1]");
                    }
                    let m = ((sr * (dims.0 * dims.1 * dims.2) as f64).round() as usize).max(1);
                    SamplingSet::sample(dims, m, seed)
                }
                (None, None, None) => bail!("one of --sr, --m or --omega-in is required"),
            };

            let truth_tensor = match &truth {
                Some(path) => Some(io::read_t3b(path)?),
                None => None,
            };
            let truth_ref = truth_tensor.as_ref().unwrap_or(&data);

            let rep = rcg_complete_with_truth(&data, &omega, &cfg, Some(truth_ref))?;
            if let Some(out) = &out {
                write_tensor_auto(out, &rep.recovered)?;
            }
            if let Some(trace) = &trace {
                io::write_trace_jsonl(trace, &rep.trace)?;
            }
            if let Some(omega_out) = &omega_out {
                match omega_out.extension().and_then(|e| e.to_str()) {
                    Some("csv") => io::write_omega_csv(omega_out, &omega)?,
                    Some("omb") => io::write_omb(omega_out, &omega)?,
                    _ => bail!("--omega-out must end in .csv or .omb"),
                }
            }
            print_timing(&rep);
            let psnr = metrics_psnr(&rep.recovered, truth_ref).ok();
            println!(
                "{}",
                json!({
                    "mode": "tensor",
                    "dims": [dims.0, dims.1, dims.2],
                    "m": omega.len(),
                    "max_multiplicity": omega.max_multiplicity(),
                    "seed": seed,
                    "psnr": psnr,
                    "report": report_summary(&rep),
                    "out": out,
                })
            );
        }

        Command::Phase {
            rank,
            n_grid,
            sr_grid,
            m_grid,
            trials,
            seed,
            out_csv,
            out_pgm,
            max_iters,
            success_tol,
        } => {
            let mut spec = PhaseSpec::new(rank);
            if let Some(n_grid) = &n_grid {
                spec.n_grid = parse_list(n_grid, "n grid")?;
            }
            match (&m_grid, &sr_grid) {
                (Some(ms), _) => spec.m_grid = PhaseMGrid::Counts(parse_list(ms, "m grid")?),
                (None, Some(srs)) => spec.m_grid = PhaseMGrid::Ratios(parse_list(srs, "sr grid")?),
                (None, None) => {}
            }
            spec.trials = trials;
            spec.base_seed = seed;
            spec.solver.max_iters = max_iters;
            spec.solver.success_res_tol = success_tol;

            let started = std::time::Instant::now();
            let grid = run_phase_diagram(&spec)?;
            eprintln!("timing: sweep {:.3}s", started.elapsed().as_secs_f64());
            io::write_text(&out_csv, &grid.to_csv())?;
            if let Some(pgm) = &out_pgm {
                io::write_bytes(pgm, &grid.to_pgm())?;
            }
            println!(
                "{}",
                json!({
                    "tubal_rank": rank,
                    "trials": trials,
                    "seed": seed,
                    "cells": grid.cells,
                    "out_csv": out_csv,
                    "out_pgm": out_pgm,
                })
            );
        }

        Command::Tsvd { input, tol, rank, out } => {
            let t = io::read_t3b(&input)?;
            let detected = multi_rank_of(&t, tol)?;
            let mut payload = json!({
                "dims": [t.dims().0, t.dims().1, t.dims().2],
                "tol": tol,
                "multi_rank": detected.ranks(),
                "tubal_rank": detected.tubal(),
                "spectral_norm": tcomp_core::spectral_norm(&t),
            });
            if let Some(rank) = &rank {
                let target = parse_rank(rank, t.dims().2)?;
                let truncated = truncate_h_r(&t, &target)?;
                let err = metrics_res(&truncated, &t).unwrap_or(0.0);
                if let Some(out) = &out {
                    io::write_t3b(out, &truncated)?;
                }
                payload["truncated_to"] = json!(target.ranks());
                payload["truncation_res"] = json!(err);
                payload["out"] = json!(out);
            }
            println!("{payload}");
        }

        Command::Metrics { input, truth } => {
            let x = io::read_t3b(&input)?;
            let t = io::read_t3b(&truth)?;
            println!(
                "{}",
                json!({
                    "res": metrics_res(&x, &t)?,
                    "psnr": metrics_psnr(&x, &t)?,
                })
            );
        }
    }
    Ok(())
}
