//! Benchmark protocols: synthetic instances, recovery metrics, phase
//! diagrams and the low-rank image completion experiment.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{fro_norm, tprod};
use crate::error::{Error, Result};
use crate::sampling::SamplingSet;
use crate::solver::{rcg_complete_with_truth, SolverConfig, SolverReport};
use crate::svd::{truncate_h_r, MultiRank};
use crate::tensor::DenseTensor3;

/// Deterministically derives a sub-seed from a base seed and a tag list
/// (splitmix64 finalizer over the folded tags).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E3779B97F4A7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    let mut acc = mix(base);
    for &t in tags {
        acc = mix(acc ^ mix(t));
    }
    acc
}

/// Random `n x n x n` tensor of tubal rank `r`: the product `S * W` of two
/// standard Gaussian factors, drawn from the seeded generator in storage
/// order (`S` first, then `W`).
pub fn gen_synthetic(n: usize, r: usize, seed: u64) -> DenseTensor3 {
    assert!(r <= n, "tubal rank cannot exceed n");
    if r == 0 {
        return DenseTensor3::zeros(n, n, n);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |dims: (usize, usize, usize)| {
        DenseTensor3::from_vec(
            dims,
            (0..dims.0 * dims.1 * dims.2)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        )
        .expect("length matches dims")
    };
    let s = fill((n, r, n));
    let w = fill((r, n, n));
    tprod(&s, &w).expect("conformable by construction")
}

/// Relative recovery error `||x - truth||_F / ||truth||_F`.
pub fn metrics_res(x: &DenseTensor3, truth: &DenseTensor3) -> Result<f64> {
    x.same_dims(truth, "metrics_res")?;
    let denom = fro_norm(truth);
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error against a zero truth is undefined".into(),
        ));
    }
    Ok(fro_norm(&(x - truth)) / denom)
}

/// PSNR in dB ceiling for an exact match.
pub const PSNR_CAP: f64 = 99.0;

/// Peak signal-to-noise ratio
/// `10 log10(n1 n2 n3 (max - min)^2 / ||x - truth||_F^2)`,
/// with max/min over the truth. Exact matches report the 99 dB sentinel.
pub fn metrics_psnr(x: &DenseTensor3, truth: &DenseTensor3) -> Result<f64> {
    x.same_dims(truth, "metrics_psnr")?;
    let diff_sq: f64 = x
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if diff_sq == 0.0 {
        return Ok(PSNR_CAP);
    }
    let (lo, hi) = truth
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range == 0.0 {
        return Err(Error::InvalidArgument(
            "PSNR against a constant truth is undefined".into(),
        ));
    }
    let n = truth.len() as f64;
    Ok(10.0 * (n * range * range / diff_sq).log10())
}

/// The `m` axis of a phase sweep: sampling ratios of `n^3`, or absolute counts.
#[derive(Debug, Clone, Serialize)]
pub enum PhaseMGrid {
    Ratios(Vec<f64>),
    Counts(Vec<usize>),
}

impl PhaseMGrid {
    /// Default grid from the synthetic protocol: `Sr in {0.05, ..., 0.60}`.
    pub fn default_ratios() -> Self {
        PhaseMGrid::Ratios((1..=12).map(|i| i as f64 * 0.05).collect())
    }

    pub fn m_values(&self, n: usize) -> Vec<usize> {
        match self {
            PhaseMGrid::Ratios(rs) => rs
                .iter()
                .map(|sr| ((sr * (n * n * n) as f64).round() as usize).max(1))
                .collect(),
            PhaseMGrid::Counts(ms) => ms.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PhaseMGrid::Ratios(v) => v.len(),
            PhaseMGrid::Counts(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Specification of one phase-diagram sweep.
#[derive(Debug, Clone)]
pub struct PhaseSpec {
    pub tubal_rank: usize,
    /// Default: `n in {20, 30, ..., 100}`.
    pub n_grid: Vec<usize>,
    pub m_grid: PhaseMGrid,
    pub trials: usize,
    pub base_seed: u64,
    /// Solver settings; `target_rank` is re-derived per cell as the uniform
    /// multi-rank of the cell's side length.
    pub solver: SolverConfig,
}

impl PhaseSpec {
    pub fn new(tubal_rank: usize) -> Self {
        PhaseSpec {
            tubal_rank,
            n_grid: (2..=10).map(|i| i * 10).collect(),
            m_grid: PhaseMGrid::default_ratios(),
            trials: 10,
            base_seed: 0,
            solver: SolverConfig::new(MultiRank::uniform(tubal_rank, 1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.m_grid.is_empty() {
            return Err(Error::InvalidArgument("empty phase grid".into()));
        }
        if let PhaseMGrid::Ratios(rs) = &self.m_grid {
            if rs.iter().any(|&sr| !(0.0..=1.0).contains(&sr) || sr == 0.0) {
                return Err(Error::InvalidArgument("sampling ratios must lie in (0, 1]".into()));
            }
        }
        for &n in &self.n_grid {
            if self.tubal_rank > n {
                return Err(Error::InvalidArgument(format!(
                    "tubal rank {} exceeds grid side {n}",
                    self.tubal_rank
                )));
            }
            if self.m_grid.m_values(n).iter().any(|&m| m == 0) {
                return Err(Error::InvalidArgument("grid needs at least one sample".into()));
            }
        }
        Ok(())
    }
}

/// One cell of a completed sweep.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseCell {
    pub n: usize,
    pub m: usize,
    pub successes: usize,
    pub trials: usize,
    pub success_fraction: f64,
}

/// Success fractions over the `(n, m)` grid.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseGrid {
    pub tubal_rank: usize,
    pub n_grid: Vec<usize>,
    pub m_columns: usize,
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    /// `n,m,success_fraction` rows in grid order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,success_fraction\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{}\n", c.n, c.m, c.success_fraction));
        }
        out
    }

    /// Binary PGM raster, one row per `n` (ascending top to bottom), one
    /// column per `m`-grid position; black = 0% recovery, white = 100%.
    pub fn to_pgm(&self) -> Vec<u8> {
        let w = self.m_columns;
        let h = self.n_grid.len();
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for row in 0..h {
            for col in 0..w {
                let c = &self.cells[row * w + col];
                out.push((c.success_fraction * 255.0).round() as u8);
            }
        }
        out
    }

    /// The row of cells for one `n`, in ascending `m` position order.
    pub fn row(&self, n: usize) -> Vec<&PhaseCell> {
        self.cells.iter().filter(|c| c.n == n).collect()
    }
}

/// Runs the sweep: `trials` seeded instances per `(n, m)` cell; a trial
/// succeeds when the relative recovery error beats the configured threshold.
/// Solver failures count as non-successes and never abort the sweep.
pub fn run_phase_diagram(spec: &PhaseSpec) -> Result<PhaseGrid> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for (ni, &n) in spec.n_grid.iter().enumerate() {
        for (mi, &m) in spec.m_grid.m_values(n).iter().enumerate() {
            for trial in 0..spec.trials {
                jobs.push((ni, n, mi, m, trial));
            }
        }
    }
    let outcomes: Vec<(usize, usize, bool)> = jobs
        .par_iter()
        .map(|&(ni, n, mi, m, trial)| {
            let success = phase_trial(spec, n, m, trial)
                .map(|rep| rep.res.is_some_and(|r| r < spec.solver.success_res_tol))
                .unwrap_or(false);
            (ni, mi, success)
        })
        .collect();

    let cols = spec.m_grid.len();
    let mut successes = vec![0usize; spec.n_grid.len() * cols];
    for (ni, mi, ok) in outcomes {
        if ok {
            successes[ni * cols + mi] += 1;
        }
    }
    let mut cells = Vec::with_capacity(successes.len());
    for (ni, &n) in spec.n_grid.iter().enumerate() {
        for (mi, &m) in spec.m_grid.m_values(n).iter().enumerate() {
            let s = successes[ni * cols + mi];
            cells.push(PhaseCell {
                n,
                m,
                successes: s,
                trials: spec.trials,
                success_fraction: s as f64 / spec.trials as f64,
            });
        }
    }
    Ok(PhaseGrid {
        tubal_rank: spec.tubal_rank,
        n_grid: spec.n_grid.clone(),
        m_columns: cols,
        cells,
    })
}

fn phase_trial(spec: &PhaseSpec, n: usize, m: usize, trial: usize) -> Result<SolverReport> {
    let tags = [n as u64, m as u64, trial as u64];
    let truth = gen_synthetic(n, spec.tubal_rank, derive_seed(spec.base_seed, &tags));
    let omega = SamplingSet::sample(
        (n, n, n),
        m,
        derive_seed(spec.base_seed, &[tags[0], tags[1], tags[2], 1]),
    );
    let mut cfg = spec.solver.clone();
    cfg.target_rank = MultiRank::uniform(spec.tubal_rank, n);
    cfg.seed = derive_seed(spec.base_seed, &[tags[0], tags[1], tags[2], 2]);
    rcg_complete_with_truth(&truth, &omega, &cfg, Some(&truth))
}

/// Outcome of the image completion protocol.
#[derive(Debug)]
pub struct ImageCompletionResult {
    pub recovered: DenseTensor3,
    /// The rank-truncated image the solver is measured against.
    pub truncated_truth: DenseTensor3,
    pub psnr: f64,
    pub res: f64,
    pub report: SolverReport,
}

/// Low-rank image completion: the ground truth is the input truncated to
/// multi-rank `r`; a fraction `sr` of entries (with replacement) is observed
/// and completed, and quality is scored against the truncated truth.
pub fn image_complete(
    image: &DenseTensor3,
    r: &MultiRank,
    sr: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<ImageCompletionResult> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling ratio {sr} not in (0, 1]")));
    }
    r.validate(image.dims())?;
    let truth = truncate_h_r(image, r)?;
    let (n1, n2, n3) = image.dims();
    let m = ((sr * (n1 * n2 * n3) as f64).round() as usize).max(1);
    let omega = SamplingSet::sample(image.dims(), m, seed);
    let mut cfg = cfg.clone();
    cfg.target_rank = r.clone();
    let report = rcg_complete_with_truth(&truth, &omega, &cfg, Some(&truth))?;
    let psnr = metrics_psnr(&report.recovered, &truth)?;
    let res = report.res.expect("truth was supplied");
    Ok(ImageCompletionResult {
        recovered: report.recovered.clone(),
        truncated_truth: truth,
        psnr,
        res,
        report,
    })
}
