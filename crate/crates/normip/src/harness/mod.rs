//! Monte-Carlo runner: seeded substreams, per-cell trial reports, sweeps
//! with CSV/JSON output, and the two lower-bound reduction pipelines.
//!
//! Seeds: trial t of cell c under master seed m uses
//! `sm(sm(sm(m) ^ c) ^ t)` where `sm` is the SplitMix64 output function,
//! feeding a ChaCha8 generator.

pub mod adversary;
pub mod instances;
pub mod stats;
pub mod verify;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use adversary::{adversarial_dual_search, adversarial_protocol_search, dual_candidates, DualCandidate};
pub use instances::{check_pair, decode_index_bit, gen_gap_hamming, gen_index_instance, random_dual_pair, GapHammingInstance, GapSide};

use crate::error::{Error, Result};
use crate::norms::{Exponent, NormSpec};
use crate::protocols::{lp_protocol, run_protocol, ProtocolSpec};
use crate::sparsifiers::{sparsify, weak_qnorm_estimate, SparsifierSpec};
use crate::vector::dot;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for (master, cell, trial).
pub fn mix_seed(master: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trial)
}

pub fn trial_rng(master: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, cell, trial))
}

/// Sizes the global rayon pool from NORMIP_THREADS if set. Returns the
/// thread count in effect.
pub fn init_threads() -> Result<usize> {
    if let Ok(s) = std::env::var("NORMIP_THREADS") {
        let n: usize = s.trim().parse().map_err(|_| Error::Parse(format!("NORMIP_THREADS = {s:?}")))?;
        if n == 0 {
            return Err(Error::InvalidParameter("NORMIP_THREADS must be positive".into()));
        }
        // a pool may already exist (tests, repeated calls); that is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the serialized protocol spec.
pub fn fingerprint(protocol: &ProtocolSpec) -> Result<String> {
    let json = serde_json::to_string(protocol)?;
    Ok(hex(&Sha256::digest(json.as_bytes())))
}

/// The first sparsifier found in a protocol tree (for the summary's s and D).
pub fn primary_sparsifier(protocol: &ProtocolSpec) -> Option<&SparsifierSpec> {
    match protocol {
        ProtocolSpec::OneWaySparsify(s) => Some(&s.sparsifier),
        ProtocolSpec::Swap(s) => primary_sparsifier(&s.inner),
        ProtocolSpec::MaxSplit(s) => primary_sparsifier(&s.inner_a),
        ProtocolSpec::HsumCompose(s) => Some(&s.h_sparsifier),
        ProtocolSpec::EmbedReduce(s) => primary_sparsifier(&s.inner),
        ProtocolSpec::VertexSample(_) => None,
    }
}

/// Error samples and accounting for one (protocol, v, w) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub cell: String,
    pub cell_id: u64,
    pub fingerprint: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub truth: f64,
    /// Z_t = estimate_t − ⟨v, w⟩
    pub z: Vec<f64>,
    pub success_rate: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_abs: f64,
    pub p95_abs: f64,
    pub bits: Vec<u64>,
    pub declared_bits: u64,
    pub sparsity: Vec<usize>,
    pub sample_count: Option<u64>,
    pub sparsity_cap: Option<u64>,
    /// Weak-ℓ₂ quasi-norm of the Z samples (≥ 100 samples only).
    pub weak2: Option<f64>,
    /// Kept out of the JSON so reports are byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrialReport {
    /// Checks the stored summaries against the raw samples.
    pub fn validate(&self) -> Result<()> {
        let t = self.z.len();
        if self.seeds.len() != t || self.bits.len() != t || self.sparsity.len() != t {
            return Err(Error::AuditFailed(format!("report {}: per-trial lists disagree in length", self.cell)));
        }
        let rate = stats::success_rate(&self.z, self.epsilon);
        if rate != self.success_rate {
            return Err(Error::AuditFailed(format!("report {}: success_rate {} but samples give {rate}", self.cell, self.success_rate)));
        }
        if let Some(b) = self.bits.iter().find(|b| **b > self.declared_bits) {
            return Err(Error::AuditFailed(format!("report {}: {b} bits exceed declared {}", self.cell, self.declared_bits)));
        }
        Ok(())
    }

    pub fn stderr(&self) -> f64 {
        stats::binomial_stderr(self.success_rate, self.z.len())
    }

    pub fn max_bits(&self) -> u64 {
        self.bits.iter().copied().max().unwrap_or(0)
    }
}

/// Runs `trials` seeded executions of `protocol` on a fixed (v, w).
pub fn run_trials(cell: &str, cell_id: u64, protocol: &ProtocolSpec, v: &[f64], w: &[f64], trials: usize, master_seed: u64) -> Result<TrialReport> {
    let start = Instant::now();
    let n = v.len();
    protocol.validate(n)?;
    let declared_bits = protocol.declared_cost(n)?;
    let truth = dot(v, w);
    let seeds: Vec<u64> = (0..trials as u64).map(|t| mix_seed(master_seed, cell_id, t)).collect();
    let runs = seeds
        .par_iter()
        .map(|s| {
            let out = run_protocol(protocol, v, w, &mut ChaCha8Rng::seed_from_u64(*s))?;
            Ok((out.estimate - truth, out.transcript.total_bits(), out.sparsity()))
        })
        .collect::<Result<Vec<_>>>()?;
    let z: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let epsilon = protocol.epsilon();
    let sp = primary_sparsifier(protocol);
    Ok(TrialReport {
        cell: cell.to_string(),
        cell_id,
        fingerprint: fingerprint(protocol)?,
        master_seed,
        seeds,
        n,
        epsilon,
        delta: protocol.delta(),
        truth,
        success_rate: stats::success_rate(&z, epsilon),
        mean: stats::mean(&z),
        variance: stats::variance(&z),
        mean_abs: stats::mean_abs(&z),
        p95_abs: stats::p95_abs(&z),
        weak2: if z.len() >= 100 { weak_qnorm_estimate(&z, 2.0).ok() } else { None },
        bits: runs.iter().map(|r| r.1).collect(),
        declared_bits,
        sparsity: runs.iter().map(|r| r.2).collect(),
        sample_count: sp.map(|s| s.sample_count),
        sparsity_cap: sp.map(|s| s.sparsity_cap),
        z,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn default_p() -> Exponent {
    Exponent::Finite(2.0)
}

fn default_probe_trials() -> usize {
    200
}

/// Where a cell's (v, w) comes from. Vectors are drawn once per cell from the
/// cell's instance substream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFamily {
    /// ℓ∞ index instance; random bits / index when not given.
    Index {
        n: usize,
        #[serde(default)]
        bits: Option<Vec<u8>>,
        #[serde(default)]
        index: Option<usize>,
    },
    GapHamming {
        k: usize,
        c: f64,
        #[serde(default = "default_p")]
        p: Exponent,
        #[serde(default)]
        side: Option<GapSide>,
    },
    RandomDualPair { spec: NormSpec, n: usize },
    /// Random v, then the worst w found among `budget` dual candidates.
    WorstCaseSearch {
        spec: NormSpec,
        n: usize,
        budget: usize,
        #[serde(default = "default_probe_trials")]
        probe_trials: usize,
    },
    Fixed { spec: NormSpec, v: Vec<f64>, w: Vec<f64> },
}

impl InstanceFamily {
    /// The norm whose unit ball v lives in.
    pub fn spec(&self) -> NormSpec {
        match self {
            InstanceFamily::Index { .. } => NormSpec::linf(),
            InstanceFamily::GapHamming { p, .. } => NormSpec::Lp { p: *p },
            InstanceFamily::RandomDualPair { spec, .. } | InstanceFamily::WorstCaseSearch { spec, .. } | InstanceFamily::Fixed { spec, .. } => spec.clone(),
        }
    }

    /// Draws (v, w) and checks both unit-ball constraints.
    pub fn generate(&self, protocol: &ProtocolSpec, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, w) = match self {
            InstanceFamily::Index { n, bits, index } => {
                let bits = match bits {
                    Some(b) => b.clone(),
                    None => (0..*n).map(|_| rng.gen_range(0..=1u8)).collect(),
                };
                if bits.len() != *n {
                    return Err(Error::DimensionMismatch { expected: *n, got: bits.len() });
                }
                let i = index.unwrap_or_else(|| rng.gen_range(0..*n));
                gen_index_instance(&bits, i)?
            }
            InstanceFamily::GapHamming { k, c, p, side } => {
                let g = gen_gap_hamming(*k, *c, *p, *side, &mut rng, GAP_HAMMING_BUDGET)?;
                (g.v, g.w)
            }
            InstanceFamily::RandomDualPair { spec, n } => random_dual_pair(spec, *n, &mut rng)?,
            InstanceFamily::WorstCaseSearch { spec, n, budget, probe_trials } => {
                let (v, _) = random_dual_pair(spec, *n, &mut rng)?;
                let found = adversarial_protocol_search(spec, &v, protocol, *budget, *probe_trials, rng.gen())?;
                let w = found.into_iter().next().map(|c| c.w).unwrap_or_else(|| vec![0.0; *n]);
                (v, w)
            }
            InstanceFamily::Fixed { v, w, .. } => (v.clone(), w.clone()),
        };
        check_pair(&self.spec(), &v, &w)?;
        Ok((v, w))
    }
}

pub const GAP_HAMMING_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub name: String,
    pub protocol: ProtocolSpec,
    pub family: InstanceFamily,
    pub trials: usize,
}

/// ℓ_p cells over a grid of ε (and optionally of sample counts).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpGrid {
    pub name: String,
    pub p: f64,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    #[serde(default)]
    pub sample_counts: Vec<u64>,
    pub family: InstanceFamily,
    pub trials: usize,
}

impl LpGrid {
    fn expand(&self) -> Result<Vec<CellConfig>> {
        let mut cells = Vec::new();
        for &eps in &self.epsilons {
            let base = lp_protocol(self.p, eps, self.delta)?;
            if self.sample_counts.is_empty() {
                cells.push(CellConfig { name: format!("{}/eps={eps}", self.name), protocol: base, family: self.family.clone(), trials: self.trials });
                continue;
            }
            for &s in &self.sample_counts {
                let protocol = with_sample_count(base.clone(), s);
                cells.push(CellConfig { name: format!("{}/eps={eps}/s={s}", self.name), protocol, family: self.family.clone(), trials: self.trials });
            }
        }
        Ok(cells)
    }
}

fn with_sample_count(p: ProtocolSpec, s: u64) -> ProtocolSpec {
    match p {
        ProtocolSpec::OneWaySparsify(mut o) => {
            o.sparsifier = o.sparsifier.with_sample_count(s);
            ProtocolSpec::OneWaySparsify(o)
        }
        ProtocolSpec::Swap(mut sw) => {
            sw.inner = Box::new(with_sample_count(*sw.inner, s));
            ProtocolSpec::Swap(sw)
        }
        other => other,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub cells: Vec<CellConfig>,
    #[serde(default)]
    pub grids: Vec<LpGrid>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Explicit cells first, then grid cells in order; a cell's id is its
    /// position here.
    pub fn expanded(&self) -> Result<Vec<CellConfig>> {
        let mut out = self.cells.clone();
        for g in &self.grids {
            out.extend(g.expand()?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub cell_id: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub master_seed: u64,
    pub reports: Vec<TrialReport>,
    pub failures: Vec<CellFailure>,
}

/// The instance substream of a cell (disjoint from its trial substreams,
/// which use trial ids below `u64::MAX`).
pub fn instance_seed(master: u64, cell: u64) -> u64 {
    mix_seed(master, cell, u64::MAX)
}

/// Runs every cell; a cell that errors is quarantined in `failures`.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    let cells = config.expanded()?;
    let m = config.master_seed;
    let results: Vec<std::result::Result<TrialReport, CellFailure>> = cells
        .par_iter()
        .enumerate()
        .map(|(id, c)| {
            let id = id as u64;
            let run = || -> Result<TrialReport> {
                let (v, w) = c.family.generate(&c.protocol, instance_seed(m, id))?;
                run_trials(&c.name, id, &c.protocol, &v, &w, c.trials, m)
            };
            run().map_err(|e| CellFailure { cell: c.name.clone(), cell_id: id, error: e.to_string() })
        })
        .collect();
    let mut out = SweepOutput { master_seed: m, ..Default::default() };
    for r in results {
        match r {
            Ok(rep) => out.reports.push(rep),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

impl SweepOutput {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates every report.
    pub fn from_json(text: &str) -> Result<Self> {
        let out: SweepOutput = serde_json::from_str(text)?;
        for r in &out.reports {
            r.validate()?;
        }
        Ok(out)
    }

    /// cell, epsilon, s, D, bits, success, mean_abs_z, p95_abs_z
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell", "epsilon", "s", "D", "bits", "success", "mean_abs_z", "p95_abs_z"])?;
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.reports {
            w.write_record([
                r.cell.clone(),
                r.epsilon.to_string(),
                opt(r.sample_count),
                opt(r.sparsity_cap),
                r.max_bits().to_string(),
                r.success_rate.to_string(),
                r.mean_abs.to_string(),
                r.p95_abs.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn timings_json(&self) -> Result<String> {
        let t: Vec<(&str, f64)> = self.reports.iter().map(|r| (r.cell.as_str(), r.wall_time)).collect();
        Ok(serde_json::to_string_pretty(&t)?)
    }

    /// Writes reports.json, summary.csv and timings.json into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("reports.json"), self.to_json()?)?;
        fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        fs::write(dir.join("timings.json"), self.timings_json()?)?;
        Ok(())
    }
}

/// Outcome of a decision pipeline built on a reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub instances: usize,
    pub correct: usize,
    pub rate: f64,
    pub max_bits: u64,
    pub declared_bits: u64,
}

fn pipeline_report(results: Vec<(bool, u64)>, declared_bits: u64) -> PipelineReport {
    let correct = results.iter().filter(|r| r.0).count();
    PipelineReport {
        instances: results.len(),
        correct,
        rate: if results.is_empty() { 0.0 } else { correct as f64 / results.len() as f64 },
        max_bits: results.iter().map(|r| r.1).max().unwrap_or(0),
        declared_bits,
    }
}

/// Index: random x ∈ {0,1}ⁿ and i; the protocol's estimate of x_i is
/// decoded by thresholding at 1/2.
pub fn run_index_pipeline(n: usize, protocol: &ProtocolSpec, instances: usize, master_seed: u64) -> Result<PipelineReport> {
    let declared = protocol.declared_cost(n)?;
    let results = (0..instances as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, 0, t);
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1u8)).collect();
            let i = rng.gen_range(0..n);
            let (v, w) = gen_index_instance(&bits, i)?;
            let out = run_protocol(protocol, &v, &w, &mut rng)?;
            Ok((decode_index_bit(out.estimate) == bits[i], out.transcript.total_bits()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pipeline_report(results, declared))
}

/// Gap-Hamming: labeled instances alternate between the two sides; the
/// protocol's inner-product estimate is turned into Δ̂ and thresholded.
pub fn run_gap_hamming_pipeline(k: usize, c: f64, p: Exponent, protocol: &ProtocolSpec, instances: usize, master_seed: u64) -> Result<PipelineReport> {
    let declared = protocol.declared_cost(k)?;
    let results = (0..instances as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, 0, t);
            let side = if t % 2 == 0 { GapSide::Low } else { GapSide::High };
            let g = gen_gap_hamming(k, c, p, Some(side), &mut rng, GAP_HAMMING_BUDGET)?;
            let out = run_protocol(protocol, &g.v, &g.w, &mut rng)?;
            Ok((g.decide(out.estimate) == g.side, out.transcript.total_bits()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pipeline_report(results, declared))
}

/// Error samples of ⟨φ(v), w⟩ − ⟨v, w⟩ straight from a sparsifier (no
/// quantization), one sample per seed.
pub fn sparsifier_errors(v: &[f64], w: &[f64], sparsifier: &SparsifierSpec, trials: usize, master_seed: u64) -> Result<Vec<f64>> {
    let truth = dot(v, w);
    (0..trials as u64)
        .into_par_iter()
        .map(|t| Ok(sparsify(v, sparsifier, &mut trial_rng(master_seed, 0, t))?.dot(w) - truth))
        .collect()
}
