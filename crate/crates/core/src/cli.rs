//! The `mbf` command line: one JSON config in, artifacts and a manifest out.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::analysis::{
    default_probes, directional_exponent, empirical_cov, lass_field, lass_sheet, local_exponent, modulus_and_entropy,
    pointwise_exponent, tightness_sweep, ExponentEstimate,
};
use crate::config::{CovConfig, DudleyConfig, HolderConfig, LassConfig, RunConfig};
use crate::error::{Error, Result};
use crate::hurst::Exponent;
use crate::io::{self, fmt_f64, Manifest, ManifestFile};
use crate::kernels::{Family, KernelModel};
use crate::synth::{FieldSample, Sampler};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;

/// Largest lattice for which `cov` enumerates every pair by default.
const ALL_PAIRS_LIMIT: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "mbf", version, about = "Synthesis and diagnostics for (multi)fractional Brownian fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample replicates and write them as an MBF1 file.
    Synth,
    /// Compare empirical and analytic covariances.
    Cov,
    /// Estimate Hölder exponents against their analytic values.
    Holder,
    /// Analytic local self-similarity limits.
    Lass,
    /// Every analysis the config selects, with one pass/fail summary.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Cov => "cov",
            Command::Holder => "holder",
            Command::Lass => "lass",
            Command::Report => "report",
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

pub fn exit_code(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => EXIT_ACCEPTANCE,
        Err(e) if e.is_numerical() => EXIT_NUMERICAL,
        Err(_) => EXIT_CONFIG,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    let result = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))
        .and_then(RunConfig::load)
        .and_then(|cfg| {
            let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("mbf-out"));
            run(cli.command, &cfg, &out)
        });
    match &result {
        Ok(o) => println!("{}", serde_json::to_string(&o.summary).unwrap_or_default()),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

/// Run `command` with outputs under `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let model = cfg.kernel()?;
    let mut files = Vec::new();
    let mut sampler = None;
    let (passed, summary) = match command {
        Command::Synth => {
            let (s, samples) = synthesize(cfg, &model)?;
            let path = out.join("field.mbf");
            io::write_mbf(BufWriter::new(File::create(&path)?), &samples)?;
            files.push(path);
            let summary = json!({ "points": cfg.grid.len(), "replicates": samples.len(), "jitter": s.max_jitter() });
            sampler = Some(s);
            (true, summary)
        }
        Command::Cov => {
            let section = cfg.cov.clone().unwrap_or(CovConfig { pairs: None });
            let (s, samples) = synthesize(cfg, &model)?;
            sampler = Some(s);
            cov_section(cfg, &section, &model, &samples, out, &mut files)?
        }
        Command::Holder => {
            let section = cfg.holder.clone().unwrap_or(HolderConfig { points: None, stride: None, heatmap: false });
            let (s, samples) = synthesize(cfg, &model)?;
            sampler = Some(s);
            holder_section(cfg, &section, &model, &samples, out, &mut files)?
        }
        Command::Lass => {
            let section = cfg.lass.as_ref().ok_or_else(|| Error::Config("lass section missing".into()))?;
            lass_section(section, &model, out, &mut files)?
        }
        Command::Report => {
            let mut sections = serde_json::Map::new();
            let mut all = true;
            let needs_samples = cfg.cov.is_some() || cfg.holder.is_some() || cfg.dudley.is_some();
            let samples = if needs_samples {
                let (s, samples) = synthesize(cfg, &model)?;
                sampler = Some(s);
                samples
            } else {
                Vec::new()
            };
            let mut record = |name: &str, (ok, summary): (bool, serde_json::Value)| {
                all &= ok;
                sections.insert(name.into(), json!({ "passed": ok, "summary": summary }));
            };
            if let Some(c) = &cfg.cov {
                record("cov", cov_section(cfg, c, &model, &samples, out, &mut files)?);
            }
            if let Some(h) = &cfg.holder {
                record("holder", holder_section(cfg, h, &model, &samples, out, &mut files)?);
            }
            if let Some(l) = &cfg.lass {
                record("lass", lass_section(l, &model, out, &mut files)?);
            }
            if let Some(d) = &cfg.dudley {
                record("dudley", dudley_section(cfg, d, &model, &samples, out, &mut files)?);
            }
            let summary = serde_json::Value::Object(sections);
            let path = out.join("report.json");
            std::fs::write(&path, serde_json::to_vec_pretty(&summary)?)?;
            files.push(path);
            (all, summary)
        }
    };
    let summary = json!({ "command": command.name(), "passed": passed, "details": summary });
    write_manifest(command, cfg, &model, sampler.as_ref(), &files, &summary, out)?;
    Ok(Outcome { passed, files, summary })
}

fn synthesize(cfg: &RunConfig, model: &KernelModel) -> Result<(Sampler, Vec<FieldSample>)> {
    let sampler = Sampler::with_cap(model, &cfg.grid, cfg.cap)?;
    let samples = sampler.sample(cfg.seed, cfg.replicates);
    Ok((sampler, samples))
}

fn write_manifest(
    command: Command,
    cfg: &RunConfig,
    model: &KernelModel,
    sampler: Option<&Sampler>,
    files: &[PathBuf],
    summary: &serde_json::Value,
    out: &Path,
) -> Result<()> {
    let files = files
        .iter()
        .map(|p| {
            Ok(ManifestFile {
                path: p.strip_prefix(out).unwrap_or(p).display().to_string(),
                sha256: io::sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        command: command.name().into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        table_checksums: model.table_checksums(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        model_hash: format!("{:016x}", model.descriptor_hash()),
        jitter: sampler.map(|s| s.max_jitter()),
        files,
        summary: summary.clone(),
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn fmt_point(p: &[f64]) -> String {
    p.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

type Section = (bool, serde_json::Value);

fn cov_section(
    cfg: &RunConfig,
    section: &CovConfig,
    model: &KernelModel,
    samples: &[FieldSample],
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<Section> {
    let grid = &cfg.grid;
    let pairs = match &section.pairs {
        Some(p) => p.clone(),
        None => {
            if grid.len() > ALL_PAIRS_LIMIT {
                return Err(Error::Config(format!(
                    "lattice has {} points; list cov.pairs explicitly above {ALL_PAIRS_LIMIT}",
                    grid.len()
                )));
            }
            let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i).coords().to_vec()).collect();
            let mut v = Vec::new();
            for i in 0..pts.len() {
                for j in i..pts.len() {
                    v.push((pts[i].clone(), pts[j].clone()));
                }
            }
            v
        }
    };
    let path = out.join("cov.csv");
    let mut w = io::csv_writer(File::create(&path)?);
    w.write_record(["s", "t", "analytic", "empirical", "stderr", "z"]).map_err(csv_err)?;
    let mut max_z = 0.0f64;
    for (s, t) in &pairs {
        let analytic = model.cov(s, t)?;
        let est = empirical_cov(samples, s, t)?;
        let z = est.z_score(analytic);
        max_z = max_z.max(z.abs());
        w.write_record([
            fmt_point(s),
            fmt_point(t),
            fmt_f64(analytic),
            fmt_f64(est.value),
            fmt_f64(est.stderr),
            fmt_f64(z),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    files.push(path);
    let passed = max_z < cfg.tolerances.z_max;
    Ok((passed, json!({ "pairs": pairs.len(), "max_abs_z": max_z, "z_max": cfg.tolerances.z_max })))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// One estimated exponent next to its analytic value.
struct Column {
    name: String,
    estimate: ExponentEstimate,
    truth: f64,
}

fn holder_columns(model: &KernelModel, samples: &[FieldSample], t0: &[f64]) -> Result<Vec<Column>> {
    let h = model.hurst_values(t0)?;
    let n = t0.len();
    match model.family() {
        Family::LevyFbm { .. } | Family::MbField { .. } => {
            let (pw, loc) = match model.family() {
                Family::MbField { hurst, .. } => {
                    let meta = hurst.exponent_meta(t0);
                    (meta.pointwise, meta.local)
                }
                _ => (Exponent::Unbounded, Exponent::Unbounded),
            };
            Ok(vec![
                Column { name: "pointwise".into(), estimate: pointwise_exponent(samples, t0)?, truth: pw.wedge(h[0]) },
                Column { name: "local".into(), estimate: local_exponent(samples, t0)?, truth: loc.wedge(h[0]) },
            ])
        }
        Family::FbSheet { .. } | Family::MbSheet { .. } => (0..n)
            .map(|a| {
                let mut e = vec![0.0; n];
                e[a] = 1.0;
                let beta = match model.family() {
                    Family::MbSheet { hurst } => hurst[a].directional_exponent(t0, &e),
                    _ => Exponent::Unbounded,
                };
                Ok(Column {
                    name: format!("directional_{}", a + 1),
                    estimate: directional_exponent(samples, t0, &e)?,
                    truth: beta.wedge(h[a]),
                })
            })
            .collect(),
    }
}

fn holder_points(cfg: &RunConfig, section: &HolderConfig) -> Vec<Vec<f64>> {
    let grid = &cfg.grid;
    if let Some(stride) = section.stride {
        (0..grid.len())
            .filter(|&f| grid.unravel(f).iter().all(|i| i % stride == 0))
            .map(|f| grid.point(f).coords().to_vec())
            .collect()
    } else if let Some(p) = &section.points {
        p.clone()
    } else {
        let centre: Vec<usize> = grid.resolution.iter().map(|r| r / 2).collect();
        vec![grid.point(grid.ravel(&centre)).coords().to_vec()]
    }
}

fn holder_section(
    cfg: &RunConfig,
    section: &HolderConfig,
    model: &KernelModel,
    samples: &[FieldSample],
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<Section> {
    let tol = cfg.tolerances.exponent;
    let points = holder_points(cfg, section);
    let mut rows: Vec<(Vec<f64>, Option<Vec<Column>>)> = Vec::with_capacity(points.len());
    for t0 in points {
        match holder_columns(model, samples, &t0) {
            Ok(c) => rows.push((t0, Some(c))),
            // A stride sweep reaches points too close to the boundary.
            Err(Error::InsufficientRadii { .. }) if section.stride.is_some() => rows.push((t0, None)),
            Err(e) => return Err(e),
        }
    }
    let names: Vec<String> = rows
        .iter()
        .find_map(|(_, c)| c.as_ref())
        .ok_or_else(|| Error::Config("no holder point has enough radii".into()))?
        .iter()
        .map(|c| c.name.clone())
        .collect();
    let path = out.join("holder.csv");
    let mut w = io::csv_writer(File::create(&path)?);
    let mut header = vec!["t0".to_string()];
    for n in &names {
        header.extend([n.clone(), format!("{n}_band"), format!("{n}_truth")]);
    }
    header.push("pass".into());
    w.write_record(&header).map_err(csv_err)?;
    let (mut estimated, mut passed_rows) = (0usize, 0usize);
    let mut max_dev = 0.0f64;
    for (t0, cols) in &rows {
        let mut rec = vec![fmt_point(t0)];
        let pass = match cols {
            Some(cols) => {
                estimated += 1;
                let mut ok = true;
                for c in cols {
                    let dev = (c.estimate.value - c.truth).abs();
                    max_dev = max_dev.max(dev);
                    ok &= dev <= tol;
                    rec.extend([fmt_f64(c.estimate.value), fmt_f64(c.estimate.band), fmt_f64(c.truth)]);
                }
                passed_rows += ok as usize;
                ok
            }
            None => {
                rec.extend(std::iter::repeat_n("NaN".to_string(), 3 * names.len()));
                true
            }
        };
        rec.push(if cols.is_some() { pass.to_string() } else { "skipped".into() });
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    files.push(path);
    if section.heatmap && cfg.grid.dim() == 2 {
        let stride = section.stride.unwrap_or(1);
        let width = cfg.grid.resolution[1].div_ceil(stride);
        let values: Vec<f64> = rows.iter().map(|(_, c)| c.as_ref().map_or(f64::NAN, |c| c[0].estimate.value)).collect();
        if section.stride.is_some() && values.len().is_multiple_of(width) {
            let path = out.join("holder.pgm");
            io::write_pgm(BufWriter::new(File::create(&path)?), width, values.len() / width, &values, 0.0, 1.0)?;
            files.push(path);
        } else {
            log::warn!("heatmap needs holder.stride; none written");
        }
    }
    let passed = estimated > 0 && passed_rows == estimated;
    Ok((
        passed,
        json!({ "points": rows.len(), "estimated": estimated, "passed": passed_rows, "max_deviation": max_dev, "tolerance": tol }),
    ))
}

fn lass_section(section: &LassConfig, model: &KernelModel, out: &Path, files: &mut Vec<PathBuf>) -> Result<Section> {
    let rhos = section.rhos();
    let probes = section.probes.clone().unwrap_or_else(|| default_probes(model.dim(), section.probe_scale));
    let (class, report) = if model.spec().is_sheet() {
        let r = lass_sheet(model, &section.t0, &section.alpha, &rhos, &probes)?;
        (r.classification, serde_json::to_value(&r)?)
    } else {
        let r = lass_field(model, &section.t0, section.alpha[0], &rhos, &probes)?;
        (r.classification, serde_json::to_value(&r)?)
    };
    let tightness = match &section.tightness {
        Some(t) if !model.spec().is_sheet() => {
            Some(tightness_sweep(model, &section.t0, section.alpha[0], t.gamma, t.probe_box, t.points, &rhos)?)
        }
        Some(_) => return Err(Error::Config("tightness sweeps apply to fields only".into())),
        None => None,
    };
    let class_ok = section.expect.is_none_or(|e| e == class);
    let bounded = tightness.as_ref().is_none_or(|t| t.bounded);
    let path = out.join("lass.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&json!({ "report": report, "tightness": tightness }))?)?;
    files.push(path);
    Ok((
        class_ok && bounded,
        json!({ "classification": class, "expected": section.expect, "tightness_bounded": tightness.map(|t| t.bounded) }),
    ))
}

fn dudley_section(
    cfg: &RunConfig,
    section: &DudleyConfig,
    model: &KernelModel,
    samples: &[FieldSample],
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<Section> {
    let r = modulus_and_entropy(samples, model, None, &section.deltas, &section.epsilons)?;
    let path = out.join("dudley.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&r)?)?;
    files.push(path);
    let slope_ok = r.slope_rel_error() <= cfg.tolerances.entropy_rel;
    let bounded = r.monotone_growth.iter().all(|g| !g);
    Ok((
        slope_ok && bounded,
        json!({
            "entropy_slope": r.entropy_slope,
            "expected_slope": r.expected_slope,
            "slope_rel_error": r.slope_rel_error(),
            "monotone_growth": r.monotone_growth,
        }),
    ))
}
