use std::path::{Path, PathBuf};

use pat_core::forward::{separate_data, simulate_fourier_full, simulate_separated, KGrid, SamplingPlan, SeparatedData};
use pat_core::persist::{self, load, load_recon, peek_kind, save, save_recon, write_json};
use pat_core::recon::{fixed_point_q3d, metrics, recon2d, recon3d, Diagnostics, Metrics, PsiSamples, ReconResult};
use pat_core::{geom, make_phantom, Field, IlluminationSet, Phantom, ScalarField};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::plot;

/// What a run wrote, relative to the output directory.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub mode: &'static str,
    pub config_hash: String,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldMetrics {
    pub grid: Metrics,
    /// Both fields restricted to `Ω`.
    pub omega: Metrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub q: FieldMetrics,
    pub f1: FieldMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point_q: Option<FieldMetrics>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    hash: String,
    artifacts: Vec<String>,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn record(&mut self, p: &Path) {
        let rel = p.strip_prefix(self.out).unwrap_or(p);
        self.artifacts.push(rel.display().to_string());
    }

    fn save<T: persist::Persist>(&mut self, value: &T, rel: &Path) -> Result<(), CliError> {
        let stem = self.out.join(rel);
        save(value, &stem, Some(&self.hash))?;
        self.record(&stem);
        Ok(())
    }

    fn phantom(&self) -> Result<Phantom, CliError> {
        Ok(make_phantom(&self.cfg.phantom)?)
    }
}

pub fn run(cfg: &RunConfig, mode: Mode, out: &Path) -> Result<Summary, CliError> {
    std::fs::create_dir_all(out)?;
    let mut ctx = Ctx { cfg, out, hash: cfg.hash(), artifacts: Vec::new(), warnings: Vec::new() };
    let mut report = None;
    match mode {
        Mode::Phantom => phantom(&mut ctx)?,
        Mode::Forward2d => forward_separated(&mut ctx, 2)?,
        Mode::Forward3d => forward_separated(&mut ctx, 3)?,
        Mode::ForwardFull => forward_full(&mut ctx)?,
        Mode::Recon2d => recon(&mut ctx, 2)?,
        Mode::Recon3d => recon(&mut ctx, 3)?,
        Mode::FixedPoint => fixed_point(&mut ctx)?,
        Mode::Metrics => report = Some(metrics_mode(&mut ctx)?),
        Mode::Plot => plots(&mut ctx)?,
    }
    Ok(Summary { mode: mode.name(), config_hash: ctx.hash, artifacts: ctx.artifacts, metrics: report, warnings: ctx.warnings })
}

fn phantom(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.phantom()?;
    let dir = PathBuf::from(&ctx.cfg.paths.phantom);
    for (name, f) in [("f0", &p.f0), ("f1", &p.f1), ("q", &p.q)] {
        ctx.save(f, &dir.join(name))?;
    }
    let spec = ctx.path(&ctx.cfg.paths.phantom).join("spec.json");
    write_json(&spec, &p.spec)?;
    ctx.record(&spec);
    Ok(())
}

fn check_dim(p: &Phantom, dim: usize) -> Result<(), CliError> {
    if p.dim() != dim {
        return Err(CliError::Validation(format!("mode needs a {dim}D phantom, config has dim {}", p.dim())));
    }
    Ok(())
}

fn add_noise(data: &mut SeparatedData, level: f64, seed: u64) -> Result<(), CliError> {
    if level == 0.0 {
        return Ok(());
    }
    let peak = data.series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let normal = Normal::new(0.0, level * peak).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for v in &mut data.series {
        *v += normal.sample(&mut rng);
    }
    Ok(())
}

fn separated_stem(ctx: &Ctx) -> PathBuf {
    PathBuf::from(&ctx.cfg.paths.data).join("separated")
}

fn forward_separated(ctx: &mut Ctx, dim: usize) -> Result<(), CliError> {
    let p = ctx.phantom()?;
    check_dim(&p, dim)?;
    let plan = SamplingPlan::standard(&p, &p.gamma, &ctx.cfg.plan)?;
    log::info!("forward{dim}: {} cells × {} samples", plan.cells.len(), plan.times.n);
    let mut data = simulate_separated(&p, &p.gamma, &plan)?;
    add_noise(&mut data, ctx.cfg.noise, ctx.cfg.seed)?;
    if !data.metadata.skipped.is_empty() {
        ctx.warnings.push(format!("{} cells skipped", data.metadata.skipped.len()));
    }
    let stem = separated_stem(ctx);
    ctx.save(&data, &stem)
}

fn forward_full(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.phantom()?;
    let fc = &ctx.cfg.full;
    let reach = p.f_exact().support().map_or(0.0, |b| geom::norm(&b.center) + b.radius);
    let r_max = fc.illumination.r_max.unwrap_or(reach);
    if r_max < reach {
        return Err(CliError::Validation(format!("illumination r_max = {r_max} does not cover supp f (needs {reach})")));
    }
    let il = &fc.illumination;
    let illum = IlluminationSet::uniform(p.dim(), il.nr, il.ntheta, r_max, il.slab_width)?;
    let plan = SamplingPlan::standard(&p, &p.gamma, &ctx.cfg.plan)?;
    let k = KGrid::for_record(plan.times.t_end(), fc.options.k_max_for(&illum), fc.options.period_factor)?;
    log::info!("forward-full: {} modes, predicted cost {:.3e}", k.len(), pat_core::forward::predicted_cost(&p, &illum, &p.gamma, &k, &fc.options));
    let sino = simulate_fourier_full(&p, &illum, &p.gamma, &k, &fc.options)?;
    let dir = PathBuf::from(&ctx.cfg.paths.data);
    ctx.save(&sino, &dir.join("sinogram"))?;
    let mut data = separate_data(&sino, &plan)?;
    add_noise(&mut data, ctx.cfg.noise, ctx.cfg.seed)?;
    let stem = separated_stem(ctx);
    ctx.save(&data, &stem)
}

fn load_separated(ctx: &Ctx, p: &Phantom) -> Result<SeparatedData, CliError> {
    let stem = ctx.out.join(separated_stem(ctx));
    if !persist::sidecar_path(&stem).exists() {
        return Err(CliError::Validation(format!("missing input {}; run a forward mode first", stem.display())));
    }
    let data: SeparatedData = load(&stem)?;
    if data.metadata.phantom_hash != persist::content_hash(&p.spec) {
        return Err(CliError::Validation(format!("{} was simulated from a different phantom", stem.display())));
    }
    Ok(data)
}

fn recon(ctx: &mut Ctx, dim: usize) -> Result<(), CliError> {
    let p = ctx.phantom()?;
    check_dim(&p, dim)?;
    let data = load_separated(ctx, &p)?;
    if data.dim != dim {
        return Err(CliError::Validation(format!("data are {}D", data.dim)));
    }
    let r: ReconResult = if dim == 2 {
        recon2d(&data, &p.f0_exact, &ctx.cfg.recon)?
    } else {
        recon3d(&data, &p.f0_exact, &ctx.cfg.recon)?
    };
    ctx.warnings.extend(r.diagnostics.warnings.iter().cloned());
    let dir = ctx.path(&ctx.cfg.paths.recon);
    save_recon(&dir, &r.q_hat, &r.f1_hat, &r.diagnostics, Some(&ctx.hash))?;
    for f in ["q_hat", "f1_hat"] {
        ctx.record(&dir.join(f));
    }
    ctx.record(&dir.join("diagnostics.json"));
    Ok(())
}

#[derive(Debug, Serialize)]
struct FixedPointReport<'a> {
    config_hash: &'a str,
    converged: bool,
    history: &'a [f64],
    warning: &'a Option<String>,
}

fn fixed_point(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = ctx.phantom()?;
    check_dim(&p, 3)?;
    let data = load_separated(ctx, &p)?;
    let fp = &ctx.cfg.fixed_point;
    let samples = PsiSamples::from_separated(&data, &p.f_exact(), fp.margin_steps, fp.stride)?;
    let r = fixed_point_q3d(&samples, fp.max_iters, fp.tol)?;
    if let Some(w) = &r.warning {
        ctx.warnings.push(w.clone());
    }
    let dir = PathBuf::from(&ctx.cfg.paths.fixed_point);
    ctx.save(&r.q_hat, &dir.join("q_hat"))?;
    let rep = ctx.path(&ctx.cfg.paths.fixed_point).join("report.json");
    let hash = ctx.hash.clone();
    write_json(&rep, &FixedPointReport { config_hash: &hash, converged: r.converged, history: &r.history, warning: &r.warning })?;
    ctx.record(&rep);
    Ok(())
}

fn restricted(f: &ScalarField, p: &Phantom) -> ScalarField {
    f.map(|z, v| if p.omega.contains(z) { v } else { 0.0 })
}

fn field_metrics(recon: &ScalarField, truth: &ScalarField, p: &Phantom) -> Result<FieldMetrics, CliError> {
    Ok(FieldMetrics { grid: metrics(recon, truth)?, omega: metrics(&restricted(recon, p), &restricted(truth, p))? })
}

fn metrics_mode(ctx: &mut Ctx) -> Result<MetricsReport, CliError> {
    let p = ctx.phantom()?;
    let dir = ctx.path(&ctx.cfg.paths.recon);
    if !dir.join("diagnostics.json").exists() {
        return Err(CliError::Validation(format!("missing reconstruction in {}", dir.display())));
    }
    let (q_hat, f1_hat, _): (ScalarField, ScalarField, Diagnostics) = load_recon(&dir)?;
    let fp_stem = ctx.path(&ctx.cfg.paths.fixed_point).join("q_hat");
    let fixed_point_q = if persist::sidecar_path(&fp_stem).exists() {
        Some(field_metrics(&load(&fp_stem)?, &p.q, &p)?)
    } else {
        None
    };
    let report = MetricsReport {
        config_hash: ctx.hash.clone(),
        q: field_metrics(&q_hat, &p.q, &p)?,
        f1: field_metrics(&f1_hat, &p.f1, &p)?,
        fixed_point_q,
    };
    let path = ctx.path(&ctx.cfg.paths.metrics);
    write_json(&path, &report)?;
    ctx.record(&path);
    Ok(report)
}

/// Scalar-field stems under `dir`, sorted.
fn field_stems(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for e in entries {
        if e.is_dir() {
            field_stems(&e, found)?;
        } else if e.extension().is_some_and(|x| x == "f64") {
            let stem = e.with_extension("");
            if peek_kind(&stem).is_ok_and(|k| k == "scalar-field") {
                found.push(stem);
            }
        }
    }
    Ok(())
}

fn plots(ctx: &mut Ctx) -> Result<(), CliError> {
    let out_dir = ctx.path(&ctx.cfg.paths.plots);
    std::fs::create_dir_all(&out_dir)?;
    let mut fields = Vec::new();
    if ctx.cfg.plot_inputs.is_empty() {
        for d in [&ctx.cfg.paths.phantom, &ctx.cfg.paths.recon, &ctx.cfg.paths.fixed_point] {
            field_stems(&ctx.path(d), &mut fields)?;
        }
    } else {
        for rel in &ctx.cfg.plot_inputs {
            let stem = ctx.path(rel);
            if !persist::sidecar_path(&stem).exists() {
                return Err(CliError::Validation(format!("missing plot input {}", stem.display())));
            }
            fields.push(stem);
        }
    }
    let mut series = Vec::new();
    for stem in fields {
        let rel = stem.strip_prefix(ctx.out).unwrap_or(&stem);
        let name = rel.to_string_lossy().replace(['/', '\\'], "_");
        match peek_kind(&stem)?.as_str() {
            "scalar-field" => {
                let f: ScalarField = load(&stem)?;
                for w in plot::emit_field(&f, &name, &out_dir, &ctx.hash)? {
                    series.push(w);
                }
            }
            "time-series" => series.push(plot::emit_series(&load(&stem)?, &name, &out_dir)?),
            other => return Err(CliError::Validation(format!("cannot plot a {other}"))),
        }
    }
    if ctx.cfg.plot_inputs.is_empty() {
        let stem = ctx.out.join(separated_stem(ctx));
        if persist::sidecar_path(&stem).exists() {
            let data: SeparatedData = load(&stem)?;
            // first interior cell of each of the first few detectors
            let mut seen = Vec::new();
            for (i, c) in data.cells.iter().enumerate() {
                if matches!(c.role, pat_core::forward::CellRole::Interior { .. }) && !seen.contains(&c.detector) && seen.len() < 4 {
                    seen.push(c.detector);
                    let name = format!("data_detector{}_cell{i}", c.detector);
                    series.push(plot::emit_series(&data.time_series(i), &name, &out_dir)?);
                }
            }
        }
    }
    let rel = PathBuf::from(&ctx.cfg.paths.plots);
    for s in series {
        ctx.artifacts.push(rel.join(s).display().to_string());
    }
    Ok(())
}
