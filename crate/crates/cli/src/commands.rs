//! Subcommand implementations. Each writes its artifacts under the run's
//! output directory and returns a summary for the caller to print.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use swapattn::analysis::{
    accuracy_experiment, contrast, correlation_profile, nearest_value, phase_diagram, segment_midpoints,
    sign_changes, sweep_boundaries, sweep_ground_states, write_contrast_csv, write_xi_csv, AccuracyExperiment,
    AccuracyTable, ContrastResult, CorrelationProfile,
};
use swapattn::attention::{attention_analytic, attention_circuit, AttentionMatrix};
use swapattn::classifier::{predict, train, CheckpointMeta, Model, ModelCheckpoint};
use swapattn::hamiltonian::{
    generate_dataset, second_derivative_boundaries, BoundaryOptions, Dataset, GroundStateRecord, Manifest,
    PhaseLabel, ShardReader, ShardWriter,
};
use swapattn::report::{sha256_hex, sig12, write_row};
use swapattn::statevec::StateVector;
use swapattn::{Error, Result};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SHARD_FILE: &str = "states.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const CONTRAST_FILE: &str = "contrast_sweep.csv";
pub const XI_FILE: &str = "xi_sweep.csv";
pub const SWEEP_BOUNDARIES_FILE: &str = "sweep_boundaries.csv";
pub const PHASE_GRID_FILE: &str = "phase_diagram.csv";
pub const PHASE_BOUNDARIES_FILE: &str = "phase_boundaries.csv";
pub const ACCURACY_FILE: &str = "accuracy_curve.csv";
pub const ACCURACY_CELLS_FILE: &str = "accuracy_cells.csv";

/// A validated configuration, its digest, and an existing output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub digest: String,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        let digest = cfg.digest();
        Ok(Self { cfg, digest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn or_default(&self, given: Option<&Path>, name: &str) -> PathBuf {
        given.map(Path::to_path_buf).unwrap_or_else(|| self.path(name))
    }

    /// Writes a CSV whose first line records the producing config digest.
    fn write_csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        let digest = self.digest.clone();
        write_atomic(&path, move |w| {
            writeln!(w, "# config_digest={digest}")?;
            body(w)
        })?;
        Ok(path)
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes through a `.partial` sibling and renames into place, so readers
/// never observe a half-written artifact.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let tmp = partial_path(path);
    let run = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    run().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

#[derive(Clone, Debug)]
pub struct GenSummary {
    pub manifest: PathBuf,
    pub records: usize,
    pub label_counts: [usize; 3],
    /// Grid row used for the boundary estimate.
    pub row_h1: f64,
    pub row_boundaries: Vec<f64>,
}

/// Solves the grid and writes the manifest (plus shards when caching).
pub fn cmd_gen(ctx: &Context) -> Result<GenSummary> {
    let dc = ctx.cfg.dataset_config();
    let ds = generate_dataset(&dc)?;
    let manifest_path = ctx.path(MANIFEST_FILE);
    let shard_path = ctx.path(SHARD_FILE);

    let write = || -> Result<()> {
        let shard = if dc.keep_states {
            let tmp = partial_path(&shard_path);
            let mut w = ShardWriter::create(&tmp, dc.n_sites)?;
            for r in &ds.records {
                w.append(r.state.as_ref().expect("states kept"))?;
            }
            w.finish()?;
            fs::rename(&tmp, &shard_path).map_err(|e| Error::io(&shard_path, e))?;
            Some(SHARD_FILE.to_string())
        } else {
            None
        };
        let json = Manifest::new(&ds, &ctx.digest, shard).to_json()?;
        write_atomic(&manifest_path, |w| writeln!(w, "{json}"))
    };
    if let Err(e) = write() {
        for p in [&manifest_path, &shard_path] {
            let _ = fs::remove_file(partial_path(p));
            let _ = fs::remove_file(p);
        }
        return Err(e);
    }

    let grid = dc.grid;
    let h1s = grid.h1_values();
    let h2s = grid.h2_values();
    let row_h1 = nearest_value(&h1s, ctx.cfg.sweep.h1_target).unwrap_or(0.0);
    let row = h1s.iter().position(|&v| v == row_h1).unwrap_or(0);
    let n2 = grid.shape[1];
    let row_boundaries = if n2 >= 5 {
        let e: Vec<f64> = ds.records[row * n2..(row + 1) * n2].iter().map(|r| r.energy).collect();
        second_derivative_boundaries(h2s[0], h2s[1] - h2s[0], &e, &BoundaryOptions::default())?
    } else {
        Vec::new()
    };
    Ok(GenSummary {
        manifest: manifest_path,
        records: ds.records.len(),
        label_counts: ds.label_counts(),
        row_h1,
        row_boundaries,
    })
}

/// A manifest together with the SHA-256 of its bytes.
pub struct LoadedManifest {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub file_digest: String,
}

impl LoadedManifest {
    pub fn dataset(&self) -> Dataset {
        self.manifest.to_dataset()
    }

    /// Statevectors of the records at `indices`, from the shard when present.
    pub fn states(&self, indices: &[usize]) -> Result<Vec<StateVector<f64>>> {
        let m = &self.manifest;
        if let Some(idx) = indices.iter().find(|&&k| k >= m.records.len()) {
            return Err(Error::Index(format!("record {idx} of {}", m.records.len())));
        }
        match &m.shard_file {
            Some(name) => {
                let dir = self.path.parent().unwrap_or(Path::new("."));
                let mut reader = ShardReader::open(&dir.join(name), m.n_sites)?;
                indices
                    .iter()
                    .map(|&k| {
                        let r = &m.records[k];
                        let (off, norm) = r
                            .shard_offset
                            .zip(r.norm_sqr)
                            .ok_or_else(|| Error::Missing(format!("shard entry for record {k}")))?;
                        reader.read(off, norm)
                    })
                    .collect()
            }
            None => {
                let ds = self.dataset();
                indices.par_iter().map(|&k| ds.state(k)).collect()
            }
        }
    }
}

pub fn load_manifest(ctx: &Context, path: Option<&Path>) -> Result<LoadedManifest> {
    let path = ctx.or_default(path, MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = Manifest::load(&path)?;
    let mut expected = ctx.cfg.dataset_config();
    expected.keep_states = manifest.dataset.keep_states;
    if manifest.dataset != expected {
        return Err(Error::Compatibility(format!(
            "{} was generated with a different dataset configuration",
            path.display()
        )));
    }
    if manifest.config_digest != ctx.digest {
        warn(format!(
            "{} was produced under config digest {}, current is {}",
            path.display(),
            manifest.config_digest,
            ctx.digest
        ));
    }
    Ok(LoadedManifest {
        path,
        file_digest: sha256_hex(&bytes),
        manifest,
    })
}

pub fn load_checkpoint(ctx: &Context, path: Option<&Path>) -> Result<(ModelCheckpoint, Model<f64>)> {
    let path = ctx.or_default(path, CHECKPOINT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ck = ModelCheckpoint::from_json(&text)?;
    let model = ck.to_model()?;
    if ck.n_qubits != ctx.cfg.dataset.n_sites {
        return Err(Error::Compatibility(format!(
            "checkpoint is for {} qubits, config has {} sites",
            ck.n_qubits, ctx.cfg.dataset.n_sites
        )));
    }
    if ck.metadata.config_digest != ctx.digest {
        warn(format!(
            "{} was produced under config digest {}, current is {}",
            path.display(),
            ck.metadata.config_digest,
            ctx.digest
        ));
    }
    Ok((ck, model))
}

fn check_pair(ck: &ModelCheckpoint, lm: &LoadedManifest) -> Result<()> {
    if ck.n_qubits != lm.manifest.n_sites {
        return Err(Error::Compatibility(format!(
            "checkpoint is for {} qubits, manifest for {}",
            ck.n_qubits, lm.manifest.n_sites
        )));
    }
    match &ck.metadata.manifest_digest {
        Some(d) if *d != lm.file_digest => Err(Error::Compatibility(format!(
            "checkpoint was trained on manifest {d}, {} has digest {}",
            lm.path.display(),
            lm.file_digest
        ))),
        _ => Ok(()),
    }
}

/// Training subset drawn uniformly without replacement from `seed`.
pub fn draw_training_indices(total: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || size >= total {
        return Err(Error::Config(format!(
            "training size must be between 1 and {}, got {size}",
            total.saturating_sub(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, total, size).into_vec())
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub final_loss: f64,
    pub initial_loss: f64,
    pub train_indices: Vec<usize>,
}

pub fn cmd_train(ctx: &Context, manifest: Option<&Path>, size: usize) -> Result<TrainSummary> {
    let lm = load_manifest(ctx, manifest)?;
    let tc = &ctx.cfg.train;
    let indices = draw_training_indices(lm.manifest.records.len(), size, tc.seed)?;
    let states = lm.states(&indices)?;
    let labels: Vec<PhaseLabel> = indices.iter().map(|&k| lm.manifest.records[k].label).collect();
    for l in PhaseLabel::ALL {
        if !labels.contains(&l) {
            warn(format!("training set has no {l} samples"));
        }
    }
    let samples: Vec<_> = states.iter().zip(labels).collect();
    let outcome = train(&samples, tc)?;

    let meta = CheckpointMeta {
        seed: tc.seed,
        config_digest: ctx.digest.clone(),
        final_loss: outcome.final_loss,
        epochs: tc.epochs,
        train_size: size,
        manifest_digest: Some(lm.file_digest.clone()),
        train_indices: indices.clone(),
    };
    let json = ModelCheckpoint::from_model(&outcome.model, meta).to_json()?;
    let checkpoint = ctx.path(CHECKPOINT_FILE);
    write_atomic(&checkpoint, |w| writeln!(w, "{json}"))?;
    let history = outcome.history.clone();
    ctx.write_csv(LOSS_FILE, move |w| {
        write_row(w, &["epoch", "loss"])?;
        for (k, l) in history.iter().enumerate() {
            write_row(w, &[k.to_string(), sig12(*l)])?;
        }
        Ok(())
    })?;
    Ok(TrainSummary {
        checkpoint,
        final_loss: outcome.final_loss,
        initial_loss: outcome.history[0],
        train_indices: indices,
    })
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub held_out: usize,
    pub held_out_accuracy: f64,
    pub overall_accuracy: f64,
}

/// Predicts every grid point; accuracy is reported on the held-out rest.
pub fn cmd_eval(ctx: &Context, manifest: Option<&Path>, checkpoint: Option<&Path>) -> Result<EvalSummary> {
    let lm = load_manifest(ctx, manifest)?;
    let (ck, model) = load_checkpoint(ctx, checkpoint)?;
    check_pair(&ck, &lm)?;
    let all: Vec<usize> = (0..lm.manifest.records.len()).collect();
    let states = lm.states(&all)?;
    let preds = states
        .par_iter()
        .map(|s| predict(s, &model))
        .collect::<Result<Vec<_>>>()?;
    let mut in_train = vec![false; all.len()];
    for &k in &ck.metadata.train_indices {
        if k < in_train.len() {
            in_train[k] = true;
        }
    }
    let (mut hits, mut held, mut held_hits) = (0, 0, 0);
    for ((r, (p, _)), t) in lm.manifest.records.iter().zip(&preds).zip(&in_train) {
        let ok = r.label == *p;
        hits += ok as usize;
        if !t {
            held += 1;
            held_hits += ok as usize;
        }
    }
    let records = lm.manifest.records.clone();
    ctx.write_csv(PREDICTIONS_FILE, move |w| {
        write_row(w, &["h1", "h2", "label", "predicted", "p_afm", "p_spt", "p_pm", "in_training_set"])?;
        for ((r, (p, probs)), t) in records.iter().zip(&preds).zip(&in_train) {
            write_row(
                w,
                &[
                    sig12(r.h1),
                    sig12(r.h2),
                    r.label.to_string(),
                    p.to_string(),
                    sig12(probs[0]),
                    sig12(probs[1]),
                    sig12(probs[2]),
                    t.to_string(),
                ],
            )?;
        }
        Ok(())
    })?;
    Ok(EvalSummary {
        held_out: held,
        held_out_accuracy: held_hits as f64 / held.max(1) as f64,
        overall_accuracy: hits as f64 / all.len().max(1) as f64,
    })
}

#[derive(Clone, Debug)]
pub struct AttentionSummary {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub label: PhaseLabel,
    pub matrix: AttentionMatrix<f64>,
}

impl AttentionSummary {
    pub fn min_off_diagonal(&self) -> f64 {
        self.matrix
            .upper_triangle()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Attention matrix of the trained feature map at one (h1, h2).
pub fn cmd_attention(ctx: &Context, checkpoint: Option<&Path>, h1: f64, h2: f64) -> Result<AttentionSummary> {
    let (_, model) = load_checkpoint(ctx, checkpoint)?;
    let d = &ctx.cfg.dataset;
    let rec = GroundStateRecord::compute(d.n_sites, h1, h2, d.seed, &d.thresholds, d.solver)?;
    let mut phi = rec.state.expect("computed state");
    swapattn::ansatz::apply_ansatz(&mut phi, &model.ansatz)?;
    let a = &ctx.cfg.attention;
    let matrix = if a.circuit || a.shots.is_some() {
        attention_circuit(&phi, a.shots, a.seed)?
    } else {
        attention_analytic(&phi)?
    };
    let stem = format!("attention_h1_{h1:.4}_h2_{h2:.4}");
    let m = matrix.clone();
    let csv = ctx.write_csv(&format!("{stem}.csv"), move |w| m.write_heatmap_csv(w))?;
    let mut doc = matrix.heatmap_json(h1, h2, Some(rec.label));
    doc["config_digest"] = serde_json::Value::String(ctx.digest.clone());
    let json = ctx.path(&format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&doc)?;
    write_atomic(&json, |w| writeln!(w, "{text}"))?;
    Ok(AttentionSummary {
        csv,
        json,
        label: rec.label,
        matrix,
    })
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub record: GroundStateRecord,
    pub contrast: Option<ContrastResult>,
    pub profile: Option<CorrelationProfile>,
}

#[derive(Clone, Debug)]
pub struct AnalyzeSummary {
    pub h1: f64,
    pub points: Vec<SweepPoint>,
    /// Energy-curvature crossovers along the sweep.
    pub boundaries: Vec<f64>,
    pub contrast_sign_changes: Vec<f64>,
    /// Sweep indices nearest the centre of each region between boundaries.
    pub representative: Vec<usize>,
}

/// Contrast and correlation-length sweep at fixed h1.
pub fn cmd_analyze(ctx: &Context, checkpoint: Option<&Path>) -> Result<AnalyzeSummary> {
    let (_, model) = load_checkpoint(ctx, checkpoint)?;
    let d = &ctx.cfg.dataset;
    let sw = &ctx.cfg.sweep;
    let h1 = nearest_value(&d.grid.h1_values(), sw.h1_target).unwrap_or(sw.h1_target);
    let h2s = sw.h2_values();
    let records = sweep_ground_states(d.n_sites, h1, &h2s, d.seed, &d.thresholds, d.solver)?;
    let boundaries = sweep_boundaries(&records, &BoundaryOptions::default())?;

    let points = records
        .into_par_iter()
        .map(|record| {
            let m = model.attention(record.state.as_ref().expect("computed state"))?;
            Ok(SweepPoint {
                contrast: contrast(&m).ok().map(|c| c.at(record.h1, record.h2)),
                profile: correlation_profile(&m).ok(),
                record,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let undefined = points.iter().filter(|p| p.contrast.is_none()).count();
    if undefined > 0 {
        warn(format!("contrast undefined at {undefined} sweep points"));
    }
    let c_series: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.contrast.map(|c| (c.h2, c.c)))
        .collect();
    let crossings = sign_changes(&c_series);
    let representative = segment_midpoints(sw.h2[0], sw.h2[1], &boundaries)
        .into_iter()
        .map(|t| {
            (0..h2s.len())
                .min_by(|&a, &b| (h2s[a] - t).abs().total_cmp(&(h2s[b] - t).abs()))
                .expect("non-empty sweep")
        })
        .collect();

    let rows: Vec<_> = points
        .iter()
        .filter_map(|p| p.contrast.map(|c| (c, p.record.label)))
        .collect();
    ctx.write_csv(CONTRAST_FILE, move |w| write_contrast_csv(w, &rows))?;
    let rows: Vec<_> = points
        .iter()
        .filter_map(|p| p.profile.clone().map(|f| (p.record.h1, p.record.h2, p.record.label, f)))
        .collect();
    ctx.write_csv(XI_FILE, move |w| write_xi_csv(w, &rows))?;
    let (b, c) = (boundaries.clone(), crossings.clone());
    ctx.write_csv(SWEEP_BOUNDARIES_FILE, move |w| {
        write_row(w, &["kind", "h1", "h2"])?;
        for x in &b {
            write_row(w, &["energy_curvature".to_string(), sig12(h1), sig12(*x)])?;
        }
        for x in &c {
            write_row(w, &["contrast_sign_change".to_string(), sig12(h1), sig12(*x)])?;
        }
        Ok(())
    })?;
    Ok(AnalyzeSummary {
        h1,
        points,
        boundaries,
        contrast_sign_changes: crossings,
        representative,
    })
}

#[derive(Clone, Debug)]
pub struct PhaseDiagramSummary {
    pub rows: usize,
    pub boundary_points: usize,
}

pub fn cmd_phase_diagram(ctx: &Context, manifest: Option<&Path>) -> Result<PhaseDiagramSummary> {
    let lm = load_manifest(ctx, manifest)?;
    let pd = phase_diagram(&lm.dataset(), &BoundaryOptions::default())?;
    let summary = PhaseDiagramSummary {
        rows: pd.rows.len(),
        boundary_points: pd.boundaries.len(),
    };
    let grid = pd.clone();
    ctx.write_csv(PHASE_GRID_FILE, move |w| grid.write_grid_csv(w))?;
    ctx.write_csv(PHASE_BOUNDARIES_FILE, move |w| pd.write_boundaries_csv(w))?;
    Ok(summary)
}

pub fn cmd_accuracy_curve(ctx: &Context, manifest: Option<&Path>) -> Result<AccuracyTable> {
    let lm = load_manifest(ctx, manifest)?;
    let mut ds = lm.dataset();
    let all: Vec<usize> = (0..ds.records.len()).collect();
    for (r, s) in ds.records.iter_mut().zip(lm.states(&all)?) {
        r.state = Some(s);
    }
    let a = &ctx.cfg.accuracy;
    let exp = AccuracyExperiment {
        sizes: a.sizes.clone(),
        repeats: a.repeats,
        seed: a.seed,
        train: ctx.cfg.train.clone(),
    };
    let table = accuracy_experiment(&ds, &exp)?;
    let t = table.clone();
    ctx.write_csv(ACCURACY_FILE, move |w| t.write_summary_csv(w))?;
    let t = table.clone();
    ctx.write_csv(ACCURACY_CELLS_FILE, move |w| t.write_cells_csv(w))?;
    Ok(table)
}
