//! Subcommand bodies. Every output file is written atomically and gets a
//! `<file>.run.json` manifest beside it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lhscad::assess::{froc_from_markers, CaseRecord, TpfCriterion, ViewRecord};
use lhscad::enhance::enhance_image;
use lhscad::imgcore::{load_image, save_image, write_atomic, GrayImage};
use lhscad::massdetect::{
    find_markers, prepare_training, score_image, score_image_mcs, train_prepared, MarkerSet, ModelFile,
};
use lhscad::mcdetect::{cluster_markers, detect_foci};
use lhscad::phantom::{
    make_corpus, plan_corpus, read_manifest, AnnotationSet, Difficulty, LesionKind, ManifestRecord, MANIFEST_FILE,
};
use log::info;
use serde::Serialize;

use crate::settings::Settings;
use crate::{DetectArgs, DetectMcArgs, EnhanceArgs, EvaluateArgs, Failure, PhantomArgs, TrainArgs};

pub const MARKERS_EXT: &str = "markers";

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: Vec<String>,
    output: String,
    seed: u64,
    settings: &'a Settings,
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    output.with_file_name(name)
}

fn write_manifest(output: &Path, command: &'static str, inputs: &[&Path], settings: &Settings) -> anyhow::Result<()> {
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        output: output.display().to_string(),
        seed: settings.seed,
        settings,
    };
    let mut bytes = serde_json::to_vec_pretty(&m)?;
    bytes.push(b'\n');
    write_atomic(manifest_path(output), &bytes)?;
    Ok(())
}

fn write_output(
    output: &Path,
    bytes: &[u8],
    command: &'static str,
    inputs: &[&Path],
    settings: &Settings,
) -> anyhow::Result<()> {
    write_atomic(output, bytes).with_context(|| format!("writing {}", output.display()))?;
    write_manifest(output, command, inputs, settings)
}

fn write_image(output: &Path, img: &GrayImage, command: &'static str, inputs: &[&Path], s: &Settings) -> anyhow::Result<()> {
    save_image(output, img).with_context(|| format!("writing {}", output.display()))?;
    write_manifest(output, command, inputs, s)
}

fn load(path: &Path) -> anyhow::Result<GrayImage> {
    load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn manifest_file(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join(MANIFEST_FILE)
    } else {
        data.to_path_buf()
    }
}

pub fn phantom(a: &PhantomArgs, s: &Settings) -> Result<(), Failure> {
    let difficulty: Difficulty = a.difficulty.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    if a.width < 64 || a.height < 64 {
        return Err(Failure::Usage("phantom width and height must be at least 64".into()));
    }
    let plan = plan_corpus(a.positive, a.normal, difficulty, s.seed, a.width, a.height);
    let records = make_corpus(&a.out, &plan)?;
    info!("wrote {} views to {}", records.len(), a.out.display());
    write_manifest(&a.out.join(MANIFEST_FILE), "phantom", &[], s)?;
    Ok(())
}

pub fn train(a: &TrainArgs, s: &Settings) -> Result<(), Failure> {
    let ensemble = a.mcs || a.windows.is_some();
    let windows = if ensemble { s.mass.mcs_windows.clone() } else { vec![s.mass.patch_w1] };
    let manifest = manifest_file(&a.data);
    let records = read_manifest(&manifest)?;
    let mut set = Vec::new();
    for r in &records {
        let ann = AnnotationSet::load(&r.annotation)?.of_kind(LesionKind::Mass);
        if ann.is_empty() {
            continue;
        }
        set.push((load(&r.image)?, ann));
    }
    if set.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!(
            "{} lists no view with a mass annotation",
            manifest.display()
        )));
    }
    info!("training windows {windows:?} on {} views", set.len());
    let views = prepare_training(&set, &s.mass.enhance)?;
    let models = train_prepared(&views, &s.mass, &windows, s.seed)?;
    let file = ModelFile::new(s.mass.clone(), s.seed, models);
    write_output(&a.out, &file.to_bytes(), "train", &[&manifest], s)?;
    Ok(())
}

pub fn detect(a: &DetectArgs, s: &Settings) -> Result<(), Failure> {
    let file = ModelFile::load(&a.model)?;
    let img = load(&a.input)?;
    let score = if a.mcs {
        score_image_mcs(&img, &file.models, &s.mass)?
    } else {
        let model = match file.window(s.mass.patch_w1) {
            Ok(m) => m,
            Err(_) if file.models.len() == 1 => &file.models[0],
            Err(e) => return Err(e.into()),
        };
        let mut cfg = s.mass.clone();
        cfg.patch_w1 = model.patch_w1;
        score_image(&img, model, &cfg)?
    };
    let markers = find_markers(&score, s.mass_threshold);
    info!("{} markers", markers.len());
    let inputs = [a.model.as_path(), a.input.as_path()];
    write_image(&a.score_out, &score.to_gray(), "detect", &inputs, s)?;
    write_output(&a.markers_out, markers.to_text().as_bytes(), "detect", &inputs, s)?;
    Ok(())
}

pub fn detect_mc(a: &DetectMcArgs, s: &Settings) -> Result<(), Failure> {
    let img = load(&a.input)?;
    let foci = detect_foci(&img, &s.mc)?;
    let markers = cluster_markers(&foci, s.mc.min_foci_per_cluster);
    info!("{} foci in {} clusters, {} reported", foci.foci.len(), foci.clusters.len(), markers.len());
    write_output(&a.foci_out, markers.to_text().as_bytes(), "detect-mc", &[&a.input], s)?;
    Ok(())
}

pub fn enhance(a: &EnhanceArgs, s: &Settings) -> Result<(), Failure> {
    let img = load(&a.input)?;
    let enhanced = enhance_image(&img, &s.enhance)?;
    write_image(&a.output, &enhanced.image, "enhance", &[&a.input], s)?;
    Ok(())
}

/// Groups manifest views and their marker files by case, in order of
/// first appearance.
fn case_records(
    records: &[ManifestRecord],
    kind: LesionKind,
    markers_dir: &Path,
) -> anyhow::Result<(Vec<CaseRecord>, Vec<Vec<MarkerSet>>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut cases: Vec<CaseRecord> = Vec::new();
    let mut detections: Vec<Vec<MarkerSet>> = Vec::new();
    for r in records {
        let i = *index.entry(&r.case_id).or_insert_with(|| {
            cases.push(CaseRecord {
                case_id: r.case_id.clone(),
                views: Vec::new(),
            });
            detections.push(Vec::new());
            cases.len() - 1
        });
        let annotations = AnnotationSet::load(&r.annotation)?.of_kind(kind);
        cases[i].views.push(ViewRecord {
            side: r.side,
            view: r.view,
            annotations,
        });
        let p = markers_path(markers_dir, &r.image);
        detections[i].push(MarkerSet::load(&p).with_context(|| format!("markers for {}", r.image.display()))?);
    }
    Ok((cases, detections))
}

pub fn markers_path(dir: &Path, image: &Path) -> PathBuf {
    let stem = image.file_stem().unwrap_or_default();
    dir.join(stem).with_extension(MARKERS_EXT)
}

pub fn evaluate(a: &EvaluateArgs, s: &Settings) -> Result<(), Failure> {
    let criterion: TpfCriterion = a.criterion.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    let kind: LesionKind = a.kind.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    let thresholds: Vec<f64> = a
        .thresholds
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad threshold {t:?}"))))
        .collect::<Result<_, _>>()?;
    if thresholds.windows(2).any(|w| w[0] < w[1]) {
        return Err(Failure::Usage("thresholds must be sorted descending".into()));
    }
    let records = read_manifest(&a.dataset)?;
    let (cases, detections) = case_records(&records, kind, &a.markers)?;
    let points = froc_from_markers(&cases, &detections, &thresholds, criterion)?;
    let mut table = String::from("threshold\ttpf\tfm_per_image\n");
    for p in &points {
        table.push_str(&format!("{}\t{}\t{}\n", p.threshold, p.tpf, p.fm_per_image));
    }
    match &a.out {
        Some(out) => write_output(out, table.as_bytes(), "evaluate", &[&a.dataset, &a.markers], s)?,
        None => print!("{table}"),
    }
    Ok(())
}

