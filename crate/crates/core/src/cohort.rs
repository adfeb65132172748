//! Whole-image pipeline and multi-seed cohorts with a checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::neighborhood::{run_neighborhood_model, NeighborhoodMask, NeighborhoodRun};
use crate::phenotype::{run_phenotype_model, PhenotypeRun, PhenotypeState};
use crate::rng::RandomStream;
use crate::texture::{render_multiplex, MultiplexImage};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Everything produced for one seed.
#[derive(Debug, Clone)]
pub struct GeneratedImage {
    pub seed: u64,
    pub neighborhoods: NeighborhoodRun,
    pub phenotypes: PhenotypeRun,
    /// Already rounded to `f32`, so it equals what is written to disk.
    pub image: MultiplexImage,
    pub metrics: MetricsReport,
}

pub fn generate_image(cfg: &SimulationConfig, seed: u64) -> Result<GeneratedImage> {
    let stream = RandomStream::new(seed);
    let neighborhoods = run_neighborhood_model(cfg, &mut stream.substream("neighborhood", 0))?;
    let phenotypes = run_phenotype_model(
        cfg,
        &neighborhoods.mask,
        &mut stream.substream("phenotype", 0),
    )?;
    let image = render_multiplex(&phenotypes.state, cfg, &stream).quantized();
    let metrics = compute_metrics(cfg, &neighborhoods.mask, &phenotypes.state, &image);
    Ok(GeneratedImage {
        seed,
        neighborhoods,
        phenotypes,
        image,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub seed: u64,
    pub neighborhood_mask: FileEntry,
    pub phenotype_mask: FileEntry,
    pub instance_map: FileEntry,
    pub multiplex: FileEntry,
    pub multiplex_sidecar: FileEntry,
    pub metrics: FileEntry,
    pub metric_tables: Vec<FileEntry>,
    #[serde(default)]
    pub telemetry: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: String,
    pub config: SimulationConfig,
    pub seeds: Vec<u64>,
    pub images: Vec<ImageEntry>,
}

fn seed_dir(seed: u64) -> String {
    format!("seed_{seed}")
}

fn file_entry(root: &Path, rel: &str) -> Result<FileEntry> {
    let path = root.join(rel);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(FileEntry {
        path: rel.to_string(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn rel_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn write_image(root: &Path, gen: &GeneratedImage, telemetry: bool) -> Result<ImageEntry> {
    let dir_name = seed_dir(gen.seed);
    let dir = root.join(&dir_name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let rel = |name: &str| format!("{dir_name}/{name}");

    io::write_label_mask(
        &gen.neighborhoods.mask.labels,
        &root.join(rel("neighborhoods.pgm")),
    )?;
    io::write_label_mask(
        &gen.phenotypes.state.labels,
        &root.join(rel("phenotypes.pgm")),
    )?;
    io::write_instance_map(
        &gen.phenotypes.state.instance_ids,
        &root.join(rel("instances.pgm")),
    )?;
    let sidecar = io::write_multiplex(&gen.image, &root.join(rel("image.f32")))?;
    let metric_paths = io::write_metrics(&gen.metrics, &dir.join("metrics"))?;

    let mut telemetry_files = Vec::new();
    if telemetry {
        for (name, rows) in [
            ("telemetry_neighborhood.csv", &gen.neighborhoods.telemetry),
            ("telemetry_phenotype.csv", &gen.phenotypes.telemetry),
        ] {
            io::write_telemetry(rows, &root.join(rel(name)))?;
            telemetry_files.push(file_entry(root, &rel(name))?);
        }
    }

    let metric_entries = metric_paths
        .iter()
        .map(|p| file_entry(root, &rel_name(root, p)))
        .collect::<Result<Vec<_>>>()?;
    let (metrics, metric_tables) = metric_entries
        .split_first()
        .expect("metrics.json is always written");
    Ok(ImageEntry {
        seed: gen.seed,
        neighborhood_mask: file_entry(root, &rel("neighborhoods.pgm"))?,
        phenotype_mask: file_entry(root, &rel("phenotypes.pgm"))?,
        instance_map: file_entry(root, &rel("instances.pgm"))?,
        multiplex: file_entry(root, &rel("image.f32"))?,
        multiplex_sidecar: file_entry(root, &rel_name(root, &sidecar))?,
        metrics: metrics.clone(),
        metric_tables: metric_tables.to_vec(),
        telemetry: telemetry_files,
    })
}

fn one_seed(
    cfg: &SimulationConfig,
    seed: u64,
    out_dir: &Path,
    telemetry: bool,
) -> Result<ImageEntry> {
    generate_image(cfg, seed)
        .and_then(|gen| write_image(out_dir, &gen, telemetry))
        .map_err(|e| Error::Seed {
            seed,
            source: Box::new(e),
        })
}

/// Runs every seed, writes its artifacts under `out_dir/seed_<s>/`, and
/// writes `out_dir/manifest.json` last.
pub fn generate_cohort(
    cfg: &SimulationConfig,
    seeds: &[u64],
    out_dir: &Path,
    telemetry: bool,
) -> Result<DatasetManifest> {
    let problems = crate::config::validate_config(cfg);
    if !problems.is_empty() {
        return Err(Error::Invalid(problems));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid(vec![format!(
            "seed {} listed more than once",
            w[0]
        )]));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    #[cfg(feature = "parallel")]
    let images = {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&s| one_seed(cfg, s, out_dir, telemetry))
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let images = seeds
        .iter()
        .map(|&s| one_seed(cfg, s, out_dir, telemetry))
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        format_version: io::FORMAT_VERSION.to_string(),
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        images,
    };
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

impl ImageEntry {
    pub fn files(&self) -> impl Iterator<Item = &FileEntry> {
        [
            &self.neighborhood_mask,
            &self.phenotype_mask,
            &self.instance_map,
            &self.multiplex,
            &self.multiplex_sidecar,
            &self.metrics,
        ]
        .into_iter()
        .chain(&self.metric_tables)
        .chain(&self.telemetry)
    }
}

/// Checks every referenced file against its recorded length and digest.
/// Returns one message per mismatch.
pub fn verify_manifest(manifest: &DatasetManifest, root: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    for entry in manifest.images.iter().flat_map(|i| i.files()) {
        match file_entry(root, &entry.path) {
            Ok(actual) if actual == *entry => {}
            Ok(actual) => problems.push(format!(
                "{}: recorded {} bytes / {}, found {} bytes / {}",
                entry.path, entry.bytes, entry.sha256, actual.bytes, actual.sha256
            )),
            Err(e) => problems.push(e.to_string()),
        }
    }
    problems
}

/// Reloads masks and images of one manifest entry.
pub fn load_image(
    root: &Path,
    entry: &ImageEntry,
) -> Result<(NeighborhoodMask, PhenotypeState, MultiplexImage)> {
    let nb = NeighborhoodMask::fixed(io::read_label_mask(
        &root.join(&entry.neighborhood_mask.path),
    )?);
    let labels = io::read_label_mask(&root.join(&entry.phenotype_mask.path))?;
    let ids = io::read_instance_map(&root.join(&entry.instance_map.path))?;
    let img = io::read_multiplex(&root.join(&entry.multiplex.path))?;
    Ok((nb, PhenotypeState::fixed(labels, ids), img))
}

/// Recomputes every image's metrics from the stored masks and volumes and
/// writes them to `out_dir/seed_<s>/metrics/`. Returns the written paths.
pub fn recompute_stats(manifest_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = read_manifest(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let problems = verify_manifest(&manifest, root);
    if !problems.is_empty() {
        return Err(Error::Format {
            kind: "manifest",
            path: manifest_path.to_path_buf(),
            reason: problems.join("; "),
        });
    }
    let mut written = Vec::new();
    for entry in &manifest.images {
        let (nb, state, img) = load_image(root, entry).map_err(|e| Error::Seed {
            seed: entry.seed,
            source: Box::new(e),
        })?;
        let report = compute_metrics(&manifest.config, &nb, &state, &img);
        written.extend(io::write_metrics(
            &report,
            &out_dir.join(seed_dir(entry.seed)).join("metrics"),
        )?);
    }
    Ok(written)
}
