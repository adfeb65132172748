//! Browser front end: regenerate neighborhoods, place cells, and re-render
//! the acquired image, each exposed as RGBA buffers for a canvas.

use tissuesim::cohort::generate_image;
use tissuesim::neighborhood::run_neighborhood_model;
use tissuesim::phenotype::run_phenotype_model;
use tissuesim::texture::render_multiplex;
use tissuesim::{
    preset_fig4, MultiplexImage, NeighborhoodMask, PhenotypeState, PresetScale, RandomStream,
    Result, SimulationConfig,
};
use wasm_bindgen::prelude::*;

const NEIGHBORHOOD_COLORS: [[u8; 3]; 8] = [
    [60, 60, 70],
    [230, 159, 0],
    [86, 180, 233],
    [0, 158, 115],
    [240, 228, 66],
    [204, 121, 167],
    [213, 94, 0],
    [0, 114, 178],
];

const PHENOTYPE_COLORS: [[u8; 3]; 10] = [
    [228, 26, 28],
    [55, 126, 184],
    [77, 175, 74],
    [152, 78, 163],
    [255, 127, 0],
    [255, 255, 51],
    [166, 86, 40],
    [247, 129, 191],
    [153, 153, 153],
    [102, 194, 165],
];

/// Additive display colour of each marker channel.
const MARKER_COLORS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.4, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
];

pub fn neighborhood_rgba(mask: &NeighborhoodMask) -> Vec<u8> {
    mask.labels
        .as_slice()
        .iter()
        .flat_map(|&l| {
            let [r, g, b] = NEIGHBORHOOD_COLORS[(l as usize - 1) % NEIGHBORHOOD_COLORS.len()];
            [r, g, b, 255]
        })
        .collect()
}

/// Cells in phenotype colours with darkened outlines; background black.
pub fn phenotype_rgba(state: &PhenotypeState, background: u16) -> Vec<u8> {
    let (w, h) = (state.width(), state.height());
    let ids = state.instance_ids.as_slice();
    let mut out = Vec::with_capacity(4 * w * h);
    for (i, &l) in state.labels.as_slice().iter().enumerate() {
        if l == background {
            out.extend_from_slice(&[0, 0, 0, 255]);
            continue;
        }
        let (x, y) = (i % w, i / w);
        let edge = (x > 0 && ids[i - 1] != ids[i])
            || (x + 1 < w && ids[i + 1] != ids[i])
            || (y > 0 && ids[i - w] != ids[i])
            || (y + 1 < h && ids[i + w] != ids[i]);
        let [r, g, b] = PHENOTYPE_COLORS[(l as usize - 1) % PHENOTYPE_COLORS.len()];
        let k = if edge { 2 } else { 1 };
        out.extend_from_slice(&[r / k, g / k, b / k, 255]);
    }
    out
}

/// Additive false-colour composite of the channels whose bit is set in
/// `channel_mask`, each scaled by its own maximum.
pub fn multiplex_rgba(img: &MultiplexImage, channel_mask: u32) -> Vec<u8> {
    let n = img.plane_len();
    let mut rgb = vec![0.0f64; 3 * n];
    for c in 0..img.channels {
        if channel_mask & (1 << c) == 0 {
            continue;
        }
        let plane = img.channel(c);
        let max = plane.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        let col = MARKER_COLORS[c % MARKER_COLORS.len()];
        for (i, &v) in plane.iter().enumerate() {
            for k in 0..3 {
                rgb[3 * i + k] += col[k] * v / max;
            }
        }
    }
    rgb.chunks_exact(3)
        .flat_map(|p| {
            let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [q(p[0]), q(p[1]), q(p[2]), 255]
        })
        .collect()
}

/// Stages are rerun independently; a later stage is dropped whenever an
/// earlier one changes.
#[derive(Debug, Clone)]
pub struct Session {
    pub cfg: SimulationConfig,
    pub seed: u64,
    pub neighborhoods: Option<NeighborhoodMask>,
    pub phenotypes: Option<PhenotypeState>,
    pub image: Option<MultiplexImage>,
}

impl Session {
    pub fn new(width: usize, height: usize) -> Self {
        Session {
            cfg: preset_fig4(PresetScale::Desk).with_size(width, height),
            seed: 1,
            neighborhoods: None,
            phenotypes: None,
            image: None,
        }
    }

    /// Sets the Nb2–Nb3 and Nb5–Nb6 couplings (symmetric).
    pub fn set_couplings(&mut self, attraction: f64, repulsion: f64) {
        let m = &mut self.cfg.neighborhood_interaction;
        m[1][2] = attraction;
        m[2][1] = attraction;
        m[4][5] = repulsion;
        m[5][4] = repulsion;
    }

    /// Returns the number of optimization steps taken.
    pub fn generate_neighborhoods(&mut self, seed: u64) -> Result<usize> {
        self.seed = seed;
        let stream = RandomStream::new(seed);
        let run = run_neighborhood_model(&self.cfg, &mut stream.substream("neighborhood", 0))?;
        self.neighborhoods = Some(run.mask);
        self.phenotypes = None;
        self.image = None;
        Ok(run.telemetry.len())
    }

    /// Returns the number of cells placed.
    pub fn place_cells(&mut self) -> Result<usize> {
        if self.neighborhoods.is_none() {
            self.generate_neighborhoods(self.seed)?;
        }
        let nb = self.neighborhoods.as_ref().expect("generated above");
        let stream = RandomStream::new(self.seed);
        let run = run_phenotype_model(&self.cfg, nb, &mut stream.substream("phenotype", 0))?;
        self.phenotypes = Some(run.state);
        self.image = None;
        Ok(run.cells.len())
    }

    pub fn render(&mut self, leakage_sigma: f64, psf_sigma: f64, snr_db: f64) -> Result<()> {
        self.cfg.leakage_sigma = leakage_sigma;
        self.cfg.psf_sigma = psf_sigma;
        self.cfg.snr_db = snr_db;
        let problems = tissuesim::validate_config(&self.cfg);
        if !problems.is_empty() {
            return Err(tissuesim::Error::Invalid(problems));
        }
        if self.phenotypes.is_none() {
            self.place_cells()?;
        }
        let state = self.phenotypes.as_ref().expect("placed above");
        self.image = Some(render_multiplex(
            state,
            &self.cfg,
            &RandomStream::new(self.seed),
        ));
        Ok(())
    }

    /// Whole pipeline in one call; matches `render` after the three stages
    /// for the same seed.
    pub fn run_all(&mut self, seed: u64) -> Result<()> {
        let generated = generate_image(&self.cfg, seed)?;
        self.seed = seed;
        self.neighborhoods = Some(generated.neighborhoods.mask);
        self.phenotypes = Some(generated.phenotypes.state);
        self.image = Some(generated.image);
        Ok(())
    }
}

fn js(e: tissuesim::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: u32, height: u32) -> Demo {
        Demo {
            inner: Session::new(width as usize, height as usize),
        }
    }

    pub fn width(&self) -> u32 {
        self.inner.cfg.width as u32
    }

    pub fn height(&self) -> u32 {
        self.inner.cfg.height as u32
    }

    pub fn generate_neighborhoods(
        &mut self,
        seed: u32,
        attraction: f64,
        repulsion: f64,
    ) -> Result<u32, JsError> {
        self.inner.set_couplings(attraction, repulsion);
        self.inner
            .generate_neighborhoods(seed as u64)
            .map(|n| n as u32)
            .map_err(js)
    }

    pub fn place_cells(&mut self) -> Result<u32, JsError> {
        self.inner.place_cells().map(|n| n as u32).map_err(js)
    }

    pub fn render(
        &mut self,
        leakage_sigma: f64,
        psf_sigma: f64,
        snr_db: f64,
    ) -> Result<(), JsError> {
        self.inner
            .render(leakage_sigma, psf_sigma, snr_db)
            .map_err(js)
    }

    pub fn neighborhood_rgba(&self) -> Vec<u8> {
        self.inner
            .neighborhoods
            .as_ref()
            .map(neighborhood_rgba)
            .unwrap_or_default()
    }

    pub fn phenotype_rgba(&self) -> Vec<u8> {
        let bg = self.inner.cfg.background_phenotype as u16;
        self.inner
            .phenotypes
            .as_ref()
            .map(|s| phenotype_rgba(s, bg))
            .unwrap_or_default()
    }

    pub fn multiplex_rgba(&self, channel_mask: u32) -> Vec<u8> {
        self.inner
            .image
            .as_ref()
            .map(|img| multiplex_rgba(img, channel_mask))
            .unwrap_or_default()
    }
}
