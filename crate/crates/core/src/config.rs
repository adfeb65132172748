//! Simulation parameters, their TOML schema, validation, and the built-in
//! nine-phenotype / six-neighborhood preset.
//!
//! Labels are 1-based everywhere a user sees them (config, masks, reports).
//! Matrices are row-major nested arrays:
//!
//! * `neighborhood_interaction[i][j]`, N×N
//! * `phenotype_abundance[p][n]`, P×N, each column sums to 100
//! * `phenotype_interaction[p][q][n]`, P×P×N
//! * `marker_expression[p][c]`, P×C

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEAKAGE_SIGMA: f64 = 0.5;
pub const DEFAULT_PSF_SIGMA: f64 = 0.75;
pub const DEFAULT_SNR_DB: f64 = 20.0;

const SUM_TOLERANCE: f64 = 1e-9;

/// How a non-homogeneous neighborhood window is rewritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodRule {
    /// Sum the rows of the update matrix selected by every label in the
    /// window and write the winning column's label to the whole window.
    #[default]
    ContextSum,
    /// Map every pixel independently through the argmax of its own row.
    RowArgmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub width: usize,
    pub height: usize,
    pub num_neighborhoods: usize,
    pub neighborhood_abundance: Vec<f64>,
    pub neighborhood_interaction: Vec<Vec<f64>>,
    pub num_phenotypes: usize,
    pub background_phenotype: usize,
    pub background_neighborhood: usize,
    pub phenotype_abundance: Vec<Vec<f64>>,
    pub phenotype_interaction: Vec<Vec<Vec<f64>>>,
    pub phenotype_eccentricity: Vec<f64>,
    pub phenotype_size: Vec<f64>,
    pub num_markers: usize,
    pub marker_expression: Vec<Vec<f64>>,
    #[serde(default = "default_leakage_sigma")]
    pub leakage_sigma: f64,
    #[serde(default = "default_psf_sigma")]
    pub psf_sigma: f64,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub neighborhood_rule: NeighborhoodRule,
}

fn default_leakage_sigma() -> f64 {
    DEFAULT_LEAKAGE_SIGMA
}
fn default_psf_sigma() -> f64 {
    DEFAULT_PSF_SIGMA
}
fn default_snr_db() -> f64 {
    DEFAULT_SNR_DB
}

/// Parse and validate a TOML config document.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let cfg: SimulationConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let violations = validate_config(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Serialize to the same TOML schema `parse_config` reads.
pub fn to_toml(cfg: &SimulationConfig) -> String {
    toml::to_string(cfg).expect("config is always representable as TOML")
}

/// Every violated invariant, in a stable order. Empty means valid.
pub fn validate_config(cfg: &SimulationConfig) -> Vec<String> {
    let mut v = Vec::new();
    let n = cfg.num_neighborhoods;
    let p = cfg.num_phenotypes;
    let c = cfg.num_markers;

    if cfg.width == 0 || cfg.height == 0 {
        v.push(format!(
            "image size {}x{} must be positive",
            cfg.width, cfg.height
        ));
    }
    for (name, value) in [
        ("num_neighborhoods", n),
        ("num_phenotypes", p),
        ("num_markers", c),
    ] {
        if value == 0 {
            v.push(format!("{name} must be positive"));
        }
    }
    if !(1..=n).contains(&cfg.background_neighborhood) {
        v.push(format!(
            "background_neighborhood {} outside 1..{n}",
            cfg.background_neighborhood
        ));
    }
    if !(1..=p).contains(&cfg.background_phenotype) {
        v.push(format!(
            "background_phenotype {} outside 1..{p}",
            cfg.background_phenotype
        ));
    }

    if cfg.neighborhood_abundance.len() != n {
        v.push(format!(
            "neighborhood_abundance has {} entries, expected {n}",
            cfg.neighborhood_abundance.len()
        ));
    } else {
        if cfg.neighborhood_abundance.iter().any(|&a| !(a >= 0.0)) {
            v.push("neighborhood_abundance entries must be non-negative".into());
        }
        let sum: f64 = cfg.neighborhood_abundance.iter().sum();
        if (sum - 100.0).abs() > SUM_TOLERANCE {
            v.push(format!(
                "neighborhood_abundance sums to {sum}, expected 100"
            ));
        }
    }

    check_matrix(
        &mut v,
        "neighborhood_interaction",
        &cfg.neighborhood_interaction,
        n,
        n,
    );

    if check_matrix(
        &mut v,
        "phenotype_abundance",
        &cfg.phenotype_abundance,
        p,
        n,
    ) {
        if cfg
            .phenotype_abundance
            .iter()
            .flatten()
            .any(|&a| !(a >= 0.0))
        {
            v.push("phenotype_abundance entries must be non-negative".into());
        }
        for col in 0..n {
            let sum: f64 = cfg.phenotype_abundance.iter().map(|row| row[col]).sum();
            if (sum - 100.0).abs() > SUM_TOLERANCE {
                v.push(format!(
                    "phenotype_abundance column {} (neighborhood {}) sums to {sum}, expected 100",
                    col + 1,
                    col + 1
                ));
            }
        }
    }

    if cfg.phenotype_interaction.len() != p
        || cfg
            .phenotype_interaction
            .iter()
            .any(|plane| plane.len() != p || plane.iter().any(|row| row.len() != n))
    {
        v.push(format!("phenotype_interaction must be {p}x{p}x{n}"));
    }

    if cfg.phenotype_eccentricity.len() != p {
        v.push(format!(
            "phenotype_eccentricity has {} entries, expected {p}",
            cfg.phenotype_eccentricity.len()
        ));
    }
    for (i, &e) in cfg.phenotype_eccentricity.iter().enumerate() {
        if !(0.0..1.0).contains(&e) {
            v.push(format!(
                "phenotype_eccentricity of phenotype {} is {e}, must be in [0, 1)",
                i + 1
            ));
        }
    }
    if cfg.phenotype_size.len() != p {
        v.push(format!(
            "phenotype_size has {} entries, expected {p}",
            cfg.phenotype_size.len()
        ));
    }
    for (i, &s) in cfg.phenotype_size.iter().enumerate() {
        if !(s >= 1.0) {
            v.push(format!(
                "phenotype_size of phenotype {} is {s}, must be >= 1",
                i + 1
            ));
        } else if s > crate::grid::WINDOW_RADIUS as f64 {
            v.push(format!(
                "phenotype_size of phenotype {} is {s}, must fit the {}-pixel window radius",
                i + 1,
                crate::grid::WINDOW_RADIUS
            ));
        }
    }

    if check_matrix(&mut v, "marker_expression", &cfg.marker_expression, p, c) {
        if cfg
            .marker_expression
            .iter()
            .flatten()
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            v.push("marker_expression entries must be in [0, 1]".into());
        }
        if let Some(row) = cfg
            .background_phenotype
            .checked_sub(1)
            .and_then(|b| cfg.marker_expression.get(b))
        {
            if row.iter().any(|&x| x != 0.0) {
                v.push(format!(
                    "marker_expression row of background phenotype {} must be all zeros",
                    cfg.background_phenotype
                ));
            }
        }
    }

    if !(cfg.leakage_sigma > 0.0) {
        v.push(format!(
            "leakage_sigma {} must be positive",
            cfg.leakage_sigma
        ));
    }
    if !(cfg.psf_sigma > 0.0) {
        v.push(format!("psf_sigma {} must be positive", cfg.psf_sigma));
    }
    if cfg.snr_db.is_nan() {
        v.push("snr_db must be a number".into());
    }
    v
}

fn check_matrix(v: &mut Vec<String>, name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> bool {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        v.push(format!("{name} must be {rows}x{cols}"));
        false
    } else {
        true
    }
}

impl SimulationConfig {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// 0-based index of the background phenotype.
    pub fn background_phenotype_index(&self) -> usize {
        self.background_phenotype - 1
    }

    /// The same config at a different image size.
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetScale {
    /// 1000×2000 pixels.
    Full,
    /// 256×512 pixels; every other parameter identical to `Full`.
    Desk,
}

impl std::str::FromStr for PresetScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PresetScale::Full),
            "desk" => Ok(PresetScale::Desk),
            other => Err(Error::Parse(format!(
                "unknown preset scale {other:?} (expected desk or full)"
            ))),
        }
    }
}

/// Six markers, nine phenotypes (Ph9 = background), six neighborhoods
/// (Nb1 = cell-free background).
///
/// Only the signs of the interaction entries and the structural facts
/// (which phenotypes live where, which markers they express, sizes 2..6) are
/// fixed; magnitudes and unlisted abundances are local choices.
pub fn preset_fig4(scale: PresetScale) -> SimulationConfig {
    const N: usize = 6;
    const P: usize = 9;
    const C: usize = 6;
    let (width, height) = match scale {
        PresetScale::Full => (1000, 2000),
        PresetScale::Desk => (256, 512),
    };

    let mut nb_int = vec![vec![0.0; N]; N];
    for (i, row) in nb_int.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    // Nb2 <-> Nb3 attract, Nb5 <-> Nb6 repel.
    nb_int[1][2] = 1.0;
    nb_int[2][1] = 1.0;
    nb_int[4][5] = -1.0;
    nb_int[5][4] = -1.0;

    // Rows Ph1..Ph9, columns Nb1..Nb6.
    #[rustfmt::skip]
    let ph_ab = vec![
        //    Nb1   Nb2   Nb3   Nb4   Nb5   Nb6
        vec![ 0.0,  0.0, 30.0,  0.0,  0.0, 15.0], // Ph1
        vec![ 0.0,  0.0,  0.0, 15.0, 20.0,  0.0], // Ph2
        vec![ 0.0, 20.0, 15.0,  0.0,  0.0,  0.0], // Ph3
        vec![ 0.0, 10.0,  0.0,  0.0, 15.0,  0.0], // Ph4
        vec![ 0.0, 10.0,  0.0, 15.0,  0.0, 15.0], // Ph5
        vec![ 0.0,  0.0,  0.0, 15.0,  0.0, 15.0], // Ph6
        vec![ 0.0, 20.0,  0.0,  0.0, 25.0, 15.0], // Ph7
        vec![ 0.0,  0.0, 15.0, 15.0,  0.0,  0.0], // Ph8
        vec![100.0, 40.0, 40.0, 40.0, 40.0, 40.0], // Ph9 background
    ];

    // Self-interaction +1, except a weaker background self-term: at +1 the
    // background wins most early windows and overshoots its abundance.
    let mut ph_int = vec![vec![vec![0.0; N]; P]; P];
    for (p, plane) in ph_int.iter_mut().enumerate() {
        for n in 0..N {
            plane[p][n] = if p == P - 1 { 0.25 } else { 1.0 };
        }
    }
    let mut pair = |a: usize, b: usize, nb: usize, value: f64| {
        ph_int[a - 1][b - 1][nb - 1] = value;
        ph_int[b - 1][a - 1][nb - 1] = value;
    };
    // Repulsion is scaled by the squared deficit like everything else, so a
    // full -1 starves the repelled phenotypes; -0.5 keeps their abundance.
    pair(3, 7, 2, -0.5);
    pair(4, 5, 2, 1.0);
    pair(6, 2, 4, 1.0);
    pair(5, 7, 6, -0.5);

    #[rustfmt::skip]
    let expression = vec![
        //   Mk1  Mk2  Mk3  Mk4   Mk5  Mk6
        vec![1.0, 0.0, 0.0, 0.0, 0.0,  0.0 ], // Ph1
        vec![0.0, 0.8, 0.0, 0.0, 0.0,  0.0 ], // Ph2
        vec![0.0, 0.0, 0.9, 0.0, 0.0,  0.0 ], // Ph3
        vec![0.0, 0.0, 0.0, 0.7, 0.0,  0.0 ], // Ph4
        vec![0.0, 0.0, 0.0, 0.0, 0.85, 0.0 ], // Ph5
        vec![0.0, 0.0, 0.0, 0.0, 0.0,  0.75], // Ph6
        vec![0.0, 0.8, 0.0, 0.0, 0.8,  0.0 ], // Ph7
        vec![0.0, 0.0, 0.0, 0.8, 0.0,  0.8 ], // Ph8
        vec![0.0, 0.0, 0.0, 0.0, 0.0,  0.0 ], // Ph9
    ];

    SimulationConfig {
        width,
        height,
        num_neighborhoods: N,
        neighborhood_abundance: vec![30.0, 14.0, 14.0, 14.0, 14.0, 14.0],
        neighborhood_interaction: nb_int,
        num_phenotypes: P,
        background_phenotype: 9,
        background_neighborhood: 1,
        phenotype_abundance: ph_ab,
        phenotype_interaction: ph_int,
        //                       Ph1  Ph2  Ph3  Ph4  Ph5  Ph6  Ph7  Ph8  Ph9
        phenotype_eccentricity: vec![0.8, 0.7, 0.0, 0.0, 0.9, 0.7, 0.7, 0.0, 0.0],
        phenotype_size: vec![4.0, 6.0, 3.0, 2.0, 5.0, 6.0, 4.0, 3.0, 3.0],
        num_markers: C,
        marker_expression: expression,
        leakage_sigma: DEFAULT_LEAKAGE_SIGMA,
        psf_sigma: DEFAULT_PSF_SIGMA,
        snr_db: DEFAULT_SNR_DB,
        seed: 0,
        neighborhood_rule: NeighborhoodRule::default(),
    }
}
