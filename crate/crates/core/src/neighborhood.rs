//! Neighborhood mask optimization.
//!
//! Starting from an i.i.d. uniform label grid, repeatedly pick a random
//! unassigned pixel and look at the clipped window around it. If one label
//! dominates the window's unassigned pixels (>90%) they are fixed to it.
//! Otherwise the window is rewritten with the abundance-weighted update rule.
//! The loop ends when every pixel is fixed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{NeighborhoodRule, SimulationConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, PixelPool, Window, WINDOW_RADIUS};
use crate::rule::{argmax_among, clamped_percentages, rule_loss, update_rule_matrix};

const MAJORITY_FRACTION: f64 = 0.9;
/// Safety cap is this many steps per pixel.
pub const STEP_CAP_PER_PIXEL: u64 = 50;

/// Neighborhood labels (1..=N) and the unassigned-pixel flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodMask {
    pub labels: Grid<u16>,
    pub unassigned: Grid<bool>,
}

impl NeighborhoodMask {
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn unassigned_count(&self) -> usize {
        self.unassigned.as_slice().iter().filter(|&&u| u).count()
    }

    /// A mask with every pixel fixed, e.g. one read back from disk.
    pub fn fixed(labels: Grid<u16>) -> Self {
        let unassigned = Grid::filled(labels.width(), labels.height(), false);
        NeighborhoodMask { labels, unassigned }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTelemetry {
    pub iteration: u64,
    pub loss: f64,
    pub unassigned: usize,
}

/// Which branch a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodAction {
    Majority { label: u16 },
    Rewrite,
}

pub fn init_neighborhood_mask(cfg: &SimulationConfig, rng: &mut impl Rng) -> NeighborhoodMask {
    let n = cfg.num_neighborhoods as u16;
    let data = (0..cfg.pixel_count())
        .map(|_| rng.random_range(1..=n))
        .collect();
    NeighborhoodMask {
        labels: Grid::from_vec(cfg.width, cfg.height, data),
        unassigned: Grid::filled(cfg.width, cfg.height, true),
    }
}

/// Pixel count per label; element `k` counts label `k + 1`.
pub fn measure_abundance(mask: &NeighborhoodMask, n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for &l in mask.labels.as_slice() {
        counts[l as usize - 1] += 1;
    }
    counts
}

pub fn neighborhood_loss(interaction: &[Vec<f64>], target: &[f64], actual_pct: &[f64]) -> f64 {
    rule_loss(interaction, target, actual_pct)
}

/// Mutable optimizer state: the mask plus incremental bookkeeping.
#[derive(Debug, Clone)]
pub struct NeighborhoodSim<'a> {
    cfg: &'a SimulationConfig,
    mask: NeighborhoodMask,
    counts: Vec<u64>,
    pool: PixelPool,
    iteration: u64,
    epsilon: f64,
    candidates: Vec<usize>,
}

impl<'a> NeighborhoodSim<'a> {
    pub fn new(cfg: &'a SimulationConfig, mask: NeighborhoodMask) -> Self {
        let counts = measure_abundance(&mask, cfg.num_neighborhoods);
        let mut pool = PixelPool::full(mask.labels.len());
        for (i, &u) in mask.unassigned.as_slice().iter().enumerate() {
            if !u {
                pool.remove(i);
            }
        }
        let candidates = (0..cfg.num_neighborhoods)
            .filter(|&j| cfg.neighborhood_abundance[j] > 0.0)
            .collect();
        NeighborhoodSim {
            cfg,
            counts,
            pool,
            iteration: 0,
            epsilon: 100.0 / cfg.pixel_count() as f64,
            candidates,
            mask,
        }
    }

    pub fn mask(&self) -> &NeighborhoodMask {
        &self.mask
    }

    pub fn into_mask(self) -> NeighborhoodMask {
        self.mask
    }

    pub fn unassigned(&self) -> usize {
        self.pool.len()
    }

    pub fn actual_percentages(&self) -> Vec<f64> {
        clamped_percentages(&self.counts, self.mask.labels.len() as u64, self.epsilon)
    }

    pub fn update_matrix(&self) -> Vec<Vec<f64>> {
        update_rule_matrix(
            &self.cfg.neighborhood_interaction,
            &self.cfg.neighborhood_abundance,
            &self.actual_percentages(),
        )
    }

    pub fn loss(&self) -> f64 {
        neighborhood_loss(
            &self.cfg.neighborhood_interaction,
            &self.cfg.neighborhood_abundance,
            &self.actual_percentages(),
        )
    }

    /// Apply one optimization step centered on pixel `center` (flat index).
    pub fn step_at(&mut self, center: usize) -> NeighborhoodAction {
        let n = self.cfg.num_neighborhoods;
        let width = self.mask.labels.width();
        let (x, y) = self.mask.labels.coords(center);
        let window = Window::around(x, y, WINDOW_RADIUS, width, self.mask.labels.height());

        let mut free_hist = vec![0usize; n];
        let mut all_hist = vec![0usize; n];
        let mut free_total = 0usize;
        for i in window.indices(width) {
            let l = self.mask.labels[i] as usize - 1;
            all_hist[l] += 1;
            if self.mask.unassigned[i] {
                free_hist[l] += 1;
                free_total += 1;
            }
        }

        let modal = argmax_among(
            &free_hist.iter().map(|&c| c as f64).collect::<Vec<_>>(),
            0..n,
        )
        .expect("at least one neighborhood");
        if free_total > 0 && free_hist[modal] as f64 > MAJORITY_FRACTION * free_total as f64 {
            let label = modal as u16 + 1;
            for i in window.indices(width) {
                if self.mask.unassigned[i] {
                    self.relabel(i, label);
                    self.mask.unassigned[i] = false;
                    self.pool.remove(i);
                }
            }
            return NeighborhoodAction::Majority { label };
        }

        let u = self.update_matrix();
        match self.cfg.neighborhood_rule {
            NeighborhoodRule::ContextSum => {
                let mut scores = vec![0.0; n];
                for (v, &count) in all_hist.iter().enumerate() {
                    if count > 0 {
                        for (s, &uij) in scores.iter_mut().zip(&u[v]) {
                            *s += count as f64 * uij;
                        }
                    }
                }
                let target = argmax_among(&scores, self.candidates.iter().copied())
                    .expect("some neighborhood has positive abundance")
                    as u16
                    + 1;
                for i in window.indices(width) {
                    if self.mask.unassigned[i] {
                        self.relabel(i, target);
                    }
                }
            }
            NeighborhoodRule::RowArgmax => {
                let map: Vec<u16> = u
                    .iter()
                    .map(|row| argmax_among(row, 0..n).unwrap() as u16 + 1)
                    .collect();
                for i in window.indices(width) {
                    if self.mask.unassigned[i] {
                        let v = self.mask.labels[i] as usize - 1;
                        self.relabel(i, map[v]);
                    }
                }
            }
        }
        NeighborhoodAction::Rewrite
    }

    fn relabel(&mut self, i: usize, label: u16) {
        let old = self.mask.labels[i];
        if old != label {
            self.counts[old as usize - 1] -= 1;
            self.counts[label as usize - 1] += 1;
            self.mask.labels[i] = label;
        }
    }

    /// Pick a uniformly random unassigned pixel and step on it.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<IterationTelemetry> {
        if self.pool.len() == 0 {
            return Err(Error::NothingUnassigned);
        }
        let center = self.pool.nth(rng.random_range(0..self.pool.len()));
        self.step_at(center);
        self.iteration += 1;
        Ok(IterationTelemetry {
            iteration: self.iteration,
            loss: self.loss(),
            unassigned: self.pool.len(),
        })
    }
}

/// One step on an existing mask; returns the updated mask.
pub fn neighborhood_step(
    mask: NeighborhoodMask,
    cfg: &SimulationConfig,
    rng: &mut impl Rng,
) -> Result<(NeighborhoodMask, IterationTelemetry)> {
    let mut sim = NeighborhoodSim::new(cfg, mask);
    let t = sim.step(rng)?;
    Ok((sim.into_mask(), t))
}

#[derive(Debug, Clone)]
pub struct NeighborhoodRun {
    pub mask: NeighborhoodMask,
    pub telemetry: Vec<IterationTelemetry>,
}

pub fn run_neighborhood_model(
    cfg: &SimulationConfig,
    rng: &mut impl Rng,
) -> Result<NeighborhoodRun> {
    let mask = init_neighborhood_mask(cfg, rng);
    let mut sim = NeighborhoodSim::new(cfg, mask);
    let cap = STEP_CAP_PER_PIXEL * cfg.pixel_count() as u64;
    let mut telemetry = Vec::new();
    while sim.unassigned() > 0 {
        if sim.iteration >= cap {
            return Err(Error::NotConverged {
                stage: "neighborhood model",
                cap,
                unassigned: sim.unassigned(),
            });
        }
        telemetry.push(sim.step(rng)?);
    }
    Ok(NeighborhoodRun {
        mask: sim.into_mask(),
        telemetry,
    })
}
