//! Cell phenotype mask optimization.
//!
//! Each step picks a random unassigned pixel, finds the modal neighborhood
//! of its window, scores every phenotype allowed in that neighborhood by
//! summing the update-rule rows of the phenotypes already in the window, and
//! stamps an ellipse of the winner. The fraction of the stamp that is still
//! unassigned decides whether the stamp becomes a fixed cell (>80%), fixed
//! background (<20%), or a provisional proposal.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::ellipse::{ellipse_offsets, generate_ellipse, EllipseStamp};
use crate::error::{Error, Result};
use crate::grid::{Grid, PixelPool, Window, WINDOW_RADIUS};
use crate::neighborhood::{IterationTelemetry, NeighborhoodMask, STEP_CAP_PER_PIXEL};
use crate::rule::{argmax_among, clamped_percentages, update_rule_matrix};

const FIX_FRACTION: f64 = 0.8;
const BACKGROUND_FRACTION: f64 = 0.2;
/// A pixel drawn this many times as the center of a provisional stamp is
/// resolved on its next draw: a cell if at least half the stamp is free,
/// background otherwise.
pub const PROVISIONAL_LIMIT: u8 = 3;

/// Phenotype labels (1..=P), unassigned flags, and cell instance ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhenotypeState {
    pub labels: Grid<u16>,
    pub unassigned: Grid<bool>,
    /// 0 = no cell, k > 0 = k-th cell.
    pub instance_ids: Grid<u32>,
}

impl PhenotypeState {
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn fixed(labels: Grid<u16>, instance_ids: Grid<u32>) -> Self {
        let unassigned = Grid::filled(labels.width(), labels.height(), false);
        PhenotypeState {
            labels,
            unassigned,
            instance_ids,
        }
    }

    pub fn unassigned_count(&self) -> usize {
        self.unassigned.as_slice().iter().filter(|&&u| u).count()
    }
}

/// Stamp metadata for each cell that was fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: u32,
    pub phenotype: u16,
    pub center: (usize, usize),
    pub theta: f64,
    /// Pixel count of the full ellipse, before clipping by the image
    /// border or by already-fixed pixels.
    pub stamp_area: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhenotypeAction {
    Cell,
    Background,
    Provisional,
}

/// `counts[p][n]` = pixels with phenotype `p + 1` in neighborhood `n + 1`.
pub fn measure_phenotype_abundance(
    state: &PhenotypeState,
    nb: &NeighborhoodMask,
    p: usize,
    n: usize,
) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; p];
    for (&ph, &ng) in state.labels.as_slice().iter().zip(nb.labels.as_slice()) {
        counts[ph as usize - 1][ng as usize - 1] += 1;
    }
    counts
}

/// Per-neighborhood percentages of `counts`, zeros clamped to `epsilon`.
pub fn phenotype_percentages(counts: &[Vec<u64>], epsilon: f64) -> Vec<Vec<f64>> {
    let p = counts.len();
    let n = counts.first().map_or(0, Vec::len);
    let mut pct = vec![vec![0.0; n]; p];
    for col in 0..n {
        let column: Vec<u64> = counts.iter().map(|r| r[col]).collect();
        let total = column.iter().sum();
        for (row, v) in clamped_percentages(&column, total, epsilon)
            .into_iter()
            .enumerate()
        {
            pct[row][col] = v;
        }
    }
    pct
}

/// Plane `n` of `U = P_int ⊙ (P_ab / actual)²`, as a P×P matrix.
pub fn phenotype_update_plane(
    interaction: &[Vec<Vec<f64>>],
    target: &[Vec<f64>],
    actual_pct: &[Vec<f64>],
    n: usize,
) -> Vec<Vec<f64>> {
    let plane: Vec<Vec<f64>> = interaction
        .iter()
        .map(|row| row.iter().map(|v| v[n]).collect())
        .collect();
    let t: Vec<f64> = target.iter().map(|r| r[n]).collect();
    let a: Vec<f64> = actual_pct.iter().map(|r| r[n]).collect();
    update_rule_matrix(&plane, &t, &a)
}

/// Full P×P×N update tensor, indexed `[i][j][n]`.
pub fn phenotype_update_tensor(
    interaction: &[Vec<Vec<f64>>],
    target: &[Vec<f64>],
    actual_pct: &[Vec<f64>],
) -> Vec<Vec<Vec<f64>>> {
    let p = interaction.len();
    let n = target.first().map_or(0, Vec::len);
    let mut out = vec![vec![vec![0.0; n]; p]; p];
    for k in 0..n {
        let plane = phenotype_update_plane(interaction, target, actual_pct, k);
        for i in 0..p {
            for j in 0..p {
                out[i][j][k] = plane[i][j];
            }
        }
    }
    out
}

pub fn phenotype_loss(
    interaction: &[Vec<Vec<f64>>],
    target: &[Vec<f64>],
    actual_pct: &[Vec<f64>],
) -> f64 {
    phenotype_update_tensor(interaction, target, actual_pct)
        .iter()
        .flatten()
        .flatten()
        .map(|x| x.abs())
        .sum()
}

#[derive(Debug, Clone)]
pub struct PhenotypeSim<'a> {
    cfg: &'a SimulationConfig,
    nb: &'a NeighborhoodMask,
    state: PhenotypeState,
    counts: Vec<Vec<u64>>,
    pool: PixelPool,
    attempts: Vec<u8>,
    next_id: u32,
    cells: BTreeMap<u32, CellRecord>,
    candidates: Vec<Vec<usize>>,
    epsilon: f64,
    iteration: u64,
}

impl<'a> PhenotypeSim<'a> {
    /// Start from i.i.d. uniform phenotype labels.
    pub fn init(cfg: &'a SimulationConfig, nb: &'a NeighborhoodMask, rng: &mut impl Rng) -> Self {
        let p = cfg.num_phenotypes as u16;
        let labels = Grid::from_vec(
            cfg.width,
            cfg.height,
            (0..cfg.pixel_count())
                .map(|_| rng.random_range(1..=p))
                .collect(),
        );
        let state = PhenotypeState {
            labels,
            unassigned: Grid::filled(cfg.width, cfg.height, true),
            instance_ids: Grid::filled(cfg.width, cfg.height, 0),
        };
        Self::new(cfg, nb, state)
    }

    pub fn new(cfg: &'a SimulationConfig, nb: &'a NeighborhoodMask, state: PhenotypeState) -> Self {
        let counts =
            measure_phenotype_abundance(&state, nb, cfg.num_phenotypes, cfg.num_neighborhoods);
        let mut pool = PixelPool::full(state.labels.len());
        for (i, &u) in state.unassigned.as_slice().iter().enumerate() {
            if !u {
                pool.remove(i);
            }
        }
        let candidates = (0..cfg.num_neighborhoods)
            .map(|n| {
                (0..cfg.num_phenotypes)
                    .filter(|&p| cfg.phenotype_abundance[p][n] > 0.0)
                    .collect()
            })
            .collect();
        let next_id = state
            .instance_ids
            .as_slice()
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            + 1;
        PhenotypeSim {
            cfg,
            nb,
            counts,
            pool,
            attempts: vec![0; state.labels.len()],
            next_id,
            cells: BTreeMap::new(),
            candidates,
            epsilon: 100.0 / cfg.pixel_count() as f64,
            iteration: 0,
            state,
        }
    }

    pub fn state(&self) -> &PhenotypeState {
        &self.state
    }

    pub fn unassigned(&self) -> usize {
        self.pool.len()
    }

    pub fn actual_percentages(&self) -> Vec<Vec<f64>> {
        phenotype_percentages(&self.counts, self.epsilon)
    }

    pub fn loss(&self) -> f64 {
        phenotype_loss(
            &self.cfg.phenotype_interaction,
            &self.cfg.phenotype_abundance,
            &self.actual_percentages(),
        )
    }

    /// Phenotype (0-based) the update rule picks for a window centered on `center`.
    pub fn choose_phenotype(&self, center: usize) -> usize {
        let cfg = self.cfg;
        let width = self.state.labels.width();
        let (x, y) = self.state.labels.coords(center);
        let window = Window::around(x, y, WINDOW_RADIUS, width, self.state.labels.height());

        let mut nb_hist = vec![0usize; cfg.num_neighborhoods];
        let mut ph_hist = vec![0usize; cfg.num_phenotypes];
        for i in window.indices(width) {
            nb_hist[self.nb.labels[i] as usize - 1] += 1;
            ph_hist[self.state.labels[i] as usize - 1] += 1;
        }
        let nb_scores: Vec<f64> = nb_hist.iter().map(|&c| c as f64).collect();
        let ng = argmax_among(&nb_scores, 0..cfg.num_neighborhoods).expect("N >= 1");

        // Only the abundances in plane `ng` matter for this window.
        let column: Vec<u64> = self.counts.iter().map(|r| r[ng]).collect();
        let total = column.iter().sum();
        let pct = clamped_percentages(&column, total, self.epsilon);
        let mut scores = vec![0.0; cfg.num_phenotypes];
        for (j, score) in scores.iter_mut().enumerate() {
            let target = cfg.phenotype_abundance[j][ng];
            if target == 0.0 {
                continue;
            }
            let boost = (target / pct[j]).powi(2);
            let mut s = 0.0;
            for (v, &count) in ph_hist.iter().enumerate() {
                if count > 0 {
                    s += count as f64 * cfg.phenotype_interaction[v][j][ng];
                }
            }
            *score = s * boost;
        }
        argmax_among(&scores, self.candidates[ng].iter().copied())
            .unwrap_or(cfg.background_phenotype_index())
    }

    /// Apply one step centered on `center` using a stamp with angle drawn from `rng`.
    pub fn step_at(&mut self, center: usize, rng: &mut impl Rng) -> PhenotypeAction {
        let ph = self.choose_phenotype(center);
        let xy = self.state.labels.coords(center);
        let stamp = generate_ellipse(xy, ph, self.cfg, rng);
        self.apply_stamp(center, ph, &stamp)
    }

    pub fn apply_stamp(
        &mut self,
        center: usize,
        ph: usize,
        stamp: &EllipseStamp,
    ) -> PhenotypeAction {
        let width = self.state.labels.width();
        let members: Vec<usize> = stamp.pixels.iter().map(|&(x, y)| y * width + x).collect();
        let free: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| self.state.unassigned[i])
            .collect();
        let f = free.len() as f64 / members.len().max(1) as f64;

        let mut action = if f > FIX_FRACTION {
            PhenotypeAction::Cell
        } else if f < BACKGROUND_FRACTION {
            PhenotypeAction::Background
        } else {
            PhenotypeAction::Provisional
        };
        // The center is always free; repeated provisional draws get resolved.
        if action == PhenotypeAction::Provisional {
            if self.attempts[center] + 1 >= PROVISIONAL_LIMIT {
                action = if f >= 0.5 {
                    PhenotypeAction::Cell
                } else {
                    PhenotypeAction::Background
                };
            } else {
                self.attempts[center] += 1;
            }
        }

        let bg = self.cfg.background_phenotype_index();
        match action {
            PhenotypeAction::Cell => {
                let pixels = connected_from(center, &free, width);
                let id = if ph == bg {
                    0
                } else {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.cells.insert(
                        id,
                        CellRecord {
                            id,
                            phenotype: ph as u16 + 1,
                            center: stamp.center,
                            theta: stamp.theta,
                            stamp_area: ellipse_offsets(
                                stamp.semi_major,
                                stamp.eccentricity,
                                stamp.theta,
                            )
                            .len(),
                        },
                    );
                    id
                };
                for i in pixels {
                    self.write(i, ph, id);
                    self.fix(i);
                }
            }
            PhenotypeAction::Background => {
                for &i in &free {
                    self.write(i, bg, 0);
                    self.fix(i);
                }
            }
            PhenotypeAction::Provisional => {
                let id = if ph == bg {
                    0
                } else {
                    let id = self.next_id;
                    self.next_id += 1;
                    id
                };
                for &i in &free {
                    self.write(i, ph, id);
                }
            }
        }
        action
    }

    fn write(&mut self, i: usize, ph: usize, id: u32) {
        let old = self.state.labels[i] as usize - 1;
        if old != ph {
            let ng = self.nb.labels[i] as usize - 1;
            self.counts[old][ng] -= 1;
            self.counts[ph][ng] += 1;
            self.state.labels[i] = ph as u16 + 1;
        }
        self.state.instance_ids[i] = id;
    }

    fn fix(&mut self, i: usize) {
        self.state.unassigned[i] = false;
        self.pool.remove(i);
    }

    pub fn step(&mut self, rng: &mut impl Rng) -> Result<IterationTelemetry> {
        if self.pool.len() == 0 {
            return Err(Error::NothingUnassigned);
        }
        let center = self.pool.nth(rng.random_range(0..self.pool.len()));
        self.step_at(center, rng);
        self.iteration += 1;
        Ok(IterationTelemetry {
            iteration: self.iteration,
            loss: self.loss(),
            unassigned: self.pool.len(),
        })
    }

    /// Renumber surviving cells to 1..=K in creation order.
    pub fn finish(self) -> PhenotypeRun {
        let PhenotypeSim {
            mut state, cells, ..
        } = self;
        let mut remap = BTreeMap::new();
        let mut present = std::collections::BTreeSet::new();
        for &id in state.instance_ids.as_slice() {
            if id != 0 {
                present.insert(id);
            }
        }
        let mut records = Vec::with_capacity(present.len());
        for (k, id) in present.into_iter().enumerate() {
            let new_id = k as u32 + 1;
            remap.insert(id, new_id);
            if let Some(rec) = cells.get(&id) {
                records.push(CellRecord {
                    id: new_id,
                    ..rec.clone()
                });
            }
        }
        for id in state.instance_ids.as_mut_slice() {
            if *id != 0 {
                *id = remap[id];
            }
        }
        PhenotypeRun {
            state,
            cells: records,
            telemetry: Vec::new(),
        }
    }
}

/// Members of `free` 4-connected to `start` through `free`.
fn connected_from(start: usize, free: &[usize], width: usize) -> Vec<usize> {
    let set: std::collections::HashSet<usize> = free.iter().copied().collect();
    if !set.contains(&start) {
        return Vec::new();
    }
    let mut seen = std::collections::HashSet::from([start]);
    let mut stack = vec![start];
    let mut out = Vec::new();
    while let Some(i) = stack.pop() {
        out.push(i);
        let (x, y) = (i % width, i / width);
        let mut neighbors = Vec::with_capacity(4);
        if x > 0 {
            neighbors.push(i - 1);
        }
        neighbors.push(i + 1);
        if y > 0 {
            neighbors.push(i - width);
        }
        neighbors.push(i + width);
        for j in neighbors {
            // Row wrap is excluded because i+1 from the last column is not a member.
            if (j % width).abs_diff(x) <= 1 && set.contains(&j) && seen.insert(j) {
                stack.push(j);
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone)]
pub struct PhenotypeRun {
    pub state: PhenotypeState,
    pub cells: Vec<CellRecord>,
    pub telemetry: Vec<IterationTelemetry>,
}

pub fn phenotype_step(
    sim: &mut PhenotypeSim<'_>,
    rng: &mut impl Rng,
) -> Result<IterationTelemetry> {
    sim.step(rng)
}

pub fn run_phenotype_model(
    cfg: &SimulationConfig,
    nb: &NeighborhoodMask,
    rng: &mut impl Rng,
) -> Result<PhenotypeRun> {
    let mut sim = PhenotypeSim::init(cfg, nb, rng);
    let cap = STEP_CAP_PER_PIXEL * cfg.pixel_count() as u64;
    let mut telemetry = Vec::new();
    while sim.unassigned() > 0 {
        if sim.iteration >= cap {
            return Err(Error::NotConverged {
                stage: "phenotype model",
                cap,
                unassigned: sim.unassigned(),
            });
        }
        telemetry.push(sim.step(rng)?);
    }
    let mut run = sim.finish();
    run.telemetry = telemetry;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset_fig4, PresetScale};
    use crate::ellipse::stamp_with_angle;
    use crate::rng::RandomStream;

    fn small_world(
        width: usize,
        height: usize,
        nb_label: u16,
    ) -> (SimulationConfig, NeighborhoodMask) {
        let cfg = preset_fig4(PresetScale::Desk).with_size(width, height);
        let nb = NeighborhoodMask::fixed(Grid::filled(width, height, nb_label));
        (cfg, nb)
    }

    #[test]
    fn abundance_counts_per_neighborhood() {
        let state = PhenotypeState::fixed(
            Grid::from_rows(vec![vec![1, 1], vec![2, 1]]),
            Grid::filled(2, 2, 0),
        );
        let nb = NeighborhoodMask::fixed(Grid::filled(2, 2, 1));
        assert_eq!(
            measure_phenotype_abundance(&state, &nb, 2, 1),
            vec![vec![3], vec![1]]
        );
    }

    #[test]
    fn fresh_area_yields_fixed_cell() {
        let (cfg, nb) = small_world(40, 40, 4);
        let state = PhenotypeState {
            labels: Grid::filled(40, 40, 2),
            unassigned: Grid::filled(40, 40, true),
            instance_ids: Grid::filled(40, 40, 0),
        };
        let mut sim = PhenotypeSim::new(&cfg, &nb, state);
        let center = 20 * 40 + 20;
        let ph = sim.choose_phenotype(center);
        let stamp = stamp_with_angle((20, 20), ph, &cfg, 0.4);
        assert_eq!(sim.apply_stamp(center, ph, &stamp), PhenotypeAction::Cell);
        for &(x, y) in &stamp.pixels {
            assert!(!sim.state().unassigned.get(x, y));
            assert_eq!(*sim.state().labels.get(x, y) as usize, ph + 1);
            assert_eq!(*sim.state().instance_ids.get(x, y), 1);
        }
        assert_eq!(sim.unassigned(), 1600 - stamp.pixels.len());
    }

    #[test]
    fn mostly_fixed_area_becomes_background() {
        let (cfg, nb) = small_world(40, 40, 4);
        let mut unassigned = Grid::filled(40, 40, false);
        // Only the center of a radius-6 stamp remains free.
        unassigned.set(20, 20, true);
        let state = PhenotypeState {
            labels: Grid::filled(40, 40, 5),
            unassigned,
            instance_ids: Grid::filled(40, 40, 0),
        };
        let mut sim = PhenotypeSim::new(&cfg, &nb, state);
        let stamp = stamp_with_angle((20, 20), 1, &cfg, 0.0);
        assert_eq!(
            sim.apply_stamp(20 * 40 + 20, 1, &stamp),
            PhenotypeAction::Background
        );
        assert_eq!(*sim.state().labels.get(20, 20), 9);
        assert_eq!(sim.unassigned(), 0);
    }

    #[test]
    fn half_free_stamp_is_provisional_until_limit() {
        let (cfg, nb) = small_world(40, 40, 4);
        let mut unassigned = Grid::filled(40, 40, false);
        for y in 0..40 {
            for x in 20..40 {
                unassigned.set(x, y, true);
            }
        }
        let state = PhenotypeState {
            labels: Grid::filled(40, 40, 9),
            unassigned,
            instance_ids: Grid::filled(40, 40, 0),
        };
        let mut sim = PhenotypeSim::new(&cfg, &nb, state);
        let stamp = stamp_with_angle((20, 20), 1, &cfg, 0.0);
        let before = sim.unassigned();
        for _ in 1..PROVISIONAL_LIMIT {
            assert_eq!(
                sim.apply_stamp(20 * 40 + 20, 1, &stamp),
                PhenotypeAction::Provisional
            );
            assert_eq!(sim.unassigned(), before);
        }
        assert_eq!(
            sim.apply_stamp(20 * 40 + 20, 1, &stamp),
            PhenotypeAction::Cell
        );
        assert!(sim.unassigned() < before);
    }

    #[test]
    fn background_only_config_is_immediately_background() {
        let mut cfg = preset_fig4(PresetScale::Desk).with_size(24, 24);
        cfg.num_phenotypes = 1;
        cfg.background_phenotype = 1;
        cfg.phenotype_abundance = vec![vec![100.0; 6]];
        cfg.phenotype_interaction = vec![vec![vec![1.0; 6]]];
        cfg.phenotype_eccentricity = vec![0.0];
        cfg.phenotype_size = vec![3.0];
        cfg.marker_expression = vec![vec![0.0; 6]];
        let nb = NeighborhoodMask::fixed(Grid::filled(24, 24, 2));
        let mut rng = RandomStream::new(0).substream("phenotype", 0);
        let run = run_phenotype_model(&cfg, &nb, &mut rng).unwrap();
        assert!(run.state.labels.as_slice().iter().all(|&l| l == 1));
        assert!(run.state.instance_ids.as_slice().iter().all(|&i| i == 0));
        assert!(run.cells.is_empty());
    }

    #[test]
    fn run_is_deterministic_and_coherent() {
        let cfg = preset_fig4(PresetScale::Desk).with_size(64, 64);
        let nb = NeighborhoodMask::fixed(Grid::from_vec(
            64,
            64,
            (0..64 * 64)
                .map(|i| if (i % 64) < 32 { 4 } else { 6 })
                .collect(),
        ));
        let run = |seed| {
            let mut rng = RandomStream::new(seed).substream("phenotype", 0);
            run_phenotype_model(&cfg, &nb, &mut rng).unwrap()
        };
        let a = run(9);
        let b = run(9);
        assert_eq!(a.state, b.state);
        assert_eq!(a.telemetry, b.telemetry);
        assert!(a
            .telemetry
            .windows(2)
            .all(|w| w[1].unassigned <= w[0].unassigned));
        assert_eq!(a.state.unassigned_count(), 0);

        let bg = cfg.background_phenotype as u16;
        let mut id_label = BTreeMap::new();
        for (&id, &l) in a
            .state
            .instance_ids
            .as_slice()
            .iter()
            .zip(a.state.labels.as_slice())
        {
            assert_eq!(id == 0, l == bg);
            if id != 0 {
                assert_eq!(*id_label.entry(id).or_insert(l), l);
            }
        }
        let k = id_label.len() as u32;
        assert!(id_label.keys().copied().eq(1..=k), "ids are compacted");
        assert_eq!(a.cells.len() as u32, k);
    }

    #[test]
    fn connected_component_excludes_cut_off_pixels() {
        // 5-wide row with a gap at x=2.
        let free = vec![0, 1, 3, 4];
        assert_eq!(connected_from(1, &free, 5), vec![0, 1]);
        // No wrap from the end of one row to the start of the next.
        let free = vec![4, 5];
        assert_eq!(connected_from(4, &free, 5), vec![4]);
    }
}
