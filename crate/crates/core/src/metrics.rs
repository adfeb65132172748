//! Measured counterparts of the configured rules: neighborhood contact,
//! phenotype contact in a radius cell graph, abundances, and per-phenotype
//! marker statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::neighborhood::NeighborhoodMask;
use crate::phenotype::{measure_phenotype_abundance, PhenotypeState};
use crate::texture::MultiplexImage;

pub const CELL_GRAPH_RADIUS: f64 = 12.0;

/// Unordered 4-adjacent pixel pairs with labels `{a, b}`, `a != b`.
/// Indexed 0-based; symmetric with a zero diagonal.
pub fn neighborhood_adjacency(nb: &NeighborhoodMask, n: usize) -> Vec<Vec<u64>> {
    let mut adj = vec![vec![0u64; n]; n];
    let labels = &nb.labels;
    let (w, h) = (labels.width(), labels.height());
    let mut bump = |a: u16, b: u16| {
        if a != b {
            let (a, b) = (a as usize - 1, b as usize - 1);
            adj[a][b] += 1;
            adj[b][a] += 1;
        }
    };
    for y in 0..h {
        for x in 0..w {
            let l = *labels.get(x, y);
            if x + 1 < w {
                bump(l, *labels.get(x + 1, y));
            }
            if y + 1 < h {
                bump(l, *labels.get(x, y + 1));
            }
        }
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellNode {
    pub id: u32,
    /// 1-based phenotype label.
    pub phenotype: u16,
    /// Mean pixel position (x, y).
    pub centroid: (f64, f64),
    pub area: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CellGraph {
    /// Sorted by id.
    pub nodes: Vec<CellNode>,
    /// Pairs of node indices `(i, j)`, `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

/// One node per nonzero instance id.
pub fn cell_nodes(state: &PhenotypeState) -> Vec<CellNode> {
    #[derive(Default)]
    struct Acc {
        sx: f64,
        sy: f64,
        n: usize,
        phenotype: u16,
    }
    let mut acc: BTreeMap<u32, Acc> = BTreeMap::new();
    let w = state.width();
    for (i, (&id, &l)) in state
        .instance_ids
        .as_slice()
        .iter()
        .zip(state.labels.as_slice())
        .enumerate()
    {
        if id == 0 {
            continue;
        }
        let a = acc.entry(id).or_default();
        a.sx += (i % w) as f64;
        a.sy += (i / w) as f64;
        a.n += 1;
        a.phenotype = l;
    }
    acc.into_iter()
        .map(|(id, a)| CellNode {
            id,
            phenotype: a.phenotype,
            centroid: (a.sx / a.n as f64, a.sy / a.n as f64),
            area: a.n,
        })
        .collect()
}

/// Undirected edge between cells whose centroids are closer than `radius`.
pub fn build_cell_graph(state: &PhenotypeState, radius: f64) -> CellGraph {
    graph_from_nodes(cell_nodes(state), radius)
}

/// Radius graph over given nodes, bucketed on a grid of `radius`-sized cells.
pub fn graph_from_nodes(nodes: Vec<CellNode>, radius: f64) -> CellGraph {
    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    let key = |c: (f64, f64)| ((c.0 / radius).floor() as i64, (c.1 / radius).floor() as i64);
    for (i, node) in nodes.iter().enumerate() {
        buckets.entry(key(node.centroid)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        let (bx, by) = key(node.centroid);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(bucket) = buckets.get(&(bx + dx, by + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= i {
                        continue;
                    }
                    let (ax, ay) = node.centroid;
                    let (cx, cy) = nodes[j].centroid;
                    if (ax - cx).powi(2) + (ay - cy).powi(2) < r2 {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    CellGraph { nodes, edges }
}

/// Neighborhood (1-based) under the pixel nearest to a centroid.
pub fn centroid_neighborhood(nb: &NeighborhoodMask, centroid: (f64, f64)) -> u16 {
    let x = (centroid.0.round() as usize).min(nb.width() - 1);
    let y = (centroid.1.round() as usize).min(nb.height() - 1);
    *nb.labels.get(x, y)
}

/// `[p][q][n]` edge counts, symmetric in `(p, q)`. Each edge is attributed
/// to the neighborhood under its lower-id endpoint's centroid.
pub fn phenotype_interaction_counts(
    graph: &CellGraph,
    nb: &NeighborhoodMask,
    p: usize,
    n: usize,
) -> Vec<Vec<Vec<u64>>> {
    let mut out = vec![vec![vec![0u64; n]; p]; p];
    for &(i, j) in &graph.edges {
        let (a, b) = (&graph.nodes[i], &graph.nodes[j]);
        let first = if a.id <= b.id { a } else { b };
        let ng = centroid_neighborhood(nb, first.centroid) as usize - 1;
        let (pa, pb) = (a.phenotype as usize - 1, b.phenotype as usize - 1);
        out[pa][pb][ng] += 1;
        if pa != pb {
            out[pb][pa][ng] += 1;
        }
    }
    out
}

/// `[p][n]` number of cells of phenotype `p` whose centroid lies in `n`.
pub fn cell_counts(graph: &CellGraph, nb: &NeighborhoodMask, p: usize, n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; n]; p];
    for node in &graph.nodes {
        let ng = centroid_neighborhood(nb, node.centroid) as usize - 1;
        out[node.phenotype as usize - 1][ng] += 1;
    }
    out
}

/// `[p][n]` percentages; each column sums to 100 (all zero for an empty
/// neighborhood).
pub fn phenotype_abundance_stats(
    state: &PhenotypeState,
    nb: &NeighborhoodMask,
    p: usize,
    n: usize,
) -> Vec<Vec<f64>> {
    let counts = measure_phenotype_abundance(state, nb, p, n);
    let mut pct = vec![vec![0.0; n]; p];
    for col in 0..n {
        let total: u64 = counts.iter().map(|r| r[col]).sum();
        if total == 0 {
            continue;
        }
        for row in 0..p {
            pct[row][col] = 100.0 * counts[row][col] as f64 / total as f64;
        }
    }
    pct
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// `[p][c]` mean and population standard deviation of channel `c` over
/// the pixels labeled `p`. Phenotypes with no pixels report zeros.
pub fn marker_expression_stats(
    img: &MultiplexImage,
    state: &PhenotypeState,
    p: usize,
) -> Vec<Vec<MeanStd>> {
    let labels = state.labels.as_slice();
    let mut n = vec![0usize; p];
    for &l in labels {
        n[l as usize - 1] += 1;
    }
    let mut out = vec![vec![MeanStd::default(); img.channels]; p];
    for c in 0..img.channels {
        let plane = img.channel(c);
        let mut sum = vec![0.0; p];
        for (&l, &v) in labels.iter().zip(plane) {
            sum[l as usize - 1] += v;
        }
        let mean: Vec<f64> = sum
            .iter()
            .zip(&n)
            .map(|(&s, &k)| if k == 0 { 0.0 } else { s / k as f64 })
            .collect();
        let mut sq = vec![0.0; p];
        for (&l, &v) in labels.iter().zip(plane) {
            let k = l as usize - 1;
            sq[k] += (v - mean[k]).powi(2);
        }
        for k in 0..p {
            out[k][c] = MeanStd {
                mean: mean[k],
                std: if n[k] == 0 {
                    0.0
                } else {
                    (sq[k] / n[k] as f64).sqrt()
                },
            };
        }
    }
    out
}

/// Second-moment shape estimate of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellShape {
    pub id: u32,
    pub phenotype: u16,
    pub area: usize,
    /// `2·sqrt(λ_max)` of the pixel-coordinate covariance.
    pub semi_major: f64,
    /// `sqrt(1 - λ_min/λ_max)`.
    pub eccentricity: f64,
}

pub fn cell_shapes(state: &PhenotypeState) -> Vec<CellShape> {
    #[derive(Default)]
    struct Acc {
        pts: Vec<(f64, f64)>,
        phenotype: u16,
    }
    let mut acc: BTreeMap<u32, Acc> = BTreeMap::new();
    let w = state.width();
    for (i, (&id, &l)) in state
        .instance_ids
        .as_slice()
        .iter()
        .zip(state.labels.as_slice())
        .enumerate()
    {
        if id != 0 {
            let a = acc.entry(id).or_default();
            a.pts.push(((i % w) as f64, (i / w) as f64));
            a.phenotype = l;
        }
    }
    acc.into_iter()
        .map(|(id, a)| {
            let (semi_major, eccentricity) = moment_shape(&a.pts);
            CellShape {
                id,
                phenotype: a.phenotype,
                area: a.pts.len(),
                semi_major,
                eccentricity,
            }
        })
        .collect()
}

/// `(2·sqrt(λ1), sqrt(1 - λ2/λ1))` of the point covariance.
pub fn moment_shape(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxx += (x - mx).powi(2) / n;
        syy += (y - my).powi(2) / n;
        sxy += (x - mx) * (y - my) / n;
    }
    let tr = sxx + syy;
    let disc = ((sxx - syy).powi(2) / 4.0 + sxy * sxy).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = (tr / 2.0 - disc).max(0.0);
    if l1 <= 0.0 {
        return (0.0, 0.0);
    }
    (2.0 * l1.sqrt(), (1.0 - l2 / l1).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub neighborhood_adjacency: Vec<Vec<u64>>,
    pub neighborhood_pixels: Vec<u64>,
    pub phenotype_interactions: Vec<Vec<Vec<u64>>>,
    pub cell_counts: Vec<Vec<u64>>,
    pub phenotype_abundance_pct: Vec<Vec<f64>>,
    pub expression_stats: Vec<Vec<MeanStd>>,
}

pub fn compute_metrics(
    cfg: &SimulationConfig,
    nb: &NeighborhoodMask,
    state: &PhenotypeState,
    img: &MultiplexImage,
) -> MetricsReport {
    let (n, p) = (cfg.num_neighborhoods, cfg.num_phenotypes);
    let graph = build_cell_graph(state, CELL_GRAPH_RADIUS);
    MetricsReport {
        neighborhood_adjacency: neighborhood_adjacency(nb, n),
        neighborhood_pixels: crate::neighborhood::measure_abundance(nb, n),
        phenotype_interactions: phenotype_interaction_counts(&graph, nb, p, n),
        cell_counts: cell_counts(&graph, nb, p, n),
        phenotype_abundance_pct: phenotype_abundance_stats(state, nb, p, n),
        expression_stats: marker_expression_stats(img, state, p),
    }
}

impl MetricsReport {
    /// Adjacency divided by the geometric mean of the two areas (0-based).
    pub fn normalized_adjacency(&self, a: usize, b: usize) -> f64 {
        let area = (self.neighborhood_pixels[a] as f64 * self.neighborhood_pixels[b] as f64).sqrt();
        if area == 0.0 {
            0.0
        } else {
            self.neighborhood_adjacency[a][b] as f64 / area
        }
    }

    /// Edge count divided by the product of the two cell counts in `n` (0-based).
    pub fn normalized_interaction(&self, pa: usize, pb: usize, n: usize) -> f64 {
        let denom = self.cell_counts[pa][n] as f64 * self.cell_counts[pb][n] as f64;
        if denom == 0.0 {
            0.0
        } else {
            self.phenotype_interactions[pa][pb][n] as f64 / denom
        }
    }
}
