//! Slow, direct reference implementations and randomized comparisons
//! against the library. Each `check_*` returns a one-line summary or the
//! first mismatch.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tissuesim::metrics::{build_cell_graph, neighborhood_adjacency};
use tissuesim::neighborhood::neighborhood_loss;
use tissuesim::phenotype::{phenotype_loss, phenotype_update_tensor};
use tissuesim::rule::update_rule_matrix;
use tissuesim::texture::{psf_blur, spectral_leakage};
use tissuesim::{Grid, MultiplexImage, NeighborhoodMask, PhenotypeState};

pub type Check = Result<String, String>;

pub fn random_volume(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> MultiplexImage {
    let mut img = MultiplexImage::zeros(c, h, w);
    for v in &mut img.data {
        *v = rng.random_range(0.0..1.0);
    }
    img
}

/// Largest absolute difference relative to the largest reference magnitude.
pub fn max_rel_err(a: &MultiplexImage, b: &MultiplexImage) -> f64 {
    assert_eq!(a.data.len(), b.data.len());
    let scale = b
        .data
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

fn weights(sigma: f64, reach: i64) -> Vec<f64> {
    let raw: Vec<f64> = (-reach..=reach)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn direct_leakage(img: &MultiplexImage, sigma: f64) -> MultiplexImage {
    let c = img.channels as i64;
    let reach = 2.min(c - 1);
    let w = weights(sigma, reach);
    let mut out = MultiplexImage::zeros(img.channels, img.height, img.width);
    for y in 0..img.height {
        for x in 0..img.width {
            for dst in 0..c {
                let mut acc = 0.0;
                for src in 0..c {
                    let k = dst - src;
                    if k.abs() <= reach {
                        acc += w[(k + reach) as usize] * img.at(src as usize, y, x);
                    }
                }
                out.data[(dst as usize * img.height + y) * img.width + x] = acc;
            }
        }
    }
    out
}

/// Mirror with the edge sample repeated, via the period-2n extension.
fn mirror(i: i64, n: usize) -> usize {
    let p = 2 * n as i64;
    let m = i.rem_euclid(p);
    if m < n as i64 {
        m as usize
    } else {
        (p - 1 - m) as usize
    }
}

/// Full 2-D (non-separable) convolution.
pub fn direct_blur(img: &MultiplexImage, sigma: f64) -> MultiplexImage {
    let reach = (3.0 * sigma).ceil() as i64;
    let w1 = weights(sigma, reach);
    let mut out = MultiplexImage::zeros(img.channels, img.height, img.width);
    for c in 0..img.channels {
        for y in 0..img.height as i64 {
            for x in 0..img.width as i64 {
                let mut acc = 0.0;
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let wgt = w1[(dy + reach) as usize] * w1[(dx + reach) as usize];
                        acc +=
                            wgt * img.at(c, mirror(y + dy, img.height), mirror(x + dx, img.width));
                    }
                }
                out.data[(c * img.height + y as usize) * img.width + x as usize] = acc;
            }
        }
    }
    out
}

pub fn brute_adjacency(labels: &Grid<u16>, n: usize) -> Vec<Vec<u64>> {
    let mut adj = vec![vec![0u64; n]; n];
    let (w, h) = (labels.width() as i64, labels.height() as i64);
    for y1 in 0..h {
        for x1 in 0..w {
            for y2 in 0..h {
                for x2 in 0..w {
                    let ordered = (y1, x1) < (y2, x2);
                    let touching = (x1 - x2).abs() + (y1 - y2).abs() == 1;
                    let a = *labels.get(x1 as usize, y1 as usize) as usize;
                    let b = *labels.get(x2 as usize, y2 as usize) as usize;
                    if ordered && touching && a != b {
                        adj[a - 1][b - 1] += 1;
                        adj[b - 1][a - 1] += 1;
                    }
                }
            }
        }
    }
    adj
}

/// Edges as sorted `(id, id)` pairs from an all-pairs distance scan.
pub fn brute_cell_edges(ids: &Grid<u32>, radius: f64) -> Vec<(u32, u32)> {
    let w = ids.width();
    let mut sums = BTreeMap::<u32, (f64, f64, f64)>::new();
    for (i, &id) in ids.as_slice().iter().enumerate() {
        if id != 0 {
            let e = sums.entry(id).or_default();
            e.0 += (i % w) as f64;
            e.1 += (i / w) as f64;
            e.2 += 1.0;
        }
    }
    let centroids: Vec<(u32, f64, f64)> = sums
        .iter()
        .map(|(&id, s)| (id, s.0 / s.2, s.1 / s.2))
        .collect();
    let mut edges = Vec::new();
    for (i, a) in centroids.iter().enumerate() {
        for b in &centroids[i + 1..] {
            if ((a.1 - b.1).powi(2) + (a.2 - b.2).powi(2)).sqrt() < radius {
                edges.push((a.0, b.0));
            }
        }
    }
    edges
}

pub fn check_leakage(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let c = if case % 5 == 4 {
            rng.random_range(1..=7)
        } else {
            3
        };
        let img = random_volume(&mut rng, c, 16, 16);
        let sigma = rng.random_range(0.2..2.0);
        let err = max_rel_err(&spectral_leakage(&img, sigma), &direct_leakage(&img, sigma));
        if err >= 1e-9 {
            return Err(format!(
                "case {case} (C={c}, sigma {sigma}): relative error {err:e}"
            ));
        }
        worst = worst.max(err);
    }
    Ok(format!("{cases} volumes, worst relative error {worst:.1e}"))
}

pub fn check_blur(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        // Every tenth case is smaller than the kernel reach, forcing repeated reflection.
        let (h, w) = if case % 10 == 9 { (3, 5) } else { (16, 16) };
        let img = random_volume(&mut rng, 3, h, w);
        let sigma = rng.random_range(0.3..2.5);
        let err = max_rel_err(&psf_blur(&img, sigma), &direct_blur(&img, sigma));
        if err >= 1e-9 {
            return Err(format!(
                "case {case} ({h}x{w}, sigma {sigma}): relative error {err:e}"
            ));
        }
        worst = worst.max(err);
    }
    Ok(format!("{cases} volumes, worst relative error {worst:.1e}"))
}

pub fn check_adjacency(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (w, h) = (rng.random_range(1..=9), rng.random_range(1..=9));
        let n = rng.random_range(1..=5u16);
        let data = (0..w * h).map(|_| rng.random_range(1..=n)).collect();
        let labels = Grid::from_vec(w, h, data);
        let got = neighborhood_adjacency(&NeighborhoodMask::fixed(labels.clone()), n as usize);
        let want = brute_adjacency(&labels, n as usize);
        if got != want {
            return Err(format!("case {case} ({w}x{h}, N={n}): {got:?} != {want:?}"));
        }
    }
    Ok(format!("{cases} random masks identical"))
}

pub fn check_cell_graph(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_edges = 0;
    for case in 0..cases {
        let (w, h) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let k = rng.random_range(0..=12u32);
        let ids: Vec<u32> = (0..w * h).map(|_| rng.random_range(0..=k)).collect();
        let labels: Vec<u16> = ids
            .iter()
            .map(|&i| if i == 0 { 9 } else { (i % 8 + 1) as u16 })
            .collect();
        let radius = [1.5, 4.0, 12.0][case % 3];
        let ids = Grid::from_vec(w, h, ids);
        let state = PhenotypeState::fixed(Grid::from_vec(w, h, labels), ids.clone());
        let graph = build_cell_graph(&state, radius);
        let mut got: Vec<(u32, u32)> = graph
            .edges
            .iter()
            .map(|&(i, j)| (graph.nodes[i].id, graph.nodes[j].id))
            .collect();
        got.sort_unstable();
        let want = brute_cell_edges(&ids, radius);
        if got != want {
            return Err(format!(
                "case {case} ({w}x{h}, radius {radius}): {got:?} != {want:?}"
            ));
        }
        total_edges += want.len();
    }
    Ok(format!(
        "{cases} random instance maps identical ({total_edges} edges)"
    ))
}

const EXACT: f64 = 1e-12;

fn expect(what: &str, got: f64, want: f64) -> Result<(), String> {
    if (got - want).abs() <= EXACT {
        Ok(())
    } else {
        Err(format!("{what} = {got}, expected {want}"))
    }
}

/// Small cases evaluated by hand.
pub fn check_worked_examples() -> Check {
    let n_int = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
    let u = update_rule_matrix(&n_int, &[50.0, 50.0], &[25.0, 75.0]);
    let want = [[4.0, 2.0 / 9.0], [2.0, 4.0 / 9.0]];
    for i in 0..2 {
        for j in 0..2 {
            expect(&format!("neighborhood U[{i}][{j}]"), u[i][j], want[i][j])?;
        }
    }
    expect(
        "neighborhood loss",
        neighborhood_loss(&n_int, &[50.0, 50.0], &[25.0, 75.0]),
        20.0 / 3.0,
    )?;

    let id3: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let at = [20.0, 30.0, 50.0];
    expect("identity loss", neighborhood_loss(&id3, &at, &at), 3.0)?;

    let p_int = vec![vec![vec![1.0], vec![0.0]], vec![vec![0.0], vec![1.0]]];
    let target = vec![vec![50.0], vec![50.0]];
    let actual = vec![vec![25.0], vec![75.0]];
    let t = phenotype_update_tensor(&p_int, &target, &actual);
    let want = [[4.0, 0.0], [0.0, 4.0 / 9.0]];
    for i in 0..2 {
        for j in 0..2 {
            expect(&format!("phenotype U[{i}][{j}][0]"), t[i][j][0], want[i][j])?;
        }
    }
    expect(
        "phenotype loss",
        phenotype_loss(&p_int, &target, &actual),
        40.0 / 9.0,
    )?;
    Ok("U=[[4,2/9],[2,4/9]], loss 20/3, identity loss 3, plane [[4,0],[0,4/9]], loss 40/9".into())
}
