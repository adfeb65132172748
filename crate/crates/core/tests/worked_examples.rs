//! Small cases evaluated by hand.

mod common;

use tissuesim::neighborhood::{
    neighborhood_loss, NeighborhoodAction, NeighborhoodMask, NeighborhoodSim,
};
use tissuesim::phenotype::{phenotype_loss, phenotype_update_tensor};
use tissuesim::rule::update_rule_matrix;
use tissuesim::{preset_fig4, Grid, PresetScale};

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn all_worked_examples() {
    common::check_worked_examples().unwrap();
}

#[test]
fn two_neighborhood_rule_matrix() {
    let u = update_rule_matrix(
        &[vec![1.0, 0.5], vec![0.5, 1.0]],
        &[50.0, 50.0],
        &[25.0, 75.0],
    );
    let want = [[4.0, 2.0 / 9.0], [2.0, 4.0 / 9.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(close(u[i][j], want[i][j]), "U[{i}][{j}] = {}", u[i][j]);
        }
    }
    let loss = neighborhood_loss(
        &[vec![1.0, 0.5], vec![0.5, 1.0]],
        &[50.0, 50.0],
        &[25.0, 75.0],
    );
    assert!(close(loss, 20.0 / 3.0), "{loss}");
}

#[test]
fn identity_rule_at_target() {
    let id: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let target = [20.0, 30.0, 50.0];
    assert_eq!(update_rule_matrix(&id, &target, &target), id);
    assert!(close(neighborhood_loss(&id, &target, &target), 3.0));
    let zero = vec![vec![0.0; 3]; 3];
    assert!(update_rule_matrix(&zero, &target, &[1.0, 1.0, 98.0])
        .iter()
        .flatten()
        .all(|&v| v == 0.0));
}

#[test]
fn two_phenotype_plane() {
    let p_int = vec![vec![vec![1.0], vec![0.0]], vec![vec![0.0], vec![1.0]]];
    let target = vec![vec![50.0], vec![50.0]];
    let actual = vec![vec![25.0], vec![75.0]];
    let u = phenotype_update_tensor(&p_int, &target, &actual);
    let want = [[4.0, 0.0], [0.0, 4.0 / 9.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(
                close(u[i][j][0], want[i][j]),
                "U[{i}][{j}] = {}",
                u[i][j][0]
            );
        }
    }
    let loss = phenotype_loss(&p_int, &target, &actual);
    assert!(close(loss, 40.0 / 9.0), "{loss}");
    let doubled: Vec<Vec<Vec<f64>>> = p_int
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| c.iter().map(|v| 2.0 * v).collect())
                .collect()
        })
        .collect();
    assert!(close(
        phenotype_loss(&doubled, &target, &actual),
        80.0 / 9.0
    ));
}

#[test]
fn degenerate_phenotype_tensor() {
    let u = phenotype_update_tensor(&[vec![vec![1.0]]], &[vec![100.0]], &[vec![100.0]]);
    assert_eq!(u, vec![vec![vec![1.0]]]);
}

#[test]
fn split_window_rewritten_to_preferred_label() {
    // 4x4 half 1 / half 2; row argmaxes send both labels to 1.
    let mut cfg = preset_fig4(PresetScale::Desk).with_size(4, 4);
    cfg.num_neighborhoods = 2;
    cfg.neighborhood_abundance = vec![50.0, 50.0];
    cfg.neighborhood_interaction = vec![vec![1.0, 0.0], vec![1.0, 0.1]];
    let rows = vec![vec![1, 1, 2, 2]; 4];
    let mask = NeighborhoodMask {
        labels: Grid::from_rows(rows),
        unassigned: Grid::filled(4, 4, true),
    };
    let mut sim = NeighborhoodSim::new(&cfg, mask);
    assert_eq!(sim.step_at(5), NeighborhoodAction::Rewrite);
    assert!(sim.mask().labels.as_slice().iter().all(|&l| l == 1));
    assert_eq!(sim.unassigned(), 16);
}
