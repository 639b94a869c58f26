mod common;

use common::*;
use pelsim::scenario::{run_sag_matrix, simulate};

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sc = bench("PEL-2", 0.6, T_FAULT);
    let a = csv_bytes(dir.path(), "a", &simulate(&sc).unwrap());
    let b = csv_bytes(dir.path(), "b", &simulate(&sc).unwrap());
    assert!(a == b);
}

#[test]
fn sweep_cells_equal_standalone_runs() {
    let dir = tempfile::tempdir().unwrap();
    let base = bench("PEL-1", 0.0, T_FAULT);
    let cells = run_sag_matrix(&base, &[0.4, 1.0], &[0.1, 0.16]).unwrap();
    for c in &cells {
        let alone = simulate(&base.with_sag(c.delta_u, c.t_fault)).unwrap();
        let tag = format!("{}_{}", c.delta_u, c.t_fault);
        let x = csv_bytes(dir.path(), &format!("cell{tag}"), c.outcome.as_ref().unwrap());
        let y = csv_bytes(dir.path(), &format!("alone{tag}"), &alone);
        assert!(x == y, "cell {tag} differs from its standalone run");
    }
}

#[test]
fn failing_cell_leaves_the_others_intact() {
    let base = bench("PEL-1", 0.0, T_FAULT);
    let cells = run_sag_matrix(&base, &[0.4, 1.5], &[0.1]).unwrap();
    assert!(cells[0].outcome.as_ref().unwrap().metrics.is_some());
    assert!(cells[1].outcome.is_err());
}
