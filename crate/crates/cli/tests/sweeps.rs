mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use common::{code, column, f, read_csv, run};
use noisy_tunnel::analysis::{decoherence_time, revivals_after_descent};

fn produce(args: &[&str]) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let mut all = args.to_vec();
    all.extend(["--out", path.to_str().unwrap()]);
    let out = run(&all);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir, path)
}

/// `(key columns) -> [(t, C_l1)]` from a time-series CSV.
fn series(path: &Path, keys: &[&str]) -> BTreeMap<Vec<String>, Vec<(f64, f64)>> {
    let (header, rows) = read_csv(path);
    let (t, c) = (column(&header, "t"), column(&header, "C_l1"));
    let idx: Vec<usize> = keys.iter().map(|k| column(&header, k)).collect();
    let mut out: BTreeMap<Vec<String>, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let key = idx.iter().map(|&i| r[i].clone()).collect();
        out.entry(key).or_default().push((f(&r[t]), f(&r[c])));
    }
    out
}

fn key(eps: f64, state: &str) -> Vec<String> {
    vec![format!("{eps:.16e}"), state.to_string()]
}

#[test]
fn evolve_static_barrier_coherence() {
    let (_d, path) = produce(&["evolve"]);
    let s = series(&path, &["epsilon", "state"]);
    let rho2 = &s[&key(0.0, "rho2")];
    assert_eq!(rho2[0], (0.0, 1.0));
    // envelope of the damped oscillation, damping 2 kappa
    let w = 0.96f64.sqrt();
    assert!(rho2.iter().all(|&(t, c)| c <= (-0.2 * t).exp() / w + 1e-9));
    let peak_late = rho2
        .iter()
        .filter(|(t, _)| *t > 10.0)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    assert!(peak_late > 0.5 * (-0.2f64 * 13.0).exp());

    let rho1 = &s[&key(0.0, "rho1")];
    assert_eq!(rho1[0].1, 0.0);
    assert!(rho1.iter().any(|&(_, c)| c > 0.5));
}

#[test]
fn evolve_without_tunneling_keeps_incoherent_state() {
    let (_d, path) = produce(&["evolve", "--delta0", "0", "--delta1", "0"]);
    let (header, rows) = read_csv(&path);
    let (state, c) = (column(&header, "state"), column(&header, "C_l1"));
    let rho1: Vec<_> = rows.iter().filter(|r| r[state] == "rho1").collect();
    assert_eq!(rho1.len(), 2 * 2001);
    assert!(rho1.iter().all(|r| f(&r[c]) == 0.0));
}

#[test]
fn coherence_grid_shape_and_initial_values() {
    let (_d, path) = produce(&["sweep-coherence"]);
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["epsilon", "K", "state", "t", "C_l1"]);
    assert_eq!(rows.len(), 2 * 21 * 2 * 401);
    let (state, t, c) = (
        column(&header, "state"),
        column(&header, "t"),
        column(&header, "C_l1"),
    );
    let starts: Vec<_> = rows
        .iter()
        .filter(|r| r[state] == "rho1" && f(&r[t]) == 0.0)
        .collect();
    assert_eq!(starts.len(), 42);
    assert!(starts.iter().all(|r| f(&r[c]) == 0.0));
}

#[test]
fn fast_switching_extends_decoherence_time() {
    let (_d, path) = produce(&["sweep-coherence"]);
    let s = series(&path, &["epsilon", "K", "state"]);
    for eps in [0.0, 2.0] {
        for state in ["rho1", "rho2"] {
            let at = |k: f64| {
                let curve = &s[&vec![
                    format!("{eps:.16e}"),
                    format!("{k:.16e}"),
                    state.to_string(),
                ]];
                let (t, c): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
                decoherence_time(&t, &c, 0.1)
            };
            assert!(
                at(0.1) > at(1.0),
                "eps={eps} {state}: {} vs {}",
                at(0.1),
                at(1.0)
            );
        }
    }
}

#[test]
fn kubo_one_column_has_no_revivals() {
    let (_d, path) = produce(&["sweep-coherence", "--set", "sweep.K=1 10 2 log"]);
    let s = series(&path, &["epsilon", "K", "state"]);
    let mut found = Vec::new();
    for eps in [0.0, 2.0] {
        for state in ["rho1", "rho2"] {
            let curve = &s[&vec![
                format!("{eps:.16e}"),
                format!("{:.16e}", 1.0),
                state.to_string(),
            ]];
            let (t, c): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
            if let Some((tr, v)) = revivals_after_descent(&t, &c, 0.05, 1e-4).first() {
                found.push(format!("eps={eps} {state}: {v:.3e} at t={tr}"));
            }
        }
    }
    assert!(found.is_empty(), "revivals at K=1: {found:?}");
}

fn nonmarkov_rows() -> Vec<(f64, f64, f64, f64)> {
    let (_d, path) = produce(&["sweep-nonmarkov"]);
    let (header, rows) = read_csv(&path);
    assert_eq!(
        header,
        [
            "epsilon",
            "K",
            "kappa",
            "N",
            "revivals",
            "horizon",
            "dt",
            "refinement_delta",
            "horizon_warning"
        ]
    );
    assert_eq!(rows.len(), 2 * 6 * 7);
    assert!(rows
        .iter()
        .all(|r| r[8] == "false" && f(&r[6]) == 1e-3 && f(&r[7]) < 1e-6));
    rows.iter()
        .map(|r| (f(&r[0]), f(&r[1]), f(&r[2]), f(&r[3])))
        .collect()
}

#[test]
fn unbiased_transition_across_kubo_one() {
    let rows = nonmarkov_rows();
    let n = |k: f64| {
        rows.iter()
            .find(|r| r.0 == 0.0 && r.1 == k && r.2 == 0.0)
            .unwrap()
            .3
    };
    assert!(n(0.25) <= 1e-9 && n(0.5) <= 1e-9 && n(1.0) <= 1e-9);
    assert!(n(2.0) > 0.1);
}

#[test]
fn strong_white_noise_row_is_markovian() {
    let rows = nonmarkov_rows();
    let bad: Vec<_> = rows.iter().filter(|r| r.2 == 0.3 && r.3 > 1e-9).collect();
    assert!(bad.is_empty(), "N > 0 at kappa = 0.3: {bad:?}");
}

#[test]
fn slow_switching_column_is_markovian() {
    let rows = nonmarkov_rows();
    let bad: Vec<_> = rows.iter().filter(|r| r.1 == 0.25 && r.3 > 1e-9).collect();
    assert!(bad.is_empty(), "N > 0 at K = 0.25: {bad:?}");
}
