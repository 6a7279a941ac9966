//! Acceptance suite. Runs every exit criterion, prints one line per
//! criterion and exits non-zero if any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use noisy_tunnel::analysis::{
    decoherence_time, fitted_decay_rate, log_space, revivals_after_descent,
};
use noisy_tunnel::dynamics::{
    evolve_state, rtn_only_trace_distance, static_coherence_closed_form, uniform_grid, Backend,
    Trajectory,
};
use noisy_tunnel::nonmarkov::{blp_closed_form, blp_measure, BlpOptions};
use noisy_tunnel::state::{bloch_to_density, trace_distance, BlochVector, InitialState};
use noisy_tunnel::stochastic::{mc_full_sde, mc_rtn_lindblad, EnsembleResult};
use noisy_tunnel::ModelParams;
use rayon::prelude::*;

const BACKENDS: [Backend; 2] = [Backend::RungeKutta, Backend::MatrixExponential];
const SEED: u64 = 20240611;

/// Tracks criterion 9 over everything the other criteria evolve.
#[derive(Default)]
struct Physicality {
    states: usize,
    max_norm: f64,
    trace_failures: usize,
}

impl Physicality {
    fn record(&mut self, p: BlochVector) {
        let rho = bloch_to_density(p);
        let trace = rho.trace();
        if trace.re != 1.0 || trace.im != 0.0 {
            self.trace_failures += 1;
        }
        self.max_norm = self.max_norm.max(p.norm());
        self.states += 1;
    }

    fn trajectory(&mut self, tr: &Trajectory) {
        tr.bloch().for_each(|p| self.record(p));
    }

    fn ensemble(&mut self, e: &EnsembleResult) {
        e.mean_bloch.iter().for_each(|&p| self.record(p));
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn params(eps: f64, kap: f64, d0: f64, d1: f64, nu: f64) -> ModelParams {
    ModelParams::new(eps, kap, d0, d1, nu).expect("valid parameters")
}

fn rho1_rho3_blp(p: &ModelParams, opts: &BlpOptions) -> f64 {
    blp_measure(
        p,
        &InitialState::Rho1.density(),
        &InitialState::Rho3.density(),
        opts,
    )
    .expect("blp")
    .n_value
}

/// Feeds the pair trajectories used by an N evaluation into the physicality
/// tracker.
fn record_pair(phys: &mut Physicality, p: &ModelParams, t_max: f64) {
    let grid = uniform_grid(t_max, 401);
    for s in [InitialState::Rho1, InitialState::Rho3] {
        phys.trajectory(&evolve_state(p, s, &grid, Backend::MatrixExponential).unwrap());
    }
}

fn c1_closed_form_dynamics(phys: &mut Physicality) -> Outcome {
    let start = Instant::now();
    let p = params(0.0, 0.1, 1.0, 0.0, 1.0);
    let grid = uniform_grid(20.0, 2001);
    let mut worst: f64 = 0.0;
    for backend in BACKENDS {
        for s in [InitialState::Rho1, InitialState::Rho2] {
            let tr = evolve_state(&p, s, &grid, backend).unwrap();
            for (t, b) in grid.iter().zip(tr.bloch()) {
                let exact = static_coherence_closed_form(0.1, 1.0, s, *t).unwrap();
                worst = worst.max((b.l1_coherence() - exact).abs());
            }
            phys.trajectory(&tr);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: worst <= 1e-8 && elapsed < Duration::from_secs(1),
        detail: format!(
            "max |C_l1 - closed form| = {worst:.2e} (tol 1e-8), {:.3} s (limit 1 s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn c2_rtn_only_distance(phys: &mut Physicality) -> Outcome {
    let grid = uniform_grid(15.0, 1501);
    let mut worst: f64 = 0.0;
    for (d1, nu) in [(2.0, 1.0), (4.0, 1.0), (1.0, 2.0)] {
        let p = ModelParams::telegraph_only(d1, nu).unwrap();
        for backend in BACKENDS {
            let a = evolve_state(&p, InitialState::Rho1, &grid, backend).unwrap();
            let b = evolve_state(&p, InitialState::Rho3, &grid, backend).unwrap();
            for (i, t) in grid.iter().enumerate() {
                let d = trace_distance(&a.states[i].density(), &b.states[i].density());
                worst = worst.max((d - rtn_only_trace_distance(d1, nu, *t)).abs());
            }
            phys.trajectory(&a);
            phys.trajectory(&b);
        }
    }
    Outcome {
        passed: worst <= 1e-8,
        detail: format!("max |D - closed form| = {worst:.2e} over (2,1),(4,1),(1,2) (tol 1e-8)"),
    }
}

fn c3_blp_closed_form(phys: &mut Physicality) -> Outcome {
    let opts = BlpOptions::default();
    let mut passed = true;
    let mut parts = Vec::new();
    for k in [1.5, 2.0, 4.0] {
        let p = ModelParams::telegraph_only(1.0, 1.0 / k).unwrap();
        let start = Instant::now();
        let r = blp_measure(
            &p,
            &InitialState::Rho1.density(),
            &InitialState::Rho3.density(),
            &opts,
        )
        .unwrap();
        let elapsed = start.elapsed();
        let exact = blp_closed_form(k);
        let rel = (r.n_value - exact).abs() / exact;
        let envelope_ok = (-p.nu() * r.horizon).exp() < 1e-10;
        passed &= rel <= 1e-3 && elapsed < Duration::from_secs(10) && envelope_ok;
        parts.push(format!(
            "K={k}: N={:.6} rel.err {rel:.1e} ({:.2} s)",
            r.n_value,
            elapsed.as_secs_f64()
        ));
        record_pair(phys, &p, r.horizon);
    }
    // frozen value of 1/(exp(pi/sqrt3) - 1) from 30-digit arithmetic
    let frozen = 0.194_791_000_123_076_55;
    let k2 = (blp_closed_form(2.0) - frozen).abs();
    passed &= k2 < 1e-15;
    Outcome {
        passed,
        detail: format!("{}; closed form N(2) = {frozen:.6}", parts.join(", ")),
    }
}

fn c4_markovian_regimes(phys: &mut Physicality) -> Outcome {
    let opts = BlpOptions::default();
    let cases = [
        ("static eps=0", params(0.0, 0.1, 1.0, 0.0, 1.0)),
        ("static eps=2", params(2.0, 0.1, 1.0, 0.0, 1.0)),
        (
            "RTN-only K=0.5",
            ModelParams::telegraph_only(1.0, 2.0).unwrap(),
        ),
        (
            "RTN-only K=1",
            ModelParams::telegraph_only(1.0, 1.0).unwrap(),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, p) in cases {
        let n = rho1_rho3_blp(&p, &opts);
        worst = worst.max(n);
        parts.push(format!("{name}: {n:.1e}"));
        record_pair(phys, &p, 60.0);
    }
    Outcome {
        passed: worst <= 1e-9,
        detail: format!("{} (tol 1e-9)", parts.join(", ")),
    }
}

fn mc_check(
    phys: &mut Physicality,
    label: &str,
    p: ModelParams,
    run: impl Fn(&ModelParams, &[f64]) -> EnsembleResult,
) -> (bool, String) {
    let grid = uniform_grid(20.0, 21);
    let start = Instant::now();
    let ens = run(&p, &grid);
    let elapsed = start.elapsed();
    let exact = evolve_state(&p, InitialState::Rho1, &grid, Backend::MatrixExponential).unwrap();
    let reference: Vec<BlochVector> = exact.bloch().collect();
    let agreement = ens.agreement(&reference, 3.0, 1e-12);
    phys.ensemble(&ens);
    phys.trajectory(&exact);
    let passed = agreement.passed() && elapsed < Duration::from_secs(60);
    (
        passed,
        format!(
            "{label}: {}/{} points outside 3 s.e. (max z {:.2}, max |diff| {:.1e}), {:.1} s",
            agreement.violations,
            agreement.points,
            agreement.max_z,
            agreement.max_abs,
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_shapiro_loginov(phys: &mut Physicality) -> Outcome {
    let run = |p: &ModelParams, grid: &[f64]| {
        mc_rtn_lindblad(p, &InitialState::Rho1.density(), grid, 10_000, SEED).unwrap()
    };
    let (a, da) = mc_check(phys, "(0,0.1,1,1,1)", params(0.0, 0.1, 1.0, 1.0, 1.0), run);
    let (b, db) = mc_check(
        phys,
        "(2,0.1,1,1,0.25)",
        params(2.0, 0.1, 1.0, 1.0, 0.25),
        run,
    );
    Outcome {
        passed: a && b,
        detail: format!("{da}; {db}"),
    }
}

fn c6_gaussian_averaging(phys: &mut Physicality) -> Outcome {
    let run = |p: &ModelParams, grid: &[f64]| {
        mc_full_sde(p, &InitialState::Rho1.density(), grid, 10_000, 1e-3, SEED).unwrap()
    };
    let (a, da) = mc_check(phys, "(0,0.1,1,1,1)", params(0.0, 0.1, 1.0, 1.0, 1.0), run);

    let kappa = 0.1;
    let p = params(0.0, kappa, 0.0, 0.0, 1.0);
    let grid = uniform_grid(5.0, 21);
    let mut rel_errs = Vec::new();
    for (label, start, comp) in [
        ("Py", InitialState::Rho2.bloch(), 1usize),
        ("Px", BlochVector::new(1.0, 0.0, 0.0), 0usize),
    ] {
        let ens = mc_full_sde(&p, &bloch_to_density(start), &grid, 10_000, 1e-3, SEED).unwrap();
        let values: Vec<f64> = ens.mean_bloch.iter().map(|b| b.to_array()[comp]).collect();
        let se: Vec<f64> = ens.std_error.iter().map(|s| s[comp]).collect();
        let rate = fitted_decay_rate(&grid, &values, &se);
        rel_errs.push((label, rate, (rate - 4.0 * kappa).abs() / (4.0 * kappa)));
        phys.ensemble(&ens);
    }
    let b = rel_errs.iter().all(|(_, _, e)| *e <= 0.02);
    let fits: Vec<String> = rel_errs
        .iter()
        .map(|(l, r, e)| format!("{l} rate {r:.4} (rel.err {:.2}%)", 100.0 * e))
        .collect();
    Outcome {
        passed: a && b,
        detail: format!(
            "{da}; pure dephasing, 4*kappa = 0.4: {} (tol 2%)",
            fits.join(", ")
        ),
    }
}

fn c7_nonmarkov_trends(phys: &mut Physicality) -> Outcome {
    let ks = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let kappas = [0.0, 0.05, 0.1, 0.2];
    let tol = 1e-9;
    let opts = BlpOptions::default();
    let mut failures = Vec::new();
    for eps in [0.0, 2.0] {
        let points: Vec<(usize, usize)> = (0..kappas.len())
            .flat_map(|i| (0..ks.len()).map(move |j| (i, j)))
            .collect();
        let values: Vec<f64> = points
            .par_iter()
            .map(|&(i, j)| {
                let p = ModelParams::with_kubo(eps, kappas[i], 1.0, 1.0, ks[j]).unwrap();
                rho1_rho3_blp(&p, &opts)
            })
            .collect();
        let n = |i: usize, j: usize| values[i * ks.len() + j];
        for (i, kap) in kappas.iter().enumerate() {
            for j in 1..ks.len() {
                if n(i, j) < n(i, j - 1) - tol {
                    failures.push(format!(
                        "eps={eps} kappa={kap}: N(K={})={:.3e} < N(K={})={:.3e}",
                        ks[j],
                        n(i, j),
                        ks[j - 1],
                        n(i, j - 1)
                    ));
                }
            }
        }
        for (j, k) in ks.iter().enumerate() {
            for i in 1..kappas.len() {
                if n(i, j) > n(i - 1, j) + tol {
                    failures.push(format!(
                        "eps={eps} K={k}: N(kappa={})={:.3e} > N(kappa={})={:.3e}",
                        kappas[i],
                        n(i, j),
                        kappas[i - 1],
                        n(i - 1, j)
                    ));
                }
            }
        }
        if eps == 0.0 {
            for (j, k) in ks.iter().enumerate().take(3) {
                if n(0, j) > tol {
                    failures.push(format!("eps=0 kappa=0: N(K={k}) = {:.3e} > 1e-9", n(0, j)));
                }
            }
            if n(0, 3) <= 0.0 {
                failures.push("eps=0 kappa=0: N(K=2) is not positive".into());
            }
        }
        let table: Vec<String> = kappas
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let row: Vec<String> = (0..ks.len()).map(|j| format!("{:.2e}", n(i, j))).collect();
                format!("kappa={k}: [{}]", row.join(" "))
            })
            .collect();
        println!(
            "      N table eps={eps} over K={ks:?}\n        {}",
            table.join("\n        ")
        );
    }
    for (eps, kap, k) in [(0.0, 0.0, 2.0), (2.0, 0.0, 0.5), (2.0, 0.2, 8.0)] {
        record_pair(
            phys,
            &ModelParams::with_kubo(eps, kap, 1.0, 1.0, k).unwrap(),
            100.0,
        );
    }
    Outcome {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "monotone in K and kappa on 6x4 grid for eps in {0,2}; eps=0,kappa=0 transition at K=1"
                .into()
        } else {
            failures.join("; ")
        },
    }
}

fn c8_coherence_features(phys: &mut Physicality) -> Outcome {
    let grid = uniform_grid(20.0, 2001);
    let ks = log_space(0.1, 10.0, 21);
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for eps in [0.0, 2.0] {
        for s in [InitialState::Rho1, InitialState::Rho2] {
            let at_k1 = ModelParams::with_kubo(eps, 0.1, 1.0, 1.0, 1.0).unwrap();
            let tr = evolve_state(&at_k1, s, &grid, Backend::MatrixExponential).unwrap();
            phys.trajectory(&tr);
            let revivals = revivals_after_descent(&grid, &tr.l1_coherence(), 0.05, 1e-4);
            if let Some((t, v)) = revivals.first() {
                failures.push(format!("eps={eps} {s}: K=1 revival {v:.2e} at t={t:.2}"));
            }

            let times: Vec<f64> = ks
                .par_iter()
                .map(|&k| {
                    let p = ModelParams::with_kubo(eps, 0.1, 1.0, 1.0, k).unwrap();
                    let tr = evolve_state(&p, s, &grid, Backend::MatrixExponential).unwrap();
                    decoherence_time(&grid, &tr.l1_coherence(), 0.1)
                })
                .collect();
            let (imin, tmin) = times
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, &t)| if t < acc.1 { (i, t) } else { acc },
                );
            notes.push(format!(
                "eps={eps} {s}: min T_dec {tmin:.2} at K={:.3}",
                ks[imin]
            ));
            if ks[imin] != 1.0 {
                failures.push(format!(
                    "eps={eps} {s}: decoherence-time minimum at K={:.3}, not K=1 (T(K=1)={:.2})",
                    ks[imin], times[10]
                ));
            }
        }
    }
    println!("      {}", notes.join("\n      "));
    Outcome {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "no revivals at K=1; decoherence-time minimum at K=1".into()
        } else {
            failures.join("; ")
        },
    }
}

fn main() -> ExitCode {
    type Criterion = fn(&mut Physicality) -> Outcome;
    let criteria: [(&str, &str, Criterion); 8] = [
        (
            "AC1",
            "closed-form static-barrier coherence",
            c1_closed_form_dynamics,
        ),
        (
            "AC2",
            "telegraph-only distinguishability",
            c2_rtn_only_distance,
        ),
        ("AC3", "non-Markovianity closed form", c3_blp_closed_form),
        ("AC4", "Markovian regimes", c4_markovian_regimes),
        ("AC5", "Monte Carlo telegraph closure", c5_shapiro_loginov),
        (
            "AC6",
            "Monte Carlo Gaussian averaging",
            c6_gaussian_averaging,
        ),
        (
            "AC7",
            "non-Markovianity trends in (K, kappa)",
            c7_nonmarkov_trends,
        ),
        ("AC8", "coherence features in (t, K)", c8_coherence_features),
    ];
    let mut phys = Physicality::default();
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let outcome = run(&mut phys);
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.passed);
        println!(
            "[{tag}] {id} {name} ({:.2} s): {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    let phys_ok = phys.trace_failures == 0 && phys.max_norm <= 1.0 + 1e-9 && phys.states > 0;
    failed += usize::from(!phys_ok);
    println!(
        "[{}] AC9 physicality: {} states, trace != 1 in {}, max Bloch norm {:.15}",
        if phys_ok { "PASS" } else { "FAIL" },
        phys.states,
        phys.trace_failures,
        phys.max_norm
    );
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
