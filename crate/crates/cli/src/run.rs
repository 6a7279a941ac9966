//! Per-command computations. Every command produces a [`Table`] in grid
//! order; points are evaluated on the ambient rayon pool.

use noisy_tunnel::dynamics::{evolve_generator, initial_augmented};
use noisy_tunnel::nonmarkov::{blp_measure, BlpOptions, BlpResult};
use noisy_tunnel::state::{relative_entropy_coherence, EVOLUTION_TOL};
use noisy_tunnel::{evolve_state, Trajectory};
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::{num, Table};
use crate::spec::{ParamPoint, SweepSpec};

/// Columns written per time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    /// Bloch components and both coherence measures.
    Full,
    /// l1 coherence only.
    Coherence,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub table: Table,
    pub warnings: Vec<String>,
}

fn axis_header(spec: &SweepSpec) -> Vec<String> {
    spec.param_axes()
        .iter()
        .map(|a| a.name.as_str().to_string())
        .collect()
}

fn check_physical(tr: &Trajectory) -> Result<(), CliError> {
    match tr.bloch().position(|b| !b.is_physical(EVOLUTION_TOL)) {
        Some(i) => Err(CliError::Numerical(format!(
            "Bloch norm {} > 1 at t = {} for {:?}",
            tr.states[i].bloch().norm(),
            tr.times[i],
            tr.params
        ))),
        None => Ok(()),
    }
}

/// `evolve` and `sweep-coherence`.
pub fn time_series(spec: &SweepSpec, columns: Columns) -> Result<RunOutput, CliError> {
    let times = spec.times();
    let points = spec.param_points()?;
    let jobs: Vec<(&ParamPoint, _)> = points
        .iter()
        .flat_map(|p| spec.states.iter().map(move |&s| (p, s)))
        .collect();
    let trajectories = jobs
        .par_iter()
        .map(|(point, state)| {
            let tr = evolve_state(&point.params, *state, &times, spec.backend)?;
            check_physical(&tr)?;
            Ok(tr)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut header = axis_header(spec);
    header.extend(["state", "t"].map(String::from));
    match columns {
        Columns::Full => header.extend(["Px", "Py", "Pz", "C_l1", "C_relent"].map(String::from)),
        Columns::Coherence => header.push("C_l1".into()),
    }
    let mut table = Table::new(header);
    for ((point, state), tr) in jobs.iter().zip(&trajectories) {
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let b = s.bloch();
            let mut row: Vec<String> = point.values.iter().map(|&v| num(v)).collect();
            row.push(state.label().to_string());
            row.push(num(*t));
            if columns == Columns::Full {
                row.extend([b.x, b.y, b.z].map(num));
            }
            row.push(num(b.l1_coherence()));
            if columns == Columns::Full {
                row.push(num(relative_entropy_coherence(&s.density())));
            }
            table.push(row);
        }
    }
    Ok(RunOutput {
        table,
        warnings: Vec::new(),
    })
}

/// `sweep-nonmarkov`. With `strict`, any horizon warning is an error.
pub fn nonmarkov_grid(spec: &SweepSpec, strict: bool) -> Result<RunOutput, CliError> {
    let points = spec.param_points()?;
    let opts = BlpOptions {
        dt: spec.oracle.blp_dt,
        check_refinement: spec.oracle.refinement,
        ..BlpOptions::default()
    };
    let (a, b) = (spec.states[0].density(), spec.states[1].density());
    let results: Vec<BlpResult> = points
        .par_iter()
        .map(|p| blp_measure(&p.params, &a, &b, &opts))
        .collect::<Result<_, _>>()?;

    let mut header = axis_header(spec);
    header.extend(
        [
            "N",
            "revivals",
            "horizon",
            "dt",
            "refinement_delta",
            "horizon_warning",
        ]
        .map(String::from),
    );
    let mut table = Table::new(header);
    let mut warnings = Vec::new();
    for (p, r) in points.iter().zip(&results) {
        if r.horizon_warning {
            let at: Vec<String> = spec
                .param_axes()
                .iter()
                .zip(&p.values)
                .map(|(a, v)| format!("{}={v}", a.name.as_str()))
                .collect();
            warnings.push(format!(
                "distance not decayed at horizon {} ({}): final envelope {:.3e}",
                r.horizon,
                at.join(", "),
                r.final_envelope
            ));
        }
        let mut row: Vec<String> = p.values.iter().map(|&v| num(v)).collect();
        row.push(num(r.n_value));
        row.push(r.revival_intervals.len().to_string());
        row.push(num(r.horizon));
        row.push(num(r.grid_step));
        row.push(r.refinement_delta.map(num).unwrap_or_default());
        row.push(r.horizon_warning.to_string());
        table.push(row);
    }
    if strict && !warnings.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} horizon warning(s) under --strict; first: {}",
            warnings.len(),
            warnings[0]
        )));
    }
    Ok(RunOutput { table, warnings })
}

/// Propagates the averaged dynamics under an explicit generator; used by
/// `validate` for perturbed references.
pub(crate) fn bloch_series(
    m: &noisy_tunnel::Generator,
    p0: noisy_tunnel::BlochVector,
    times: &[f64],
) -> Result<Vec<noisy_tunnel::BlochVector>, CliError> {
    let states = evolve_generator(
        m,
        initial_augmented(p0),
        times,
        noisy_tunnel::Backend::MatrixExponential,
    )?;
    Ok(states.iter().map(|s| s.bloch()).collect())
}
