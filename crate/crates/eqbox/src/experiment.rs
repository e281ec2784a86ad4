//! Convergence experiments: quotients, properness of the limit group, and
//! the lens sequence.

use std::path::Path;

use eqbox_core::boxdist::{box_upper_seeded, d_pi_with, BoxError, DPiOptions, MapPair};
use eqbox_core::group::{extract_limit_group, limit_group, quotient, GroupError, Quotient};
use eqbox_core::mmspace::obs_diam_lower;
use eqbox_core::obsdist::{dconc_upper_seeded, ObsError, ProbeConfig};
use eqbox_core::search::SearchConfig;
use eqbox_core::{Action, CouplingError, Perm, Plan, Space, SpaceError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::{gen_gaussian_instance, gen_lens_instance, GenError, LensConfig};
use crate::io::{InstanceSpec, IoError};
use crate::report::{BoundKind, ExperimentReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error(transparent)]
    Obs(#[from] ObsError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// A named member of an instance sequence.
#[derive(Debug, Clone)]
pub struct Named {
    pub id: String,
    pub action: Action,
}

impl Named {
    pub fn new(id: impl Into<String>, action: Action) -> Self {
        Named { id: id.into(), action }
    }
}

fn push_quotient(pi: &Plan, qx: &Quotient<f64>, qy: &Quotient<f64>) -> Result<Plan, CouplingError> {
    pi.pushforward(&qx.orbit_of, qx.space.len(), &qy.orbit_of, qy.space.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuotientOptions {
    pub kappa: f64,
    pub search: SearchConfig,
    pub probes: ProbeConfig,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        QuotientOptions { kappa: 0.1, search: SearchConfig::default(), probes: ProbeConfig::default() }
    }
}

/// Metrics reported per sequence member by [`run_quotient_convergence`].
pub const QUOTIENT_METRICS: [&str; 5] = ["box_eq", "box_quot", "dconc_eq", "dconc_quot", "conc_quot_margin"];

/// Equivariant bounds against the target, plain bounds between the
/// quotients, and the margin
/// `√(3(D_κ + 1) dconc_eq) + κ − dconc_quot` with `D_κ` the larger of the
/// two observable-diameter lower bounds. Quotient searches start from the
/// pushforward of the equivariant witness.
pub fn run_quotient_convergence(seq: &[Named], target: &Named, opts: &QuotientOptions) -> Result<ExperimentReport, ExperimentError> {
    let qy = quotient(&target.action)?;
    let y_plain = Action::trivial(qy.space.clone());
    let d_y = obs_diam_lower(target.action.space(), opts.kappa)?;
    let rows: Vec<[f64; 5]> = seq
        .par_iter()
        .map(|member| -> Result<[f64; 5], ExperimentError> {
            let a = &member.action;
            let qx = quotient(a)?;
            let x_plain = Action::trivial(qx.space.clone());
            let box_eq = box_upper_seeded(a, &target.action, &opts.search, &[])?;
            let seed = push_quotient(&box_eq.coupling, &qx, &qy)?;
            let box_q = box_upper_seeded(&x_plain, &y_plain, &opts.search, &[seed])?;
            let dconc_eq = dconc_upper_seeded(a, &target.action, &opts.search, &opts.probes, &[])?;
            let seed = push_quotient(&dconc_eq.coupling, &qx, &qy)?;
            let dconc_q = dconc_upper_seeded(&x_plain, &y_plain, &opts.search, &opts.probes, &[seed])?;
            let d_kappa = obs_diam_lower(a.space(), opts.kappa)?.max(d_y);
            let margin = (3.0 * (d_kappa + 1.0) * dconc_eq.value).sqrt() + opts.kappa - dconc_q.value;
            Ok([box_eq.value, box_q.value, dconc_eq.value, dconc_q.value, margin])
        })
        .collect::<Result<_, _>>()?;
    let mut report = ExperimentReport::new(format!("quotient convergence towards {}", target.id));
    report.notes.push(format!("kappa = {}; D_kappa from observable-diameter lower bounds", opts.kappa));
    for (n, (member, vals)) in seq.iter().zip(&rows).enumerate() {
        for (metric, v) in QUOTIENT_METRICS.iter().zip(vals) {
            report.push(&member.id, metric, n as f64, *v, BoundKind::Upper, 0.0, opts.search.seed);
        }
    }
    Ok(report)
}

/// Limit groups found by [`run_properness_probe`], one per member.
#[derive(Debug, Clone)]
pub struct ProperOutcome {
    pub report: ExperimentReport,
    pub groups: Vec<Action>,
    pub defects: Vec<f64>,
}

/// For each member, a box witness coupling against `y` (trivial groups), the
/// subset behind `d^π(id, id)` on it, and the subgroup of `Aut(Y)` generated
/// by the elements matched to `G_n` through that subset.
pub fn run_properness_probe(seq: &[Named], y: &Space, search: &SearchConfig) -> Result<ProperOutcome, ExperimentError> {
    let y_plain = Action::trivial(y.clone());
    let results: Vec<(f64, f64, Action)> = seq
        .par_iter()
        .map(|member| -> Result<(f64, f64, Action), ExperimentError> {
            let a = &member.action;
            let x_plain = Action::trivial(a.space().clone());
            let witness = box_upper_seeded(&x_plain, &y_plain, search, &[])?;
            let id_x = MapPair::on_x(Perm::identity(a.space().len()));
            let id_y = MapPair::on_y(Perm::identity(y.len()));
            let cert = d_pi_with(&id_x, &id_y, &witness.coupling, a.space(), y, DPiOptions::permissive())?;
            let matches = extract_limit_group(a, y, &cert.subset, cert.value)?;
            let defect = matches.iter().map(|m| m.defect).fold(0.0, f64::max);
            Ok((witness.value, defect, limit_group(y, &matches)?))
        })
        .collect::<Result<_, _>>()?;
    let mut report = ExperimentReport::new("properness probe");
    let mut groups = Vec::new();
    let mut defects = Vec::new();
    for (n, (member, (boxv, defect, group))) in seq.iter().zip(results).enumerate() {
        report.push(&member.id, "box_plain", n as f64, boxv, BoundKind::Upper, 0.0, search.seed);
        report.push(&member.id, "max_defect", n as f64, defect, BoundKind::Upper, 0.0, search.seed);
        report.push(&member.id, "limit_order", n as f64, group.order() as f64, BoundKind::Oracle, 0.0, search.seed);
        groups.push(group);
        defects.push(defect);
    }
    Ok(ProperOutcome { report, groups, defects })
}

/// Instance label carrying every approximation parameter.
pub fn lens_instance_id(cfg: &LensConfig, j: usize, samples: usize) -> String {
    format!("j={j} samples={samples} K={} N={}", cfg.k, cfg.n)
}

/// Per `j` and sample count: the equivariant box bound between the sampled
/// `(E_j, Z_j)` and the sampled Gaussian with `Z_K`, and the plain box bound
/// between their quotients. Metrics are suffixed with the sample count;
/// `param` is `j`.
pub fn run_lens_experiment(cfg: &LensConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.check()?;
    let jobs: Vec<(usize, usize)> = cfg.js.iter().flat_map(|&j| cfg.sweep().into_iter().map(move |s| (j, s))).collect();
    let rows: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(j, s)| -> Result<(f64, f64), ExperimentError> {
            let sized = LensConfig { samples: s, ..cfg.clone() };
            let e = gen_lens_instance(&sized, j)?;
            let g = gen_gaussian_instance(&sized)?;
            let eq = box_upper_seeded(&e, &g, &cfg.search, &[])?;
            let (qe, qg) = (quotient(&e)?, quotient(&g)?);
            let seed = push_quotient(&eq.coupling, &qe, &qg)?;
            let q = box_upper_seeded(&Action::trivial(qe.space.clone()), &Action::trivial(qg.space.clone()), &cfg.search, &[seed])?;
            Ok((eq.value, q.value))
        })
        .collect::<Result<_, _>>()?;
    let mut report = ExperimentReport::new("lens sequence against the sampled Gaussian space");
    report.notes.push("bounds and trends only; no finite-sample convergence certificate".into());
    for (&(j, s), (eq, q)) in jobs.iter().zip(rows) {
        let id = lens_instance_id(cfg, j, s);
        report.push(&id, &format!("box_eq_s{s}"), j as f64, eq, BoundKind::Upper, 0.0, cfg.seed);
        report.push(&id, &format!("box_quot_s{s}"), j as f64, q, BoundKind::Upper, 0.0, cfg.seed);
    }
    Ok(report)
}

/// Config file for `experiment quotient` and `experiment properness`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub sequence: Vec<InstanceSpec>,
    pub target: InstanceSpec,
    #[serde(default)]
    pub options: QuotientOptions,
}

impl SequenceConfig {
    pub fn build(&self, base: &Path) -> Result<(Vec<Named>, Named), ExperimentError> {
        let seq = self
            .sequence
            .iter()
            .enumerate()
            .map(|(k, s)| Ok(Named::new(format!("x{k}"), s.build(base)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        Ok((seq, Named::new("target", self.target.build(base)?)))
    }
}
