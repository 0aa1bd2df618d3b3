use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Controller, Episode, Simulator, Status};
use crate::harness::episode::EpisodeResult;

/// Outcome of the force bisection for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSearch {
    /// Largest force on the grid whose episode recovered (N).
    pub max_force: f64,
    /// The cap itself recovered.
    pub saturated: bool,
    /// A force below `max_force` failed, so the bracket is not unique.
    pub non_monotone: bool,
    pub episodes: usize,
    /// Feasible plans whose trace violated the formula, over every episode.
    pub gate_violations: usize,
    pub feasible_plans: usize,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error("unperturbed walking does not recover ({0})")]
    UnstableNominal(String),
}

/// Episode paused at the push of a given phase, shared by every direction and
/// magnitude tried for that phase.
pub fn push_prefix(sim: &Simulator, controller: Controller, phase: f64) -> Episode {
    let steps = sim.push_step() + 1 + sim.cfg.post_push_steps;
    let mut ep = sim.start(controller, steps);
    ep.set_push(sim.push(0, 0.0, phase), sim.push_step());
    ep.run(true);
    ep
}

/// Finishes `prefix` with the push set to `direction` and `force`.
pub fn resume_push(
    prefix: &Episode,
    sim: &Simulator,
    direction: usize,
    force: f64,
) -> EpisodeResult {
    let mut ep = prefix.clone();
    let phase = ep.scheduled_phase().unwrap_or(0.0);
    ep.set_push(sim.push(direction, force, phase), sim.push_step());
    let status = ep.run(false);
    debug_assert_eq!(status, Status::Finished);
    ep.finish()
}

/// Bisection on the force grid `{0, r, 2r, ..., cap}` for the largest force
/// that recovers, assuming recoverability is monotone in magnitude. Both
/// bracket ends are simulated directly; the midpoint of `[0, max]` is also
/// checked to flag non-monotone cells.
pub fn max_recoverable_force(
    sim: &Simulator,
    controller: Controller,
    direction: usize,
    phase: f64,
) -> Result<ForceSearch, SweepError> {
    let prefix = push_prefix(sim, controller, phase);
    search_from(&prefix, sim, direction)
}

pub fn search_from(
    prefix: &Episode,
    sim: &Simulator,
    direction: usize,
) -> Result<ForceSearch, SweepError> {
    let res = sim.cfg.resolution;
    let n = (sim.cfg.force_cap / res).floor() as i64;
    let mut out = ForceSearch {
        max_force: 0.0,
        saturated: false,
        non_monotone: false,
        episodes: 0,
        gate_violations: 0,
        feasible_plans: 0,
    };
    let mut cache: BTreeMap<i64, bool> = BTreeMap::new();
    let mut test = |i: i64, out: &mut ForceSearch| -> (bool, Option<String>) {
        if let Some(&r) = cache.get(&i) {
            return (r, None);
        }
        let r = resume_push(prefix, sim, direction, i as f64 * res);
        out.episodes += 1;
        out.gate_violations += r.gate_violations;
        out.feasible_plans += r.feasible_plans();
        cache.insert(i, r.recovered);
        (r.recovered, r.failure)
    };
    let (ok0, why) = test(0, &mut out);
    if !ok0 {
        return Err(SweepError::UnstableNominal(why.unwrap_or_default()));
    }
    if test(n, &mut out).0 {
        out.max_force = n as f64 * res;
        out.saturated = true;
        return Ok(out);
    }
    let (mut lo, mut hi) = (0, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if test(mid, &mut out).0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 1 && !test(lo / 2, &mut out).0 {
        out.non_monotone = true;
    }
    out.max_force = lo as f64 * res;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub controller: Controller,
    pub phase: f64,
    pub direction_index: usize,
    /// `None` when the cell could not be evaluated.
    pub search: Option<ForceSearch>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn max_force(&self) -> f64 {
        self.search.map_or(0.0, |s| s.max_force)
    }
}

/// One CSV row of the spider table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiderRow {
    pub controller: String,
    pub phase: f64,
    pub direction_index: usize,
    pub angle_deg: f64,
    pub max_force: f64,
    pub saturated: bool,
    pub non_monotone: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiderTable {
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: f64,
    pub directions: usize,
    /// Directions where STL-MPC reaches at least the baseline force.
    pub at_least: usize,
    pub strictly_greater: usize,
    pub mean_force: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDominance {
    pub phase: f64,
    pub direction_index: usize,
    pub stl: f64,
    pub baseline: f64,
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub failed_cells: usize,
    pub compared_cells: usize,
    pub at_least_fraction: f64,
    pub strictly_greater_fraction: f64,
    pub phases: Vec<PhaseSummary>,
    pub dominance: Vec<CellDominance>,
    pub episodes: usize,
    pub feasible_plans: usize,
    pub gate_violations: usize,
}

impl SpiderTable {
    /// Rows sorted by controller, phase, then direction.
    pub fn rows(&self) -> Vec<SpiderRow> {
        let mut rows: Vec<SpiderRow> = self
            .cells
            .iter()
            .map(|c| SpiderRow {
                controller: c.controller.id().to_string(),
                phase: c.phase,
                direction_index: c.direction_index,
                angle_deg: 30.0 * c.direction_index as f64,
                max_force: c.max_force(),
                saturated: c.search.is_some_and(|s| s.saturated),
                non_monotone: c.search.is_some_and(|s| s.non_monotone),
                failed: c.search.is_none(),
            })
            .collect();
        rows.sort_by(|a, b| {
            a.controller
                .cmp(&b.controller)
                .then(a.phase.total_cmp(&b.phase))
                .then(a.direction_index.cmp(&b.direction_index))
        });
        rows
    }

    pub fn get(&self, controller: Controller, phase: f64, direction: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.controller == controller && c.phase == phase && c.direction_index == direction
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "controller",
            "phase",
            "direction_index",
            "angle_deg",
            "max_force_n",
            "saturated",
            "non_monotone",
            "failed",
        ])?;
        for r in self.rows() {
            w.write_record([
                r.controller.clone(),
                format!("{:.4}", r.phase),
                r.direction_index.to_string(),
                format!("{:.1}", r.angle_deg),
                format!("{:.1}", r.max_force),
                r.saturated.to_string(),
                r.non_monotone.to_string(),
                r.failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> SweepSummary {
        let mut phases: Vec<f64> = self.cells.iter().map(|c| c.phase).collect();
        phases.sort_by(f64::total_cmp);
        phases.dedup();
        let mut dominance = Vec::new();
        let mut per_phase = Vec::new();
        for &phase in &phases {
            let mut dirs: Vec<usize> = self
                .cells
                .iter()
                .filter(|c| c.phase == phase)
                .map(|c| c.direction_index)
                .collect();
            dirs.sort_unstable();
            dirs.dedup();
            let mut mean_force = BTreeMap::new();
            for c in self.cells.iter().filter(|c| c.phase == phase) {
                *mean_force
                    .entry(c.controller.id().to_string())
                    .or_insert(0.0) += c.max_force();
            }
            for (id, v) in mean_force.iter_mut() {
                let count = self
                    .cells
                    .iter()
                    .filter(|c| c.phase == phase && c.controller.id() == id)
                    .count();
                *v /= count.max(1) as f64;
            }
            let (mut at_least, mut strict, mut compared) = (0, 0, 0);
            for &d in &dirs {
                let s = self
                    .get(Controller::StlMpc, phase, d)
                    .and_then(|c| c.search);
                let b = self
                    .get(Controller::Baseline, phase, d)
                    .and_then(|c| c.search);
                if let (Some(s), Some(b)) = (s, b) {
                    compared += 1;
                    at_least += usize::from(s.max_force >= b.max_force);
                    strict += usize::from(s.max_force > b.max_force);
                    dominance.push(CellDominance {
                        phase,
                        direction_index: d,
                        stl: s.max_force,
                        baseline: b.max_force,
                        dominates: s.max_force >= b.max_force,
                    });
                }
            }
            per_phase.push(PhaseSummary {
                phase,
                directions: compared,
                at_least,
                strictly_greater: strict,
                mean_force,
            });
        }
        let compared = dominance.len();
        let frac = |n: usize| {
            if compared == 0 {
                0.0
            } else {
                n as f64 / compared as f64
            }
        };
        let searches = self.cells.iter().filter_map(|c| c.search);
        SweepSummary {
            cells: self.cells.len(),
            failed_cells: self.cells.iter().filter(|c| c.search.is_none()).count(),
            compared_cells: compared,
            at_least_fraction: frac(dominance.iter().filter(|d| d.stl >= d.baseline).count()),
            strictly_greater_fraction: frac(
                dominance.iter().filter(|d| d.stl > d.baseline).count(),
            ),
            phases: per_phase,
            dominance,
            episodes: searches.clone().map(|s| s.episodes).sum(),
            feasible_plans: searches.clone().map(|s| s.feasible_plans).sum(),
            gate_violations: searches.map(|s| s.gate_violations).sum(),
        }
    }

    /// Writes `spider.csv` and `summary.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join("spider.csv"))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let summary = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        Ok(())
    }
}

/// Full grid over the configured controllers, phases and directions. A cell
/// whose search fails is recorded with its error and the grid continues.
pub fn sweep(sim: &Simulator) -> SpiderTable {
    sweep_with(sim, |_| {})
}

/// `sweep` with a callback after every finished cell.
pub fn sweep_with(sim: &Simulator, mut progress: impl FnMut(&CellResult)) -> SpiderTable {
    let mut cells = Vec::new();
    for &controller in &sim.cfg.controllers {
        for &phase in &sim.cfg.phases {
            let prefix = push_prefix(sim, controller, phase);
            for &direction in &sim.cfg.directions {
                let cell = match search_from(&prefix, sim, direction) {
                    Ok(s) => CellResult {
                        controller,
                        phase,
                        direction_index: direction,
                        search: Some(s),
                        error: None,
                    },
                    Err(e) => CellResult {
                        controller,
                        phase,
                        direction_index: direction,
                        search: None,
                        error: Some(e.to_string()),
                    },
                };
                progress(&cell);
                cells.push(cell);
            }
        }
    }
    SpiderTable { cells }
}
