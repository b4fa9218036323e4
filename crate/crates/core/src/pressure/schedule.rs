use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::cell::{evaluate_cell, CellMethod, PressureEstimate};
use super::{MapSpaceQuery, Mode, PressureError, DEFAULT_NODE_BUDGET};
use crate::group::GroupSpec;
use crate::scalar::Real;
use crate::shiftspace::{Observable, PseudometricSpec, Subshift};
use crate::sofic::SoficMap;

/// One point `(d, F, δ, ε)` of the finite schedule standing in for the
/// `sup_ε inf_F inf_δ limsup_i` tower.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleCell {
    pub d: usize,
    /// Radius of the ball on which σ is assigned directly.
    pub domain_radius: usize,
    /// `F` is the ball of this radius.
    pub f_radius: usize,
    pub delta: f64,
    pub eps: f64,
}

impl ScheduleCell {
    fn slice_key(&self) -> (usize, u64, u64) {
        (self.f_radius, self.delta.to_bits(), self.eps.to_bits())
    }
}

/// How many of the largest `d` in a slice feed the limsup proxy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailRule {
    /// The last `ceil(n/2)` of the `n` cells.
    Half,
    Last(usize),
}

impl TailRule {
    fn len(&self, n: usize) -> usize {
        match *self {
            TailRule::Half => n.div_ceil(2),
            TailRule::Last(m) => m.clamp(1, n.max(1)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TailRule::Half => "tail-max over the largest half of d; min over delta and F; max over eps".into(),
            TailRule::Last(m) => format!("tail-max over the largest {m} d; min over delta and F; max over eps"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub cells: Vec<ScheduleCell>,
    pub tail: TailRule,
}

impl Schedule {
    /// Full lattice `ds × f_radii × deltas × epss`, slices in input order.
    pub fn grid(ds: &[usize], domain_radius: usize, f_radii: &[usize], deltas: &[f64], epss: &[f64]) -> Self {
        let mut cells = Vec::new();
        for &eps in epss {
            for &f_radius in f_radii {
                for &delta in deltas {
                    for &d in ds {
                        cells.push(ScheduleCell {
                            d,
                            domain_radius: domain_radius.max(f_radius),
                            f_radius,
                            delta,
                            eps,
                        });
                    }
                }
            }
        }
        Self { cells, tail: TailRule::Half }
    }

    pub fn single(cell: ScheduleCell) -> Self {
        Self {
            cells: vec![cell],
            tail: TailRule::Half,
        }
    }

    pub fn validate(&self) -> Result<(), PressureError> {
        if self.cells.is_empty() {
            return Err(PressureError::EmptySchedule);
        }
        let mut last: BTreeMap<(usize, u64, u64), usize> = BTreeMap::new();
        for c in &self.cells {
            if c.d == 0 {
                return Err(PressureError::InvalidParameter { name: "d", value: 0.0 });
            }
            if let Some(prev) = last.insert(c.slice_key(), c.d) {
                if c.d <= prev {
                    return Err(PressureError::ScheduleOrder(format!(
                        "F_radius={} delta={} eps={}",
                        c.f_radius, c.delta, c.eps
                    )));
                }
            }
        }
        Ok(())
    }

    /// Slices in order of first appearance, each with its cell indices.
    fn slices(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<(usize, u64, u64)> = Vec::new();
        let mut members: BTreeMap<(usize, u64, u64), Vec<usize>> = BTreeMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            let key = c.slice_key();
            let entry = members.entry(key).or_default();
            if entry.is_empty() {
                order.push(key);
            }
            entry.push(i);
        }
        order.into_iter().map(|k| members.remove(&k).unwrap()).collect()
    }
}

/// Source of the sofic approximations `σ_i : G → Sym(d_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoficFamily {
    /// `ℤ → ℤ/d`.
    Cyclic,
    /// `ℤ^r → (ℤ/m)^r` with `d = m^r`.
    Torus { rank: usize },
    /// Independent uniform permutations for the free generators.
    Random { seed: u64 },
    /// Left-regular representation of a finite group (`d` = group order).
    Regular,
}

impl SoficFamily {
    pub fn build(&self, group: &GroupSpec, d: usize, domain_radius: usize) -> Result<SoficMap, PressureError> {
        let wrong = |what: &str| PressureError::Unsupported(format!("{what} approximations do not fit the group {group}"));
        Ok(match *self {
            SoficFamily::Cyclic => {
                if *group != GroupSpec::IntegerLine {
                    return Err(wrong("cyclic"));
                }
                SoficMap::cyclic(d, domain_radius)?
            }
            SoficFamily::Torus { rank } => {
                if *group != GroupSpec::lattice(rank)? {
                    return Err(wrong("torus"));
                }
                let side = (d as f64).powf(1.0 / rank as f64).round() as usize;
                if side.checked_pow(rank as u32) != Some(d) {
                    return Err(PressureError::InvalidParameter { name: "d", value: d as f64 });
                }
                SoficMap::torus(side, rank, domain_radius)?
            }
            SoficFamily::Random { seed } => SoficMap::random_free(group, d, domain_radius, seed)?,
            SoficFamily::Regular => {
                let sigma = SoficMap::regular(group)?;
                if sigma.d() != d {
                    return Err(PressureError::InvalidParameter { name: "d", value: d as f64 });
                }
                sigma
            }
        })
    }
}

/// Everything about a cell that is not in the schedule lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSettings {
    pub mode: Mode,
    pub metric: PseudometricSpec,
    /// `None` ties the tolerance to `δ²`.
    pub sft_tolerance: Option<f64>,
    pub method: CellMethod,
    pub budget: u64,
}

impl Default for CellSettings {
    fn default() -> Self {
        Self {
            mode: Mode::Model,
            metric: PseudometricSpec::CoordinateE,
            sft_tolerance: None,
            method: CellMethod::Auto,
            budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome<T> {
    pub cell: ScheduleCell,
    pub result: Result<PressureEstimate<T>, PressureError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceSummary<T> {
    pub f_radius: usize,
    pub delta: f64,
    pub eps: f64,
    /// `d` values whose cells fed the tail maximum.
    pub tail: Vec<usize>,
    /// `None` when every tail cell failed.
    pub value: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleReport<T> {
    pub cells: Vec<CellOutcome<T>>,
    pub slices: Vec<SliceSummary<T>>,
    /// `max_ε min_{F,δ}` of the slice values; `None` when nothing completed.
    pub summary: Option<T>,
    pub rule: String,
}

/// Evaluates every cell (concurrently, results in schedule order) and folds
/// the lattice into the tower proxy.
pub fn run_schedule<T: Real>(
    schedule: &Schedule,
    family: SoficFamily,
    group: &GroupSpec,
    x: &Subshift,
    f: &Observable<T>,
    settings: &CellSettings,
) -> Result<ScheduleReport<T>, PressureError> {
    schedule.validate()?;
    let cells: Vec<CellOutcome<T>> = schedule
        .cells
        .par_iter()
        .map(|cell| {
            let result = family.build(group, cell.d, cell.domain_radius).and_then(|sigma| {
                let mut q = MapSpaceQuery::new(Arc::new(sigma), group.ball(cell.f_radius), cell.delta, cell.eps)
                    .with_mode(settings.mode)
                    .with_metric(settings.metric)
                    .with_budget(settings.budget);
                q.sft_tolerance = settings.sft_tolerance;
                evaluate_cell(&q, x, f, settings.method)
            });
            CellOutcome { cell: *cell, result }
        })
        .collect();
    let slices: Vec<SliceSummary<T>> = schedule
        .slices()
        .into_iter()
        .map(|idx| {
            let first = schedule.cells[idx[0]];
            let tail = &idx[idx.len() - schedule.tail.len(idx.len())..];
            let value = tail
                .iter()
                .filter_map(|&i| cells[i].result.as_ref().ok().map(|e| e.normalized))
                .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
            SliceSummary {
                f_radius: first.f_radius,
                delta: first.delta,
                eps: first.eps,
                tail: tail.iter().map(|&i| schedule.cells[i].d).collect(),
                value,
            }
        })
        .collect();
    let mut per_eps: Vec<(f64, Option<T>)> = Vec::new();
    for s in &slices {
        let Some(v) = s.value else { continue };
        match per_eps.iter_mut().find(|(e, _)| *e == s.eps) {
            Some((_, m)) => *m = Some(m.map_or(v, |a| a.min(v))),
            None => per_eps.push((s.eps, Some(v))),
        }
    }
    let summary = per_eps
        .into_iter()
        .filter_map(|(_, v)| v)
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(ScheduleReport {
        cells,
        slices,
        summary,
        rule: schedule.tail.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        ((1.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn single_cell_summary_is_the_cell() {
        let g = GroupSpec::IntegerLine;
        let f = Observable::single_site(&g, vec![0.0, 0.4]).unwrap();
        let s = Schedule::single(ScheduleCell { d: 7, domain_radius: 1, f_radius: 1, delta: 0.3, eps: 0.5 });
        let r = run_schedule(&s, SoficFamily::Cyclic, &g, &Subshift::full(2).unwrap(), &f, &CellSettings::default()).unwrap();
        let cell = r.cells[0].result.as_ref().unwrap();
        assert_eq!(r.summary, Some(cell.normalized));
        assert!((cell.normalized - (1.0 + 0.4f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn full_shift_is_log_k_everywhere() {
        let g = GroupSpec::IntegerLine;
        let s = Schedule::grid(&[3, 5, 7], 1, &[1, 2], &[0.2, 0.6], &[0.5, 1.0]);
        let x = Subshift::full(3).unwrap();
        let r = run_schedule(&s, SoficFamily::Cyclic, &g, &x, &Observable::<f64>::zero(&g, 3).unwrap(), &CellSettings::default()).unwrap();
        assert_eq!(r.slices.len(), 8);
        for c in &r.cells {
            assert!((c.result.as_ref().unwrap().normalized - 3f64.ln()).abs() < 1e-12);
        }
        assert!((r.summary.unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(r.slices[0].tail, vec![5, 7]);
    }

    #[test]
    fn golden_mean_summary_uses_the_trace() {
        let g = GroupSpec::IntegerLine;
        let s = Schedule::grid(&[16, 32, 64], 1, &[1], &[0.5], &[0.5]);
        let settings = CellSettings {
            sft_tolerance: Some(0.0),
            ..CellSettings::default()
        };
        let r = run_schedule(&s, SoficFamily::Cyclic, &g, &Subshift::golden_mean(), &Observable::<f64>::zero(&g, 2).unwrap(), &settings).unwrap();
        assert!((r.summary.unwrap() - golden()).abs() < 1e-6);
        // 2^16 labelings are still enumerated, the larger cells are not
        let methods: Vec<CellMethod> = r.cells.iter().map(|c| c.result.as_ref().unwrap().method).collect();
        assert_eq!(methods, [CellMethod::Enumerate, CellMethod::TransferTrace, CellMethod::TransferTrace]);
    }

    #[test]
    fn order_and_failure_handling() {
        let g = GroupSpec::IntegerLine;
        let mut s = Schedule::grid(&[4, 6], 1, &[1], &[0.3], &[0.5]);
        s.cells.swap(0, 1);
        assert!(matches!(s.validate(), Err(PressureError::ScheduleOrder(_))));
        assert_eq!(Schedule { cells: vec![], tail: TailRule::Half }.validate(), Err(PressureError::EmptySchedule));
        // torus family on the integers fails per cell, not globally
        let s = Schedule::grid(&[4], 1, &[1], &[0.3], &[0.5]);
        let r = run_schedule(&s, SoficFamily::Torus { rank: 2 }, &g, &Subshift::full(2).unwrap(), &Observable::<f64>::zero(&g, 2).unwrap(), &CellSettings::default()).unwrap();
        assert!(r.cells[0].result.is_err());
        assert_eq!(r.summary, None);
    }

    #[test]
    fn summary_takes_min_over_delta_then_max_over_eps() {
        let g = GroupSpec::IntegerLine;
        // one corrupted generator: small δ rules out more labelings
        let x = Subshift::full(2).unwrap();
        let f = Observable::<f64>::zero(&g, 2).unwrap();
        let s = Schedule::grid(&[6], 1, &[1], &[0.3, 1.0], &[0.5, 1.5]);
        let r = run_schedule(&s, SoficFamily::Cyclic, &g, &x, &f, &CellSettings::default()).unwrap();
        let v: Vec<f64> = r.slices.iter().map(|s| s.value.unwrap()).collect();
        let want = v[0].min(v[1]).max(v[2].min(v[3]));
        assert_eq!(r.summary, Some(want));
        assert!((want - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn torus_family_on_the_plane() {
        let g = GroupSpec::lattice(2).unwrap();
        let s = Schedule::grid(&[4, 9], 1, &[1], &[0.3], &[0.5]);
        let r = run_schedule(&s, SoficFamily::Torus { rank: 2 }, &g, &Subshift::full(2).unwrap(), &Observable::<f64>::zero(&g, 2).unwrap(), &CellSettings::default()).unwrap();
        assert!((r.summary.unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(SoficFamily::Torus { rank: 2 }.build(&g, 5, 1).is_err());
    }
}
