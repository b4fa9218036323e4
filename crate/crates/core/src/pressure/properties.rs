use std::collections::BTreeSet;

use super::cell::{evaluate_cell, CellMethod};
use super::map_space::{good_index_set, greedy_separated, map_space_members};
use super::{MapSpaceQuery, Mode, PressureError};
use crate::group::{FiniteSubset, GroupElement};
use crate::scalar::{LogSumExp, Real};
use crate::shiftspace::{birkhoff_sum, rho2, rho_inf, Labeling, Observable, PseudometricSpec, Subshift};

/// Slack for comparisons that hold exactly in real arithmetic.
const ROUNDING: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// The side that must not exceed `rhs` (or equal it, for identities).
    pub lhs: f64,
    pub rhs: f64,
}

impl PropertyCheck {
    fn le(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            passed: lhs <= rhs + slack || lhs == rhs,
            lhs,
            rhs,
        }
    }

    fn eq(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: lhs == rhs || (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs()).max(1.0),
            lhs,
            rhs,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `(1/d) log Σ_{φ∈E} exp(S_φ)` from precomputed Birkhoff sums.
fn normalized<T: Real>(sums: impl IntoIterator<Item = T>, d: usize) -> f64 {
    let mut lse = LogSumExp::new();
    for s in sums {
        lse.push(s);
    }
    (lse.value() / T::from_count(d)).as_f64()
}

/// The algebraic pressure identities and inequalities evaluated on one shared
/// separated set `E ⊆ Map(ρ, F, δ, σ)`, where they hold at every finite scale,
/// plus the inclusion and counting diagnostics for the Map spaces themselves.
///
/// Fails with `EmptyPartitionSet` when the Map space is empty.
pub fn proposition_battery<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    f: &Observable<T>,
    g: &Observable<T>,
) -> Result<PropertyReport, PressureError> {
    let members = map_space_members(q, x)?;
    if members.is_empty() {
        return Err(PressureError::EmptyPartitionSet);
    }
    let exact = q.mode == Mode::Model && q.eps <= 1.0 && q.sigma.table(&q.sigma.group().identity())? == (0..q.d()).collect::<Vec<_>>();
    let e: Vec<Labeling> = if exact {
        members.clone()
    } else {
        greedy_separated(&members, q.eps, q.metric)?.into_iter().map(|i| members[i].clone()).collect()
    };
    let d = q.d();
    let df = d as f64;
    let sums = |h: &Observable<T>| -> Result<Vec<T>, PressureError> {
        e.iter().map(|phi| Ok(birkhoff_sum(h, phi)?)).collect()
    };
    let sf = sums(f)?;
    let sg = sums(g)?;
    let pf = normalized(sf.iter().copied(), d);
    let pg = normalized(sg.iter().copied(), d);
    let mut out = Vec::new();

    // (i) zero potential counts E
    let p0 = normalized(e.iter().map(|_| T::zero()), d);
    out.push(PropertyCheck::eq("(i) zero potential", p0, (e.len() as f64).ln() / df, ROUNDING));

    // (ii) constants shift the value exactly
    for c in [0.7, -1.3] {
        let pc = normalized(sf.iter().map(|&s| s + T::lit(c) * T::from_count(d)), d);
        out.push(PropertyCheck::eq(format!("(ii) constant shift c={c}"), pc, pf + c, ROUNDING));
    }

    // (iii) subadditivity
    let pfg = normalized(sf.iter().zip(&sg).map(|(&a, &b)| a + b), d);
    out.push(PropertyCheck::le("(iii) subadditive", pfg, pf + pg, ROUNDING));

    // (iv) monotone in f, and the bounds by min f and max f
    let g_abs = f.add(&g.abs())?;
    let p_up = normalized(sums(&g_abs)?, d);
    out.push(PropertyCheck::le("(iv) f <= f + |g|", pf, p_up, ROUNDING));
    out.push(PropertyCheck::le("(iv) lower bound by min f", p0 + f.min_value().as_f64(), pf, ROUNDING));
    out.push(PropertyCheck::le("(iv) upper bound by max f", pf, p0 + f.max_value().as_f64(), ROUNDING));

    // (vi) Lipschitz in the sup norm
    let diff = f.sub(g)?.max_abs().as_f64();
    out.push(PropertyCheck::le("(vi) Lipschitz", (pf - pg).abs(), diff, ROUNDING));

    // (vii) convexity through Hölder
    for i in 1..=9 {
        let p = i as f64 / 10.0;
        let pt = T::lit(p);
        let mix = normalized(sf.iter().zip(&sg).map(|(&a, &b)| pt * a + (T::one() - pt) * b), d);
        out.push(PropertyCheck::le(format!("(vii) convex p={p}"), mix, p * pf + (1.0 - p) * pg, ROUNDING));
    }

    // (ix) scaling
    for c in [0.5, 2.0, 3.0] {
        let pc = normalized(sf.iter().map(|&s| T::lit(c) * s), d);
        let check = if c >= 1.0 {
            PropertyCheck::le(format!("(ix) scaling c={c}"), pc, c * pf, ROUNDING)
        } else {
            PropertyCheck::le(format!("(ix) scaling c={c}"), c * pf, pc, ROUNDING)
        };
        out.push(check);
    }

    // (x) absolute value
    let p_abs = normalized(sums(&f.abs())?, d);
    out.push(PropertyCheck::le("(x) |P(f)| <= P(|f|)", pf.abs(), p_abs, ROUNDING));

    out.extend(lemma_diagnostics(q, x, &members)?);
    Ok(PropertyReport { checks: out })
}

fn member_set(q: &MapSpaceQuery, x: &Subshift) -> Result<BTreeSet<Vec<u8>>, PressureError> {
    Ok(map_space_members(q, x)?.into_iter().map(|l| l.symbols().to_vec()).collect())
}

/// `ρ_2 ≤ ρ_∞` on member pairs, monotonicity of Map spaces in `δ` and `F`,
/// and the counting bound `|Λ_φ| ≥ (1 − |F|δ)d`.
fn lemma_diagnostics(q: &MapSpaceQuery, x: &Subshift, members: &[Labeling]) -> Result<Vec<PropertyCheck>, PressureError> {
    let mut out = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for a in members.iter().take(32) {
        for b in members.iter().take(32) {
            worst = worst.max(rho2(a, b, q.metric)? - rho_inf(a, b, q.metric)?);
        }
    }
    out.push(PropertyCheck::le("rho_2 <= rho_inf", worst, 0.0, ROUNDING));

    let here: BTreeSet<Vec<u8>> = members.iter().map(|l| l.symbols().to_vec()).collect();
    let wider = member_set(&q.clone().with_delta(q.delta * 1.5), x)?;
    out.push(PropertyCheck::le(
        "Map(delta) within Map(1.5 delta)",
        here.difference(&wider).count() as f64,
        0.0,
        0.0,
    ));
    let group = q.sigma.group();
    let bigger_f = q.f_set.union(&FiniteSubset::new(group.generators().into_iter().chain([group.identity()])));
    let narrower = member_set(&q.clone().with_f_set(bigger_f), x)?;
    out.push(PropertyCheck::le(
        "Map(F') within Map(F) for F' containing F",
        narrower.difference(&here).count() as f64,
        0.0,
        0.0,
    ));

    let bound = (1.0 - q.f_set.len() as f64 * q.delta) * q.d() as f64;
    let mut smallest = f64::INFINITY;
    for phi in members {
        smallest = smallest.min(good_index_set(phi, &q.f_set, q.delta, q.metric)?.len() as f64);
    }
    out.push(PropertyCheck::le("|Lambda| >= (1 - |F| delta) d", bound, smallest, ROUNDING));
    Ok(out)
}

/// Oscillation of `g` over `√δ`-balls of the pseudometric.
fn ball_oscillation<T: Real>(g: &Observable<T>, q: &MapSpaceQuery) -> f64 {
    let group = q.sigma.group();
    if q.metric == PseudometricSpec::CoordinateE && q.delta.sqrt() <= 1.0 {
        g.oscillation_at_identity(group).as_f64()
    } else {
        (g.max_value() - g.min_value()).as_f64()
    }
}

/// Compares the cells of `f` and `f + g∘α_s − g` against
/// `2·osc_{√δ}(g) + 2·max|g|·|F|·δ`; `s` must lie in `F`.
pub fn cocycle_check<T: Real>(
    q: &MapSpaceQuery,
    x: &Subshift,
    f: &Observable<T>,
    g: &Observable<T>,
    s: &GroupElement,
    method: CellMethod,
) -> Result<PropertyCheck, PressureError> {
    if !q.f_set.contains(s) {
        return Err(PressureError::Unsupported(format!("cocycle element {s} must lie in F")));
    }
    let group = q.sigma.group();
    let shifted = f.add(&g.translate(group, s)?.sub(g)?)?;
    let a = evaluate_cell(q, x, f, method)?;
    let b = evaluate_cell(q, x, &shifted, method)?;
    let gap = if a.is_empty() && b.is_empty() {
        0.0
    } else {
        (b.normalized - a.normalized).as_f64().abs()
    };
    let bound = 2.0 * ball_oscillation(g, q) + 2.0 * g.max_abs().as_f64() * q.f_set.len() as f64 * q.delta;
    Ok(PropertyCheck::le(format!("(viii) cocycle s={s} d={}", q.d()), gap, bound, 0.0))
}
