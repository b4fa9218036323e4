//! Sofic approximations `σ: G → Sym(d)`, their defect diagnostics, and a greedy
//! quasi-tiler over approximately free translates.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoficError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("d must be positive (got {0})")]
    EmptySpace(usize),
    #[error("{construction} requires {expected}, got {found}")]
    WrongGroup {
        construction: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("image array for {element} has length {len}, expected {d}")]
    LengthMismatch { element: String, len: usize, d: usize },
    #[error("image array for {0} is not a bijection")]
    NotBijection(String),
    #[error("assignment domain must contain the identity")]
    MissingIdentity,
    #[error("assignment domain is not closed under inverses (missing inverse of {0})")]
    NotInverseClosed(String),
    #[error("{0} cannot be evaluated from the assigned permutations")]
    NotEvaluable(String),
    #[error("quasi-tiling needs at least one nonempty shape")]
    EmptyShapes,
    #[error("center set has {have} indices, need at least {need:.3}")]
    CenterSetTooSmall { have: usize, need: f64 },
    #[error("index {index} out of range for d = {d}")]
    IndexOutOfRange { index: usize, d: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Whether a permutation was stored explicitly or composed from generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    Assigned,
    Derived,
}

/// Finite assignment of permutations of `[d]` to group elements.
///
/// Elements outside the assigned domain are evaluated by composing the
/// permutations of generator letters, `σ_{x1...xn} = σ_{x1} ∘ ... ∘ σ_{xn}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoficMap {
    group: GroupSpec,
    d: usize,
    assignment: BTreeMap<GroupElement, Vec<usize>>,
    seed: Option<u64>,
}

fn is_bijection(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (a, &b) in p.iter().enumerate() {
        inv[b] = a;
    }
    inv
}

impl SoficMap {
    pub fn from_assignment(
        group: GroupSpec,
        d: usize,
        assignment: BTreeMap<GroupElement, Vec<usize>>,
    ) -> Result<Self, SoficError> {
        if d == 0 {
            return Err(SoficError::EmptySpace(d));
        }
        for (g, p) in &assignment {
            group.validate(g)?;
            if p.len() != d {
                return Err(SoficError::LengthMismatch {
                    element: g.to_string(),
                    len: p.len(),
                    d,
                });
            }
            if !is_bijection(p) {
                return Err(SoficError::NotBijection(g.to_string()));
            }
        }
        if !assignment.contains_key(&group.identity()) {
            return Err(SoficError::MissingIdentity);
        }
        for g in assignment.keys() {
            let inv = group.inverse(g)?;
            if !assignment.contains_key(&inv) {
                return Err(SoficError::NotInverseClosed(g.to_string()));
            }
        }
        Ok(Self {
            group,
            d,
            assignment,
            seed: None,
        })
    }

    /// `σ_s(a) = a + s mod d` on `ball(domain_radius)` of the integers.
    pub fn cyclic(d: usize, domain_radius: usize) -> Result<Self, SoficError> {
        if d == 0 {
            return Err(SoficError::EmptySpace(d));
        }
        let group = GroupSpec::IntegerLine;
        let assignment = group
            .ball(domain_radius)
            .iter()
            .map(|g| {
                let GroupElement::Int(s) = g else { unreachable!() };
                let shift = s.rem_euclid(d as i64) as usize;
                (g.clone(), (0..d).map(|a| (a + shift) % d).collect())
            })
            .collect();
        Self::from_assignment(group, d, assignment)
    }

    /// Coordinate-wise translation on `(Z/side)^rank`, indices in row-major order.
    pub fn torus(side: usize, rank: usize, domain_radius: usize) -> Result<Self, SoficError> {
        let group = GroupSpec::lattice(rank)?;
        if side == 0 {
            return Err(SoficError::EmptySpace(0));
        }
        let d = side.pow(rank as u32);
        let assignment = group
            .ball(domain_radius)
            .iter()
            .map(|g| {
                let GroupElement::Vector(v) = g else { unreachable!() };
                let image = (0..d)
                    .map(|a| {
                        let mut coords = torus_coords(a, side, rank);
                        for (c, s) in coords.iter_mut().zip(v) {
                            *c = (*c as i64 + s).rem_euclid(side as i64) as usize;
                        }
                        torus_index(&coords, side)
                    })
                    .collect();
                (g.clone(), image)
            })
            .collect();
        Self::from_assignment(group, d, assignment)
    }

    /// One independent uniform permutation per free generator (Fisher–Yates from
    /// a ChaCha stream seeded with `seed`), extended to `ball(domain_radius)` by
    /// composition along reduced words.
    pub fn random_free(group: &GroupSpec, d: usize, domain_radius: usize, seed: u64) -> Result<Self, SoficError> {
        let GroupSpec::FreeGroup { rank } = group else {
            return Err(SoficError::WrongGroup {
                construction: "random approximation",
                expected: "a free group",
                found: group.to_string(),
            });
        };
        if d < 2 {
            return Err(SoficError::EmptySpace(d));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = BTreeMap::new();
        for j in 0..*rank {
            let mut p: Vec<usize> = (0..d).collect();
            p.shuffle(&mut rng);
            let gen = group.letter_element(crate::group::Letter::new(j, false));
            let inv = group.inverse(&gen)?;
            assignment.insert(inv, invert(&p));
            assignment.insert(gen, p);
        }
        assignment.insert(group.identity(), (0..d).collect());
        let generators = Self {
            group: group.clone(),
            d,
            assignment,
            seed: Some(seed),
        };
        let mut full = BTreeMap::new();
        for g in group.ball(domain_radius).iter() {
            let (p, _) = generators.permutation(g)?;
            full.insert(g.clone(), p.into_owned());
        }
        // the generators must stay assigned even when domain_radius is 0
        for (g, p) in generators.assignment {
            full.entry(g).or_insert(p);
        }
        let mut out = Self::from_assignment(group.clone(), d, full)?;
        out.seed = Some(seed);
        Ok(out)
    }

    /// Left regular representation of a finite group, `σ_g(a) = g a`.
    pub fn regular(group: &GroupSpec) -> Result<Self, SoficError> {
        let GroupSpec::FiniteGroup(t) = group else {
            return Err(SoficError::WrongGroup {
                construction: "regular representation",
                expected: "a finite group",
                found: group.to_string(),
            });
        };
        let n = t.order();
        let assignment = (0..n)
            .map(|g| (GroupElement::Finite(g), (0..n).map(|a| t.product(g, a)).collect()))
            .collect();
        Self::from_assignment(group.clone(), n, assignment)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn domain(&self) -> FiniteSubset {
        FiniteSubset::new(self.assignment.keys().cloned())
    }

    pub fn assigned(&self, g: &GroupElement) -> Option<&[usize]> {
        self.assignment.get(g).map(|p| p.as_slice())
    }

    fn letter_permutation(&self, l: crate::group::Letter) -> Result<Cow<'_, [usize]>, SoficError> {
        let g = self.group.letter_element(l);
        if let Some(p) = self.assigned(&g) {
            return Ok(Cow::Borrowed(p));
        }
        let inv = self.group.letter_element(l.inverted());
        match self.assigned(&inv) {
            Some(p) => Ok(Cow::Owned(invert(p))),
            None => Err(SoficError::NotEvaluable(g.to_string())),
        }
    }

    /// The permutation `σ_g`, and whether it was assigned or derived.
    pub fn permutation(&self, g: &GroupElement) -> Result<(Cow<'_, [usize]>, Evaluation), SoficError> {
        self.group.validate(g)?;
        if let Some(p) = self.assigned(g) {
            return Ok((Cow::Borrowed(p), Evaluation::Assigned));
        }
        let letters = self
            .group
            .letters(g)
            .ok_or_else(|| SoficError::NotEvaluable(g.to_string()))?;
        let mut out: Vec<usize> = (0..self.d).collect();
        for &l in letters.iter().rev() {
            let p = self.letter_permutation(l)?;
            for x in out.iter_mut() {
                *x = p[*x];
            }
        }
        Ok((Cow::Owned(out), Evaluation::Derived))
    }

    /// Owned permutation, for callers that cache tables.
    pub fn table(&self, g: &GroupElement) -> Result<Vec<usize>, SoficError> {
        Ok(self.permutation(g)?.0.into_owned())
    }

    pub fn apply(&self, g: &GroupElement, a: usize) -> Result<usize, SoficError> {
        if a >= self.d {
            return Err(SoficError::IndexOutOfRange { index: a, d: self.d });
        }
        Ok(self.permutation(g)?.0[a])
    }

    /// Replaces (or adds) the permutation assigned to `g`, keeping the domain
    /// inverse-closed by also assigning the inverse permutation to `g⁻¹`.
    pub fn with_assignment(&self, g: &GroupElement, image: Vec<usize>) -> Result<Self, SoficError> {
        self.group.validate(g)?;
        if image.len() != self.d {
            return Err(SoficError::LengthMismatch {
                element: g.to_string(),
                len: image.len(),
                d: self.d,
            });
        }
        if !is_bijection(&image) {
            return Err(SoficError::NotBijection(g.to_string()));
        }
        let mut assignment = self.assignment.clone();
        let inv = self.group.inverse(g)?;
        if inv != *g {
            assignment.insert(inv, invert(&image));
        }
        assignment.insert(g.clone(), image);
        let mut out = Self::from_assignment(self.group.clone(), self.d, assignment)?;
        out.seed = self.seed;
        Ok(out)
    }

    /// Corrupts `σ_g` by composing it with `count` random transpositions.
    pub fn perturbed(&self, g: &GroupElement, count: usize, seed: u64) -> Result<Self, SoficError> {
        let mut image = self.table(g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let i = rng.gen_range(0..self.d);
            let j = rng.gen_range(0..self.d);
            image.swap(i, j);
        }
        self.with_assignment(g, image)
    }

    /// Text form: header `d domain_size`, then one line per assigned element with
    /// its canonical word followed by the `d` images.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.d, self.assignment.len());
        for (g, p) in &self.assignment {
            out.push_str(&g.to_string());
            for x in p {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(group: &GroupSpec, text: &str) -> Result<Self, SoficError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SoficError::Parse {
            line: 1,
            reason: "missing header".into(),
        })?;
        let parse_err = |line: usize, reason: &str| SoficError::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(0, "header must be `d domain_size`"))?;
        let [d, size] = head[..] else {
            return Err(parse_err(0, "header must be `d domain_size`"));
        };
        let mut assignment = BTreeMap::new();
        for (i, line) in lines {
            let mut tokens = line.split_whitespace();
            let word = tokens.next().ok_or_else(|| parse_err(i, "empty line"))?;
            let g = group.parse_element(word)?;
            let image: Vec<usize> = tokens
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(i, "images must be nonnegative integers"))?;
            assignment.insert(g, image);
        }
        if assignment.len() != size {
            return Err(parse_err(0, "domain size does not match the number of lines"));
        }
        Self::from_assignment(group.clone(), d, assignment)
    }
}

pub(crate) fn torus_coords(mut a: usize, side: usize, rank: usize) -> Vec<usize> {
    let mut coords = vec![0; rank];
    for c in coords.iter_mut().rev() {
        *c = a % side;
        a /= side;
    }
    coords
}

pub(crate) fn torus_index(coords: &[usize], side: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * side + c)
}

/// Worst-case failure fractions of the sofic conditions over a tested set.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    /// `max_{s,t} |{a : σ_s σ_t(a) ≠ σ_{st}(a)}| / d`
    pub multiplicativity: f64,
    /// `max_{s≠t} |{a : σ_s(a) = σ_t(a)}| / d`
    pub freeness: f64,
    /// `|{a : σ_e(a) ≠ a}| / d`
    pub identity: f64,
    pub tested: FiniteSubset,
    /// Permutations that had to be derived by composition (elements of the
    /// tested set and their pairwise products).
    pub derived_evaluations: usize,
}

impl DefectReport {
    pub fn within(&self, bound: f64) -> bool {
        self.multiplicativity <= bound && self.freeness <= bound && self.identity <= bound
    }
}

pub fn defect_report(sigma: &SoficMap, tested: &FiniteSubset) -> Result<DefectReport, SoficError> {
    let d = sigma.d();
    let group = sigma.group();
    let mut derived = 0;
    let mut perms = Vec::with_capacity(tested.len());
    for s in tested {
        let (p, how) = sigma.permutation(s)?;
        derived += (how == Evaluation::Derived) as usize;
        perms.push(p.into_owned());
    }
    let mut mult = 0usize;
    for (i, s) in tested.iter().enumerate() {
        for (j, t) in tested.iter().enumerate() {
            let st = group.multiply(s, t)?;
            let (pst, how) = sigma.permutation(&st)?;
            derived += (how == Evaluation::Derived) as usize;
            let bad = (0..d).filter(|&a| perms[i][perms[j][a]] != pst[a]).count();
            mult = mult.max(bad);
        }
    }
    let mut free = 0usize;
    for i in 0..perms.len() {
        for j in (i + 1)..perms.len() {
            let same = (0..d).filter(|&a| perms[i][a] == perms[j][a]).count();
            free = free.max(same);
        }
    }
    let (pe, how) = sigma.permutation(&group.identity())?;
    derived += (how == Evaluation::Derived) as usize;
    let ident = (0..d).filter(|&a| pe[a] != a).count();
    Ok(DefectReport {
        multiplicativity: mult as f64 / d as f64,
        freeness: free as f64 / d as f64,
        identity: ident as f64 / d as f64,
        tested: tested.clone(),
        derived_evaluations: derived,
    })
}

/// Indices where `σ_{st}(a) = σ_s σ_t(a)` for every `s ∈ F`, `t ∈ T`.
pub fn good_set(sigma: &SoficMap, f: &FiniteSubset, t: &FiniteSubset) -> Result<Vec<usize>, SoficError> {
    let d = sigma.d();
    let group = sigma.group();
    let mut good = vec![true; d];
    let tperms: Vec<Vec<usize>> = t.iter().map(|x| sigma.table(x)).collect::<Result<_, _>>()?;
    for s in f {
        let ps = sigma.table(s)?;
        for (x, pt) in t.iter().zip(&tperms) {
            let pst = sigma.table(&group.multiply(s, x)?)?;
            for a in 0..d {
                if pst[a] != ps[pt[a]] {
                    good[a] = false;
                }
            }
        }
    }
    Ok((0..d).filter(|&a| good[a]).collect())
}

/// Disjoint family of translates `σ(F_k) C_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiTiling {
    pub d: usize,
    /// Shapes in the order they were placed (largest first).
    pub shapes: Vec<FiniteSubset>,
    pub centers: Vec<Vec<usize>>,
    /// Sorted union of all translates.
    pub covered: Vec<usize>,
}

impl QuasiTiling {
    pub fn coverage(&self) -> f64 {
        self.covered.len() as f64 / self.d as f64
    }

    /// `(1 - τ - η) d ≤ |⋃ σ(F_k) C_k|`
    pub fn meets_coverage(&self, tau: f64, eta: f64) -> bool {
        self.covered.len() as f64 >= (1.0 - tau - eta) * self.d as f64
    }

    /// Re-checks injectivity of `(s, c) ↦ σ_s(c)` on each `F_k × C_k`, pairwise
    /// disjointness of the translate families, and that `covered` is their union.
    pub fn verify(&self, sigma: &SoficMap) -> Result<(), String> {
        let mut owner: Vec<Option<usize>> = vec![None; self.d];
        for (k, (shape, centers)) in self.shapes.iter().zip(&self.centers).enumerate() {
            let perms: Vec<Vec<usize>> = shape
                .iter()
                .map(|s| sigma.table(s))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let mut seen = std::collections::BTreeSet::new();
            for &c in centers {
                for p in &perms {
                    let x = p[c];
                    if !seen.insert(x) {
                        return Err(format!("shape {k}: translate map not injective at index {x}"));
                    }
                    if let Some(other) = owner[x] {
                        if other != k {
                            return Err(format!("shapes {other} and {k} overlap at index {x}"));
                        }
                    }
                    owner[x] = Some(k);
                }
            }
        }
        let union: Vec<usize> = (0..self.d).filter(|&a| owner[a].is_some()).collect();
        if union != self.covered {
            return Err("covered set differs from the union of translates".into());
        }
        Ok(())
    }
}

/// Greedy quasi-tiler: shapes from largest to smallest, centers from the smallest
/// index of `V ∩ good_set(σ, F_k, F_k)` whose translate is injective and disjoint
/// from everything already placed.
pub fn quasi_tile(
    sigma: &SoficMap,
    shapes: &[FiniteSubset],
    centers_from: &[usize],
    tau: f64,
    _eta: f64,
) -> Result<QuasiTiling, SoficError> {
    let d = sigma.d();
    if shapes.is_empty() || shapes.iter().any(|s| s.is_empty()) {
        return Err(SoficError::EmptyShapes);
    }
    let mut v: Vec<usize> = centers_from.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&a| a >= d) {
        return Err(SoficError::IndexOutOfRange { index: bad, d });
    }
    let need = (1.0 - tau) * d as f64;
    if (v.len() as f64) < need - 1e-9 {
        return Err(SoficError::CenterSetTooSmall { have: v.len(), need });
    }
    let mut order: Vec<&FiniteSubset> = shapes.iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()));

    let mut taken = vec![false; d];
    let mut placed_shapes = Vec::new();
    let mut placed_centers = Vec::new();
    for shape in order {
        let perms: Vec<Vec<usize>> = shape.iter().map(|s| sigma.table(s)).collect::<Result<_, _>>()?;
        let good = good_set(sigma, shape, shape)?;
        let mut is_good = vec![false; d];
        good.iter().for_each(|&a| is_good[a] = true);
        let mut centers = Vec::new();
        let mut translate = Vec::with_capacity(perms.len());
        for &c in &v {
            if !is_good[c] {
                continue;
            }
            translate.clear();
            translate.extend(perms.iter().map(|p| p[c]));
            let mut sorted = translate.clone();
            sorted.sort_unstable();
            let injective = sorted.windows(2).all(|w| w[0] != w[1]);
            if injective && translate.iter().all(|&x| !taken[x]) {
                translate.iter().for_each(|&x| taken[x] = true);
                centers.push(c);
            }
        }
        placed_shapes.push(shape.clone());
        placed_centers.push(centers);
    }
    Ok(QuasiTiling {
        d,
        shapes: placed_shapes,
        centers: placed_centers,
        covered: (0..d).filter(|&a| taken[a]).collect(),
    })
}
