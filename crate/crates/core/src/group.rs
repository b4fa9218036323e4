//! Symbolic representation of the acting group: the integers, integer lattices,
//! free groups and finite groups given by a multiplication table.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("element {element} does not belong to group {group}")]
    KindMismatch { group: String, element: String },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("free group rank {0} exceeds the 26 letters available for words")]
    RankTooLarge(usize),
    #[error("invalid multiplication table: {0}")]
    InvalidTable(String),
    #[error("group {0} is not amenable")]
    NotAmenable(String),
    #[error("cannot parse group element {text:?}: {reason}")]
    Parse { text: String, reason: String },
}

/// A generator or its inverse inside a word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: u16,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Self {
            generator: generator as u16,
            inverse,
        }
    }

    pub fn inverted(self) -> Self {
        Self {
            generator: self.generator,
            inverse: !self.inverse,
        }
    }

    fn to_char(self) -> char {
        let base = if self.inverse { b'A' } else { b'a' };
        (base + self.generator as u8) as char
    }
}

/// Canonical form of a group element.
///
/// Equality is equality of canonical forms: free-group words are always kept
/// freely reduced and finite-group elements are table indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupElement {
    Int(i64),
    Vector(Vec<i64>),
    Word(Vec<Letter>),
    Finite(usize),
}

impl GroupElement {
    fn variant_rank(&self) -> u8 {
        match self {
            GroupElement::Int(_) => 0,
            GroupElement::Vector(_) => 1,
            GroupElement::Word(_) => 2,
            GroupElement::Finite(_) => 3,
        }
    }

    /// Reduced word from a slice of letters.
    pub fn word(letters: &[Letter]) -> Self {
        GroupElement::Word(reduce(letters.iter().copied()))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        use GroupElement::*;
        match (self, other) {
            (Int(a), Int(b)) => a.cmp(b),
            (Vector(a), Vector(b)) => a.cmp(b),
            // shortlex, so the identity comes first
            (Word(a), Word(b)) => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
            (Finite(a), Finite(b)) => a.cmp(b),
            _ => self.variant_rank().cmp(&other.variant_rank()),
        }
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Int(n) => write!(f, "{n}"),
            GroupElement::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
            GroupElement::Word(w) if w.is_empty() => write!(f, "e"),
            GroupElement::Word(w) => {
                for l in w {
                    write!(f, "{}", l.to_char())?;
                }
                Ok(())
            }
            GroupElement::Finite(i) => write!(f, "{i}"),
        }
    }
}

fn reduce(letters: impl IntoIterator<Item = Letter>) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverted()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// Multiplication table of a finite group, validated on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroupTable {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverses: Vec<usize>,
}

impl FiniteGroupTable {
    /// Checks the Latin-square property, the identity, inverses and associativity.
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let n = table.len();
        if n == 0 {
            return Err(GroupError::InvalidTable("empty table".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(GroupError::InvalidTable(format!("row {i} has length {}", row.len())));
            }
            let distinct: BTreeSet<_> = row.iter().copied().collect();
            if distinct.len() != n || row.iter().any(|&x| x >= n) {
                return Err(GroupError::InvalidTable(format!("row {i} is not a permutation")));
            }
        }
        for j in 0..n {
            let distinct: BTreeSet<_> = table.iter().map(|row| row[j]).collect();
            if distinct.len() != n {
                return Err(GroupError::InvalidTable(format!("column {j} is not a permutation")));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| GroupError::InvalidTable("no identity element".into()))?;
        let mut inverses = Vec::with_capacity(n);
        for x in 0..n {
            let inv = (0..n)
                .find(|&y| table[x][y] == identity && table[y][x] == identity)
                .ok_or_else(|| GroupError::InvalidTable(format!("element {x} has no inverse")))?;
            inverses.push(inv);
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(GroupError::InvalidTable(format!(
                            "not associative at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            table,
            identity,
            inverses,
        })
    }

    /// The cyclic group of order `n` with the usual modular table.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        Self::new(table).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn product(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverses[a]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.table
    }
}

/// The acting group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    IntegerLine,
    IntegerLattice { rank: usize },
    FreeGroup { rank: usize },
    FiniteGroup(FiniteGroupTable),
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::IntegerLine => write!(f, "Z"),
            GroupSpec::IntegerLattice { rank } => write!(f, "Z^{rank}"),
            GroupSpec::FreeGroup { rank } => write!(f, "F_{rank}"),
            GroupSpec::FiniteGroup(t) => write!(f, "finite group of order {}", t.order()),
        }
    }
}

impl GroupSpec {
    pub fn lattice(rank: usize) -> Result<Self, GroupError> {
        if rank == 0 {
            return Err(GroupError::ZeroRank);
        }
        Ok(GroupSpec::IntegerLattice { rank })
    }

    pub fn free(rank: usize) -> Result<Self, GroupError> {
        match rank {
            0 => Err(GroupError::ZeroRank),
            r if r > 26 => Err(GroupError::RankTooLarge(r)),
            r => Ok(GroupSpec::FreeGroup { rank: r }),
        }
    }

    pub fn is_amenable(&self) -> bool {
        !matches!(self, GroupSpec::FreeGroup { rank } if *rank >= 2)
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::IntegerLine => GroupElement::Int(0),
            GroupSpec::IntegerLattice { rank } => GroupElement::Vector(vec![0; *rank]),
            GroupSpec::FreeGroup { .. } => GroupElement::Word(Vec::new()),
            GroupSpec::FiniteGroup(t) => GroupElement::Finite(t.identity()),
        }
    }

    fn mismatch(&self, g: &GroupElement) -> GroupError {
        GroupError::KindMismatch {
            group: self.to_string(),
            element: g.to_string(),
        }
    }

    /// Checks that `g` is a canonical element of this group.
    pub fn validate(&self, g: &GroupElement) -> Result<(), GroupError> {
        let ok = match (self, g) {
            (GroupSpec::IntegerLine, GroupElement::Int(_)) => true,
            (GroupSpec::IntegerLattice { rank }, GroupElement::Vector(v)) => v.len() == *rank,
            (GroupSpec::FreeGroup { rank }, GroupElement::Word(w)) => {
                w.iter().all(|l| (l.generator as usize) < *rank)
                    && w.windows(2).all(|p| p[0] != p[1].inverted())
            }
            (GroupSpec::FiniteGroup(t), GroupElement::Finite(i)) => *i < t.order(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(self.mismatch(g))
        }
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        self.validate(g)?;
        self.validate(h)?;
        Ok(match (self, g, h) {
            (_, GroupElement::Int(a), GroupElement::Int(b)) => GroupElement::Int(a + b),
            (_, GroupElement::Vector(a), GroupElement::Vector(b)) => {
                GroupElement::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (_, GroupElement::Word(a), GroupElement::Word(b)) => {
                GroupElement::Word(reduce(a.iter().chain(b.iter()).copied()))
            }
            (GroupSpec::FiniteGroup(t), GroupElement::Finite(a), GroupElement::Finite(b)) => {
                GroupElement::Finite(t.product(*a, *b))
            }
            _ => unreachable!("validated above"),
        })
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.validate(g)?;
        Ok(match (self, g) {
            (_, GroupElement::Int(a)) => GroupElement::Int(-a),
            (_, GroupElement::Vector(a)) => GroupElement::Vector(a.iter().map(|x| -x).collect()),
            (_, GroupElement::Word(w)) => {
                GroupElement::Word(w.iter().rev().map(|l| l.inverted()).collect())
            }
            (GroupSpec::FiniteGroup(t), GroupElement::Finite(a)) => GroupElement::Finite(t.inverse(*a)),
            _ => unreachable!("validated above"),
        })
    }

    /// Standard symmetric generating set (generators followed by their inverses
    /// where those differ).
    pub fn generators(&self) -> Vec<GroupElement> {
        match self {
            GroupSpec::IntegerLine => vec![GroupElement::Int(1), GroupElement::Int(-1)],
            GroupSpec::IntegerLattice { rank } => (0..*rank)
                .flat_map(|j| {
                    let mut plus = vec![0; *rank];
                    let mut minus = vec![0; *rank];
                    plus[j] = 1;
                    minus[j] = -1;
                    [GroupElement::Vector(plus), GroupElement::Vector(minus)]
                })
                .collect(),
            GroupSpec::FreeGroup { rank } => (0..*rank)
                .flat_map(|j| {
                    [
                        GroupElement::Word(vec![Letter::new(j, false)]),
                        GroupElement::Word(vec![Letter::new(j, true)]),
                    ]
                })
                .collect(),
            GroupSpec::FiniteGroup(t) => (0..t.order())
                .filter(|&i| i != t.identity())
                .map(GroupElement::Finite)
                .collect(),
        }
    }

    /// Decomposition of `g` into generator letters, used to evaluate sofic maps by
    /// composition. Finite-group elements have no canonical decomposition.
    pub fn letters(&self, g: &GroupElement) -> Option<Vec<Letter>> {
        match g {
            GroupElement::Int(n) => Some(vec![Letter::new(0, *n < 0); n.unsigned_abs() as usize]),
            GroupElement::Vector(v) => Some(
                v.iter()
                    .enumerate()
                    .flat_map(|(j, &x)| std::iter::repeat(Letter::new(j, x < 0)).take(x.unsigned_abs() as usize))
                    .collect(),
            ),
            GroupElement::Word(w) => Some(w.clone()),
            GroupElement::Finite(_) => None,
        }
    }

    /// The element represented by a single letter.
    pub fn letter_element(&self, l: Letter) -> GroupElement {
        let sign = if l.inverse { -1 } else { 1 };
        match self {
            GroupSpec::IntegerLine => GroupElement::Int(sign),
            GroupSpec::IntegerLattice { rank } => {
                let mut v = vec![0; *rank];
                v[l.generator as usize] = sign;
                GroupElement::Vector(v)
            }
            GroupSpec::FreeGroup { .. } => GroupElement::Word(vec![l]),
            GroupSpec::FiniteGroup(_) => panic!("finite groups have no letters"),
        }
    }

    /// Word length in the standard generators.
    pub fn word_length(&self, g: &GroupElement) -> usize {
        match g {
            GroupElement::Int(n) => n.unsigned_abs() as usize,
            GroupElement::Vector(v) => v.iter().map(|x| x.unsigned_abs() as usize).sum(),
            GroupElement::Word(w) => w.len(),
            GroupElement::Finite(i) => match self {
                GroupSpec::FiniteGroup(t) if *i == t.identity() => 0,
                _ => 1,
            },
        }
    }

    /// Sphere of radius `r` in the word metric, in enumeration order.
    fn sphere(&self, r: usize) -> Vec<GroupElement> {
        let mut out = match self {
            GroupSpec::IntegerLine => {
                if r == 0 {
                    vec![GroupElement::Int(0)]
                } else {
                    vec![GroupElement::Int(r as i64), GroupElement::Int(-(r as i64))]
                }
            }
            GroupSpec::IntegerLattice { rank } => {
                let mut acc = Vec::new();
                lattice_sphere(*rank, r as i64, &mut Vec::new(), &mut acc);
                acc.into_iter().map(GroupElement::Vector).collect()
            }
            GroupSpec::FreeGroup { rank } => {
                let mut words: Vec<Vec<Letter>> = vec![Vec::new()];
                for _ in 0..r {
                    let mut next = Vec::new();
                    for w in &words {
                        for j in 0..*rank {
                            for inv in [false, true] {
                                let l = Letter::new(j, inv);
                                if w.last() == Some(&l.inverted()) {
                                    continue;
                                }
                                let mut nw = w.clone();
                                nw.push(l);
                                next.push(nw);
                            }
                        }
                    }
                    words = next;
                }
                words.into_iter().map(GroupElement::Word).collect()
            }
            GroupSpec::FiniteGroup(t) => match r {
                0 => vec![GroupElement::Finite(t.identity())],
                1 => self.generators(),
                _ => Vec::new(),
            },
        };
        out.sort_by(|a, b| {
            let la = self.letters(a).unwrap_or_default();
            let lb = self.letters(b).unwrap_or_default();
            la.cmp(&lb).then_with(|| a.cmp(b))
        });
        out
    }

    /// All elements of word length at most `radius`.
    pub fn ball(&self, radius: usize) -> FiniteSubset {
        FiniteSubset::new((0..=radius).flat_map(|r| self.sphere(r)))
    }

    /// The first `n` elements of a fixed enumeration `s_1 = e, s_2, ...` of the
    /// group: sphere by sphere, generators before their inverses. Finite groups
    /// yield at most their order.
    pub fn enumerate(&self, n: usize) -> Vec<GroupElement> {
        let mut out = Vec::with_capacity(n);
        let mut r = 0;
        while out.len() < n {
            let sphere = self.sphere(r);
            if sphere.is_empty() {
                break;
            }
            out.extend(sphere.into_iter().take(n - out.len()));
            r += 1;
        }
        out
    }

    /// Følner set: `{0..n-1}`, the box `{0..n-1}^r`, or the whole finite group.
    pub fn folner_set(&self, n: usize) -> Result<FiniteSubset, GroupError> {
        match self {
            GroupSpec::IntegerLine => Ok(FiniteSubset::new((0..n as i64).map(GroupElement::Int))),
            GroupSpec::IntegerLattice { rank } => {
                let mut acc = Vec::new();
                lattice_box(*rank, n as i64, &mut Vec::new(), &mut acc);
                Ok(FiniteSubset::new(acc.into_iter().map(GroupElement::Vector)))
            }
            GroupSpec::FiniteGroup(t) => Ok(FiniteSubset::new((0..t.order()).map(GroupElement::Finite))),
            GroupSpec::FreeGroup { rank: 1 } => Ok(FiniteSubset::new(
                (0..n as i64).map(|i| GroupElement::Word(vec![Letter::new(0, false); i as usize])),
            )),
            GroupSpec::FreeGroup { .. } => Err(GroupError::NotAmenable(self.to_string())),
        }
    }

    /// Parses the canonical text form produced by `Display`.
    pub fn parse_element(&self, text: &str) -> Result<GroupElement, GroupError> {
        let err = |reason: &str| GroupError::Parse {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let t = text.trim();
        let g = match self {
            GroupSpec::IntegerLine => GroupElement::Int(t.parse().map_err(|_| err("expected an integer"))?),
            GroupSpec::IntegerLattice { .. } => GroupElement::Vector(
                t.split(',')
                    .map(|p| p.trim().parse::<i64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err("expected comma-separated integers"))?,
            ),
            GroupSpec::FreeGroup { .. } => {
                if t == "e" {
                    GroupElement::Word(Vec::new())
                } else {
                    let letters = t
                        .chars()
                        .map(|c| match c {
                            'a'..='z' => Ok(Letter::new((c as u8 - b'a') as usize, false)),
                            'A'..='Z' => Ok(Letter::new((c as u8 - b'A') as usize, true)),
                            _ => Err(err("expected letters a-z / A-Z or 'e'")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    GroupElement::word(&letters)
                }
            }
            GroupSpec::FiniteGroup(_) => GroupElement::Finite(t.parse().map_err(|_| err("expected an index"))?),
        };
        self.validate(&g)?;
        Ok(g)
    }
}

fn lattice_sphere(rank: usize, r: i64, prefix: &mut Vec<i64>, acc: &mut Vec<Vec<i64>>) {
    let used: i64 = prefix.iter().map(|x| x.abs()).sum();
    let left = r - used;
    if prefix.len() == rank - 1 {
        prefix.push(left);
        acc.push(prefix.clone());
        prefix.pop();
        if left != 0 {
            prefix.push(-left);
            acc.push(prefix.clone());
            prefix.pop();
        }
        return;
    }
    for x in -left..=left {
        prefix.push(x);
        lattice_sphere(rank, r, prefix, acc);
        prefix.pop();
    }
}

fn lattice_box(rank: usize, n: i64, prefix: &mut Vec<i64>, acc: &mut Vec<Vec<i64>>) {
    if prefix.len() == rank {
        acc.push(prefix.clone());
        return;
    }
    for x in 0..n {
        prefix.push(x);
        lattice_box(rank, n, prefix, acc);
        prefix.pop();
    }
}

/// Duplicate-free set of group elements in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct FiniteSubset(Vec<GroupElement>);

impl FiniteSubset {
    pub fn new(elements: impl IntoIterator<Item = GroupElement>) -> Self {
        let set: BTreeSet<GroupElement> = elements.into_iter().collect();
        FiniteSubset(set.into_iter().collect())
    }

    pub fn singleton(g: GroupElement) -> Self {
        FiniteSubset(vec![g])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[GroupElement] {
        &self.0
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.0.binary_search(g).is_ok()
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.0.iter().all(|g| other.contains(g))
    }

    pub fn union(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset::new(self.0.iter().chain(other.0.iter()).cloned())
    }

    /// `sF = {s f : f in F}`.
    pub fn left_translate(&self, spec: &GroupSpec, s: &GroupElement) -> Result<FiniteSubset, GroupError> {
        let items = self
            .0
            .iter()
            .map(|f| spec.multiply(s, f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FiniteSubset::new(items))
    }

    pub fn symmetric_difference_len(&self, other: &FiniteSubset) -> usize {
        let a = self.0.iter().filter(|g| !other.contains(g)).count();
        let b = other.0.iter().filter(|g| !self.contains(g)).count();
        a + b
    }

    /// `|sF Δ F| / |F|`.
    pub fn invariance_defect(&self, spec: &GroupSpec, s: &GroupElement) -> Result<f64, GroupError> {
        let moved = self.left_translate(spec, s)?;
        Ok(moved.symmetric_difference_len(self) as f64 / self.len() as f64)
    }

    pub fn inverse_closed(&self, spec: &GroupSpec) -> bool {
        self.0
            .iter()
            .all(|g| spec.inverse(g).map(|i| self.contains(&i)).unwrap_or(false))
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a GroupElement;
    type IntoIter = std::slice::Iter<'a, GroupElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
