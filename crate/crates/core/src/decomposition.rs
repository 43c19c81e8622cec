//! Special decompositions of a ground set, coverings, I-transformations and
//! the bridge to and from CNF.
//!
//! Elements and pair indices are 1-based everywhere in the public API. A pair
//! stores its two components as `pos` (the α = 1 side) and `neg` (α = 0).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cnf::{Clause, CnfFormula, Literal};

/// Set of 1-based element ids over a fixed ground size.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ElementSet(FixedBitSet);

impl ElementSet {
    pub fn empty(ground: usize) -> Self {
        ElementSet(FixedBitSet::with_capacity(ground))
    }

    pub fn full(ground: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(ground);
        bits.insert_range(..);
        ElementSet(bits)
    }

    pub fn from_ids(ground: usize, ids: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(ground);
        for id in ids {
            set.insert(id);
        }
        set
    }

    pub fn ground(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, id: usize) {
        assert!(
            id >= 1 && id <= self.ground(),
            "element {id} outside 1..={}",
            self.ground()
        );
        self.0.insert(id - 1);
    }

    pub fn contains(&self, id: usize) -> bool {
        id >= 1 && self.0.contains(id - 1)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones().map(|i| i + 1)
    }

    pub fn union_with(&mut self, other: &ElementSet) {
        self.0.union_with(&other.0);
    }

    pub fn difference(&self, other: &ElementSet) -> ElementSet {
        let mut out = self.clone();
        out.0.difference_with(&other.0);
        out
    }

    pub fn intersects(&self, other: &ElementSet) -> bool {
        !self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &ElementSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_full(&self) -> bool {
        self.0.is_full()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

impl Serialize for ElementSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct OrderedPair {
    pub pos: ElementSet,
    pub neg: ElementSet,
}

impl OrderedPair {
    pub fn new(pos: ElementSet, neg: ElementSet) -> Self {
        assert_eq!(pos.ground(), neg.ground(), "components over different ground sets");
        OrderedPair { pos, neg }
    }

    /// The α-component: `pos` for α = 1, `neg` for α = 0.
    pub fn component(&self, alpha: bool) -> &ElementSet {
        if alpha {
            &self.pos
        } else {
            &self.neg
        }
    }

    pub fn swapped(&self) -> OrderedPair {
        OrderedPair {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("pair {0}: components overlap")]
    OverlapViolation(usize),
    #[error("pair {0}: both components are empty")]
    EmptyPairViolation(usize),
    #[error("element {0} belongs to no component")]
    CoverageViolation(usize),
    #[error("pair {pair}: component ground size {found} differs from {expected}")]
    GroundMismatch { pair: usize, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompositionError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("pair index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("selection has {actual} bits, decomposition has {expected} pairs")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("variable {0} occurs in no clause")]
    UnusedVariable(u32),
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

/// An ordered list of disjoint subset pairs whose union is the ground set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SpecialDecomposition {
    ground: usize,
    pairs: Vec<OrderedPair>,
}

/// One bit per pair selecting its `pos` (true) or `neg` (false) component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CoveringSelection(pub Vec<bool>);

impl CoveringSelection {
    pub fn from_bits(bits: &str) -> Option<Self> {
        crate::cnf::Assignment::from_bits(bits).map(|a| CoveringSelection(a.values().to_vec()))
    }

    pub fn to_bits(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl SpecialDecomposition {
    /// Builds and validates a decomposition.
    pub fn new(ground: usize, pairs: Vec<OrderedPair>) -> Result<Self, ValidationError> {
        let d = SpecialDecomposition { ground, pairs };
        d.validate()?;
        Ok(d)
    }

    /// Builds without checking the three decomposition conditions.
    pub fn new_unchecked(ground: usize, pairs: Vec<OrderedPair>) -> Self {
        SpecialDecomposition { ground, pairs }
    }

    /// Convenience constructor from `(pos, neg)` element id lists.
    pub fn from_lists(ground: usize, pairs: &[(&[usize], &[usize])]) -> Self {
        let pairs = pairs
            .iter()
            .map(|(p, n)| {
                OrderedPair::new(
                    ElementSet::from_ids(ground, p.iter().copied()),
                    ElementSet::from_ids(ground, n.iter().copied()),
                )
            })
            .collect();
        SpecialDecomposition::new_unchecked(ground, pairs)
    }

    pub fn ground(&self) -> usize {
        self.ground
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[OrderedPair] {
        &self.pairs
    }

    /// Pair by 1-based index.
    pub fn pair(&self, i: usize) -> &OrderedPair {
        &self.pairs[i - 1]
    }

    fn check_index(&self, i: usize) -> Result<(), DecompositionError> {
        if i == 0 || i > self.pairs.len() {
            Err(DecompositionError::IndexOutOfRange {
                index: i,
                n: self.pairs.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut covered = ElementSet::empty(self.ground);
        for (idx, pair) in self.pairs.iter().enumerate() {
            let i = idx + 1;
            for comp in [&pair.pos, &pair.neg] {
                if comp.ground() != self.ground {
                    return Err(ValidationError::GroundMismatch {
                        pair: i,
                        expected: self.ground,
                        found: comp.ground(),
                    });
                }
            }
            if pair.pos.intersects(&pair.neg) {
                return Err(ValidationError::OverlapViolation(i));
            }
            if pair.pos.is_empty() && pair.neg.is_empty() {
                return Err(ValidationError::EmptyPairViolation(i));
            }
            covered.union_with(&pair.pos);
            covered.union_with(&pair.neg);
        }
        match ElementSet::full(self.ground).difference(&covered).iter().next() {
            Some(e) => Err(ValidationError::CoverageViolation(e)),
            None => Ok(()),
        }
    }

    /// Union of all α-components.
    pub fn domain(&self, alpha: bool) -> ElementSet {
        let mut out = ElementSet::empty(self.ground);
        for pair in &self.pairs {
            out.union_with(pair.component(alpha));
        }
        out
    }

    /// Ground elements outside the α-domain.
    pub fn missing_elements(&self, alpha: bool) -> ElementSet {
        ElementSet::full(self.ground).difference(&self.domain(alpha))
    }

    /// Swaps the components of the pairs at `idxs`.
    pub fn i_transform(&self, idxs: &BTreeSet<usize>) -> Result<SpecialDecomposition, DecompositionError> {
        for &i in idxs {
            self.check_index(i)?;
        }
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                if idxs.contains(&(idx + 1)) {
                    p.swapped()
                } else {
                    p.clone()
                }
            })
            .collect();
        Ok(SpecialDecomposition::new_unchecked(self.ground, pairs))
    }

    /// α-domain after swapping the pairs at `idxs`, without materializing the
    /// transformed decomposition.
    pub fn swapped_domain(&self, alpha: bool, idxs: &BTreeSet<usize>) -> ElementSet {
        let mut out = ElementSet::empty(self.ground);
        for (idx, pair) in self.pairs.iter().enumerate() {
            let side = if idxs.contains(&(idx + 1)) { !alpha } else { alpha };
            out.union_with(pair.component(side));
        }
        out
    }

    /// Union of the selected components.
    pub fn covered_by(&self, selection: &CoveringSelection) -> Result<ElementSet, DecompositionError> {
        if selection.len() != self.pairs.len() {
            return Err(DecompositionError::LengthMismatch {
                expected: self.pairs.len(),
                actual: selection.len(),
            });
        }
        let mut out = ElementSet::empty(self.ground);
        for (pair, &bit) in self.pairs.iter().zip(&selection.0) {
            out.union_with(pair.component(bit));
        }
        Ok(out)
    }

    pub fn is_special_covering(&self, selection: &CoveringSelection) -> Result<bool, DecompositionError> {
        Ok(self.covered_by(selection)?.is_full())
    }

    /// Pairs whose α-component holds `e`.
    pub fn element_locations(&self, alpha: bool, e: usize) -> BTreeSet<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.component(alpha).contains(e))
            .map(|(idx, _)| idx + 1)
            .collect()
    }

    /// Elements of the α-component of pair `i` found in no other α-component.
    pub fn single_elements(&self, i: usize, alpha: bool) -> Result<ElementSet, DecompositionError> {
        self.check_index(i)?;
        let mut others = ElementSet::empty(self.ground);
        for (idx, pair) in self.pairs.iter().enumerate() {
            if idx + 1 != i {
                others.union_with(pair.component(alpha));
            }
        }
        Ok(self.pair(i).component(alpha).difference(&others))
    }

    /// Swapping pair `i` alone loses nothing from the α-domain.
    pub fn is_immediate_replaceable(&self, i: usize, alpha: bool) -> Result<bool, DecompositionError> {
        Ok(self.single_elements(i, alpha)?.is_empty())
    }

    /// Pair `i` holds `+x_i` occurrences in `pos` and `¬x_i` in `neg`.
    pub fn from_cnf(f: &CnfFormula) -> Result<SpecialDecomposition, DecompositionError> {
        let m = f.num_clauses();
        if let Some(idx) = f.clauses().iter().position(Clause::is_empty) {
            return Err(DecompositionError::EmptyClause(idx + 1));
        }
        let mut pairs: Vec<OrderedPair> = (0..f.num_vars())
            .map(|_| OrderedPair::new(ElementSet::empty(m), ElementSet::empty(m)))
            .collect();
        for (idx, clause) in f.clauses().iter().enumerate() {
            for lit in clause.literals() {
                let pair = &mut pairs[lit.var as usize - 1];
                if lit.positive {
                    pair.pos.insert(idx + 1);
                } else {
                    pair.neg.insert(idx + 1);
                }
            }
        }
        if let Some(idx) = pairs.iter().position(|p| p.pos.is_empty() && p.neg.is_empty()) {
            return Err(DecompositionError::UnusedVariable(idx as u32 + 1));
        }
        let d = SpecialDecomposition::new_unchecked(m, pairs);
        debug_assert_eq!(d.validate(), Ok(()));
        Ok(d)
    }

    /// Clause `e` is the disjunction of `x_j^α` over the pairs `j` whose
    /// α-component holds `e`, in ascending pair order.
    pub fn to_cnf(&self) -> CnfFormula {
        let clauses = (1..=self.ground)
            .map(|e| {
                let lits = self.pairs.iter().enumerate().filter_map(|(idx, p)| {
                    if p.pos.contains(e) {
                        Some(Literal::new(idx as u32 + 1, true))
                    } else if p.neg.contains(e) {
                        Some(Literal::new(idx as u32 + 1, false))
                    } else {
                        None
                    }
                });
                Clause::new(lits).expect("disjoint components cannot produce a tautology")
            })
            .collect();
        CnfFormula::new(self.pairs.len() as u32, clauses).expect("pair indices bound the variables")
    }
}

pub fn decomposition_of_cnf(f: &CnfFormula) -> Result<SpecialDecomposition, DecompositionError> {
    SpecialDecomposition::from_cnf(f)
}

pub fn cnf_of_decomposition(d: &SpecialDecomposition) -> CnfFormula {
    d.to_cnf()
}

// Text format: optional `ground <m>` line, then one `i : {a,b} | {c}` line per
// pair in index order. `#` starts a comment line.
impl fmt::Display for SpecialDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ground {}", self.ground)?;
        for (idx, pair) in self.pairs.iter().enumerate() {
            writeln!(f, "{} : {} | {}", idx + 1, pair.pos, pair.neg)?;
        }
        Ok(())
    }
}

impl FromStr for SpecialDecomposition {
    type Err = DecompositionError;

    /// Parses the text format; the result is not validated.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syntax = |line: usize, reason: &str| DecompositionError::Syntax {
            line,
            reason: reason.to_string(),
        };
        let mut ground: Option<usize> = None;
        let mut raw: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("ground") {
                if ground.is_some() || !raw.is_empty() {
                    return Err(syntax(line_no, "`ground` must appear once, before the pairs"));
                }
                ground = Some(
                    rest.trim()
                        .parse()
                        .map_err(|_| syntax(line_no, "ground size is not an integer"))?,
                );
                continue;
            }
            let (index, body) = line
                .split_once(':')
                .ok_or_else(|| syntax(line_no, "expected `i : {..} | {..}`"))?;
            let index: usize = index
                .trim()
                .parse()
                .map_err(|_| syntax(line_no, "pair index is not an integer"))?;
            if index != raw.len() + 1 {
                return Err(syntax(line_no, "pair indices must be 1, 2, 3, ... in order"));
            }
            let (pos, neg) = body
                .split_once('|')
                .ok_or_else(|| syntax(line_no, "missing `|` between components"))?;
            let pos = parse_braced(pos).ok_or_else(|| syntax(line_no, "bad positive component"))?;
            let neg = parse_braced(neg).ok_or_else(|| syntax(line_no, "bad negative component"))?;
            raw.push((pos, neg));
        }
        let max_id = raw
            .iter()
            .flat_map(|(p, n)| p.iter().chain(n))
            .copied()
            .max()
            .unwrap_or(0);
        let ground = ground.unwrap_or(max_id);
        if max_id > ground {
            return Err(syntax(0, "element id exceeds ground size"));
        }
        let pairs = raw
            .into_iter()
            .map(|(p, n)| OrderedPair::new(ElementSet::from_ids(ground, p), ElementSet::from_ids(ground, n)))
            .collect();
        Ok(SpecialDecomposition::new_unchecked(ground, pairs))
    }
}

fn parse_braced(text: &str) -> Option<Vec<usize>> {
    let inner = text.trim().strip_prefix('{')?.strip_suffix('}')?.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|&e| e >= 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    fn d_f1() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[2], &[3])])
    }

    fn set(ids: &[usize]) -> Vec<usize> {
        ids.to_vec()
    }

    fn sel(bits: &str) -> CoveringSelection {
        CoveringSelection::from_bits(bits).unwrap()
    }

    #[test]
    fn validation() {
        assert_eq!(d_f1().validate(), Ok(()));
        let overlap = SpecialDecomposition::from_lists(1, &[(&[1], &[1])]);
        assert_eq!(overlap.validate(), Err(ValidationError::OverlapViolation(1)));
        let uncovered = SpecialDecomposition::from_lists(2, &[(&[1], &[])]);
        assert_eq!(uncovered.validate(), Err(ValidationError::CoverageViolation(2)));
        let empty = SpecialDecomposition::from_lists(1, &[(&[1], &[]), (&[], &[])]);
        assert_eq!(empty.validate(), Err(ValidationError::EmptyPairViolation(2)));
    }

    #[test]
    fn domains() {
        let d = d_f1();
        assert_eq!(d.domain(true).to_vec(), set(&[1, 2]));
        assert_eq!(d.domain(false).to_vec(), set(&[1, 3]));
        let all_neg = SpecialDecomposition::from_lists(2, &[(&[], &[1]), (&[], &[2])]);
        assert!(all_neg.domain(true).is_empty());
        assert_eq!(d.missing_elements(true).to_vec(), set(&[3]));
        assert_eq!(d.missing_elements(false).to_vec(), set(&[2]));
        let fc = SpecialDecomposition::from_lists(3, &[(&[1], &[2, 3]), (&[2], &[1])]);
        assert!(fc.missing_elements(false).is_empty());
    }

    #[test]
    fn i_transform_examples() {
        let d = d_f1();
        let t = d.i_transform(&BTreeSet::from([3])).unwrap();
        assert_eq!(
            t,
            SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[3], &[2])])
        );
        assert_eq!(d.i_transform(&BTreeSet::new()).unwrap(), d);
        assert_eq!(t.domain(true).to_vec(), set(&[1, 2, 3]));
        assert_eq!(d.swapped_domain(true, &BTreeSet::from([3])).to_vec(), set(&[1, 2, 3]));
        assert_eq!(
            d.i_transform(&BTreeSet::from([4])),
            Err(DecompositionError::IndexOutOfRange { index: 4, n: 3 })
        );
    }

    #[test]
    fn covering_examples() {
        let d = d_f1();
        assert!(d.is_special_covering(&sel("110")).unwrap());
        assert!(!d.is_special_covering(&sel("111")).unwrap());
        assert!(d.is_special_covering(&sel("001")).unwrap());
        assert!(matches!(
            d.is_special_covering(&sel("11")),
            Err(DecompositionError::LengthMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn cnf_bridge() {
        let f1 = parse_dimacs("p cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n").unwrap();
        assert_eq!(decomposition_of_cnf(&f1).unwrap(), d_f1());
        assert_eq!(cnf_of_decomposition(&d_f1()), f1);
        let unit = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let d_unit = SpecialDecomposition::from_lists(1, &[(&[1], &[])]);
        assert_eq!(decomposition_of_cnf(&unit).unwrap(), d_unit);
        assert_eq!(cnf_of_decomposition(&d_unit), unit);
        let fc = parse_dimacs("p cnf 2 3\n1 -2 0\n-1 2 0\n-1 0\n").unwrap();
        assert_eq!(
            decomposition_of_cnf(&fc).unwrap(),
            SpecialDecomposition::from_lists(3, &[(&[1], &[2, 3]), (&[2], &[1])])
        );
        assert_eq!(decomposition_of_cnf(&cnf_of_decomposition(&d_f1())).unwrap(), d_f1());
    }

    #[test]
    fn cnf_bridge_errors() {
        let unused = parse_dimacs("p cnf 2 1\n1 0\n").unwrap();
        assert_eq!(
            decomposition_of_cnf(&unused),
            Err(DecompositionError::UnusedVariable(2))
        );
        let empty = parse_dimacs("p cnf 1 2\n1 0\n0\n").unwrap();
        assert_eq!(decomposition_of_cnf(&empty), Err(DecompositionError::EmptyClause(2)));
    }

    #[test]
    fn locations_and_singles() {
        let d = d_f1();
        assert_eq!(d.element_locations(true, 2), BTreeSet::from([2, 3]));
        assert_eq!(d.element_locations(false, 3), BTreeSet::from([1, 3]));
        assert!(d.element_locations(true, 3).is_empty());
        assert_eq!(d.single_elements(1, true).unwrap().to_vec(), set(&[1]));
        assert!(d.single_elements(2, true).unwrap().is_empty());
        assert!(d.single_elements(3, true).unwrap().is_empty());
        assert!(d.is_immediate_replaceable(2, true).unwrap());
        assert!(!d.is_immediate_replaceable(1, true).unwrap());
        assert!(d.is_immediate_replaceable(3, true).unwrap());
        assert!(matches!(
            d.single_elements(0, true),
            Err(DecompositionError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn text_format() {
        let d = d_f1();
        let text = d.to_string();
        assert_eq!(text, "ground 3\n1 : {1} | {3}\n2 : {2} | {1}\n3 : {2} | {3}\n");
        assert_eq!(text.parse::<SpecialDecomposition>().unwrap(), d);
        let no_header: SpecialDecomposition = "# F1\n1 : {1} | {3}\n2 : { 2 } | {1}\n3 : {2} | {3}\n".parse().unwrap();
        assert_eq!(no_header, d);
        let with_empty: SpecialDecomposition = "1 : {1} | {}".parse().unwrap();
        assert_eq!(with_empty, SpecialDecomposition::from_lists(1, &[(&[1], &[])]));
        assert!("2 : {1} | {}".parse::<SpecialDecomposition>().is_err());
        assert!("1 : {1}".parse::<SpecialDecomposition>().is_err());
        assert!("ground 1\n1 : {2} | {}".parse::<SpecialDecomposition>().is_err());
    }
}
