//! Deck groups: free abelian `ℤ^d`, free groups `F_r`, and finite permutation groups.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical group element. Free words are reduced; generator `i` is `i + 1`
/// and its inverse `-(i + 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Abelian(Vec<i64>),
    Word(Vec<i32>),
    Perm(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeckGroup {
    FreeAbelian(usize),
    Free(usize),
    Finite(FiniteGroup),
}

/// Finite group generated by permutations; elements are indexed in BFS
/// order from the identity, so the index also orders by word length.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    generators: Vec<usize>,
    perms: Vec<Vec<usize>>,
    lengths: Vec<usize>,
    index: HashMap<Vec<usize>, usize>,
}

impl FiniteGroup {
    pub fn from_permutations(gens: &[Vec<usize>]) -> Result<Self> {
        let m = gens.first().map_or(1, Vec::len);
        for g in gens {
            let mut seen = vec![false; m];
            if g.len() != m || g.iter().any(|&x| x >= m || std::mem::replace(&mut seen[x], true)) {
                return Err(Error::InvalidVoltage(format!("{g:?} is not a permutation of 0..{m}")));
            }
        }
        let identity: Vec<usize> = (0..m).collect();
        let mut perms = vec![identity.clone()];
        let mut lengths = vec![0];
        let mut index = HashMap::from([(identity, 0usize)]);
        let mut queue = VecDeque::from([0usize]);
        let mut all_gens: Vec<Vec<usize>> = Vec::new();
        for g in gens {
            all_gens.push(g.clone());
            all_gens.push(invert_perm(g));
        }
        while let Some(i) = queue.pop_front() {
            for g in &all_gens {
                let p = compose(&perms[i], g);
                if !index.contains_key(&p) {
                    index.insert(p.clone(), perms.len());
                    lengths.push(lengths[i] + 1);
                    queue.push_back(perms.len());
                    perms.push(p);
                }
            }
        }
        let generators = gens.iter().map(|g| index[g]).collect();
        Ok(FiniteGroup {
            generators,
            perms,
            lengths,
            index,
        })
    }

    /// Cyclic group `ℤ/n` generated by the rotation.
    pub fn cyclic(n: usize) -> Self {
        let rot: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        Self::from_permutations(&[rot]).expect("rotation is a permutation")
    }

    pub fn order(&self) -> usize {
        self.perms.len()
    }

    pub fn generator_permutations(&self) -> Vec<Vec<usize>> {
        self.generators.iter().map(|&g| self.perms[g].clone()).collect()
    }
}

/// `(a·b)(x) = b(a(x))`: apply `a` first.
fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().map(|&x| b[x]).collect()
}

fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

impl DeckGroup {
    pub fn identity(&self) -> GroupElement {
        match self {
            DeckGroup::FreeAbelian(d) => GroupElement::Abelian(vec![0; *d]),
            DeckGroup::Free(_) => GroupElement::Word(Vec::new()),
            DeckGroup::Finite(_) => GroupElement::Perm(0),
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        *g == self.identity()
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match (self, a, b) {
            (DeckGroup::FreeAbelian(_), GroupElement::Abelian(x), GroupElement::Abelian(y)) => {
                GroupElement::Abelian(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (DeckGroup::Free(_), GroupElement::Word(x), GroupElement::Word(y)) => {
                let mut w = x.clone();
                for &l in y {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                GroupElement::Word(w)
            }
            (DeckGroup::Finite(f), GroupElement::Perm(x), GroupElement::Perm(y)) => {
                GroupElement::Perm(f.index[&compose(&f.perms[*x], &f.perms[*y])])
            }
            _ => panic!("group element kind does not match the group"),
        }
    }

    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        match (self, a) {
            (DeckGroup::FreeAbelian(_), GroupElement::Abelian(x)) => {
                GroupElement::Abelian(x.iter().map(|v| -v).collect())
            }
            (DeckGroup::Free(_), GroupElement::Word(x)) => {
                GroupElement::Word(x.iter().rev().map(|l| -l).collect())
            }
            (DeckGroup::Finite(f), GroupElement::Perm(x)) => {
                GroupElement::Perm(f.index[&invert_perm(&f.perms[*x])])
            }
            _ => panic!("group element kind does not match the group"),
        }
    }

    /// Word length with respect to the standard generators and their inverses.
    pub fn length(&self, a: &GroupElement) -> usize {
        match (self, a) {
            (DeckGroup::FreeAbelian(_), GroupElement::Abelian(x)) => {
                x.iter().map(|v| v.unsigned_abs() as usize).sum()
            }
            (DeckGroup::Free(_), GroupElement::Word(x)) => x.len(),
            (DeckGroup::Finite(f), GroupElement::Perm(x)) => f.lengths[*x],
            _ => panic!("group element kind does not match the group"),
        }
    }

    /// Generators followed by their inverses.
    pub fn symmetric_generators(&self) -> Vec<GroupElement> {
        match self {
            DeckGroup::FreeAbelian(d) => (0..*d)
                .flat_map(|i| {
                    [1i64, -1].map(|s| {
                        let mut v = vec![0; *d];
                        v[i] = s;
                        GroupElement::Abelian(v)
                    })
                })
                .collect(),
            DeckGroup::Free(r) => (0..*r as i32)
                .flat_map(|i| [GroupElement::Word(vec![i + 1]), GroupElement::Word(vec![-(i + 1)])])
                .collect(),
            DeckGroup::Finite(f) => f
                .generators
                .iter()
                .flat_map(|&g| {
                    let p = GroupElement::Perm(g);
                    [p.clone(), self.inv(&p)]
                })
                .collect(),
        }
    }

    /// Elements of word length at most `radius`, in BFS order from the identity.
    pub fn ball(&self, radius: usize) -> Vec<GroupElement> {
        let gens = self.symmetric_generators();
        let id = self.identity();
        let mut seen: HashMap<GroupElement, ()> = HashMap::from([(id.clone(), ())]);
        let mut out = vec![id];
        let mut frontier_start = 0;
        for _ in 0..radius {
            let frontier_end = out.len();
            for i in frontier_start..frontier_end {
                for g in &gens {
                    let x = self.mul(&out[i], g);
                    if seen.insert(x.clone(), ()).is_none() {
                        out.push(x);
                    }
                }
            }
            if out.len() == frontier_end {
                break;
            }
            frontier_start = frontier_end;
        }
        out
    }

    /// Parses a word: an integer array for `ℤ^d`, a string over `a, b, …`
    /// (capitals are inverses) for free and finite groups.
    pub fn parse_word(&self, w: &WordRepr) -> Result<GroupElement> {
        match (self, w) {
            (DeckGroup::FreeAbelian(d), WordRepr::Vector(v)) => {
                if v.len() != *d {
                    return Err(Error::InvalidVoltage(format!("expected {d} coordinates, got {v:?}")));
                }
                Ok(GroupElement::Abelian(v.clone()))
            }
            (DeckGroup::Free(_) | DeckGroup::Finite(_), WordRepr::Letters(s)) => {
                let rank = match self {
                    DeckGroup::Free(r) => *r,
                    DeckGroup::Finite(f) => f.generators.len(),
                    _ => unreachable!(),
                };
                let mut acc = self.identity();
                for ch in s.chars() {
                    let (i, inverse) = match ch {
                        'a'..='z' => (ch as usize - 'a' as usize, false),
                        'A'..='Z' => (ch as usize - 'A' as usize, true),
                        _ => return Err(Error::InvalidVoltage(format!("bad letter {ch:?} in {s:?}"))),
                    };
                    if i >= rank {
                        return Err(Error::InvalidVoltage(format!(
                            "letter {ch:?} exceeds group rank {rank}"
                        )));
                    }
                    let g = match self {
                        DeckGroup::Free(_) => GroupElement::Word(vec![i as i32 + 1]),
                        DeckGroup::Finite(f) => GroupElement::Perm(f.generators[i]),
                        _ => unreachable!(),
                    };
                    let g = if inverse { self.inv(&g) } else { g };
                    acc = self.mul(&acc, &g);
                }
                Ok(acc)
            }
            _ => Err(Error::InvalidVoltage(format!("word {w:?} does not fit group {}", self.kind()))),
        }
    }

    /// Inverse of [`DeckGroup::parse_word`]. Finite elements are written as a
    /// shortest word.
    pub fn format_word(&self, g: &GroupElement) -> WordRepr {
        match g {
            GroupElement::Abelian(v) => WordRepr::Vector(v.clone()),
            GroupElement::Word(w) => WordRepr::Letters(
                w.iter()
                    .map(|&l| {
                        let c = (b'a' + (l.unsigned_abs() - 1) as u8) as char;
                        if l < 0 {
                            c.to_ascii_uppercase()
                        } else {
                            c
                        }
                    })
                    .collect(),
            ),
            GroupElement::Perm(_) => {
                let DeckGroup::Finite(f) = self else { panic!("kind mismatch") };
                // BFS over words until the element is reached
                let mut queue = VecDeque::from([(0usize, String::new())]);
                let mut seen = vec![false; f.order()];
                seen[0] = true;
                while let Some((x, word)) = queue.pop_front() {
                    if GroupElement::Perm(x) == *g {
                        return WordRepr::Letters(word);
                    }
                    for (i, &gen) in f.generators.iter().enumerate() {
                        for (elt, letter) in [
                            (GroupElement::Perm(gen), (b'a' + i as u8) as char),
                            (self.inv(&GroupElement::Perm(gen)), (b'A' + i as u8) as char),
                        ] {
                            let GroupElement::Perm(y) = self.mul(&GroupElement::Perm(x), &elt) else {
                                unreachable!()
                            };
                            if !seen[y] {
                                seen[y] = true;
                                queue.push_back((y, format!("{word}{letter}")));
                            }
                        }
                    }
                }
                unreachable!("every element is reachable from the generators")
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DeckGroup::FreeAbelian(_) => "free_abelian",
            DeckGroup::Free(_) => "free",
            DeckGroup::Finite(_) => "finite",
        }
    }

    pub fn spec(&self) -> GroupSpec {
        match self {
            DeckGroup::FreeAbelian(d) => GroupSpec::FreeAbelian { rank: *d },
            DeckGroup::Free(r) => GroupSpec::Free { rank: *r },
            DeckGroup::Finite(f) => GroupSpec::Finite {
                generators: f.generator_permutations(),
            },
        }
    }

    pub fn from_spec(spec: &GroupSpec) -> Result<Self> {
        Ok(match spec {
            GroupSpec::FreeAbelian { rank } => DeckGroup::FreeAbelian(*rank),
            GroupSpec::Free { rank } => DeckGroup::Free(*rank),
            GroupSpec::Finite { generators } => DeckGroup::Finite(FiniteGroup::from_permutations(generators)?),
        })
    }
}

/// JSON form of a group: `{"kind":"free","rank":2}`,
/// `{"kind":"free_abelian","rank":1}` or `{"kind":"finite","generators":[[1,2,0]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    FreeAbelian { rank: usize },
    Free { rank: usize },
    Finite { generators: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordRepr {
    Vector(Vec<i64>),
    Letters(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(s: &str) -> GroupElement {
        DeckGroup::Free(2).parse_word(&WordRepr::Letters(s.into())).unwrap()
    }

    #[test]
    fn free_words_reduce() {
        let g = DeckGroup::Free(2);
        assert_eq!(word("aA"), g.identity());
        assert_eq!(g.mul(&word("ab"), &word("Ba")), word("aa"));
        assert_eq!(g.length(&word("abBA")), 0);
        assert_eq!(g.format_word(&word("aBb")), WordRepr::Letters("a".into()));
        assert!(g.parse_word(&WordRepr::Letters("c".into())).is_err());
    }

    #[test]
    fn free_ball_sizes() {
        let g = DeckGroup::Free(2);
        for r in 0..5 {
            let expect = 1 + 2 * (3usize.pow(r as u32) - 1);
            assert_eq!(g.ball(r).len(), expect);
        }
    }

    #[test]
    fn abelian_ball_is_l1() {
        let g = DeckGroup::FreeAbelian(2);
        assert_eq!(g.ball(2).len(), 13);
        assert!(g.ball(2).iter().all(|x| g.length(x) <= 2));
    }

    #[test]
    fn cyclic_group() {
        let g = DeckGroup::Finite(FiniteGroup::cyclic(3));
        let a = g.parse_word(&WordRepr::Letters("a".into())).unwrap();
        assert_eq!(g.mul(&g.mul(&a, &a), &a), g.identity());
        assert_eq!(g.ball(5).len(), 3);
        assert_eq!(g.format_word(&g.inv(&a)), WordRepr::Letters("A".into()));
        assert!(FiniteGroup::from_permutations(&[vec![0, 0]]).is_err());
    }

    #[test]
    fn group_spec_json() {
        let s: GroupSpec = serde_json::from_str(r#"{"kind":"free","rank":2}"#).unwrap();
        assert_eq!(s, GroupSpec::Free { rank: 2 });
        let s: GroupSpec = serde_json::from_str(r#"{"kind":"finite","generators":[[1,2,0]]}"#).unwrap();
        assert_eq!(DeckGroup::from_spec(&s).unwrap().spec(), s);
    }

    fn arb_word() -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof![Just('a'), Just('b'), Just('A'), Just('B')], 0..10)
            .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn free_group_axioms(x in arb_word(), y in arb_word(), z in arb_word()) {
            let g = DeckGroup::Free(2);
            let (x, y, z) = (word(&x), word(&y), word(&z));
            prop_assert_eq!(g.mul(&g.mul(&x, &y), &z), g.mul(&x, &g.mul(&y, &z)));
            prop_assert_eq!(g.mul(&x, &g.inv(&x)), g.identity());
            prop_assert_eq!(g.mul(&g.identity(), &x), x.clone());
            if let GroupElement::Word(w) = &x {
                prop_assert!(w.windows(2).all(|p| p[0] != -p[1]));
            }
            prop_assert_eq!(g.parse_word(&g.format_word(&x)).unwrap(), x);
        }
    }
}
