//! Exhaustive k-dominance analysis of finite symmetric functionalities.
//!
//! A set `I` of input positions forces `y` under an assignment `x_I` when
//! every completion of `x_I` evaluates to `y`. The function is weakly
//! k-dominated when every k-subset forces some value, and k-dominated when a
//! single value works for every k-subset.
//!
//! Search order is fixed: subsets in lexicographic order, assignments in
//! mixed-radix order with the first listed position most significant. The
//! first forcing assignment found is the one reported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default limit on the number of table entries the profile will scan.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

/// An opaque output value. Ordered by its byte encoding.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub String);

impl Token {
    pub fn new(s: impl Into<String>) -> Self {
        Token(s.into())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<u64> for Token {
    fn from(v: u64) -> Self {
        Token(v.to_string())
    }
}

/// A deterministic symmetric functionality given by its full output table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionTable {
    domains: Vec<u32>,
    outputs: Vec<Token>,
}

#[derive(Serialize)]
struct TableFile<'a> {
    n: usize,
    domains: &'a [u32],
    outputs: &'a [Token],
}

impl FunctionTable {
    pub fn new(domains: Vec<u32>, outputs: Vec<Token>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::MalformedTable(
                "at least one party is required".into(),
            ));
        }
        if let Some(i) = domains.iter().position(|&d| d == 0) {
            return Err(Error::MalformedTable(format!(
                "domain of party {} is empty",
                i + 1
            )));
        }
        let size = domains
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        match size {
            Some(size) if size == outputs.len() => Ok(FunctionTable { domains, outputs }),
            Some(size) => Err(Error::MalformedTable(format!(
                "expected {size} outputs, found {}",
                outputs.len()
            ))),
            None => Err(Error::MalformedTable("table size overflows".into())),
        }
    }

    /// Tabulates `f` over the product of `domains`.
    pub fn from_fn(domains: Vec<u32>, f: impl Fn(&[u32]) -> Token) -> Result<Self> {
        let mut outputs = Vec::new();
        let mut x = vec![0u32; domains.len()];
        loop {
            outputs.push(f(&x));
            if !odometer(&mut x, &domains) {
                break;
            }
        }
        FunctionTable::new(domains, outputs)
    }

    /// Boolean function of `n` bits.
    pub fn boolean(n: usize, f: impl Fn(&[u32]) -> bool) -> Self {
        FunctionTable::from_fn(vec![2; n], |x| Token::from(u64::from(f(x))))
            .expect("boolean tables are well formed")
    }

    /// Parses `{"n": .., "domains": [..], "outputs": [..]}`. Outputs may be
    /// strings, numbers or booleans; arrays and objects denote randomized
    /// outputs and are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |m: String| Error::MalformedTable(m);
        let value: Value =
            serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| bad("expected a JSON object".into()))?;
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing or invalid field `n`".into()))? as usize;
        let domains: Vec<u32> = obj
            .get("domains")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing or invalid field `domains`".into()))?
            .iter()
            .map(|d| d.as_u64().and_then(|d| u32::try_from(d).ok()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("`domains` must hold non-negative integers".into()))?;
        if domains.len() != n {
            return Err(bad(format!(
                "`n` is {n} but {} domains are given",
                domains.len()
            )));
        }
        let outputs = obj
            .get("outputs")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing or invalid field `outputs`".into()))?
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) => Ok(Token(s.clone())),
                Value::Number(x) => Ok(Token(x.to_string())),
                Value::Bool(b) => Ok(Token(u8::from(*b).to_string())),
                Value::Array(_) | Value::Object(_) => Err(bad(format!(
                    "output {i} is not a single value; randomized functionalities are not supported"
                ))),
                Value::Null => Err(bad(format!("output {i} is null"))),
            })
            .collect::<Result<Vec<_>>>()?;
        FunctionTable::new(domains, outputs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TableFile {
            n: self.n(),
            domains: &self.domains,
            outputs: &self.outputs,
        })
        .expect("tables serialize")
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn size(&self) -> usize {
        self.outputs.len()
    }

    pub fn outputs(&self) -> &[Token] {
        &self.outputs
    }

    fn index(&self, x: &[u32]) -> usize {
        x.iter()
            .zip(&self.domains)
            .fold(0usize, |acc, (&v, &d)| acc * d as usize + v as usize)
    }

    /// Panics on out-of-domain input; use [`FunctionTable::check`] first.
    pub fn eval(&self, x: &[u32]) -> &Token {
        &self.outputs[self.index(x)]
    }

    pub fn check(&self, x: &[u32]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "expected {} inputs, got {}",
                self.n(),
                x.len()
            )));
        }
        for (i, (&v, &d)) in x.iter().zip(&self.domains).enumerate() {
            if v >= d {
                return Err(Error::OutOfDomain {
                    party: i,
                    value: v as u64,
                    domain: d,
                });
            }
        }
        Ok(())
    }

    /// Distinct output values, sorted.
    pub fn range(&self) -> BTreeSet<Token> {
        self.outputs.iter().cloned().collect()
    }
}

/// Advances `x` in mixed radix (last position fastest). Returns `false` after
/// the last assignment, leaving `x` all-zero.
fn odometer(x: &mut [u32], radix: &[u32]) -> bool {
    for i in (0..x.len()).rev() {
        x[i] += 1;
        if x[i] < radix[i] {
            return true;
        }
        x[i] = 0;
    }
    false
}

/// `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// The common output of all completions of `x_I`, or `None` if they differ.
/// Positions are 0-based; `subset` and `assignment` correspond pairwise.
pub fn forced_value(
    f: &FunctionTable,
    subset: &[usize],
    assignment: &[u32],
) -> Result<Option<Token>> {
    if subset.len() != assignment.len() {
        return Err(Error::InvalidArgument(
            "subset and assignment lengths differ".into(),
        ));
    }
    let mut fixed = vec![None; f.n()];
    for (&i, &v) in subset.iter().zip(assignment) {
        let d = *f.domains.get(i).ok_or_else(|| {
            Error::InvalidArgument(format!("position {i} outside the {} inputs", f.n()))
        })?;
        if v >= d {
            return Err(Error::OutOfDomain {
                party: i,
                value: v as u64,
                domain: d,
            });
        }
        fixed[i] = Some(v);
    }
    Ok(forced_unchecked(f, &fixed))
}

fn forced_unchecked(f: &FunctionTable, fixed: &[Option<u32>]) -> Option<Token> {
    let free: Vec<usize> = (0..f.n()).filter(|&i| fixed[i].is_none()).collect();
    let radix: Vec<u32> = free.iter().map(|&i| f.domains[i]).collect();
    let mut x: Vec<u32> = fixed.iter().map(|v| v.unwrap_or(0)).collect();
    let mut rest = vec![0u32; free.len()];
    let first = f.eval(&x).clone();
    while odometer(&mut rest, &radix) {
        for (&i, &v) in free.iter().zip(&rest) {
            x[i] = v;
        }
        if *f.eval(&x) != first {
            return None;
        }
    }
    Some(first)
}

/// Every value `subset` can force, each with the first assignment forcing it.
/// An assignment to a subset and the value it forces.
type Forcing = (Vec<u32>, Token);

fn forcings(f: &FunctionTable, subset: &[usize]) -> Vec<Forcing> {
    let radix: Vec<u32> = subset.iter().map(|&i| f.domains[i]).collect();
    let mut a = vec![0u32; subset.len()];
    let mut fixed = vec![None; f.n()];
    let mut found: Vec<(Vec<u32>, Token)> = Vec::new();
    loop {
        for (&i, &v) in subset.iter().zip(&a) {
            fixed[i] = Some(v);
        }
        if let Some(y) = forced_unchecked(f, &fixed) {
            if !found.iter().any(|(_, t)| *t == y) {
                found.push((a.clone(), y));
            }
        }
        if !odometer(&mut a, &radix) {
            return found;
        }
    }
}

/// One subset's forcing assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetForcing {
    pub subset: Vec<usize>,
    pub assignment: Vec<u32>,
    pub value: Token,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessKind {
    /// Each subset forces its own value.
    Weak,
    /// Every subset forces `y_star`; `qualifying` lists all values that work.
    Strong {
        y_star: Token,
        qualifying: Vec<Token>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceWitness {
    pub k: usize,
    #[serde(flatten)]
    pub kind: WitnessKind,
    pub entries: Vec<SubsetForcing>,
}

impl DominanceWitness {
    pub fn y_star(&self) -> Option<&Token> {
        match &self.kind {
            WitnessKind::Strong { y_star, .. } => Some(y_star),
            WitnessKind::Weak => None,
        }
    }

    /// The forcing assignment stored for `subset`.
    pub fn forcing_for(&self, subset: &[usize]) -> Option<&SubsetForcing> {
        self.entries.iter().find(|e| e.subset == subset)
    }

    /// Re-validates every entry against the table and checks that all
    /// k-subsets are covered.
    pub fn recheck(&self, f: &FunctionTable) -> bool {
        let all = subsets(f.n(), self.k);
        if all.len() != self.entries.len() {
            return false;
        }
        all.iter().zip(&self.entries).all(|(s, e)| {
            *s == e.subset
                && matches!(forced_value(f, &e.subset, &e.assignment), Ok(Some(ref y)) if *y == e.value)
                && self.y_star().is_none_or(|y| *y == e.value)
        })
    }
}

fn check_k(f: &FunctionTable, k: usize) -> Result<()> {
    if k == 0 || k > f.n() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            f.n()
        )));
    }
    Ok(())
}

pub fn is_weakly_k_dominated(f: &FunctionTable, k: usize) -> Result<Option<DominanceWitness>> {
    check_k(f, k)?;
    let mut entries = Vec::new();
    for subset in subsets(f.n(), k) {
        let Some((assignment, value)) = forcings(f, &subset).into_iter().next() else {
            return Ok(None);
        };
        entries.push(SubsetForcing {
            subset,
            assignment,
            value,
        });
    }
    Ok(Some(DominanceWitness {
        k,
        kind: WitnessKind::Weak,
        entries,
    }))
}

pub fn is_k_dominated(f: &FunctionTable, k: usize) -> Result<Option<DominanceWitness>> {
    check_k(f, k)?;
    let per_subset: Vec<(Vec<usize>, Vec<Forcing>)> = subsets(f.n(), k)
        .into_iter()
        .map(|s| {
            let found = forcings(f, &s);
            (s, found)
        })
        .collect();
    let qualifying: Vec<Token> = f
        .range()
        .into_iter()
        .filter(|y| {
            per_subset
                .iter()
                .all(|(_, found)| found.iter().any(|(_, t)| t == y))
        })
        .collect();
    let Some(y_star) = qualifying.first().cloned() else {
        return Ok(None);
    };
    let entries = per_subset
        .into_iter()
        .map(|(subset, found)| {
            let (assignment, value) = found
                .into_iter()
                .find(|(_, t)| *t == y_star)
                .expect("qualifying value is forced by every subset");
            SubsetForcing {
                subset,
                assignment,
                value,
            }
        })
        .collect();
    Ok(Some(DominanceWitness {
        k,
        kind: WitnessKind::Strong { y_star, qualifying },
        entries,
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: usize,
    pub weak: bool,
    pub strong: bool,
    pub y_star: Option<Token>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceProfile {
    pub n: usize,
    pub rows: Vec<ProfileRow>,
    pub minimal_strong_k: Option<usize>,
    /// Strong k-dominance implies strong (k+1)-dominance on this table.
    pub monotone: bool,
}

impl DominanceProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,weak,strong,y_star\n");
        for r in &self.rows {
            let y = r.y_star.as_ref().map(|t| t.0.as_str()).unwrap_or("");
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.k,
                r.weak,
                r.strong,
                csv_field(y)
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Weak and strong flags for every `k`. Fails if the table is larger than
/// `budget` entries.
pub fn dominance_profile(f: &FunctionTable, budget: u128) -> Result<DominanceProfile> {
    if f.size() as u128 > budget {
        return Err(Error::BudgetExceeded {
            size: f.size() as u128,
            budget,
        });
    }
    let mut rows = Vec::new();
    for k in 1..=f.n() {
        let weak = is_weakly_k_dominated(f, k)?.is_some();
        let strong = is_k_dominated(f, k)?;
        rows.push(ProfileRow {
            k,
            weak,
            strong: strong.is_some(),
            y_star: strong.and_then(|w| w.y_star().cloned()),
        });
    }
    let minimal_strong_k = rows.iter().find(|r| r.strong).map(|r| r.k);
    let monotone = rows.windows(2).all(|w| !w[0].strong || w[1].strong);
    Ok(DominanceProfile {
        n: f.n(),
        rows,
        minimal_strong_k,
        monotone,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub m: usize,
    pub weak: bool,
    pub strong: bool,
    pub holds: bool,
    /// The weak witness when the implication fails.
    pub counterexample: Option<DominanceWitness>,
}

/// Checks weak m-dominance ⇒ m-dominance. Requires `1 ≤ m ≤ n/3`.
pub fn verify_weak_implies_strong(f: &FunctionTable, m: usize) -> Result<ClaimVerdict> {
    if m == 0 || 3 * m > f.n() {
        return Err(Error::Precondition(format!(
            "the implication needs 1 ≤ m ≤ n/3, got m={m}, n={}",
            f.n()
        )));
    }
    let weak = is_weakly_k_dominated(f, m)?;
    let strong = is_k_dominated(f, m)?.is_some();
    let holds = weak.is_none() || strong;
    Ok(ClaimVerdict {
        m,
        weak: weak.is_some(),
        strong,
        holds,
        counterexample: if holds { None } else { weak },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Computable,
    NotComputable,
    /// Requires a protocol in the broadcast model; not decided here.
    Conditional,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Computable => "COMPUTABLE",
            Verdict::NotComputable => "NOT_COMPUTABLE",
            Verdict::Conditional => "CONDITIONAL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub n: usize,
    pub t: usize,
    pub verdict: Verdict,
    /// The dominance order that decides the verdict.
    pub k: usize,
    pub reason: String,
    pub witness: Option<DominanceWitness>,
}

/// Computability of `f` in the point-to-point model with `t` of `n` parties
/// corrupted. Requires `n ≥ 3` and `n/3 ≤ t < n`.
pub fn classify(f: &FunctionTable, n: usize, t: usize) -> Result<Classification> {
    if f.n() != n {
        return Err(Error::Precondition(format!(
            "table has {} parties, classification asked for {n}",
            f.n()
        )));
    }
    if n < 3 || 3 * t < n || t >= n {
        return Err(Error::Precondition(format!(
            "classification needs n ≥ 3 and n/3 ≤ t < n, got n={n}, t={t}"
        )));
    }
    if 2 * t < n {
        let k = n - 2 * t;
        let witness = is_k_dominated(f, k)?;
        let (verdict, reason) = match &witness {
            Some(_) => (Verdict::Computable, format!("{k}-dominated")),
            None => (Verdict::NotComputable, format!("not {k}-dominated")),
        };
        return Ok(Classification {
            n,
            t,
            verdict,
            k,
            reason,
            witness,
        });
    }
    let witness = is_k_dominated(f, 1)?;
    let (verdict, reason) = match &witness {
        None => (Verdict::NotComputable, "not 1-dominated".to_string()),
        Some(_) => (
            Verdict::Conditional,
            "1-dominated; requires a t-secure broadcast-model protocol".to_string(),
        ),
    };
    Ok(Classification {
        n,
        t,
        verdict,
        k: 1,
        reason,
        witness,
    })
}

/// Named tables used in examples and tests.
pub mod examples {
    use super::FunctionTable;

    pub fn or(n: usize) -> FunctionTable {
        FunctionTable::boolean(n, |x| x.contains(&1))
    }

    pub fn xor(n: usize) -> FunctionTable {
        FunctionTable::boolean(n, |x| x.iter().filter(|&&b| b == 1).count() % 2 == 1)
    }

    /// `(x₁ ∧ x₂) ∨ (x₃ ∧ x₄)`.
    pub fn and_or() -> FunctionTable {
        FunctionTable::boolean(4, |x| (x[0] & x[1]) | (x[2] & x[3]) == 1)
    }

    /// 1 iff at least `k` of the `n` bits are set.
    pub fn k_of_n(k: usize, n: usize) -> FunctionTable {
        FunctionTable::boolean(n, |x| x.iter().filter(|&&b| b == 1).count() >= k)
    }
}

/// Counts how often each output value occurs.
pub fn output_histogram(f: &FunctionTable) -> BTreeMap<Token, usize> {
    let mut h = BTreeMap::new();
    for t in f.outputs() {
        *h.entry(t.clone()).or_default() += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> Token {
        Token::new(s)
    }

    #[test]
    fn forced_values_of_or_and_xor() {
        let f = or(3);
        assert_eq!(forced_value(&f, &[0], &[1]).unwrap(), Some(t("1")));
        assert_eq!(forced_value(&f, &[0], &[0]).unwrap(), None);
        let g = xor(3);
        for a in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(forced_value(&g, &[0, 1], &a).unwrap(), None);
        }
        assert!(matches!(
            forced_value(&f, &[0], &[2]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn and_or_is_weakly_but_not_strongly_two_dominated() {
        let f = and_or();
        let w = is_weakly_k_dominated(&f, 2).unwrap().unwrap();
        assert!(w.recheck(&f));
        let e12 = w.forcing_for(&[0, 1]).unwrap();
        assert_eq!(
            (e12.assignment.as_slice(), &e12.value),
            (&[1, 1][..], &t("1"))
        );
        let e13 = w.forcing_for(&[0, 2]).unwrap();
        assert_eq!(
            (e13.assignment.as_slice(), &e13.value),
            (&[0, 0][..], &t("0"))
        );
        assert!(is_k_dominated(&f, 2).unwrap().is_none());
    }

    #[test]
    fn two_of_four_is_two_dominated_by_one() {
        let f = k_of_n(2, 4);
        let w = is_k_dominated(&f, 2).unwrap().unwrap();
        assert_eq!(w.y_star(), Some(&t("1")));
        assert!(w.recheck(&f));
    }

    #[test]
    fn or_is_one_dominated() {
        let w = is_k_dominated(&or(3), 1).unwrap().unwrap();
        assert_eq!(w.y_star(), Some(&t("1")));
    }

    #[test]
    fn xor_profile() {
        let p = dominance_profile(&xor(3), DEFAULT_BUDGET).unwrap();
        let strong: Vec<bool> = p.rows.iter().map(|r| r.strong).collect();
        assert_eq!(strong, [false, false, true]);
        assert_eq!(p.minimal_strong_k, Some(3));
        assert!(p.monotone);
        assert!(is_weakly_k_dominated(&xor(3), 2).unwrap().is_none());
    }

    #[test]
    fn constant_is_dominated_everywhere() {
        let f = FunctionTable::from_fn(vec![3, 2, 2], |_| t("5")).unwrap();
        let p = dominance_profile(&f, DEFAULT_BUDGET).unwrap();
        assert!(p.rows.iter().all(|r| r.strong && r.y_star == Some(t("5"))));
        assert_eq!(p.minimal_strong_k, Some(1));
    }

    #[test]
    fn full_subset_always_forces() {
        let f = xor(4);
        assert!(is_weakly_k_dominated(&f, 4).unwrap().is_some());
    }

    #[test]
    fn tie_break_lists_all_qualifying_values() {
        // single party: both values are forced, the byte-smallest wins
        let f = FunctionTable::from_fn(vec![2], |x| t(if x[0] == 0 { "b" } else { "a" })).unwrap();
        let w = is_k_dominated(&f, 1).unwrap().unwrap();
        assert_eq!(w.y_star(), Some(&t("a")));
        match &w.kind {
            WitnessKind::Strong { qualifying, .. } => assert_eq!(qualifying, &[t("a"), t("b")]),
            WitnessKind::Weak => unreachable!(),
        }
    }

    #[test]
    fn claim_precondition_and_examples() {
        assert!(matches!(
            verify_weak_implies_strong(&k_of_n(2, 4), 2),
            Err(Error::Precondition(_))
        ));
        let v = verify_weak_implies_strong(&or(6), 1).unwrap();
        assert!(v.holds && v.strong);
    }

    #[test]
    fn classification_verdicts() {
        assert_eq!(
            classify(&xor(3), 3, 1).unwrap().verdict,
            Verdict::NotComputable
        );
        assert_eq!(classify(&or(3), 3, 1).unwrap().verdict, Verdict::Computable);
        assert_eq!(
            classify(&xor(4), 4, 2).unwrap().verdict,
            Verdict::NotComputable
        );
        assert_eq!(
            classify(&or(4), 4, 2).unwrap().verdict,
            Verdict::Conditional
        );
        let nine = k_of_n(3, 9);
        let c = classify(&nine, 9, 3).unwrap();
        assert_eq!(c.verdict, Verdict::Computable);
        assert_eq!(c.k, 3);
        assert!(classify(&or(3), 3, 0).is_err());
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let f = and_or();
        assert_eq!(FunctionTable::from_json(&f.to_json()).unwrap(), f);
        let numeric = r#"{"n":2,"domains":[2,2],"outputs":[0,1,1,1]}"#;
        assert_eq!(FunctionTable::from_json(numeric).unwrap(), or(2));
        for bad in [
            r#"{"n":2,"domains":[2,2],"outputs":[0,1,1]}"#,
            r#"{"n":2,"domains":[2,2],"outputs":[0,1,1,[0,1]]}"#,
            r#"{"n":3,"domains":[2,2],"outputs":[0,1,1,1]}"#,
            r#"{"n":1,"domains":[0],"outputs":[]}"#,
            "not json",
        ] {
            assert!(
                matches!(FunctionTable::from_json(bad), Err(Error::MalformedTable(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            dominance_profile(&xor(5), 16),
            Err(Error::BudgetExceeded {
                size: 32,
                budget: 16
            })
        ));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            subsets(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    /// Independent oracle: brute force over the full table, grouping rows by
    /// their restriction to the subset.
    fn naive_forced(f: &FunctionTable, subset: &[usize]) -> BTreeMap<Vec<u32>, BTreeSet<Token>> {
        let mut groups: BTreeMap<Vec<u32>, BTreeSet<Token>> = BTreeMap::new();
        let total: usize = f.domains().iter().map(|&d| d as usize).product();
        for idx in 0..total {
            let mut rem = idx;
            let mut x = vec![0u32; f.n()];
            for i in (0..f.n()).rev() {
                x[i] = (rem % f.domains()[i] as usize) as u32;
                rem /= f.domains()[i] as usize;
            }
            let key: Vec<u32> = subset.iter().map(|&i| x[i]).collect();
            groups.entry(key).or_default().insert(f.eval(&x).clone());
        }
        groups
    }

    fn naive_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    fn naive_weak(f: &FunctionTable, k: usize) -> bool {
        naive_combinations(f.n(), k)
            .iter()
            .all(|s| naive_forced(f, s).values().any(|ys| ys.len() == 1))
    }

    fn naive_strong(f: &FunctionTable, k: usize) -> Option<Token> {
        f.range().into_iter().find(|y| {
            naive_combinations(f.n(), k).iter().all(|s| {
                naive_forced(f, s)
                    .values()
                    .any(|ys| ys.len() == 1 && ys.contains(y))
            })
        })
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize) -> FunctionTable {
        let style = rng.gen_range(0..3);
        let p_one = rng.gen_range(0.05..0.95);
        let thr = rng.gen_range(1..=n);
        FunctionTable::boolean(n, |x| match style {
            0 => rng_bit(x, p_one),
            1 => x.iter().filter(|&&b| b == 1).count() >= thr,
            _ => rng_bit(x, 0.5) && x.contains(&1),
        })
    }

    fn rng_bit(x: &[u32], p: f64) -> bool {
        // stable per-row pseudo-randomness keyed by the row and p
        let row = x.iter().fold(0u64, |a, &b| a * 2 + b as u64);
        let mut r = ChaCha8Rng::seed_from_u64(row ^ p.to_bits());
        r.gen_bool(p)
    }

    #[test]
    fn deciders_agree_with_naive_enumerator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=5);
            let f = random_table(&mut rng, n);
            for k in 1..=n {
                let weak = is_weakly_k_dominated(&f, k).unwrap();
                let strong = is_k_dominated(&f, k).unwrap();
                assert_eq!(weak.is_some(), naive_weak(&f, k));
                assert_eq!(
                    strong.as_ref().and_then(|w| w.y_star().cloned()),
                    naive_strong(&f, k)
                );
                assert!(weak.is_none_or(|w| w.recheck(&f)));
                assert!(strong.is_none_or(|w| w.recheck(&f)));
            }
        }
    }

    proptest! {
        #[test]
        fn strong_dominance_is_monotone(bits in proptest::collection::vec(any::<bool>(), 32)) {
            let f = FunctionTable::boolean(5, |x| {
                bits[x.iter().fold(0usize, |a, &b| a * 2 + b as usize)]
            });
            let p = dominance_profile(&f, DEFAULT_BUDGET).unwrap();
            prop_assert!(p.monotone);
            prop_assert_eq!(p.rows.last().map(|r| r.strong), Some(true));
        }

        #[test]
        fn weak_implies_strong_for_small_m(bits in proptest::collection::vec(any::<bool>(), 64)) {
            let f = FunctionTable::boolean(6, |x| {
                bits[x.iter().fold(0usize, |a, &b| a * 2 + b as usize)]
            });
            for m in 1..=2 {
                prop_assert!(verify_weak_implies_strong(&f, m).unwrap().holds);
            }
        }
    }
}
