//! Rooted plane trees: enumeration, weights and subclass sums.
//!
//! Trees of a given size are produced in a fixed order: the root's child
//! subtree sizes run through the compositions of `n - 1` in lexicographic
//! order, and for each composition the children vary with the first child
//! slowest. The canonical text form is the balanced-parentheses string,
//! e.g. `(()())` for a root with two leaves.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::error::{Error, Result};
use crate::family::OffspringSpec;

/// Largest size handled by the enumeration oracle.
pub const MAX_ENUMERATION_SIZE: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PlaneTree {
    children: Vec<PlaneTree>,
}

impl PlaneTree {
    pub fn leaf() -> Self {
        PlaneTree::default()
    }

    pub fn node(children: Vec<PlaneTree>) -> Self {
        PlaneTree { children }
    }

    pub fn children(&self) -> &[PlaneTree] {
        &self.children
    }

    pub fn outdegree(&self) -> usize {
        self.children.len()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(PlaneTree::size).sum::<usize>()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    pub fn leaves(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(PlaneTree::leaves).sum()
        }
    }

    /// `k_j`: the number of nodes with exactly `j` children.
    pub fn outdegree_profile(&self) -> Vec<usize> {
        let mut profile = Vec::new();
        self.visit(&mut |node| {
            let d = node.outdegree();
            if profile.len() <= d {
                profile.resize(d + 1, 0);
            }
            profile[d] += 1;
        });
        profile
    }

    fn visit<F: FnMut(&PlaneTree)>(&self, f: &mut F) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    /// Rebuilds a tree from the outdegrees of its nodes listed in
    /// breadth-first order.
    pub fn from_bfs_outdegrees(degrees: &[usize]) -> Result<Self> {
        let n = degrees.len();
        if n == 0 || degrees.iter().sum::<usize>() != n - 1 {
            return Err(Error::Parse("outdegree sequence does not describe a tree".into()));
        }
        let mut first_child = Vec::with_capacity(n);
        let mut next = 1;
        for (i, &d) in degrees.iter().enumerate() {
            if next <= i && i > 0 {
                return Err(Error::Parse("outdegree sequence is disconnected".into()));
            }
            first_child.push(next);
            next += d;
        }
        let mut built: Vec<Option<PlaneTree>> = vec![None; n];
        for i in (0..n).rev() {
            let children = (first_child[i]..first_child[i] + degrees[i])
                .map(|c| built[c].take().expect("child built before parent"))
                .collect();
            built[i] = Some(PlaneTree::node(children));
        }
        Ok(built[0].take().expect("root"))
    }

    /// Balanced-parentheses encoding.
    pub fn to_parens(&self) -> String {
        let mut s = String::with_capacity(2 * self.size());
        self.write_parens(&mut s);
        s
    }

    fn write_parens(&self, s: &mut String) {
        s.push('(');
        for c in &self.children {
            c.write_parens(s);
        }
        s.push(')');
    }
}

impl fmt::Display for PlaneTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_parens())
    }
}

impl FromStr for PlaneTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a balanced-parentheses tree: {s:?}"));
        let mut stack: Vec<Vec<PlaneTree>> = Vec::new();
        let mut root = None;
        for ch in s.trim().chars() {
            if root.is_some() {
                return Err(bad());
            }
            match ch {
                '(' => stack.push(Vec::new()),
                ')' => {
                    let node = PlaneTree::node(stack.pop().ok_or_else(bad)?);
                    match stack.last_mut() {
                        Some(parent) => parent.push(node),
                        None => root = Some(node),
                    }
                }
                _ => return Err(bad()),
            }
        }
        root.ok_or_else(bad)
    }
}

/// A named, decidable subclass of plane trees.
#[derive(Clone)]
pub struct SubclassPredicate {
    name: String,
    accepts: Arc<dyn Fn(&PlaneTree) -> bool + Send + Sync>,
}

impl SubclassPredicate {
    pub fn new(
        name: impl Into<String>,
        accepts: impl Fn(&PlaneTree) -> bool + Send + Sync + 'static,
    ) -> Self {
        SubclassPredicate {
            name: name.into(),
            accepts: Arc::new(accepts),
        }
    }

    pub fn all() -> Self {
        Self::new("all", |_| true)
    }

    pub fn root_outdegree(k: usize) -> Self {
        Self::new(format!("root-outdegree-{k}"), move |t| t.outdegree() == k)
    }

    /// Every node has at most `k` children.
    pub fn max_outdegree(k: usize) -> Self {
        Self::new(format!("max-outdegree-{k}"), move |t| {
            t.outdegree_profile().len() <= k + 1
        })
    }

    pub fn height(h: usize) -> Self {
        Self::new(format!("height-{h}"), move |t| t.height() == h)
    }

    pub fn leaves(k: usize) -> Self {
        Self::new(format!("leaves-{k}"), move |t| t.leaves() == k)
    }

    /// Parses `all`, `root-outdegree-K`, `max-outdegree-K`, `height-H` or `leaves-K`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "all" {
            return Ok(Self::all());
        }
        let (prefix, arg) = name
            .rsplit_once('-')
            .ok_or_else(|| Error::Parse(format!("unknown subclass {name:?}")))?;
        let k: usize = arg
            .parse()
            .map_err(|_| Error::Parse(format!("bad subclass argument in {name:?}")))?;
        match prefix {
            "root-outdegree" => Ok(Self::root_outdegree(k)),
            "max-outdegree" => Ok(Self::max_outdegree(k)),
            "height" => Ok(Self::height(k)),
            "leaves" => Ok(Self::leaves(k)),
            _ => Err(Error::Parse(format!("unknown subclass {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn accepts(&self, tree: &PlaneTree) -> bool {
        (self.accepts)(tree)
    }
}

impl fmt::Debug for SubclassPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SubclassPredicate").field(&self.name).finish()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::SizeCap {
            n,
            max: MAX_ENUMERATION_SIZE,
        });
    }
    Ok(())
}

/// All rooted plane trees with `n` nodes, each exactly once.
pub fn enumerate(n: usize) -> Result<std::vec::IntoIter<PlaneTree>> {
    check_size(n)?;
    let mut by_size: Vec<Vec<PlaneTree>> = vec![Vec::new(), vec![PlaneTree::leaf()]];
    for m in 2..=n {
        let mut trees = Vec::new();
        for composition in compositions(m - 1) {
            let mut partial: Vec<Vec<PlaneTree>> = vec![Vec::new()];
            for &part in &composition {
                partial = partial
                    .into_iter()
                    .flat_map(|prefix| {
                        by_size[part].iter().map(move |child| {
                            let mut next = prefix.clone();
                            next.push(child.clone());
                            next
                        })
                    })
                    .collect();
            }
            trees.extend(partial.into_iter().map(PlaneTree::node));
        }
        by_size.push(trees);
    }
    Ok(std::mem::take(&mut by_size[n]).into_iter())
}

/// Compositions of `m` in lexicographic order.
fn compositions(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=m {
        for mut rest in compositions(m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `omega(a) = prod_j b_j^{k_j(a)}` with `0^0 = 1`.
pub fn weight(tree: &PlaneTree, spec: &OffspringSpec) -> BigRational {
    tree.outdegree_profile()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .fold(BigRational::one(), |acc, (j, &k)| {
            acc * Pow::pow(spec.coeff_exact(j), k as u32)
        })
}

/// Floating-point weight.
pub fn weight_f64(tree: &PlaneTree, spec: &OffspringSpec) -> f64 {
    tree.outdegree_profile()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(j, &k)| spec.coeff(j).powi(k as i32))
        .product()
}

/// `R_n = sum of omega(a)` over trees of size `n` accepted by `pred`.
pub fn sum_weights(n: usize, spec: &OffspringSpec, pred: &SubclassPredicate) -> Result<BigRational> {
    Ok(enumerate(n)?
        .filter(|a| pred.accepts(a))
        .map(|a| weight(&a, spec))
        .fold(BigRational::zero(), |acc, w| acc + w))
}

/// `P(T_t = a) = omega(a) t^{n-1} / psi(t)^n`.
pub fn tree_probability(tree: &PlaneTree, spec: &OffspringSpec, t: f64) -> Result<f64> {
    spec.check_domain(t)?;
    let n = tree.size();
    let w = weight_f64(tree, spec);
    if w == 0.0 {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(if n == 1 { 1.0 } else { 0.0 });
    }
    Ok((w.ln() + (n as f64 - 1.0) * t.ln() - n as f64 * spec.ln_psi(t)?).exp())
}

/// Catalan number `C_n`, exactly.
pub fn catalan(n: usize) -> BigInt {
    let mut c = BigInt::one();
    for k in 0..n {
        c = c * BigInt::from(2 * (2 * k + 1)) / BigInt::from(k + 2);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrange::solve_exact;
    use std::collections::HashSet;

    fn ints(c: &[i64]) -> Vec<BigRational> {
        c.iter().map(|&x| BigRational::from_integer(x.into())).collect()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn t(s: &str) -> PlaneTree {
        s.parse().unwrap()
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(enumerate(1).unwrap().count(), 1);
        let three: Vec<String> = enumerate(3).unwrap().map(|a| a.to_parens()).collect();
        assert_eq!(three, vec!["(()())", "((()))"]);
        assert_eq!(enumerate(5).unwrap().count(), 14);
        // Recurrence oracle C_{n+1} = sum C_i C_{n-i}.
        let mut c = vec![1u64];
        for m in 0..10 {
            c.push((0..=m).map(|i| c[i] * c[m - i]).sum());
        }
        for n in 1..=10 {
            assert_eq!(enumerate(n).unwrap().count() as u64, c[n - 1]);
            assert_eq!(catalan(n - 1), BigInt::from(c[n - 1]));
        }
    }

    #[test]
    fn enumerate_distinct_and_sized() {
        for n in 1..=8 {
            let trees: Vec<PlaneTree> = enumerate(n).unwrap().collect();
            let set: HashSet<&PlaneTree> = trees.iter().collect();
            assert_eq!(set.len(), trees.len());
            for a in &trees {
                assert_eq!(a.size(), n);
                let k = a.outdegree_profile();
                assert_eq!(k.iter().sum::<usize>(), n);
                assert_eq!(k.iter().enumerate().map(|(j, kj)| j * kj).sum::<usize>(), n - 1);
            }
        }
    }

    #[test]
    fn enumerate_is_deterministic() {
        let a: Vec<PlaneTree> = enumerate(7).unwrap().collect();
        let b: Vec<PlaneTree> = enumerate(7).unwrap().collect();
        assert_eq!(a, b);
        let four: Vec<String> = enumerate(4).unwrap().map(|a| a.to_parens()).collect();
        assert_eq!(
            four,
            ["(()()())", "(()(()))", "((())())", "((()()))", "(((())))"]
        );
    }

    #[test]
    fn size_cap() {
        assert!(matches!(enumerate(13), Err(Error::SizeCap { n: 13, .. })));
        assert!(enumerate(0).is_err());
    }

    #[test]
    fn parens_round_trip() {
        for n in 1..=7 {
            for a in enumerate(n).unwrap() {
                assert_eq!(a.to_parens().parse::<PlaneTree>().unwrap(), a);
            }
        }
        assert!("(()".parse::<PlaneTree>().is_err());
        assert!("()()".parse::<PlaneTree>().is_err());
        assert!("(x)".parse::<PlaneTree>().is_err());
    }

    #[test]
    fn bfs_reconstruction() {
        let a = t("((()())(()))");
        // BFS outdegrees: root 2, children 2 and 1, then three leaves.
        assert_eq!(PlaneTree::from_bfs_outdegrees(&[2, 2, 1, 0, 0, 0]).unwrap(), a);
        assert!(PlaneTree::from_bfs_outdegrees(&[2, 0]).is_err());
        assert!(PlaneTree::from_bfs_outdegrees(&[0, 1]).is_err());
    }

    #[test]
    fn weight_examples() {
        let geo = OffspringSpec::geometric();
        for a in enumerate(6).unwrap() {
            assert_eq!(weight(&a, &geo), BigRational::one());
        }
        assert_eq!(weight(&t("(()())"), &OffspringSpec::exp()), rat(1, 2));
        let sq = OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap();
        assert_eq!(weight(&t("(())"), &sq), BigRational::zero());
    }

    #[test]
    fn sum_weights_examples() {
        let all = SubclassPredicate::all();
        assert_eq!(sum_weights(3, &OffspringSpec::exp(), &all).unwrap(), rat(3, 2));
        assert_eq!(sum_weights(4, &OffspringSpec::geometric(), &all).unwrap(), rat(5, 1));
        let root1 = SubclassPredicate::root_outdegree(1);
        assert_eq!(sum_weights(3, &OffspringSpec::geometric(), &root1).unwrap(), rat(1, 1));
    }

    #[test]
    fn sum_weights_matches_lagrange() {
        let specs = [
            OffspringSpec::exp(),
            OffspringSpec::geometric(),
            OffspringSpec::polynomial(ints(&[1, 2, 1])).unwrap(),
            OffspringSpec::polynomial(ints(&[1, 1, 0, 1])).unwrap(),
        ];
        for spec in &specs {
            let sol = solve_exact(spec, 8).unwrap();
            for n in 1..=8 {
                assert_eq!(
                    sum_weights(n, spec, &SubclassPredicate::all()).unwrap(),
                    sol.a[n],
                    "{} n={n}",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn tree_probability_examples() {
        let e = std::f64::consts::E;
        let exp = OffspringSpec::exp();
        assert!((tree_probability(&t("()"), &exp, 1.0).unwrap() - 1.0 / e).abs() < 1e-15);
        assert!((tree_probability(&t("(())"), &exp, 1.0).unwrap() - e.powi(-2)).abs() < 1e-15);
        let sq = OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap();
        assert_eq!(tree_probability(&t("(())"), &sq, 1.0).unwrap(), 0.0);
        assert_eq!(tree_probability(&t("()"), &exp, 0.0).unwrap(), 1.0);
        assert!(tree_probability(&t("()"), &OffspringSpec::geometric(), 1.0).is_err());
    }

    #[test]
    fn product_form_matches() {
        let specs = [
            (OffspringSpec::exp(), 3.0),
            (OffspringSpec::geometric(), 0.9),
            (OffspringSpec::polynomial(ints(&[1, 1, 0, 1])).unwrap(), 2.0),
        ];
        for (spec, t_max) in &specs {
            for step in 1..=5 {
                let t = t_max * step as f64 / 5.0;
                let mass = spec.masses(t, 10).unwrap();
                for n in 1..=7 {
                    for a in enumerate(n).unwrap() {
                        let product: f64 = a
                            .outdegree_profile()
                            .iter()
                            .enumerate()
                            .map(|(j, &k)| if k == 0 { 1.0 } else { mass[j].powi(k as i32) })
                            .product();
                        let p = tree_probability(&a, spec, t).unwrap();
                        assert!((p - product).abs() <= 1e-12 * product.max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn predicate_names() {
        for name in ["all", "root-outdegree-1", "max-outdegree-2", "height-3", "leaves-2"] {
            assert_eq!(SubclassPredicate::from_name(name).unwrap().name(), name);
        }
        assert!(SubclassPredicate::from_name("bogus").is_err());
        assert!(SubclassPredicate::from_name("height-x").is_err());
        let binary = SubclassPredicate::max_outdegree(2);
        assert!(binary.accepts(&t("(()())")));
        assert!(!binary.accepts(&t("(()()())")));
        assert!(SubclassPredicate::height(2).accepts(&t("((()))")));
        assert!(SubclassPredicate::leaves(2).accepts(&t("(()(()))")));
    }
}
