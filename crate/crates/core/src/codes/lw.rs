//! Constructive Loomis-Whitney join.
//!
//! Input: for each coordinate `i` of `Sigma^d`, a set of `(d-1)`-tuples listing
//! the remaining coordinates in increasing order. Output: every `v` in
//! `Sigma^d` whose projections are all present.
//!
//! The leaves are combined along a left-leaning binary tree. At a non-root
//! node the left child's partial vectors are grouped by their projection onto
//! the node label; groups no larger than `ceil(P / |right|) - 1` are joined
//! eagerly ("determined"), the rest are passed up. The root joins whatever is
//! left on its label.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};

pub type Tuple = Vec<u64>;

const FREE: u64 = u64::MAX;

/// Exact join of all `d` projections.
pub fn lw_join(projections: &[Vec<Tuple>]) -> Result<Vec<Tuple>> {
    let d = check_arity(projections)?;
    let leaves: Vec<usize> = (0..d).collect();
    let out = join_on_leaves(d, &leaves, projections);
    let sizes: Vec<usize> = projections.iter().map(|p| distinct(p)).collect();
    assert!(
        within_bound(out.len(), &sizes, d - 1),
        "join size {} exceeds (d-1)(prod k)^(1/(d-1)) for sizes {sizes:?}",
        out.len()
    );
    Ok(out)
}

/// Vectors agreeing with at least `d - e` of the projections.
pub fn lw_join_tolerant(projections: &[Vec<Tuple>], e: usize) -> Result<Vec<Tuple>> {
    let d = check_arity(projections)?;
    if e + 2 > d {
        return Err(invalid(format!("error budget {e} outside 0..={}", d - 2)));
    }
    let mut all = Vec::new();
    for b in subsets_up_to(d, e) {
        let leaves: Vec<usize> = (0..d).filter(|i| !b.contains(i)).collect();
        all.extend(join_on_leaves(d, &leaves, projections));
    }
    all.sort();
    all.dedup();
    let bound = tolerant_bound(projections, e);
    assert!(all.len() as f64 <= bound * (1.0 + 1e-9) + 1e-9, "tolerant join size {} exceeds {bound}", all.len());
    Ok(all)
}

/// `sum_{|B| <= e} (d-|B|-1) (prod_{j not in B} k_j)^(1/(d-|B|-1))`.
pub fn tolerant_bound(projections: &[Vec<Tuple>], e: usize) -> f64 {
    let d = projections.len();
    let sizes: Vec<f64> = projections.iter().map(|p| distinct(p) as f64).collect();
    subsets_up_to(d, e)
        .into_iter()
        .map(|b| {
            let p = (d - b.len() - 1) as f64;
            let prod: f64 = (0..d).filter(|i| !b.contains(i)).map(|i| sizes[i]).product();
            p * prod.powf(1.0 / p)
        })
        .sum()
}

/// `(d-1) (prod k_i)^(1/(d-1))` for the plain join.
pub fn join_bound(projections: &[Vec<Tuple>]) -> f64 {
    tolerant_bound(projections, 0)
}

fn check_arity(projections: &[Vec<Tuple>]) -> Result<usize> {
    let d = projections.len();
    if d < 2 {
        return Err(invalid("join needs d >= 2"));
    }
    for p in projections {
        if let Some(t) = p.iter().find(|t| t.len() != d - 1) {
            return Err(Error::DimensionMismatch { expected: d - 1, got: t.len() });
        }
    }
    Ok(d)
}

fn distinct(p: &[Tuple]) -> usize {
    p.iter().collect::<HashSet<_>>().len()
}

fn subsets_up_to(d: usize, e: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..e {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&x: &usize| x + 1);
            for i in start..d {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `size^p <= p^p * prod(sizes)`, exactly.
fn within_bound(size: usize, sizes: &[usize], p: usize) -> bool {
    let lhs = BigUint::from(size).pow(p as u32);
    let prod = sizes.iter().fold(BigUint::from(1u32), |acc, &k| acc * BigUint::from(k));
    lhs <= BigUint::from(p).pow(p as u32) * prod
}

/// Largest integer `t` with `t * r < P`, where `P = prod^(1/p)`; `None` if no
/// non-negative integer qualifies.
fn good_threshold(prod: &BigUint, p: u32, r: usize) -> Option<u64> {
    let below = |t: u64| BigUint::from(t).pow(p) * BigUint::from(r).pow(p) < *prod;
    if !below(0) {
        return None;
    }
    let approx = (prod_to_f64(prod).powf(1.0 / p as f64) / r as f64).floor().min(1e15) as u64;
    let mut t = approx;
    while t > 0 && !below(t) {
        t -= 1;
    }
    while below(t + 1) {
        t += 1;
    }
    Some(t)
}

fn prod_to_f64(x: &BigUint) -> f64 {
    x.to_u64_digits().iter().rev().fold(0.0, |acc, &d| acc * 18446744073709551616.0 + d as f64)
}

/// Partial vectors are full-length with `FREE` outside their coordinate set.
fn project(v: &[u64], keep: &[bool]) -> Vec<u64> {
    v.iter().zip(keep).map(|(&x, &k)| if k { x } else { FREE }).collect()
}

fn merge(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| if x == FREE { y } else { x }).collect()
}

fn expand(i: usize, t: &[u64], d: usize) -> Vec<u64> {
    let mut v = vec![FREE; d];
    let mut it = t.iter();
    for (c, slot) in v.iter_mut().enumerate() {
        if c != i {
            *slot = *it.next().unwrap();
        }
    }
    v
}

fn join_on_leaves(d: usize, leaves: &[usize], projections: &[Vec<Tuple>]) -> Vec<Tuple> {
    let m = leaves.len();
    debug_assert!(m >= 2);
    let leaf_sets: Vec<HashSet<Vec<u64>>> =
        leaves.iter().map(|&i| projections[i].iter().map(|t| expand(i, t, d)).collect()).collect();
    if leaf_sets.iter().any(|s| s.is_empty()) {
        return Vec::new();
    }
    let prod = leaf_sets.iter().fold(BigUint::from(1u32), |acc, s| acc * BigUint::from(s.len()));
    let p = (m - 1) as u32;

    let mut label: Vec<bool> = (0..d).map(|c| c != leaves[0]).collect();
    let mut ndeter: HashSet<Vec<u64>> = leaf_sets[0].clone();
    let mut deter: HashSet<Vec<u64>> = HashSet::new();

    for (step, right_set) in leaf_sets.iter().enumerate().skip(1) {
        let right_leaf = leaves[step];
        let node_label: Vec<bool> = label.iter().enumerate().map(|(c, &l)| l && c != right_leaf).collect();
        let is_root = step == m - 1;

        let left_proj: HashSet<Vec<u64>> = ndeter.iter().map(|v| project(v, &node_label)).collect();
        let right_proj: HashSet<Vec<u64>> = right_set.iter().map(|v| project(v, &node_label)).collect();
        let mut groups: HashMap<Vec<u64>, Vec<&Vec<u64>>> = HashMap::new();
        for v in &ndeter {
            let key = project(v, &node_label);
            if right_proj.contains(&key) {
                groups.entry(key).or_default().push(v);
            }
        }
        let rights: Vec<&Vec<u64>> =
            right_set.iter().filter(|v| left_proj.contains(&project(v, &node_label))).collect();

        let threshold = if is_root || rights.is_empty() { None } else { good_threshold(&prod, p, rights.len()) };
        let mut next_ndeter = HashSet::new();
        for r in &rights {
            let key = project(r, &node_label);
            let Some(group) = groups.get(&key) else { continue };
            let good = is_root || threshold.is_some_and(|t| group.len() as u64 <= t);
            if good {
                for l in group {
                    deter.insert(merge(l, r));
                }
            } else {
                next_ndeter.insert(key);
            }
        }
        ndeter = next_ndeter;
        label = node_label;
    }

    let members: Vec<HashSet<Vec<u64>>> = leaves
        .iter()
        .map(|&i| projections[i].iter().map(|t| expand(i, t, d)).collect())
        .collect();
    let mut out: Vec<Tuple> = deter
        .into_iter()
        .filter(|v| {
            leaves.iter().zip(&members).all(|(&i, set)| {
                let mut key = v.clone();
                key[i] = FREE;
                set.contains(&key)
            })
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn brute(projections: &[Vec<Tuple>], sigma: u64, need: usize) -> Vec<Tuple> {
        let d = projections.len();
        let sets: Vec<HashSet<&Tuple>> = projections.iter().map(|p| p.iter().collect()).collect();
        let total = sigma.pow(d as u32);
        let mut out = Vec::new();
        for code in 0..total {
            let mut v = vec![0u64; d];
            let mut c = code;
            for slot in v.iter_mut().rev() {
                *slot = c % sigma;
                c /= sigma;
            }
            let hits = (0..d)
                .filter(|&i| {
                    let t: Tuple = v.iter().enumerate().filter(|&(c, _)| c != i).map(|(_, &x)| x).collect();
                    sets[i].contains(&t)
                })
                .count();
            if hits >= need {
                out.push(v);
            }
        }
        out
    }

    fn random_instance(rng: &mut ChaCha8Rng, d: usize, sigma: u64, max: usize) -> Vec<Vec<Tuple>> {
        (0..d)
            .map(|_| {
                let k = rng.random_range(0..=max);
                (0..k).map(|_| (0..d - 1).map(|_| rng.random_range(0..sigma)).collect()).collect()
            })
            .collect()
    }

    #[test]
    fn two_dimensional_product() {
        let p = vec![vec![vec![5], vec![6]], vec![vec![1], vec![2], vec![3]]];
        let s = lw_join(&p).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.contains(&vec![1, 5]) && s.contains(&vec![3, 6]));
    }

    #[test]
    fn empty_projection_gives_empty_join() {
        let p = vec![vec![vec![0, 1]], vec![], vec![vec![1, 1]]];
        assert!(lw_join(&p).unwrap().is_empty());
        assert!(lw_join(&[vec![vec![1]]]).is_err());
        assert!(lw_join(&[vec![vec![1, 2]], vec![vec![1]]]).is_err());
    }

    #[test]
    fn matches_oracle_d3_sigma4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p: Vec<Vec<Tuple>> = (0..3)
                .map(|_| (0..6).map(|_| vec![rng.random_range(0..4), rng.random_range(0..4)]).collect())
                .collect();
            assert_eq!(lw_join(&p).unwrap(), brute(&p, 4, 3));
        }
    }

    #[test]
    fn dense_instances_exercise_threshold() {
        // every projection full: S = Sigma^d, bound is tight
        for (d, sigma) in [(3usize, 4u64), (4, 3)] {
            let full: Vec<Tuple> = (0..sigma.pow(d as u32 - 1))
                .map(|mut c| {
                    let mut t = vec![0; d - 1];
                    for slot in t.iter_mut().rev() {
                        *slot = c % sigma;
                        c /= sigma;
                    }
                    t
                })
                .collect();
            let p = vec![full; d];
            let s = lw_join(&p).unwrap();
            assert_eq!(s.len() as u64, sigma.pow(d as u32));
        }
    }

    #[test]
    fn tolerant_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let d = rng.random_range(3..=4);
            let e = rng.random_range(0..=1);
            let mut p = random_instance(&mut rng, d, 3, 12);
            if rng.random_bool(0.3) {
                p[rng.random_range(0..d)].clear();
            }
            assert_eq!(lw_join_tolerant(&p, e).unwrap(), brute(&p, 3, d - e), "d={d} e={e}");
        }
        let p = random_instance(&mut rng, 3, 4, 10);
        assert_eq!(lw_join_tolerant(&p, 0).unwrap(), lw_join(&p).unwrap());
        assert!(lw_join_tolerant(&p, 2).is_err());
    }

    #[test]
    fn threshold_is_exact() {
        // P = 8 exactly, |R| = 2: largest t with t*2 < 8 is 3
        assert_eq!(good_threshold(&BigUint::from(64u32), 2, 2), Some(3));
        assert_eq!(good_threshold(&BigUint::from(65u32), 2, 2), Some(4));
        assert_eq!(good_threshold(&BigUint::from(0u32), 2, 2), None);
        assert_eq!(good_threshold(&BigUint::from(1u32), 1, 1), Some(0));
    }
}
