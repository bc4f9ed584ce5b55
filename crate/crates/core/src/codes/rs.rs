//! Reed-Solomon list recovery in the unique-decoding regime.

use std::collections::{BTreeSet, HashSet};

use crate::error::{invalid, Result};
use crate::field::FieldSpec;

use super::{CodeDescriptor, CodeKind, ListRecoveryInstance};

/// Coefficients (constant first) of the Lagrange basis polynomials through
/// `points`.
fn lagrange_basis(f: &FieldSpec, points: &[u64]) -> Result<Vec<Vec<u64>>> {
    let b = points.len();
    let mut out = Vec::with_capacity(b);
    for (m, &pm) in points.iter().enumerate() {
        let mut poly = vec![1u64];
        let mut denom = 1u64;
        for (n, &pn) in points.iter().enumerate() {
            if n == m {
                continue;
            }
            // poly *= (x - pn)
            let mut next = vec![0u64; poly.len() + 1];
            for (s, &c) in poly.iter().enumerate() {
                next[s + 1] = f.add(next[s + 1], c);
                next[s] = f.sub(next[s], f.mul(c, pn));
            }
            poly = next;
            denom = f.mul(denom, f.sub(pm, pn));
        }
        let inv = f.inv(denom)?;
        out.push(poly.into_iter().map(|c| f.mul(c, inv)).collect::<Vec<_>>());
        debug_assert_eq!(out[m].len(), b);
    }
    Ok(out)
}

fn combinations(r: usize, b: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(b);
    fn rec(start: usize, r: usize, b: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == b {
            out.push(cur.clone());
            return;
        }
        for i in start..r {
            if r - i < b - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, r, b, cur, out);
            cur.pop();
        }
    }
    rec(0, r, b, &mut cur, &mut out);
    out
}

/// Minimum number of agreeing coordinates, `ceil((1 - rho) r)`.
pub fn agreement_threshold(rho: f64, r: usize) -> usize {
    ((1.0 - rho) * r as f64 - 1e-9).ceil().max(0.0) as usize
}

/// All messages whose codeword has its `j`-th symbol in `sets[j]` for at
/// least `ceil((1 - rho) r)` coordinates.
///
/// Any such message agrees with the sets on at least `b` coordinates, so it is
/// the interpolant through some `b`-subset of coordinates and some choice of
/// listed symbols there; every candidate produced that way is then checked
/// against all `r` sets.
pub fn rs_list_recover(code: &CodeDescriptor, instance: &ListRecoveryInstance) -> Result<Vec<u64>> {
    let CodeKind::ReedSolomon { field, b, points } = &code.kind else {
        return Err(invalid("rs_list_recover needs a Reed-Solomon code"));
    };
    let r = points.len();
    let (rho, sets) = (instance.rho, &instance.sets);
    if sets.len() != r {
        return Err(invalid(format!("expected {r} sets, got {}", sets.len())));
    }
    if !(rho >= 0.0 && rho < 0.5 * (1.0 - *b as f64 / r as f64)) {
        return Err(invalid(format!(
            "rho = {rho} outside the unique-decoding regime rho < (1 - b/r)/2 = {}",
            0.5 * (1.0 - *b as f64 / r as f64)
        )));
    }
    let q = code.alphabet();
    let need = agreement_threshold(rho, r);
    let lookup: Vec<HashSet<u64>> = sets.iter().map(|s| s.iter().copied().filter(|&v| v < q).collect()).collect();
    let lists: Vec<Vec<u64>> = lookup.iter().map(|s| s.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()).collect();

    let layer_q = field.q;
    let layer_n = code.layer_messages();
    let mut found = BTreeSet::new();
    let mut choice = vec![0u64; *b];
    for subset in combinations(r, *b) {
        if subset.iter().any(|&j| lists[j].is_empty()) {
            continue;
        }
        let pts: Vec<u64> = subset.iter().map(|&j| points[j]).collect();
        let basis = lagrange_basis(field, &pts)?;
        let mut idx = vec![0usize; *b];
        loop {
            for (m, &j) in subset.iter().enumerate() {
                choice[m] = lists[j][idx[m]];
            }
            // interpolate every layer independently
            let mut msg = 0u64;
            let mut scale = 1u64;
            for a in 0..code.layers {
                let qa = layer_q.pow(a);
                let mut layer = 0u64;
                let mut digit_scale = 1u64;
                for s in 0..*b {
                    let mut coeff = 0u64;
                    for m in 0..*b {
                        let y = (choice[m] / qa) % layer_q;
                        coeff = field.add(coeff, field.mul(y, basis[m][s]));
                    }
                    layer += coeff * digit_scale;
                    digit_scale = digit_scale.wrapping_mul(layer_q);
                }
                msg += layer * scale;
                scale = scale.wrapping_mul(layer_n);
            }
            if !found.contains(&msg) {
                let cw = code.encode_unchecked(msg);
                let agree = cw.iter().zip(&lookup).filter(|(c, s)| s.contains(c)).count();
                if agree >= need {
                    found.insert(msg);
                }
            }
            // next choice
            let mut pos = 0;
            loop {
                if pos == *b {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < lists[subset[pos]].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == *b {
                break;
            }
        }
    }
    Ok(found.into_iter().collect())
}
