//! Partial-fraction factoring of an unfactored estimate into additive
//! submodels, and the matching unfactored structure.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::{AdditiveModel, CtSubmodel, CtTransferFunction, ModelStructure};
use crate::poly::Polynomial;

/// Single-submodel structure whose rational function can represent any
/// model of the additive `structure`: `n = sum n_i`,
/// `m = max_i (m_i + l_i + sum_{k != i} n_k)` with `l_i` the integrator order
/// carried by the other submodels' common denominator.
pub fn unfactored_structure(structure: &ModelStructure) -> ModelStructure {
    let total: usize = structure.orders.iter().map(|(n, _)| n).sum();
    let l = structure.integrator_order;
    let m = structure
        .orders
        .iter()
        .enumerate()
        .map(|(i, &(n, m))| m + total - n + if i == 0 { 0 } else { l })
        .max()
        .unwrap_or(0);
    ModelStructure {
        orders: vec![(total, m)],
        integrator_order: l,
        input_delay: structure.input_delay,
    }
}

/// Parameters of `model` written over the common denominator, packed for
/// [`unfactored_structure`].
pub fn unfactored_parameters(model: &AdditiveModel) -> Vec<f64> {
    let s = unfactored_structure(&model.structure());
    let (n, m) = s.orders[0];
    let l = model.integrator_order;
    let den = model.submodels.iter().fold(Polynomial::one(), |acc, s| &acc * s.a());
    let mut num = Polynomial::zero();
    for (i, s) in model.submodels.iter().enumerate() {
        let others = model
            .submodels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .fold(Polynomial::one(), |acc, (_, o)| &acc * o.a());
        let term = &others * s.b();
        num = &num + &if i == 0 { term } else { term.shift(l) };
    }
    (1..=n).map(|k| den.coeff(k)).chain((0..=m).map(|k| num.coeff(k))).collect()
}

fn cmul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn monic_from(roots: &[Complex64]) -> Vec<Complex64> {
    roots
        .iter()
        .fold(vec![Complex64::new(1.0, 0.0)], |acc, r| cmul(&acc, &[-r, Complex64::new(1.0, 0.0)]))
}

fn conjugate_closed(group: &[Complex64]) -> bool {
    let tol = |r: &Complex64| 1e-6 * r.norm().max(1.0);
    group.iter().all(|r| {
        if r.im.abs() <= tol(r) {
            return true;
        }
        let want = r.conj();
        let have = group.iter().filter(|q| (*q - want).norm() <= tol(r)).count();
        let same = group.iter().filter(|q| (*q - r).norm() <= tol(r)).count();
        have == same
    })
}

/// Visit every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Assign `roots` to the slots of `reference` (one reference root per
/// slot) minimizing the total distance. Exhaustive up to eight roots,
/// greedy beyond.
fn match_roots(roots: &[Complex64], reference: &[Complex64]) -> Vec<Complex64> {
    let n = roots.len();
    if n <= 8 {
        let mut best = f64::INFINITY;
        let mut best_p: Vec<usize> = (0..n).collect();
        for_each_permutation(n, |p| {
            let cost: f64 = p.iter().enumerate().map(|(slot, &k)| (roots[k] - reference[slot]).norm()).sum();
            if cost < best {
                best = cost;
                best_p = p.to_vec();
            }
        });
        return best_p.iter().map(|&k| roots[k]).collect();
    }
    let mut free: Vec<Option<Complex64>> = roots.iter().copied().map(Some).collect();
    reference
        .iter()
        .map(|r| {
            let (idx, _) = free
                .iter()
                .enumerate()
                .filter_map(|(i, q)| q.map(|q| (i, (q - r).norm())))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("as many roots as slots");
            free[idx].take().unwrap()
        })
        .collect()
}

/// Split `tf` (no poles at the origin) into additive submodels of the given
/// structure. Poles are grouped by proximity to `reference` when given,
/// otherwise by ascending magnitude. Each group's numerator is truncated to
/// the declared `m_i`.
pub fn factor_unfactored(
    tf: &CtTransferFunction,
    structure: &ModelStructure,
    reference: Option<&AdditiveModel>,
) -> Result<AdditiveModel> {
    structure.validate()?;
    if structure.integrator_order > 0 {
        return Err(Error::Factoring("models with integrators cannot be factored".into()));
    }
    tf.ensure_proper()?;
    let total: usize = structure.orders.iter().map(|(n, _)| n).sum();
    let nd = tf.den.degree();
    if nd != total {
        return Err(Error::Factoring(format!(
            "denominator degree {nd} does not match the {total} poles of the target structure"
        )));
    }
    let biproper = structure.orders.iter().position(|(n, m)| n == m);
    let lead = tf.den.leading();
    let direct = if !tf.num.is_zero() && tf.num.degree() == nd { tf.num.leading() / lead } else { 0.0 };
    if direct != 0.0 && biproper.is_none() {
        return Err(Error::Factoring("direct feedthrough needs a submodel with equal pole and zero counts".into()));
    }
    let strict = &tf.num - &tf.den.scale(direct);
    let roots = if nd == 0 { Vec::new() } else { tf.den.roots()? };
    for (i, a) in roots.iter().enumerate() {
        if a.norm() == 0.0 {
            return Err(Error::RootAtOrigin);
        }
        for b in &roots[i + 1..] {
            if (a - b).norm() < 1e-6 * a.norm().max(b.norm()).max(1.0) {
                return Err(Error::Factoring(format!("repeated pole near {a}")));
            }
        }
    }
    let ordered = match reference {
        Some(r) => {
            if r.structure().orders != structure.orders {
                return Err(Error::Factoring("reference model structure differs from the target".into()));
            }
            let refs: Vec<Complex64> = r
                .submodels
                .iter()
                .flat_map(|s| if s.n() > 0 && s.a().degree() > 0 { s.a().roots().unwrap_or_default() } else { Vec::new() })
                .collect();
            if refs.len() != roots.len() {
                return Err(Error::Factoring("reference model has degenerate denominators".into()));
            }
            match_roots(&roots, &refs)
        }
        None => {
            let mut r = roots.clone();
            r.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
            r
        }
    };
    let dprime = tf.den.derivative();
    let residue = |r: &Complex64| strict.eval_complex(*r) / dprime.eval_complex(*r);
    let mut subs = Vec::with_capacity(structure.orders.len());
    let mut start = 0;
    for (i, &(n, m)) in structure.orders.iter().enumerate() {
        let group = &ordered[start..start + n];
        start += n;
        if !conjugate_closed(group) {
            return Err(Error::Factoring(format!("pole group of submodel {} is not closed under conjugation", i + 1)));
        }
        let monic = monic_from(group);
        let scale = monic[0].re;
        let mut num = vec![Complex64::new(0.0, 0.0); n.max(1)];
        for (k, r) in group.iter().enumerate() {
            let others: Vec<Complex64> = group.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, q)| *q).collect();
            for (c, v) in monic_from(&others).iter().enumerate() {
                num[c] += residue(r) * v;
            }
        }
        let a = Polynomial::new(monic.iter().map(|c| c.re / scale).collect());
        let mut b = Polynomial::new(num.iter().map(|c| c.re / scale).collect());
        if Some(i) == biproper {
            b = &b + &a.scale(direct);
        }
        let b = Polynomial::new((0..=m).map(|k| b.coeff(k)).collect());
        let mut ac = a.coeffs().to_vec();
        ac[0] = 1.0;
        subs.push(CtSubmodel::with_orders(Polynomial::new(ac), b, n, m)?);
    }
    AdditiveModel::new(subs, 0, structure.input_delay)
}
