//! Covariant differentiation and index gymnastics for covariant tensors.

use super::{FlowMap, MetricState};
use crate::error::{Error, Result};
use crate::tensor::TensorField;

fn bit(c: usize, rank: usize, slot: usize) -> usize {
    (c >> (rank - 1 - slot)) & 1
}

fn with_bit(c: usize, rank: usize, slot: usize, v: usize) -> usize {
    let m = 1 << (rank - 1 - slot);
    (c & !m) | (v * m)
}

/// ∇_a T_{a₁…a_r} = ∂_a T_{a₁…a_r} − Σ_k Γ^d_{a a_k} T_{a₁…d…a_r}.
///
/// The derivative index is the first index of the result.
pub fn covariant_derivative(t: &TensorField, metric: &MetricState) -> Result<TensorField> {
    if t.n != metric.n_nodes() {
        return Err(Error::Shape(format!(
            "tensor has {} nodes, metric {}",
            t.n,
            metric.n_nodes()
        )));
    }
    let r = t.rank;
    let n = t.n;
    let nc = t.n_comp();
    let mut out = TensorField::zeros(r + 1, t.domain, n);
    let grads: Vec<[Vec<f64>; 2]> = (0..nc).map(|c| metric.labels.grad(t.comp(c))).collect();
    for a in 0..2 {
        for c in 0..nc {
            let oc = (a << r) | c;
            let dst = out.comp_mut(oc);
            dst.copy_from_slice(&grads[c][a]);
            for slot in 0..r {
                let ak = bit(c, r, slot);
                for d in 0..2 {
                    let src = t.comp(with_bit(c, r, slot, d));
                    let chr = &metric.chr[d][a][ak];
                    for k in 0..n {
                        dst[k] -= chr[k] * src[k];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Contravariant components u^a = g^{ab} u_b.
pub fn raise_index(u: &TensorField, metric: &MetricState) -> [Vec<f64>; 2] {
    let n = u.n;
    let mut v = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        for (a, va) in v.iter_mut().enumerate() {
            va[k] = metric.g_inv[a][0][k] * u.get(0, k) + metric.g_inv[a][1][k] * u.get(1, k);
        }
    }
    v
}

/// g^{a₁b₁}⋯g^{a_r b_r} A_{a₁…a_r} B_{b₁…b_r} at every node.
pub fn contract_full(a: &TensorField, b: &TensorField, metric: &MetricState) -> Result<Vec<f64>> {
    if a.rank != b.rank || a.n != b.n {
        return Err(Error::Shape("contraction of mismatched tensors".into()));
    }
    let r = a.rank;
    let nc = a.n_comp();
    let n = a.n;
    let mut out = vec![0.0; n];
    for k in 0..n {
        let gi = [
            [metric.g_inv[0][0][k], metric.g_inv[0][1][k]],
            [metric.g_inv[1][0][k], metric.g_inv[1][1][k]],
        ];
        let mut s = 0.0;
        for ca in 0..nc {
            let av = a.get(ca, k);
            if av == 0.0 {
                continue;
            }
            for cb in 0..nc {
                let mut w = 1.0;
                for slot in 0..r {
                    w *= gi[bit(ca, r, slot)][bit(cb, r, slot)];
                }
                s += w * av * b.get(cb, k);
            }
        }
        out[k] = s;
    }
    Ok(out)
}

/// g^{ab} ∇_a u_b.
pub fn divergence(u: &TensorField, metric: &MetricState) -> Result<Vec<f64>> {
    let du = covariant_derivative(u, metric)?;
    let n = u.n;
    Ok((0..n)
        .map(|k| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += metric.g_inv[a][b][k] * du.get(TensorField::flat(&[a, b]), k);
                }
            }
            s
        })
        .collect())
}

/// ∇_a u_b + ∇_b u_a.
pub fn symmetric_gradient(u: &TensorField, metric: &MetricState) -> Result<TensorField> {
    let du = covariant_derivative(u, metric)?;
    let mut out = du.clone();
    for a in 0..2 {
        for b in 0..2 {
            let ab = du.at(&[a, b]).to_vec();
            let ba = du.at(&[b, a]);
            let dst = out.comp_mut(TensorField::flat(&[a, b]));
            for k in 0..u.n {
                dst[k] = ab[k] + ba[k];
            }
        }
    }
    Ok(out)
}

/// Covariant Lagrangian components of a Cartesian tensor:
/// T_{a₁…} = ∂x^{i₁}/∂y^{a₁} ⋯ T_{i₁…}.
pub fn pull_back(map: &FlowMap, t: &TensorField) -> TensorField {
    transform(t, |slot_in, slot_out, k| map.f[slot_in][slot_out][k])
}

/// Cartesian components of a covariant Lagrangian tensor:
/// T_{i₁…} = ∂y^{a₁}/∂x^{i₁} ⋯ T_{a₁…}.
pub fn push_forward(map: &FlowMap, t: &TensorField) -> TensorField {
    transform(t, |a, i, k| map.finv[a][i][k])
}

/// Apply out_{b…} = Σ m(a, b) in_{a…} on every slot.
fn transform(t: &TensorField, m: impl Fn(usize, usize, usize) -> f64) -> TensorField {
    let r = t.rank;
    let mut cur = t.clone();
    for slot in 0..r {
        let src = cur.clone();
        for c in 0..t.n_comp() {
            let b = bit(c, r, slot);
            let c0 = with_bit(c, r, slot, 0);
            let c1 = with_bit(c, r, slot, 1);
            let dst = cur.comp_mut(c);
            for k in 0..t.n {
                dst[k] = m(0, b, k) * src.get(c0, k) + m(1, b, k) * src.get(c1, k);
            }
        }
    }
    cur
}

/// Christoffel symbols of the flat metric in Lagrangian coordinates from
/// the map itself: Γ^c_ab = ∂y^c/∂x^i ∂²x^i/∂y^a∂y^b.
///
/// Independent of the metric-derivative route used by [`MetricState`].
pub fn christoffel_pushforward(map: &FlowMap) -> [[[Vec<f64>; 2]; 2]; 2] {
    let n = map.n_nodes();
    let mut second = [[[vec![], vec![]], [vec![], vec![]]], [[vec![], vec![]], [vec![], vec![]]]];
    for i in 0..2 {
        for a in 0..2 {
            let [d0, d1] = map.labels.grad(&map.f[i][a]);
            second[i][a][0] = d0;
            second[i][a][1] = d1;
        }
    }
    let mut chr = [
        [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]],
        [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]],
    ];
    for k in 0..n {
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    // symmetrise the two orders of mixed differentiation
                    let s: f64 = (0..2)
                        .map(|i| {
                            map.finv[c][i][k] * 0.5 * (second[i][a][b][k] + second[i][b][a][k])
                        })
                        .sum();
                    chr[c][a][b][k] = s;
                }
            }
        }
    }
    chr
}
