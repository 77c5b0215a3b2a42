use num_traits::{One, Zero};

use crate::corr::{ExactBox, Scenario};
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::num::Rational;

use super::{
    decompose_over, enumerate_deterministic, require_no_signaling, Decomposition, Vertex,
    DEFAULT_CAP,
};

/// The 24 vertices of the binary no-signaling polytope in canonical order:
/// 16 deterministic strategies (lexicographic), then the 8 PR-class boxes
/// ordered by `(α, β, γ)`.
pub fn ns_vertex_list(scenario: Scenario) -> Result<Vec<Vertex>> {
    if !scenario.is_binary() {
        return Err(Error::UnsupportedScenario);
    }
    let mut v: Vec<Vertex> = enumerate_deterministic(scenario, DEFAULT_CAP)?
        .into_iter()
        .map(Vertex::Deterministic)
        .collect();
    for k in 0..8u8 {
        v.push(Vertex::PrClass {
            alpha: k >> 2,
            beta: (k >> 1) & 1,
            gamma: k & 1,
        });
    }
    Ok(v)
}

fn binary_ns(corr: &ExactBox) -> Result<Vec<Vertex>> {
    let list = ns_vertex_list(corr.scenario())?;
    require_no_signaling(corr)?;
    Ok(list)
}

/// Exact decomposition over the 24 vertices, minimizing total PR-class weight.
pub fn decompose_ns(corr: &ExactBox) -> Result<Decomposition> {
    let vertices = binary_ns(corr)?;
    let objective = (16..24).map(|j| (j, Rational::one()));
    let w = decompose_over(corr, &vertices, Sense::Minimize, objective, &[]).ok_or_else(|| {
        Error::Infeasible("no-signaling box has no decomposition over the 24 vertices".into())
    })?;
    Ok(Decomposition::from_solution(
        corr.scenario(),
        &vertices,
        &w,
        corr,
    ))
}

/// True iff every decomposition over the 24 candidates puts weight 1 on
/// the box itself.
pub fn verify_vertex(corr: &ExactBox) -> Result<bool> {
    let vertices = binary_ns(corr)?;
    let s = corr.scenario();
    let own: Vec<usize> = vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| v.correlation(s) == *corr)
        .map(|(j, _)| j)
        .collect();
    if own.is_empty() {
        return Ok(false);
    }
    let w = decompose_over(
        corr,
        &vertices,
        Sense::Minimize,
        own.iter().map(|&j| (j, Rational::one())),
        &[],
    )
    .ok_or_else(|| Error::Infeasible("vertex candidate has no decomposition".into()))?;
    let own_weight: Rational = own.iter().map(|&j| &w[j]).sum();
    Ok(own_weight.is_one())
}

/// Dimension of the affine hull of `points` (exact Gaussian elimination).
pub fn affine_dimension(points: &[ExactBox]) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    let mut rows: Vec<Vec<Rational>> = points[1..]
        .iter()
        .map(|p| {
            p.table()
                .iter()
                .zip(first.table())
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    rank(&mut rows)
}

fn rank(rows: &mut [Vec<Rational>]) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for row in rows.iter_mut().skip(r + 1) {
            if row[c].is_zero() {
                continue;
            }
            let f = &row[c] / &pivot[c];
            for (v, pv) in row.iter_mut().zip(&pivot) {
                *v -= &f * pv;
            }
        }
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes;
    use crate::corr::Correlation;
    use crate::num::{int, ratio};
    use crate::polytope::chsh_facet_values;

    #[test]
    fn vertex_census() {
        let v = ns_vertex_list(Scenario::binary()).unwrap();
        assert_eq!(v.len(), 24);
        assert_eq!(v[16].correlation(Scenario::binary()), boxes::pr_box());
        for (i, vertex) in v.iter().enumerate() {
            assert_eq!(vertex.canonical_index(Scenario::binary()), i);
        }
        assert!(matches!(
            ns_vertex_list(Scenario::new(3, 2, 2, 2).unwrap()),
            Err(Error::UnsupportedScenario)
        ));
    }

    #[test]
    fn each_pr_class_vertex_violates_exactly_its_facet() {
        for k in 0..8u8 {
            let pr = boxes::pr_class(k >> 2, (k >> 1) & 1, k & 1);
            let values = chsh_facet_values(&pr).unwrap();
            for (j, v) in values.iter().enumerate() {
                if j == k as usize {
                    assert_eq!(*v, int(4));
                } else {
                    assert!(*v <= int(3));
                }
            }
        }
    }

    #[test]
    fn affine_dimension_is_eight() {
        let s = Scenario::binary();
        let pts: Vec<ExactBox> = ns_vertex_list(s)
            .unwrap()
            .iter()
            .map(|v| v.correlation(s))
            .collect();
        assert_eq!(affine_dimension(&pts), 8);
        // Local vertices alone already span the full no-signaling space.
        assert_eq!(affine_dimension(&pts[..16]), 8);
        assert_eq!(affine_dimension(&pts[..1]), 0);
    }

    #[test]
    fn isotropic_minimal_pr_weight() {
        for k in 0..=10 {
            let p = ratio(k, 10);
            let d = decompose_ns(&boxes::isotropic(&p)).unwrap();
            assert_eq!(d.nonlocal_weight(), p);
            assert_eq!(d.residual, int(0));
            assert_eq!(d.total_weight(), int(1));
        }
    }

    #[test]
    fn named_decompositions() {
        let d = decompose_ns(&boxes::pr_box()).unwrap();
        assert_eq!(d.components.len(), 1);
        assert_eq!(d.components[0].weight, int(1));
        assert_eq!(
            d.components[0].vertex.canonical_index(Scenario::binary()),
            16
        );
        assert_eq!(
            decompose_ns(&boxes::noise()).unwrap().nonlocal_weight(),
            int(0)
        );
        assert!(matches!(
            decompose_ns(&boxes::swap_box()),
            Err(Error::NotNoSignaling(_))
        ));
    }

    #[test]
    fn vertex_verification() {
        assert!(verify_vertex(&boxes::pr_box()).unwrap());
        let half = ratio(1, 2);
        let mixed =
            Correlation::mix(&[(half.clone(), &boxes::pr_box()), (half, &boxes::noise())]).unwrap();
        assert!(!verify_vertex(&mixed).unwrap());
        let s = Scenario::binary();
        for st in enumerate_deterministic(s, DEFAULT_CAP).unwrap() {
            assert!(verify_vertex(&st.correlation(s)).unwrap());
        }
    }

    #[test]
    fn decomposition_json_uses_canonical_indices() {
        let d = decompose_ns(&boxes::isotropic(&ratio(1, 2))).unwrap();
        let j = d.to_json();
        assert_eq!(j["schema"], 1);
        assert_eq!(j["residual"], "0/1");
        let pr = j["vertices"]
            .as_array()
            .unwrap()
            .iter()
            .find(|v| v["index"] == 16)
            .unwrap();
        assert_eq!(pr["weight"], "1/2");
    }
}
