//! Level curves of planar `G` by marching squares.

use nalgebra::DVector;

use crate::domains::LevelSetDomain;
use crate::error::{Error, Result};
use crate::gauss_core::GaussianSpace;

/// Polygonal approximation of `{G = ξ}` inside the box `|x_k| ≤ 8√λ_max`
/// on a `cells × cells` grid. Each segment contributes its length at its
/// midpoint, projected onto the curve by Newton steps along `∇G`.
pub(crate) fn marching_squares(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    level: f64,
    cells: usize,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    if space.dim() != 2 {
        return Err(Error::Unsupported("marching squares needs a planar domain".into()));
    }
    let g = domain.g();
    let half = 8.0 * space.max_eigenvalue().sqrt();
    let h = 2.0 * half / cells as f64;
    let coord = |i: usize| -half + h * i as f64;
    let np = cells + 1;
    let mut vals = vec![0.0; np * np];
    for j in 0..np {
        for i in 0..np {
            vals[j * np + i] = g.value(&DVector::from_vec(vec![coord(i), coord(j)])) - level;
        }
    }
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let corner = [
                (coord(i), coord(j), vals[j * np + i]),
                (coord(i + 1), coord(j), vals[j * np + i + 1]),
                (coord(i + 1), coord(j + 1), vals[(j + 1) * np + i + 1]),
                (coord(i), coord(j + 1), vals[(j + 1) * np + i]),
            ];
            let pos = |v: f64| v >= 0.0;
            let mut cross: [Option<(f64, f64)>; 4] = [None; 4];
            for e in 0..4 {
                let (a, b) = (corner[e], corner[(e + 1) % 4]);
                if pos(a.2) != pos(b.2) {
                    let t = a.2 / (a.2 - b.2);
                    cross[e] = Some((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
                }
            }
            let hits: Vec<usize> = (0..4).filter(|&e| cross[e].is_some()).collect();
            let pairs: Vec<(usize, usize)> = match hits.len() {
                2 => vec![(hits[0], hits[1])],
                4 => {
                    let c = g.value(&DVector::from_vec(vec![coord(i) + h / 2.0, coord(j) + h / 2.0])) - level;
                    if pos(c) == pos(corner[0].2) {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => vec![],
            };
            for (a, b) in pairs {
                let (pa, pb) = (cross[a].unwrap(), cross[b].unwrap());
                let len = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
                if len == 0.0 {
                    continue;
                }
                let mut p = DVector::from_vec(vec![(pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0]);
                for _ in 0..4 {
                    let gr = g.gradient(&p);
                    let n2 = gr.norm_squared();
                    if n2 == 0.0 {
                        break;
                    }
                    let r = g.value(&p) - level;
                    p -= gr * (r / n2);
                    if r.abs() < 1e-14 {
                        break;
                    }
                }
                pts.push(p);
                wts.push(len);
            }
        }
    }
    Ok((pts, wts))
}
