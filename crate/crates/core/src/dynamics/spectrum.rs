//! Eigenlevel tracing along a parameter sweep with overlap-based branch
//! continuation.

use super::KerrCatParams;
use crate::error::{Error, Result};
use crate::fock::{HilbertSpace, StateVector};
use crate::linalg::{herm_eigen, CMat, CVec};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Continuation overlap below which a step is flagged as diabatic.
pub const CROSSING_THRESHOLD: f64 = 0.5;
/// Assigned overlap below which continuation is considered ill-posed.
pub const AMBIGUITY_FLOOR: f64 = 0.1;

/// Two branches exchanging energy order between adjacent grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub branch_a: usize,
    pub branch_b: usize,
    /// Dominant Fock labels of the two branches at the start of the sweep.
    pub label_a: usize,
    pub label_b: usize,
    /// Linearly interpolated location of the energy coincidence.
    pub location: f64,
    /// Grid interval `[index, index + 1]` (or grid point) containing it.
    pub index: usize,
    /// Same parity: a coalescence that couples the branches when the
    /// degeneracy is lifted; opposite parity: an exact, uncoupled crossing.
    pub same_parity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub params: Vec<f64>,
    /// `energies[point][branch]` (MHz).
    pub energies: Vec<Vec<f64>>,
    /// `vectors[point][branch]`.
    pub vectors: Vec<Vec<StateVector>>,
    /// `permutations[k][branch]`: eigenvector index (in ascending energy
    /// order within the diagonalisation at point `k`) continuing `branch`.
    pub permutations: Vec<Vec<usize>>,
    /// `⟨P⟩` per point and branch.
    pub parity: Vec<Vec<f64>>,
    /// Dominant Fock component of each branch at the first point.
    pub labels: Vec<usize>,
    /// Smallest assigned overlap per step (`min_overlap[0] = 1`).
    pub min_overlap: Vec<f64>,
    /// Grid indices whose incoming step fell below the crossing threshold.
    pub flagged: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

impl SpectrumTrace {
    pub fn branch_count(&self) -> usize {
        self.labels.len()
    }

    /// Branch whose start-of-sweep Fock label is `n`.
    pub fn branch_of_label(&self, n: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == n)
    }

    pub fn branch_energies(&self, branch: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[branch]).collect()
    }

    /// CSV `param,branch_index,energy_mhz,parity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,branch_index,energy_mhz,parity\n");
        for (k, p) in self.params.iter().enumerate() {
            for b in 0..self.branch_count() {
                writeln!(
                    out,
                    "{p},{b},{},{}",
                    self.energies[k][b],
                    parity_label(self.parity[k][b])
                )
                .expect("write to String");
            }
        }
        out
    }

    /// JSON sidecar with crossing locations.
    pub fn crossings_json(&self) -> serde_json::Value {
        serde_json::json!({
            "crossings": self.crossings,
            "flagged_indices": self.flagged,
            "labels": self.labels,
        })
    }
}

fn parity_label(p: f64) -> String {
    if (p - 1.0).abs() < 1e-9 {
        "1".into()
    } else if (p + 1.0).abs() < 1e-9 {
        "-1".into()
    } else {
        format!("{p}")
    }
}

/// Eigen-decomposition with parity-resolved blocks when the drive vanishes.
fn diagonalize(h: &CMat, parity_blocks: bool) -> (Vec<f64>, Vec<CVec>) {
    let d = h.nrows();
    if !parity_blocks {
        let (vals, vecs) = herm_eigen(h);
        return (vals, (0..d).map(|k| vecs.column(k).into_owned()).collect());
    }
    let mut pairs: Vec<(f64, CVec)> = Vec::with_capacity(d);
    for start in 0..2 {
        let idx: Vec<usize> = (start..d).step_by(2).collect();
        let block = CMat::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
        let (vals, vecs) = herm_eigen(&block);
        for (k, v) in vals.into_iter().enumerate() {
            let mut full = CVec::zeros(d);
            for (i, &row) in idx.iter().enumerate() {
                full[row] = vecs[(i, k)];
            }
            pairs.push((v, full));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn parity_of(v: &CVec) -> f64 {
    v.iter()
        .enumerate()
        .map(|(n, z)| {
            if n % 2 == 0 {
                z.norm_sqr()
            } else {
                -z.norm_sqr()
            }
        })
        .sum()
}

/// Diagonalises `params(x)` on every grid point and continues branches by
/// maximum-overlap assignment on `|<v_i|w_j>|²`.
pub fn eigen_trace<F>(grid: &[f64], space: HilbertSpace, params: F) -> Result<SpectrumTrace>
where
    F: Fn(f64) -> KerrCatParams,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if grid.len() > 1 && !(increasing || decreasing) {
        return Err(Error::InvalidParameter(
            "sweep grid must be strictly monotone".into(),
        ));
    }
    let d = space.dim();
    let stencil = super::Stencil::new(d);
    let mut energies = Vec::with_capacity(grid.len());
    let mut vectors: Vec<Vec<StateVector>> = Vec::with_capacity(grid.len());
    let mut permutations = Vec::with_capacity(grid.len());
    let mut parity = Vec::with_capacity(grid.len());
    let mut min_overlap = Vec::with_capacity(grid.len());
    let mut flagged = Vec::new();
    let mut labels = Vec::new();

    for (k, &x) in grid.iter().enumerate() {
        let p = params(x);
        p.validate()?;
        space.require_amplitude(p.alpha())?;
        let h = stencil.dense(&p.scaled(1.0));
        let blocks = p.eps_x.norm() == 0.0;
        let (vals, vecs) = diagonalize(&h, blocks);
        let perm: Vec<usize> = if k == 0 {
            // order branches by their dominant Fock component
            let dominant: Vec<usize> = vecs
                .iter()
                .map(|v| {
                    (0..d)
                        .max_by(|&a, &b| v[a].norm_sqr().total_cmp(&v[b].norm_sqr()))
                        .expect("non-empty")
                })
                .collect();
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by_key(|&i| (dominant[i], i));
            labels = order.iter().map(|&i| dominant[i]).collect();
            min_overlap.push(1.0);
            order
        } else {
            let prev = &vectors[k - 1];
            let ov: Vec<Vec<f64>> = prev
                .iter()
                .map(|pv| {
                    vecs.iter()
                        .map(|w| pv.amplitudes().dotc(w).norm_sqr())
                        .collect()
                })
                .collect();
            let weights = Matrix::from_fn(d, d, |(i, j)| (ov[i][j] * 1e12).round() as i64);
            let (_, assign) = kuhn_munkres(&weights);
            let worst = (0..d)
                .map(|b| ov[b][assign[b]])
                .fold(f64::INFINITY, f64::min);
            if worst < AMBIGUITY_FLOOR {
                return Err(Error::ContinuationAmbiguous {
                    index: k,
                    overlap: worst,
                });
            }
            if worst < CROSSING_THRESHOLD {
                flagged.push(k);
            }
            min_overlap.push(worst);
            assign
        };
        let mut e_row = Vec::with_capacity(d);
        let mut v_row = Vec::with_capacity(d);
        let mut p_row = Vec::with_capacity(d);
        for &j in &perm {
            let mut v = vecs[j].clone();
            // align the arbitrary eigenvector phase with the previous point
            if k > 0 {
                let b = v_row.len();
                let ov = vectors[k - 1][b].amplitudes().dotc(&v);
                if ov.norm() > 0.0 {
                    v *= ov.conj() / ov.norm();
                }
            }
            e_row.push(vals[j]);
            p_row.push(parity_of(&v));
            v_row.push(StateVector::from_amplitudes(space, v)?);
        }
        energies.push(e_row);
        vectors.push(v_row);
        parity.push(p_row);
        permutations.push(perm);
    }

    let crossings = find_crossings(grid, &energies, &parity, &labels);
    Ok(SpectrumTrace {
        params: grid.to_vec(),
        energies,
        vectors,
        permutations,
        parity,
        labels,
        min_overlap,
        flagged,
        crossings,
    })
}

fn find_crossings(
    grid: &[f64],
    energies: &[Vec<f64>],
    parity: &[Vec<f64>],
    labels: &[usize],
) -> Vec<Crossing> {
    let nb = labels.len();
    let scale = energies
        .iter()
        .flatten()
        .map(|e| e.abs())
        .fold(1.0, f64::max);
    let zero = 1e-9 * scale;
    let mut out = Vec::new();
    for a in 0..nb {
        for b in (a + 1)..nb {
            let mut last: Option<(usize, f64)> = None;
            for k in 0..grid.len() {
                let diff = energies[k][a] - energies[k][b];
                if diff.abs() <= zero {
                    continue;
                }
                if let Some((kl, dl)) = last {
                    if dl.signum() != diff.signum() {
                        let (location, index) = if k == kl + 1 {
                            let f = dl / (dl - diff);
                            (grid[kl] + f * (grid[k] - grid[kl]), kl)
                        } else {
                            // exact coincidence on intermediate grid point(s)
                            let mid = (kl + k) / 2;
                            (grid[mid], mid)
                        };
                        let same = parity[index][a] * parity[index][b] > 0.0;
                        out.push(Crossing {
                            branch_a: a,
                            branch_b: b,
                            label_a: labels[a],
                            label_b: labels[b],
                            location,
                            index,
                            same_parity: same,
                        });
                    }
                }
                last = Some((k, diff));
            }
        }
    }
    out.sort_by(|x, y| x.location.total_cmp(&y.location));
    out
}
