//! Nelder–Mead simplex minimization inside the unit box.

use crate::error::Result;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evaluations: usize,
    /// Stop when the simplex diameter (max-norm, unit-box coordinates)
    /// falls below this.
    pub tolerance: f64,
    /// Edge length of the starting simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            tolerance: 1e-8,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clip(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

fn affine(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    let mut out: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
    clip(&mut out);
    out
}

impl NelderMead {
    /// Minimize `f` over `[0, 1]^n` starting at `x0`. Trial points are
    /// clipped onto the box.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let n = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64], count: &mut usize| -> Result<f64> {
            *count += 1;
            let v = f(x)?;
            Ok(if v.is_nan() { f64::INFINITY } else { v })
        };

        let mut start = x0.to_vec();
        clip(&mut start);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(&start, &mut evaluations)?;
        simplex.push((start.clone(), v0));
        for i in 0..n {
            let mut x = start.clone();
            x[i] += if x[i] + self.initial_step <= 1.0 {
                self.initial_step
            } else {
                -self.initial_step
            };
            let v = eval(&x, &mut evaluations)?;
            simplex.push((x, v));
        }

        let mut converged = false;
        while evaluations < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if diameter < self.tolerance {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst_x = simplex[n].0.clone();
            let second = simplex[n - 1].1;

            let reflected = affine(&centroid, &worst_x, -REFLECT);
            let fr = eval(&reflected, &mut evaluations)?;
            if fr < best {
                let expanded = affine(&centroid, &worst_x, -EXPAND);
                let fe = eval(&expanded, &mut evaluations)?;
                simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < second {
                simplex[n] = (reflected, fr);
                continue;
            }
            let (trial, threshold) = if fr < worst {
                (affine(&centroid, &reflected, CONTRACT), fr)
            } else {
                (affine(&centroid, &worst_x, CONTRACT), worst)
            };
            let fc = eval(&trial, &mut evaluations)?;
            if fc < threshold || (fr < worst && fc <= threshold) {
                simplex[n] = (trial, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x = affine(&anchor, &vertex.0, SHRINK);
                let v = eval(&x, &mut evaluations)?;
                *vertex = (x, v);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Ok(Minimum {
            x,
            value,
            evaluations,
            converged,
        })
    }
}
