//! Dirichlet eigenpairs of the Laplacian on an axis-aligned box (0, l_1) × … × (0, l_N).
//!
//! −Δv = λv with v = 0 on the boundary has the closed-form solutions
//! v(x) = Π √(2/l_i) sin(n_i π x_i / l_i), λ = Σ (n_i π / l_i)².

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIMS: usize = 3;

// Relative gap below which two computed eigenvalues are the same number.
const TIE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lengths: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > MAX_DIMS {
            return Err(invalid(format!(
                "box dimension {} not in 1..={MAX_DIMS}",
                lengths.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("box side length {l} must be positive")));
        }
        Ok(Self { lengths })
    }

    /// The unit interval, square or cube.
    pub fn unit(dims: usize) -> Result<Self> {
        Self::new(vec![1.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x
                .iter()
                .zip(&self.lengths)
                .all(|(xi, l)| *xi >= 0.0 && *xi <= *l)
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.contains(x)
            && x
                .iter()
                .zip(&self.lengths)
                .any(|(xi, l)| *xi == 0.0 || *xi == *l)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                point: x.to_vec(),
                lengths: self.lengths.clone(),
            })
        }
    }

    /// Eigenvalue for a multi-index. Summands are added in ascending order so
    /// that permuted indices on equal sides give bitwise-equal values.
    pub fn eigenvalue(&self, multi_index: &[u32]) -> f64 {
        let mut terms: Vec<f64> = multi_index
            .iter()
            .zip(&self.lengths)
            .map(|(n, l)| {
                let w = *n as f64 * PI / l;
                w * w
            })
            .collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }
}

/// One eigenpair; `index` is 1-based in the sorted enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub index: usize,
    pub multi_index: Vec<u32>,
    pub eigenvalue: f64,
    pub norm_const: f64,
    lengths: Vec<f64>,
}

impl Mode {
    pub fn new(domain: &BoxDomain, index: usize, multi_index: Vec<u32>) -> Result<Self> {
        if multi_index.len() != domain.dims() || multi_index.contains(&0) {
            return Err(invalid(format!(
                "multi-index {multi_index:?} must have {} positive entries",
                domain.dims()
            )));
        }
        Ok(Self {
            index,
            eigenvalue: domain.eigenvalue(&multi_index),
            norm_const: domain.lengths.iter().map(|l| (2.0 / l).sqrt()).product(),
            multi_index,
            lengths: domain.lengths.clone(),
        })
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// v_k(x); errors outside the closed box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.lengths.len()
            || x
                .iter()
                .zip(&self.lengths)
                .any(|(xi, l)| !(*xi >= 0.0 && *xi <= *l))
        {
            return Err(Error::OutOfDomain {
                point: x.to_vec(),
                lengths: self.lengths.clone(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// v_k(x) without the domain check. Exactly zero on the boundary.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut v = self.norm_const;
        for ((xi, l), n) in x.iter().zip(&self.lengths).zip(&self.multi_index) {
            if *xi <= 0.0 || *xi >= *l {
                return 0.0;
            }
            v *= (*n as f64 * PI * xi / l).sin();
        }
        v
    }

    /// Derivative of the one-dimensional factor along `axis`, times the others.
    pub fn grad_component(&self, x: &[f64], axis: usize) -> f64 {
        let mut v = self.norm_const;
        for (i, ((xi, l), n)) in x.iter().zip(&self.lengths).zip(&self.multi_index).enumerate() {
            let w = *n as f64 * PI / l;
            v *= if i == axis { w * (w * xi).cos() } else { (w * xi).sin() };
        }
        v
    }
}

/// The first `count` eigenpairs in non-decreasing eigenvalue order, ties
/// broken by lexicographic multi-index.
pub fn enumerate_modes(domain: &BoxDomain, count: usize) -> Result<Vec<Mode>> {
    if count == 0 {
        return Err(invalid("mode count must be at least 1"));
    }
    let dims = domain.dims();
    let mut cap = domain.eigenvalue(&vec![1; dims]);
    loop {
        let limits: Vec<u32> = domain
            .lengths
            .iter()
            .map(|l| ((l / PI) * cap.sqrt()).ceil().max(1.0) as u32)
            .collect();
        let mut found: Vec<(f64, Vec<u32>)> = Vec::new();
        let mut idx = vec![1u32; dims];
        'outer: loop {
            let lam = domain.eigenvalue(&idx);
            if lam <= cap * (1.0 + 2.0 * TIE_TOL) {
                found.push((lam, idx.clone()));
            }
            // odometer increment
            for d in (0..dims).rev() {
                if idx[d] < limits[d] {
                    idx[d] += 1;
                    continue 'outer;
                }
                idx[d] = 1;
            }
            break;
        }
        if found.len() >= count {
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            // exact ties computed through different roundings: snap each
            // cluster to its smallest value and order it lexicographically
            let mut start = 0;
            while start < found.len() {
                let base = found[start].0;
                let mut end = start + 1;
                while end < found.len() && found[end].0 - base <= TIE_TOL * base {
                    end += 1;
                }
                for entry in &mut found[start..end] {
                    entry.0 = base;
                }
                found[start..end].sort_by(|a, b| a.1.cmp(&b.1));
                start = end;
            }
            return found
                .into_iter()
                .take(count)
                .enumerate()
                .map(|(i, (lam, mi))| {
                    let mut m = Mode::new(domain, i + 1, mi)?;
                    m.eigenvalue = lam;
                    Ok(m)
                })
                .collect();
        }
        cap *= 2.0;
    }
}

/// Evaluates `m` at `x`, rejecting points outside the box.
pub fn eval_mode(m: &Mode, x: &[f64]) -> Result<f64> {
    m.eval(x)
}

/// Groups consecutive modes whose eigenvalues agree to `tol·max(1, λ)`.
/// Returned indices are the modes' 1-based `index` values.
pub fn multiplicity_groups(modes: &[Mode], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for m in modes {
        match prev {
            Some(p) if (m.eigenvalue - p).abs() <= tol * p.max(1.0) => {
                groups.last_mut().expect("group exists").push(m.index);
            }
            _ => groups.push(vec![m.index]),
        }
        prev = Some(m.eigenvalue);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn eigenvalues(d: &BoxDomain, k: usize) -> Vec<f64> {
        enumerate_modes(d, k).unwrap().iter().map(|m| m.eigenvalue).collect()
    }

    #[test]
    fn domain_validation() {
        assert!(BoxDomain::new(vec![]).is_err());
        assert!(BoxDomain::new(vec![1.0; 4]).is_err());
        assert!(BoxDomain::new(vec![1.0, 0.0]).is_err());
        assert!(BoxDomain::new(vec![1.0, f64::NAN]).is_err());
        assert!(enumerate_modes(&BoxDomain::unit(1).unwrap(), 0).is_err());
    }

    #[test]
    fn interval_eigenvalues() {
        let pi2 = PI * PI;
        let d = BoxDomain::unit(1).unwrap();
        let ev = eigenvalues(&d, 3);
        for (got, want) in ev.iter().zip([pi2, 4.0 * pi2, 9.0 * pi2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let d = BoxDomain::new(vec![2.0]).unwrap();
        assert_abs_diff_eq!(eigenvalues(&d, 1)[0], pi2 / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn square_degeneracy_and_tie_order() {
        let pi2 = PI * PI;
        let modes = enumerate_modes(&BoxDomain::unit(2).unwrap(), 3).unwrap();
        let mi: Vec<Vec<u32>> = modes.iter().map(|m| m.multi_index.clone()).collect();
        assert_eq!(mi, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
        assert_abs_diff_eq!(modes[0].eigenvalue, 2.0 * pi2, epsilon = 1e-12);
        assert_eq!(modes[1].eigenvalue, modes[2].eigenvalue);
        assert_eq!(multiplicity_groups(&modes, 1e-12), vec![vec![1], vec![2, 3]]);
    }

    #[test]
    fn cube_permutations_are_bitwise_ties() {
        let modes = enumerate_modes(&BoxDomain::unit(3).unwrap(), 4).unwrap();
        assert_eq!(modes[1].multi_index, vec![1, 1, 2]);
        assert_eq!(modes[3].multi_index, vec![2, 1, 1]);
        assert_eq!(modes[1].eigenvalue, modes[3].eigenvalue);
    }

    #[test]
    fn simple_spectrum_groups() {
        let modes = enumerate_modes(&BoxDomain::unit(1).unwrap(), 5).unwrap();
        assert_eq!(
            multiplicity_groups(&modes, 1e-12),
            (1..=5).map(|k| vec![k]).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rectangle_matches_brute_force() {
        let d = BoxDomain::new(vec![1.0, 2.0]).unwrap();
        // brute force over a generous index box
        let mut all: Vec<(f64, u32, u32)> = Vec::new();
        for n1 in 1..30u32 {
            for n2 in 1..30u32 {
                let lam = PI * PI * ((n1 * n1) as f64 + (n2 * n2) as f64 / 4.0);
                all.push((lam, n1, n2));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let modes = enumerate_modes(&d, 40).unwrap();
        for (m, (lam, n1, n2)) in modes.iter().zip(&all) {
            assert_abs_diff_eq!(m.eigenvalue, *lam, epsilon = 1e-10);
            assert_eq!(m.multi_index, vec![*n1, *n2]);
        }
        let g4 = multiplicity_groups(&modes[..4], 1e-12);
        assert_eq!(g4, vec![vec![1], vec![2], vec![3], vec![4]]);
        // λ = 5π² is shared by (1,4) and (2,2)
        let g6 = multiplicity_groups(&modes[..6], 1e-12);
        assert_eq!(g6, vec![vec![1], vec![2], vec![3], vec![4], vec![5, 6]]);
    }

    #[test]
    fn point_values() {
        let d1 = BoxDomain::unit(1).unwrap();
        let m1 = Mode::new(&d1, 1, vec![1]).unwrap();
        let m2 = Mode::new(&d1, 2, vec![2]).unwrap();
        assert_abs_diff_eq!(eval_mode(&m1, &[0.5]).unwrap(), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_mode(&m2, &[0.5]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(eval_mode(&m1, &[0.0]).unwrap(), 0.0);
        assert_eq!(eval_mode(&m1, &[1.0]).unwrap(), 0.0);
        let d2 = BoxDomain::unit(2).unwrap();
        let m = Mode::new(&d2, 1, vec![1, 1]).unwrap();
        assert_abs_diff_eq!(eval_mode(&m, &[0.5, 0.5]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let m = Mode::new(&BoxDomain::unit(1).unwrap(), 1, vec![1]).unwrap();
        assert!(matches!(m.eval(&[1.5]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.eval(&[-0.1]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.eval(&[0.1, 0.1]), Err(Error::OutOfDomain { .. })));
        assert!(BoxDomain::unit(1).unwrap().check(&[2.0]).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        let d = BoxDomain::new(vec![1.0, 1.5]).unwrap();
        let modes = enumerate_modes(&d, 50).unwrap();
        let nmax = modes.iter().flat_map(|m| m.multi_index.iter()).copied().max().unwrap();
        // composite Gauss rule with ≥ 8 nodes per half-wave of the highest mode
        let rule = GaussLegendre::new(8);
        let panels = nmax as usize;
        let axis = |l: f64| -> Vec<(f64, f64)> {
            let h = l / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let a = p as f64 * h;
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(move |(x, w)| (a + 0.5 * h * (x + 1.0), 0.5 * h * w))
                })
                .collect()
        };
        let (ax, ay) = (axis(1.0), axis(1.5));
        let mut vals = vec![Vec::with_capacity(ax.len() * ay.len()); modes.len()];
        let mut weights = Vec::new();
        for (x, wx) in &ax {
            for (y, wy) in &ay {
                weights.push(wx * wy);
                for (k, m) in modes.iter().enumerate() {
                    vals[k].push(m.eval_unchecked(&[*x, *y]));
                }
            }
        }
        for i in 0..modes.len() {
            for j in 0..=i {
                let g: f64 = weights
                    .iter()
                    .zip(vals[i].iter().zip(&vals[j]))
                    .map(|(w, (a, b))| w * a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "G[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn finite_difference_eigen_residual() {
        let d = BoxDomain::new(vec![1.0, 0.7, 1.3]).unwrap();
        let modes = enumerate_modes(&d, 6).unwrap();
        let x = [0.31, 0.27, 0.8];
        for m in &modes {
            let v = m.eval_unchecked(&x);
            let resid = |h: f64| {
                let mut lap = 0.0;
                for axis in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[axis] += h;
                    xm[axis] -= h;
                    lap += (m.eval_unchecked(&xp) - 2.0 * v + m.eval_unchecked(&xm)) / (h * h);
                }
                (-lap - m.eigenvalue * v).abs()
            };
            let (r1, r2) = (resid(1e-2), resid(5e-3));
            assert!(r1 < 1e-2 * m.eigenvalue.powi(2), "{r1}");
            // second order: halving h quarters the residual
            let ratio = r1 / r2;
            assert!((3.5..4.5).contains(&ratio), "mode {:?}: ratio {ratio}", m.multi_index);
        }
    }

    #[test]
    fn sorted_and_normalized() {
        let d = BoxDomain::new(vec![0.5, 2.0, 1.0]).unwrap();
        let modes = enumerate_modes(&d, 200).unwrap();
        assert!(modes.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
        assert!(modes.iter().enumerate().all(|(i, m)| m.index == i + 1));
        assert_abs_diff_eq!(modes[0].norm_const, (4.0f64 * 1.0 * 2.0).sqrt(), epsilon = 1e-14);
    }
}
