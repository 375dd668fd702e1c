//! Exact information quantities of finite joint distributions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Column, Table};

/// Joint pmf of `(Y, X, S)` over `|Y| x |X| x |S|` cells, stored row-major
/// with `S` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    dims: (usize, usize, usize),
    pmf: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(dims: (usize, usize, usize), pmf: Vec<f64>) -> Result<Self> {
        let (ny, nx, ns) = dims;
        if ny == 0 || nx == 0 || ns == 0 {
            return Err(Error::param("joint dimensions must be positive"));
        }
        if pmf.len() != ny * nx * ns {
            return Err(Error::param(format!(
                "pmf has {} cells, dimensions need {}",
                pmf.len(),
                ny * nx * ns
            )));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::param("pmf entries must be finite and nonnegative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(total));
        }
        Ok(DiscreteJoint { dims, pmf })
    }

    /// Normalizes nonnegative weights into a joint.
    pub fn from_weights(dims: (usize, usize, usize), weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("weights must have a positive sum"));
        }
        Self::new(dims, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn p(&self, y: usize, x: usize, s: usize) -> f64 {
        let (_, nx, ns) = self.dims;
        self.pmf[(y * nx + x) * ns + s]
    }

    /// `n` i.i.d. draws as a table with categorical columns `Y`, `X`, `S`
    /// whose labels are the cell indices.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        let (ny, nx, ns) = self.dims;
        let dist = WeightedIndex::new(&self.pmf).map_err(|e| Error::param(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut ys, mut xs, mut ss) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let cell = dist.sample(&mut rng);
            ys.push(Some((cell / (nx * ns)) as u32));
            xs.push(Some((cell / ns % nx) as u32));
            ss.push(Some((cell % ns) as u32));
        }
        let labels = |k: usize| (0..k).map(|i| i.to_string()).collect::<Vec<_>>();
        Table::new(
            "joint-sample",
            vec![
                Column::categorical("Y", ys, labels(ny)),
                Column::categorical("X", xs, labels(nx)),
                Column::categorical("S", ss, labels(ns)),
            ],
        )
    }
}

/// `I(Y; X | S)` in bits, summed cell by cell as the expected log-ratio
/// `log2 p(y|x,s) / p(y|s)`.
pub fn exact_cmi(joint: &DiscreteJoint) -> f64 {
    let (ny, nx, ns) = joint.dims;
    let mut p_xs = vec![0.0; nx * ns];
    let mut p_ys = vec![0.0; ny * ns];
    let mut p_s = vec![0.0; ns];
    for y in 0..ny {
        for x in 0..nx {
            for s in 0..ns {
                let p = joint.p(y, x, s);
                p_xs[x * ns + s] += p;
                p_ys[y * ns + s] += p;
                p_s[s] += p;
            }
        }
    }
    let mut total = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            for s in 0..ns {
                let p = joint.p(y, x, s);
                if p > 0.0 {
                    let given_xs = p / p_xs[x * ns + s];
                    let given_s = p_ys[y * ns + s] / p_s[s];
                    total += p * (given_xs / given_s).log2();
                }
            }
        }
    }
    total.max(0.0)
}

/// `H(Y|S) - H(Y|S,X)` in bits, each conditional entropy computed as the
/// expected entropy of the conditional distribution of `Y`.
pub fn entropy_difference_cmi(joint: &DiscreteJoint) -> f64 {
    let (ny, nx, ns) = joint.dims;
    let entropy = |probs: &[f64]| -> f64 {
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return 0.0;
        }
        probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -(p / mass) * (p / mass).log2())
            .sum::<f64>()
            * mass
    };
    let mut given_s = 0.0;
    for s in 0..ns {
        let column: Vec<f64> = (0..ny)
            .map(|y| (0..nx).map(|x| joint.p(y, x, s)).sum())
            .collect();
        given_s += entropy(&column);
    }
    let mut given_sx = 0.0;
    for x in 0..nx {
        for s in 0..ns {
            let column: Vec<f64> = (0..ny).map(|y| joint.p(y, x, s)).collect();
            given_sx += entropy(&column);
        }
    }
    given_s - given_sx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_joint() -> DiscreteJoint {
        let mut pmf = vec![0.0; 8];
        for x in 0..2 {
            for s in 0..2 {
                pmf[((x ^ s) * 2 + x) * 2 + s] = 0.25;
            }
        }
        DiscreteJoint::new((2, 2, 2), pmf).unwrap()
    }

    #[test]
    fn xor_joint_has_one_bit() {
        let j = xor_joint();
        assert!((exact_cmi(&j) - 1.0).abs() < 1e-15);
        assert!((entropy_difference_cmi(&j) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_joint_is_zero() {
        let (py, px, ps) = ([0.3, 0.7], [0.2, 0.5, 0.3], [0.6, 0.4]);
        let mut pmf = Vec::new();
        for a in py {
            for b in px {
                for c in ps {
                    pmf.push(a * b * c);
                }
            }
        }
        let j = DiscreteJoint::from_weights((2, 3, 2), pmf).unwrap();
        assert!(exact_cmi(&j).abs() < 1e-12);
        assert!(entropy_difference_cmi(&j).abs() < 1e-12);
    }

    #[test]
    fn markov_chain_through_s_is_zero() {
        // Y - S - X: p(y, x, s) = p(s) p(y|s) p(x|s)
        let ps = [0.4, 0.6];
        let py_s = [[0.9, 0.1], [0.2, 0.8]];
        let px_s = [[0.7, 0.3], [0.1, 0.9]];
        let mut pmf = vec![0.0; 8];
        for y in 0..2 {
            for x in 0..2 {
                for s in 0..2 {
                    pmf[(y * 2 + x) * 2 + s] = ps[s] * py_s[s][y] * px_s[s][x];
                }
            }
        }
        let j = DiscreteJoint::from_weights((2, 2, 2), pmf).unwrap();
        assert!(exact_cmi(&j) < 1e-12);
    }

    #[test]
    fn unnormalized_pmf_is_rejected() {
        assert!(matches!(
            DiscreteJoint::new((1, 1, 2), vec![0.5, 0.4]),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn sample_cells_follow_layout() {
        let t = xor_joint().sample(200, 3).unwrap();
        for i in 0..200 {
            let y: u32 = t.column("Y").unwrap().label(i).unwrap().parse().unwrap();
            let x: u32 = t.column("X").unwrap().label(i).unwrap().parse().unwrap();
            let s: u32 = t.column("S").unwrap().label(i).unwrap().parse().unwrap();
            assert_eq!(y, x ^ s);
        }
    }
}
