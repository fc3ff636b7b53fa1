//! Discrete entropy and mutual information over two question/answer pairs
//! `(q1, q2, a1, a2)`, in bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

const SUM_TOLERANCE: f64 = 1e-12;
const PREMISE_TOLERANCE: f64 = 1e-9;
const INEQUALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    Q1,
    Q2,
    A1,
    A2,
}

impl Var {
    fn axis(self) -> usize {
        match self {
            Var::Q1 => 0,
            Var::Q2 => 1,
            Var::A1 => 2,
            Var::A2 => 3,
        }
    }
}

/// Joint pmf over `q1 × q2 × a1 × a2`, row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    dims: [usize; 4],
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dims: [usize; 4], probs: Vec<f64>) -> Result<Self, AnalysisError> {
        if dims.contains(&0) {
            return Err(AnalysisError::InvalidJoint("support sizes must be >= 1".into()));
        }
        let cells: usize = dims.iter().product();
        if probs.len() != cells {
            return Err(AnalysisError::InvalidJoint(format!(
                "expected {cells} probabilities, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(AnalysisError::InvalidJoint(format!("bad probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(AnalysisError::InvalidJoint(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { dims, probs })
    }

    /// Builds `p(q1,q2) · p(a1|q1) · p(a2|q2)`. `q_joint` is `|q1| × |q2|`
    /// row-major; each channel row is a conditional pmf.
    pub fn from_channels(
        q_joint: &[f64],
        q_dims: (usize, usize),
        channel1: &[Vec<f64>],
        channel2: &[Vec<f64>],
    ) -> Result<Self, AnalysisError> {
        let (n1, n2) = q_dims;
        if channel1.len() != n1 || channel2.len() != n2 || q_joint.len() != n1 * n2 {
            return Err(AnalysisError::InvalidJoint("channel shapes do not match".into()));
        }
        let m1 = channel1.first().map_or(0, Vec::len);
        let m2 = channel2.first().map_or(0, Vec::len);
        if channel1.iter().any(|r| r.len() != m1) || channel2.iter().any(|r| r.len() != m2) {
            return Err(AnalysisError::InvalidJoint("ragged channel".into()));
        }
        let mut probs = Vec::with_capacity(n1 * n2 * m1 * m2);
        for q1 in 0..n1 {
            for q2 in 0..n2 {
                let pq = q_joint[q1 * n2 + q2];
                for p1 in &channel1[q1] {
                    for p2 in &channel2[q2] {
                        probs.push(pq * p1 * p2);
                    }
                }
            }
        }
        Self::new([n1, n2, m1, m2], probs)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn coords(&self, mut flat: usize) -> [usize; 4] {
        let mut c = [0; 4];
        for axis in (0..4).rev() {
            c[axis] = flat % self.dims[axis];
            flat /= self.dims[axis];
        }
        c
    }

    /// Dense marginal over `vars`, row-major in the order given.
    pub fn marginal(&self, vars: &[Var]) -> Vec<f64> {
        let size: usize = vars.iter().map(|v| self.dims[v.axis()]).product();
        let mut out = vec![0.0; size];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let c = self.coords(flat);
            let idx = vars
                .iter()
                .fold(0, |acc, v| acc * self.dims[v.axis()] + c[v.axis()]);
            out[idx] += p;
        }
        out
    }

    /// Shannon entropy of the marginal over `vars`.
    pub fn entropy(&self, vars: &[Var]) -> f64 {
        self.marginal(vars)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }

    /// `H(target | given)`.
    pub fn conditional_entropy(&self, target: &[Var], given: &[Var]) -> f64 {
        let both: Vec<Var> = given.iter().chain(target).copied().collect();
        self.entropy(&both) - self.entropy(given)
    }
}

fn valid_sets(left: &[Var], right: &[Var]) -> bool {
    let mut seen = [false; 4];
    for v in left.iter().chain(right) {
        if std::mem::replace(&mut seen[v.axis()], true) {
            return false;
        }
    }
    !left.is_empty() && !right.is_empty()
}

/// `I(left; right)` by direct summation of `p(l,r)·log2(p(l,r) / (p(l)·p(r)))`.
pub fn mutual_information(
    joint: &JointDistribution,
    left: &[Var],
    right: &[Var],
) -> Result<f64, AnalysisError> {
    if !valid_sets(left, right) {
        return Err(AnalysisError::BadVariableSets);
    }
    let both: Vec<Var> = left.iter().chain(right).copied().collect();
    let p_lr = joint.marginal(&both);
    let p_l = joint.marginal(left);
    let p_r = joint.marginal(right);
    let n_r = p_r.len();
    let mi = p_lr
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(idx, &p)| p * (p / (p_l[idx / n_r] * p_r[idx % n_r])).log2())
        .sum();
    Ok(mi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovViolation {
    pub condition: &'static str,
    pub gap: f64,
}

impl fmt::Display for MarkovViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails by {:.3e} bits", self.condition, self.gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

/// Checks `I(q1q2; a1a2) <= I(q1; a1) + I(q2; a2)` after verifying the
/// conditional-independence premises it relies on.
pub fn mi_subadditivity_check(joint: &JointDistribution) -> Result<MiCheck, AnalysisError> {
    use Var::*;
    let gap1 = (joint.conditional_entropy(&[A1], &[Q1, Q2]) - joint.conditional_entropy(&[A1], &[Q1]))
        .abs();
    if gap1 > PREMISE_TOLERANCE {
        return Err(AnalysisError::Premise(MarkovViolation {
            condition: "H(a1|q1,q2) = H(a1|q1)",
            gap: gap1,
        }));
    }
    let gap2 = (joint.conditional_entropy(&[A2], &[A1, Q1, Q2])
        - joint.conditional_entropy(&[A2], &[Q2]))
    .abs();
    if gap2 > PREMISE_TOLERANCE {
        return Err(AnalysisError::Premise(MarkovViolation {
            condition: "H(a2|a1,q1,q2) = H(a2|q2)",
            gap: gap2,
        }));
    }
    let lhs = mutual_information(joint, &[Q1, Q2], &[A1, A2])?;
    let rhs = mutual_information(joint, &[Q1], &[A1])? + mutual_information(joint, &[Q2], &[A2])?;
    Ok(MiCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + INEQUALITY_TOLERANCE,
        slack: rhs - lhs,
    })
}
