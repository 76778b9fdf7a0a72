//! Treatment policies `π(t | x)`: constant assignments, multinomial logistic
//! policies (arm 0 is the reference class) and axis-aligned trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerically stable softmax, in place.
pub(crate) fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in s.iter_mut() {
        *v /= total;
    }
}

fn check_simplex(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("{p:?} is not a probability vector")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPolicy {
    m: usize,
    d: usize,
    /// (m-1) x (d+1) row-major; row u-1 is (α_u, β_u).
    theta: Vec<f64>,
    /// Evaluate as the argmax assignment instead of softmax probabilities.
    #[serde(default)]
    hard: bool,
}

impl LogisticPolicy {
    pub fn new(m: usize, d: usize, theta: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain("logistic policy needs m >= 2"));
        }
        if theta.len() != (m - 1) * (d + 1) {
            return Err(Error::domain(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                (m - 1) * (d + 1)
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite logistic parameter"));
        }
        Ok(Self {
            m,
            d,
            theta,
            hard: false,
        })
    }

    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            m,
            d,
            theta: vec![0.0; (m - 1) * (d + 1)],
            hard: false,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn is_hard(&self) -> bool {
        self.hard
    }

    pub(crate) fn probabilities_into(&self, x: &[f64], out: &mut [f64]) {
        logistic_scores(&self.theta, self.d, x, out);
        if self.hard {
            let best = argmax(out);
            out.iter_mut().enumerate().for_each(|(t, v)| *v = f64::from(u8::from(t == best)));
        } else {
            softmax_in_place(out);
        }
    }

    /// `∇_θ π(t | x)` given the probabilities at `x`; written into `grad`.
    pub(crate) fn gradient_into(&self, t: usize, x: &[f64], probs: &[f64], grad: &mut [f64]) {
        let p = self.d + 1;
        for u in 1..self.m {
            let ds = probs[t] * (f64::from(u8::from(t == u)) - probs[u]);
            let row = &mut grad[(u - 1) * p..u * p];
            row[0] = ds;
            for (g, xi) in row[1..].iter_mut().zip(x) {
                *g = ds * xi;
            }
        }
    }
}

/// Scores `s_0 = 0, s_u = α_u + β_uᵀx` for a raw parameter block; the arm
/// count is `out.len()`.
pub(crate) fn logistic_scores(theta: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    let p = d + 1;
    out[0] = 0.0;
    for u in 1..out.len() {
        let row = &theta[(u - 1) * p..u * p];
        out[u] = row[0] + row[1..].iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>();
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        probs: Vec<f64>,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        match self {
            TreeNode::Leaf { probs } => probs,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.leaf_for(x)
                } else {
                    right.leaf_for(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn validate(&self, m: usize, d: usize) -> Result<()> {
        match self {
            TreeNode::Leaf { probs } => {
                if probs.len() != m {
                    return Err(Error::domain("tree leaf has wrong arity"));
                }
                check_simplex(probs)
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= d || !threshold.is_finite() {
                    return Err(Error::domain("invalid tree split"));
                }
                left.validate(m, d)?;
                right.validate(m, d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePolicy {
    m: usize,
    d: usize,
    root: TreeNode,
}

impl TreePolicy {
    pub fn new(m: usize, d: usize, root: TreeNode) -> Result<Self> {
        root.validate(m, d)?;
        Ok(Self { m, d, root })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Constant { d: usize, probs: Vec<f64> },
    Logistic(LogisticPolicy),
    Tree(TreePolicy),
}

impl Policy {
    pub fn constant(d: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::domain("policy needs m >= 2"));
        }
        check_simplex(&probs)?;
        Ok(Policy::Constant { d, probs })
    }

    /// All mass on arm `t`.
    pub fn always(m: usize, d: usize, t: usize) -> Result<Self> {
        if t >= m {
            return Err(Error::Index { index: t, len: m });
        }
        let mut probs = vec![0.0; m];
        probs[t] = 1.0;
        Self::constant(d, probs)
    }

    /// The default baseline: always assign arm 0 (control).
    pub fn control(m: usize, d: usize) -> Self {
        Self::always(m, d, 0).expect("arm 0 exists")
    }

    pub fn uniform(m: usize, d: usize) -> Self {
        Policy::Constant {
            d,
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Policy::Constant { probs, .. } => probs.len(),
            Policy::Logistic(p) => p.m,
            Policy::Tree(p) => p.m,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Policy::Constant { d, .. } => *d,
            Policy::Logistic(p) => p.d,
            Policy::Tree(p) => p.d,
        }
    }

    pub fn probability(&self, t: usize, x: &[f64]) -> Result<f64> {
        let m = self.m();
        if t >= m {
            return Err(Error::Index { index: t, len: m });
        }
        if x.len() != self.d() {
            return Err(Error::domain(format!(
                "covariate vector has length {}, policy expects {}",
                x.len(),
                self.d()
            )));
        }
        Ok(self.probabilities(x)[t])
    }

    /// Probabilities over all arms at `x`.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.probabilities_into(x, &mut out);
        out
    }

    pub(crate) fn probabilities_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Policy::Constant { probs, .. } => out.copy_from_slice(probs),
            Policy::Logistic(p) => p.probabilities_into(x, out),
            Policy::Tree(p) => out.copy_from_slice(p.root.leaf_for(x)),
        }
    }

    /// `∇_θ π_θ(t | x)`, laid out like the logistic parameter block.
    pub fn gradient(&self, t: usize, x: &[f64]) -> Result<Vec<f64>> {
        let Policy::Logistic(p) = self else {
            return Err(Error::Unsupported(
                "parameter gradients exist only for logistic policies".into(),
            ));
        };
        let probs = {
            let _ = self.probability(t, x)?;
            self.probabilities(x)
        };
        let mut grad = vec![0.0; p.num_params()];
        p.gradient_into(t, x, &probs, &mut grad);
        Ok(grad)
    }

    /// Deterministic argmax version of a logistic policy; other variants are
    /// returned unchanged.
    pub fn harden(&self) -> Policy {
        match self {
            Policy::Logistic(p) => Policy::Logistic(LogisticPolicy {
                hard: true,
                ..p.clone()
            }),
            other => other.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PolicyDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PolicyDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Serialized form: `{variant, m, d, payload}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyDocument {
    #[serde(flatten)]
    body: PolicyBody,
    m: usize,
    d: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", content = "payload", rename_all = "snake_case")]
enum PolicyBody {
    Constant {
        probs: Vec<f64>,
    },
    Logistic {
        theta: Vec<f64>,
        #[serde(default)]
        hard: bool,
    },
    Tree {
        root: TreeNode,
    },
}

impl From<&Policy> for PolicyDocument {
    fn from(p: &Policy) -> Self {
        let body = match p {
            Policy::Constant { probs, .. } => PolicyBody::Constant {
                probs: probs.clone(),
            },
            Policy::Logistic(l) => PolicyBody::Logistic {
                theta: l.theta.clone(),
                hard: l.hard,
            },
            Policy::Tree(t) => PolicyBody::Tree {
                root: t.root.clone(),
            },
        };
        Self {
            body,
            m: p.m(),
            d: p.d(),
        }
    }
}

impl TryFrom<PolicyDocument> for Policy {
    type Error = Error;

    fn try_from(doc: PolicyDocument) -> Result<Self> {
        let PolicyDocument { body, m, d } = doc;
        match body {
            PolicyBody::Constant { probs } => {
                if probs.len() != m {
                    return Err(Error::domain("constant policy arity differs from m"));
                }
                Policy::constant(d, probs)
            }
            PolicyBody::Logistic { theta, hard } => {
                let mut l = LogisticPolicy::new(m, d, theta)?;
                l.hard = hard;
                Ok(Policy::Logistic(l))
            }
            PolicyBody::Tree { root } => Ok(Policy::Tree(TreePolicy::new(m, d, root)?)),
        }
    }
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolicyDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = PolicyDocument::deserialize(de)?;
        Policy::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_logistic_is_uniform() {
        let p = Policy::Logistic(LogisticPolicy::zeros(2, 3));
        assert_eq!(p.probability(1, &[5.0, -2.0, 0.1]).unwrap(), 0.5);
        let p = Policy::Logistic(LogisticPolicy::zeros(3, 1));
        for t in 0..3 {
            assert!((p.probability(t, &[2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(matches!(p.probability(3, &[2.0]), Err(Error::Index { .. })));
    }

    #[test]
    fn depth_one_tree() {
        let root = TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            left: Box::new(TreeNode::Leaf { probs: vec![1.0, 0.0] }),
            right: Box::new(TreeNode::Leaf { probs: vec![0.0, 1.0] }),
        };
        let p = Policy::Tree(TreePolicy::new(2, 1, root).unwrap());
        assert_eq!(p.probability(1, &[-0.5]).unwrap(), 0.0);
        assert_eq!(p.probability(1, &[0.0]).unwrap(), 0.0);
        assert_eq!(p.probability(1, &[1e-9]).unwrap(), 1.0);
    }

    #[test]
    fn logistic_derivative_at_zero() {
        let p = Policy::Logistic(LogisticPolicy::zeros(2, 2));
        let g = p.gradient(1, &[0.0, 0.0]).unwrap();
        assert_eq!(g[0], 0.25);
        assert!(Policy::control(2, 2).gradient(0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn softmax_handles_extreme_scores() {
        let p = Policy::Logistic(LogisticPolicy::new(3, 1, vec![700.0, 0.0, -700.0, 0.0]).unwrap());
        let probs = p.probabilities(&[0.3]);
        assert!(probs.iter().all(|v| v.is_finite()));
        assert!((probs[1] - 1.0).abs() < 1e-12);
        let p = Policy::Logistic(LogisticPolicy::new(2, 1, vec![0.0, 1e3]).unwrap());
        assert!(p.probabilities(&[0.7]).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn harden_takes_argmax() {
        let p = Policy::Logistic(LogisticPolicy::new(3, 1, vec![0.1, 1.0, 0.2, -1.0]).unwrap());
        let h = p.harden();
        assert_eq!(h.probabilities(&[2.0]), vec![0.0, 1.0, 0.0]);
        assert_eq!(h.probabilities(&[-2.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(h.probabilities(&[-0.1]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let root = TreeNode::Split {
            feature: 1,
            threshold: 0.1 + 0.2,
            left: Box::new(TreeNode::Leaf { probs: vec![0.0, 1.0] }),
            right: Box::new(TreeNode::Leaf { probs: vec![1.0, 0.0] }),
        };
        let policies = [
            Policy::Logistic(
                LogisticPolicy::new(3, 2, vec![1.0 / 3.0, -2.5e-300, 7.1, 0.1, 1e300, -0.0]).unwrap(),
            ),
            Policy::Tree(TreePolicy::new(2, 2, root).unwrap()),
            Policy::uniform(3, 4),
            Policy::Logistic(LogisticPolicy::zeros(2, 1)).harden(),
        ];
        for p in policies {
            let text = p.to_json().unwrap();
            let back = Policy::from_json(&text).unwrap();
            assert_eq!(back, p, "{text}");
        }
        let text = Policy::control(2, 1).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["variant"], "constant");
        assert_eq!(v["m"], 2);
        assert_eq!(v["d"], 1);
        assert_eq!(v["payload"]["probs"][0], 1.0);
    }

    #[test]
    fn rejects_bad_documents() {
        let bad = r#"{"variant":"constant","payload":{"probs":[0.7,0.7]},"m":2,"d":0}"#;
        assert!(Policy::from_json(bad).is_err());
        let bad = r#"{"variant":"logistic","payload":{"theta":[1.0]},"m":2,"d":3}"#;
        assert!(Policy::from_json(bad).is_err());
    }

    fn logistic_instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
        (2usize..5, 0usize..4).prop_flat_map(|(m, d)| {
            (
                Just(m),
                Just(d),
                proptest::collection::vec(-3.0f64..3.0, (m - 1) * (d + 1)),
                proptest::collection::vec(-3.0f64..3.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn probabilities_on_simplex((m, d, theta, x) in logistic_instance()) {
            let p = Policy::Logistic(LogisticPolicy::new(m, d, theta).unwrap());
            let probs = p.probabilities(&x);
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(probs.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn gradients_sum_to_zero((m, d, theta, x) in logistic_instance()) {
            let p = Policy::Logistic(LogisticPolicy::new(m, d, theta).unwrap());
            let mut total = vec![0.0; (m - 1) * (d + 1)];
            for t in 0..m {
                for (s, g) in total.iter_mut().zip(p.gradient(t, &x).unwrap()) {
                    *s += g;
                }
            }
            prop_assert!(total.iter().all(|v| v.abs() <= 1e-12));
        }
    }
}
