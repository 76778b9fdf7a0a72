use super::FitResult;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{worst_case, worst_case_regret};
use crate::policy::{Policy, TreeNode, TreePolicy};
use crate::uncertainty::{BudgetedMethod, UncertaintySpec};

struct Grower<'a> {
    data: &'a Dataset,
    spec: &'a UncertaintySpec,
    base: Vec<f64>,
    min_leaf: usize,
    max_depth: usize,
    /// current arm of every unit
    assign: Vec<usize>,
    objective: f64,
    /// objective after each accepted split, starting with the constant
    history: Vec<f64>,
    scratch: Vec<f64>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// the side that receives `arm`; the other keeps the leaf's arm
    left_gets_arm: bool,
    arm: usize,
    objective: f64,
}

impl Grower<'_> {
    fn evaluate(&mut self, assign: &[usize]) -> Result<f64> {
        let t = self.data.treatments();
        let y = self.data.outcomes();
        for i in 0..assign.len() {
            self.scratch[i] = (f64::from(u8::from(assign[i] == t[i])) - self.base[i]) * y[i];
        }
        Ok(worst_case(&self.scratch, self.data.arms(), self.spec, BudgetedMethod::Parametric, false)?.value)
    }

    fn best_split(&mut self, units: &[usize], arm: usize) -> Result<Option<Candidate>> {
        let m = self.data.m();
        let mut best: Option<Candidate> = None;
        let mut trial = self.assign.clone();
        let mut sorted = units.to_vec();
        for feature in 0..self.data.d() {
            let x = |i: usize| self.data.x().get(i, feature);
            sorted.sort_by(|&i, &j| x(i).total_cmp(&x(j)).then(i.cmp(&j)));
            for cut in 1..sorted.len() {
                let (lo, hi) = (x(sorted[cut - 1]), x(sorted[cut]));
                if lo == hi || cut < self.min_leaf || sorted.len() - cut < self.min_leaf {
                    continue;
                }
                let mid = lo + (hi - lo) / 2.0;
                // adjacent floats: the midpoint may round up onto `hi`
                let threshold = if mid < hi { mid } else { lo };
                for left_gets_arm in [true, false] {
                    let side = if left_gets_arm { &sorted[..cut] } else { &sorted[cut..] };
                    for new_arm in (0..m).filter(|&a| a != arm) {
                        side.iter().for_each(|&i| trial[i] = new_arm);
                        let objective = self.evaluate(&trial)?;
                        side.iter().for_each(|&i| trial[i] = arm);
                        if best.as_ref().map_or(true, |b| objective < b.objective) {
                            best = Some(Candidate {
                                feature,
                                threshold,
                                left_gets_arm,
                                arm: new_arm,
                                objective,
                            });
                        }
                    }
                }
            }
        }
        Ok(best)
    }

    fn grow(&mut self, units: Vec<usize>, arm: usize, depth: usize) -> Result<TreeNode> {
        let leaf = |arm: usize, m: usize| {
            let mut probs = vec![0.0; m];
            probs[arm] = 1.0;
            TreeNode::Leaf { probs }
        };
        let m = self.data.m();
        if depth >= self.max_depth {
            return Ok(leaf(arm, m));
        }
        let Some(c) = self.best_split(&units, arm)? else {
            return Ok(leaf(arm, m));
        };
        if !(c.objective < self.objective) {
            return Ok(leaf(arm, m));
        }
        let (left, right): (Vec<usize>, Vec<usize>) = units
            .iter()
            .partition(|&&i| self.data.x().get(i, c.feature) <= c.threshold);
        let (left_arm, right_arm) = if c.left_gets_arm { (c.arm, arm) } else { (arm, c.arm) };
        for &i in &left {
            self.assign[i] = left_arm;
        }
        for &i in &right {
            self.assign[i] = right_arm;
        }
        self.objective = c.objective;
        self.history.push(c.objective);
        let left = self.grow(left, left_arm, depth + 1)?;
        let right = self.grow(right, right_arm, depth + 1)?;
        Ok(TreeNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

/// Greedy recursive partitioning of the worst-case regret: start from the
/// best single-arm policy, then at each leaf (depth first, left before right)
/// try every feature, midpoint threshold, side and replacement arm, scoring
/// the whole tree with all other leaves frozen. A split is kept only if it
/// strictly lowers the objective and both children hold at least `min_leaf`
/// units. A tree without splits is returned as a constant policy.
pub fn tree_partition_fit(
    data: &Dataset,
    spec: &UncertaintySpec,
    pi0: &Policy,
    depth: usize,
    min_leaf: usize,
) -> Result<FitResult> {
    tree_fit_with_history(data, spec, pi0, depth, min_leaf).map(|(fit, _)| fit)
}

pub(crate) fn tree_fit_with_history(
    data: &Dataset,
    spec: &UncertaintySpec,
    pi0: &Policy,
    depth: usize,
    min_leaf: usize,
) -> Result<(FitResult, Vec<f64>)> {
    if spec.budget().is_some() {
        return Err(Error::Unsupported(
            "tree learning supports the box uncertainty set only".into(),
        ));
    }
    if min_leaf == 0 {
        return Err(Error::domain("min_leaf must be >= 1"));
    }
    if pi0.m() != data.m() || pi0.d() != data.d() {
        return Err(Error::domain("baseline policy shape does not match the data"));
    }
    if spec.len() != data.n() {
        return Err(Error::domain("uncertainty set size differs from n"));
    }
    data.arms().require_nonempty()?;
    let (n, m) = (data.n(), data.m());
    let base = (0..n)
        .map(|i| pi0.probabilities(data.row(i))[data.treatments()[i]])
        .collect();
    let mut g = Grower {
        data,
        spec,
        base,
        min_leaf,
        max_depth: depth,
        assign: vec![0; n],
        objective: f64::INFINITY,
        history: Vec::new(),
        scratch: vec![0.0; n],
    };
    let mut start = 0;
    for arm in 0..m {
        let value = g.evaluate(&vec![arm; n])?;
        if value < g.objective {
            g.objective = value;
            start = arm;
        }
    }
    g.assign = vec![start; n];
    g.history.push(g.objective);
    let root = g.grow((0..n).collect(), start, 0)?;
    let policy = match root {
        TreeNode::Leaf { .. } => Policy::always(m, data.d(), start)?,
        root => Policy::Tree(TreePolicy::new(m, data.d(), root)?),
    };
    let objective = worst_case_regret(&policy, pi0, data, spec)?;
    let fit = FitResult {
        policy,
        objective,
        gamma: spec.gamma(),
        fell_back: false,
        per_restart: Vec::new(),
        best_restart: None,
        selected_from: spec.gamma(),
        options: None,
    };
    Ok((fit, g.history))
}
