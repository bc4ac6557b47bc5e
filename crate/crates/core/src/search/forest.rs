//! Random-forest regression used as the search surrogate.

use rand::seq::index::sample;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub trees: usize,
    /// Non-constant features tried per split; `None` means half of them,
    /// rounded up.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            max_features: None,
            min_leaf: 1,
            max_depth: 32,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: ForestConfig,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(mean(self.y, idx)));
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return slot;
        }
        let d = self.x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        for feature in sample(self.rng, d, d).into_iter() {
            if tried == self.mtry {
                break;
            }
            let first = self.x[idx[0]][feature];
            if idx.iter().all(|&i| self.x[i][feature] == first) {
                continue;
            }
            tried += 1;
            idx.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            let n = idx.len();
            for k in 1..n {
                let yi = self.y[idx[k - 1]];
                s += yi;
                sq += yi * yi;
                let (lo, hi) = (self.x[idx[k - 1]][feature], self.x[idx[k]][feature]);
                if lo == hi || k < self.cfg.min_leaf || n - k < self.cfg.min_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
                if best.is_none_or(|(b, _, _)| sse < b) {
                    best = Some((sse, feature, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return slot;
        };
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let l = self.grow(&mut left, depth + 1);
        let r = self.grow(&mut right, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        slot
    }
}

impl RandomForest {
    /// Fits `trees` regression trees, each on a bootstrap resample.
    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, rng: &mut R) -> Self {
        assert!(
            !x.is_empty() && x.len() == y.len(),
            "need matching, non-empty samples"
        );
        let d = x[0].len();
        let mtry = cfg.max_features.unwrap_or(d.div_ceil(2)).clamp(1, d.max(1));
        let trees = (0..cfg.trees)
            .map(|_| {
                let mut idx: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
                let mut b = Builder {
                    x,
                    y,
                    cfg: *cfg,
                    mtry,
                    rng: &mut *rng,
                    nodes: Vec::new(),
                };
                b.grow(&mut idx, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Self { trees }
    }

    /// Mean and (population) variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let m = preds.iter().sum::<f64>() / preds.len() as f64;
        let v = preds.iter().map(|p| (p - m).powi(2)).sum::<f64>() / preds.len() as f64;
        (m, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn learns_a_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, 0.5]).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| if v[0] < 0.5 { 1.0 } else { 5.0 })
            .collect();
        let f = RandomForest::fit(&x, &y, &ForestConfig::default(), &mut rng);
        assert!((f.predict(&[0.1, 0.5]).0 - 1.0).abs() < 0.5);
        assert!((f.predict(&[0.9, 0.5]).0 - 5.0).abs() < 0.5);
    }

    #[test]
    fn constant_targets_have_zero_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![3.0; 10];
        let f = RandomForest::fit(&x, &y, &ForestConfig::default(), &mut rng);
        assert_eq!(f.predict(&[4.5]), (3.0, 0.0));
    }

    #[test]
    fn single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = RandomForest::fit(
            &[vec![0.2, 0.3]],
            &[7.0],
            &ForestConfig::default(),
            &mut rng,
        );
        assert_eq!(f.predict(&[0.9, 0.9]).0, 7.0);
    }
}
