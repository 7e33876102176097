#![allow(dead_code)]

use geocot::collab::{loss_and_gradients, solve_collaborative, CollabConfig, DualPlans, KlVariant, LossWeights};
use geocot::cost::GeodesicCostParams;
use geocot::models::{LinearClassifier, MlpEmbedding, LEAKY_SLOPE};
use geocot::ot::{CostMatrix, DiscreteMeasure, TransportPlan};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.gen::<f64>())
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.gen::<f64>() * 2.0 - 1.0)
}

/// Central difference of `f` along every entry of `x`.
pub fn central_diff<F: FnMut(&Array2<f64>) -> f64>(x: &Array2<f64>, h: f64, mut f: F) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[i, j]];
        probe[[i, j]] = orig + h;
        let up = f(&probe);
        probe[[i, j]] = orig - h;
        let down = f(&probe);
        probe[[i, j]] = orig;
        grad[[i, j]] = (up - down) / (2.0 * h);
    }
    grad
}

/// Largest entrywise relative error, with `floor` guarding near-zero entries.
pub fn max_rel_err<'a>(
    analytic: impl IntoIterator<Item = &'a f64>,
    numeric: impl IntoIterator<Item = &'a f64>,
    floor: f64,
) -> f64 {
    analytic
        .into_iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Naive assignment oracle: minimum over all permutations of `Σ C[i, π(i)] / n`.
pub fn assignment_min(cost: &Array2<f64>) -> f64 {
    let n = cost.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, cost, &mut best);
    best / n as f64
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &Array2<f64>, best: &mut f64) {
    if k == perm.len() {
        let v: f64 = perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
        *best = best.min(v);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..proptest::test_runner::Config::default()
    }
}

pub fn forward(model: &MlpEmbedding, x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for l in &model.layers {
        out = (out.dot(&l.weights) + &l.bias).mapv(|z| if z > 0.0 { z } else { LEAKY_SLOPE * z });
    }
    out
}

pub fn softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

pub fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    Array2::from_shape_fn((labels.len(), k), |(i, c)| f64::from(u8::from(labels[i] == c)))
}

pub fn mollified(zs: &Array2<f64>, zt: &Array2<f64>, ls: &Array2<f64>, lt: &Array2<f64>, p: &GeodesicCostParams) -> Array2<f64> {
    Array2::from_shape_fn((zs.nrows(), zt.nrows()), |(i, j)| {
        let dz = (&zs.row(i) - &zt.row(j)).mapv(|v| v * v).sum();
        let dy = (&ls.row(i) - &lt.row(j)).mapv(|v| v * v).sum();
        p.alpha * dz + (1.0 - p.alpha) * (p.beta * dy).exp()
    })
}

pub struct Toy {
    pub xs: Array2<f64>,
    pub ys: Vec<usize>,
    pub xt: Array2<f64>,
    pub pseudo: Vec<usize>,
    pub plan1: TransportPlan,
    pub plan2: TransportPlan,
    pub weights: LossWeights,
    pub params: GeodesicCostParams,
}

impl Toy {
    /// The full objective written out term by term from raw parameters.
    pub fn loss(&self, model: &MlpEmbedding, clf: &LinearClassifier) -> f64 {
        let k = clf.classes();
        let (zs, zt) = (forward(model, &self.xs), forward(model, &self.xt));
        let ps = softmax(&(zs.dot(&clf.weights) + &clf.bias));
        let pt = softmax(&(zt.dot(&clf.weights) + &clf.bias));
        let ce = -self.ys.iter().enumerate().map(|(i, &y)| ps[[i, y]].ln()).sum::<f64>() / self.ys.len() as f64;
        let c1 = mollified(&zs, &zt, &ps, &pt, &self.params);
        let c2 = mollified(&zs, &zt, &one_hot(&self.ys, k), &one_hot(&self.pseudo, k), &self.params);
        let ot1 = (&c1 * &self.plan1.entries()).sum();
        let ot2 = (&c2 * &self.plan2.entries()).sum();
        let h = -pt.mapv(|p| p * p.ln()).sum() / pt.nrows() as f64;
        let kl = -(&self.plan1.entries() * &self.plan2.entries().mapv(|b| b.max(1e-30).ln())).sum();
        let w = &self.weights;
        ce + w.lambda1 * (w.alpha_plan * ot1 + (1.0 - w.alpha_plan) * ot2) + w.lambda2 * h + w.lambda3 * kl
    }
}

pub fn loss_toy() -> (MlpEmbedding, LinearClassifier, Toy) {
    let mut r = rng(21);
    let model = MlpEmbedding::new(&[3, 5, 4], &mut r).unwrap();
    let clf = LinearClassifier::new(4, 3, &mut r);
    let (ns, nt) = (5, 4);
    let mu = DiscreteMeasure::uniform(ns);
    let nu = DiscreteMeasure::uniform(nt);
    let c1 = CostMatrix::new(uniform_matrix(&mut r, ns, nt)).unwrap();
    let c2 = CostMatrix::new(uniform_matrix(&mut r, ns, nt)).unwrap();
    let plans = solve_collaborative(&c1, &c2, &mu, &nu, &CollabConfig::default()).unwrap();
    let toy = Toy {
        xs: normal_matrix(&mut r, ns, 3),
        ys: vec![0, 1, 2, 1, 0],
        xt: normal_matrix(&mut r, nt, 3),
        pseudo: vec![2, 1, 0, 0],
        plan1: plans.plan1,
        plan2: plans.plan2,
        weights: LossWeights {
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 0.1,
            alpha_plan: 0.5,
            kl_variant: KlVariant::CrossEntropy,
        },
        params: GeodesicCostParams {
            alpha: 0.7,
            beta: 1.0,
            ..GeodesicCostParams::default()
        },
    };
    (model, clf, toy)
}

/// Checks the analytic total loss and its parameter gradient (plans fixed)
/// against [`Toy::loss`] and central differences of it. Returns the absolute
/// value error and the largest relative gradient error.
pub fn full_loss_check() -> (f64, f64) {
    let (model, clf, t) = loss_toy();
    let plans = DualPlans {
        plan1: t.plan1.clone(),
        plan2: t.plan2.clone(),
        outer_iterations: 0,
        residual: 0.0,
        violation: 0.0,
        converged: true,
    };
    let (breakdown, grads) =
        loss_and_gradients(&model, &clf, t.xs.view(), &t.ys, t.xt.view(), &t.pseudo, &plans, &t.weights, t.params)
            .unwrap();
    let value_err = (breakdown.total - t.loss(&model, &clf)).abs();
    let mut worst: f64 = 0.0;
    for (l, g) in grads.embedding.iter().enumerate() {
        let nw = central_diff(&model.layers[l].weights, 1e-6, |w| {
            let mut m = model.clone();
            m.layers[l].weights = w.clone();
            t.loss(&m, &clf)
        });
        worst = worst.max(max_rel_err(g.weights.iter(), nw.iter(), 1e-7));
        let b2 = model.layers[l].bias.clone().insert_axis(ndarray::Axis(0));
        let nb = central_diff(&b2, 1e-6, |b| {
            let mut m = model.clone();
            m.layers[l].bias = b.row(0).to_owned();
            t.loss(&m, &clf)
        });
        worst = worst.max(max_rel_err(g.bias.iter(), nb.iter(), 1e-7));
    }
    let nw = central_diff(&clf.weights, 1e-6, |w| {
        let mut c = clf.clone();
        c.weights = w.clone();
        t.loss(&model, &c)
    });
    worst = worst.max(max_rel_err(grads.classifier.weights.iter(), nw.iter(), 1e-7));
    let b2 = clf.bias.clone().insert_axis(ndarray::Axis(0));
    let nb = central_diff(&b2, 1e-6, |b| {
        let mut c = clf.clone();
        c.bias = b.row(0).to_owned();
        t.loss(&model, &c)
    });
    worst = worst.max(max_rel_err(grads.classifier.bias.iter(), nb.iter(), 1e-7));
    (value_err, worst)
}
