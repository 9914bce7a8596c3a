//! Oracles and helpers shared by the integration tests. Nothing here calls the
//! code it is used to check.
#![allow(dead_code)]

use knife::diffengine::{Graph, Tensor, Var};
use knife::losses;
use knife::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn signal(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

// ---- finite differences ----

pub const FD_STEP: f64 = 1e-5;

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, with a small floor so two all-zero
/// gradients compare equal.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

/// Largest relative error between reverse-mode and central-difference
/// gradients over every input of `build`.
pub fn grad_check<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.param(t.clone()).unwrap()).collect();
        let out = build(&mut g, &vars).unwrap();
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone()).unwrap()).collect();
    let out = build(&mut g, &vars).unwrap();
    let grads = g.backward(out).unwrap();

    let mut worst = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        let mut numeric = vec![0.0; inputs[i].len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            *slot = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Reduces any tensor to a scalar through a fixed random target so every
/// output element gets a distinct upstream gradient.
fn probe(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let shape = g.shape(out).to_vec();
    let target = g.constant(randn(&mut rng(seed ^ 0xabcd), &shape))?;
    g.mse(out, target)
}

pub type GradCase = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>);

/// One instance of every differentiable primitive plus the composed student
/// loss, with shapes drawn from `seed`.
pub fn grad_cases(seed: u64) -> Vec<GradCase> {
    let mut r = rng(seed);
    let mut dim = |lo: usize, hi: usize| r.gen_range(lo..=hi);
    let (m, k, n) = (dim(1, 4), dim(1, 4), dim(1, 4));
    let (b, c, t) = (dim(1, 3), dim(1, 3), dim(6, 12));
    let (f, kl) = (dim(1, 3), dim(1, 4));
    let stride = dim(1, 2);
    let gr = dim(1, 3);
    let pool = dim(1, 3);
    let classes = dim(2, 4);
    let rows = dim(2, 5);
    let pick: Vec<usize> = (0..dim(1, 6)).map(|_| dim(0, rows - 1)).collect();
    let labels: Vec<usize> = (0..rows).map(|_| dim(0, classes - 1)).collect();
    let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
    let mut t_ = |shape: &[usize]| randn(&mut r, shape);

    let mut cases: Vec<GradCase> = Vec::new();
    cases.push(("matmul", vec![t_(&[m, k]), t_(&[k, n])], Box::new(move |g, v| {
        let o = g.matmul(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("matmul_batched", vec![t_(&[gr, c]), t_(&[b, c, t])], Box::new(move |g, v| {
        let o = g.matmul(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("add_bias_2d", vec![t_(&[m, n]), t_(&[n])], Box::new(move |g, v| {
        let o = g.add_bias(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("add_bias_3d", vec![t_(&[b, c, t]), t_(&[c])], Box::new(move |g, v| {
        let o = g.add_bias(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("conv1d_time", vec![t_(&[b, c, t]), t_(&[f, kl])], Box::new(move |g, v| {
        let o = g.conv1d_time(v[0], v[1], stride)?;
        probe(g, o, seed)
    })));
    cases.push(("avg_pool1d", vec![t_(&[b, c, t])], Box::new(move |g, v| {
        let o = g.avg_pool1d(v[0], pool)?;
        probe(g, o, seed)
    })));
    cases.push(("elu", vec![t_(&[b, c, t])], Box::new(move |g, v| {
        let o = g.elu(v[0])?;
        probe(g, o, seed)
    })));
    cases.push(("flatten", vec![t_(&[b, c, t])], Box::new(move |g, v| {
        let o = g.flatten(v[0])?;
        probe(g, o, seed)
    })));
    cases.push(("transpose", vec![t_(&[m, n])], Box::new(move |g, v| {
        let o = g.transpose(v[0])?;
        probe(g, o, seed)
    })));
    let p = pick.clone();
    cases.push(("gather_rows", vec![t_(&[rows, n])], Box::new(move |g, v| {
        let o = g.gather_rows(v[0], &p)?;
        probe(g, o, seed)
    })));
    cases.push(("add", vec![t_(&[m, n]), t_(&[m, n])], Box::new(move |g, v| {
        let o = g.add(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("subtract", vec![t_(&[m, n]), t_(&[m, n])], Box::new(move |g, v| {
        let o = g.subtract(v[0], v[1])?;
        probe(g, o, seed)
    })));
    cases.push(("scale", vec![t_(&[m, n])], Box::new(move |g, v| {
        let o = g.scale(v[0], -1.7)?;
        probe(g, o, seed)
    })));
    cases.push(("mean", vec![t_(&[b, c, t])], Box::new(|g, v| g.mean(v[0]))));
    cases.push(("frobenius_sq", vec![t_(&[m, n])], Box::new(|g, v| g.frobenius_sq(v[0]))));
    cases.push(("mse", vec![t_(&[m, n]), t_(&[m, n])], Box::new(|g, v| g.mse(v[0], v[1]))));
    let l = labels.clone();
    cases.push(("softmax_cross_entropy", vec![t_(&[rows, classes])], Box::new(move |g, v| g.softmax_cross_entropy(v[0], &l))));
    cases.push(("covariance_difference", vec![t_(&[rows, n]), t_(&[rows + 1, n])], Box::new(|g, v| {
        let cu = losses::domain_covariance(g, v[0])?;
        let cv = losses::domain_covariance(g, v[1])?;
        let d = g.subtract(cv, cu)?;
        g.frobenius_sq(d)
    })));

    // Conv extractor, classifier, and all three loss terms on one graph.
    let (nb, nc, nt, nf, nk, ng, np) = (4, 2, 12, 2, 3, 2, 2);
    let d = ng * ((nt - nk + 1) / np);
    let teacher = t_(&[nb, d]);
    let labels: Vec<usize> = (0..nb).map(|i| i % 2).collect();
    let inputs = vec![t_(&[nb, nc, nt]), t_(&[nf, nk]), t_(&[ng, nf * nc]), t_(&[ng]), t_(&[d, 2]), t_(&[2])];
    cases.push(("composed_student_loss", inputs, Box::new(move |g, v| {
        let conv = g.conv1d_time(v[0], v[1], 1)?;
        let mixed = g.matmul(v[2], conv)?;
        let biased = g.add_bias(mixed, v[3])?;
        let act = g.elu(biased)?;
        let pooled = g.avg_pool1d(act, np)?;
        let feats = g.flatten(pooled)?;
        let z = g.matmul(feats, v[4])?;
        let z = g.add_bias(z, v[5])?;
        let cls = losses::cross_entropy(g, z, &labels)?;
        let tv = g.constant(teacher.clone())?;
        let mse = losses::mse_distill(g, feats, tv)?;
        let a = g.gather_rows(feats, &[0, 1])?;
        let b = g.gather_rows(feats, &[2, 3])?;
        let align = losses::coral_align(g, &[a, b])?;
        losses::total_student_loss(g, cls, Some(mse), Some(align), losses::LossWeights::new(0.7, 1.3)?)
    })));
    cases
}

// ---- DFT ----

/// `X_k = Σ x_n e^{−2πikn/m}` by the definition, as `(re, im)`.
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let m = x.len();
    (0..m)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
                let th = -2.0 * PI * ((k * n) % m) as f64 / m as f64;
                (re + v * th.cos(), im + v * th.sin())
            })
        })
        .collect()
}

// ---- covariance alignment ----

/// Pairwise covariance distance written out with explicit index loops.
pub fn coral_double_loop(domains: &[Vec<Vec<f64>>]) -> f64 {
    let d = domains[0][0].len();
    let covs: Vec<Vec<Vec<f64>>> = domains
        .iter()
        .map(|rows| {
            let n = rows.len() as f64;
            let mut c = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    let mut gram = 0.0;
                    let (mut si, mut sj) = (0.0, 0.0);
                    for r in rows {
                        gram += r[i] * r[j];
                        si += r[i];
                        sj += r[j];
                    }
                    c[i][j] = (gram - si * sj / n) / n;
                }
            }
            c
        })
        .collect();
    let nd = covs.len();
    let mut total = 0.0;
    let mut pairs = 0;
    for u in 0..nd {
        for v in 0..nd {
            if u == v {
                continue;
            }
            let mut fro = 0.0;
            for i in 0..d {
                for j in 0..d {
                    fro += (covs[u][i][j] - covs[v][i][j]).powi(2);
                }
            }
            total += fro / (4.0 * (d * d) as f64);
            pairs += 1;
        }
    }
    total / pairs as f64
}

pub fn to_tensor(rows: &[Vec<f64>]) -> Tensor {
    let d = rows[0].len();
    Tensor::new(vec![rows.len(), d], rows.concat()).unwrap()
}

// ---- Student t ----

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Two-sided tail probability of Student's t. Substituting `t = √ν·tan θ`
/// turns the density into `cos^{ν−1} θ` on (−π/2, π/2), so the mass inside
/// `|T| < t` is a ratio of two smooth integrals and needs no gamma function.
pub fn t_two_sided_quadrature(t: f64, nu: f64) -> f64 {
    let f = |th: f64| th.cos().powf(nu - 1.0);
    let theta = (t.abs() / nu.sqrt()).atan();
    let inner = simpson(f, 0.0, theta, 20_000);
    let whole = simpson(f, 0.0, PI / 2.0, 20_000);
    1.0 - inner / whole
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
