use pmu_gaf::baselines::{dt_fit, dual_objective, kernel_matrix, svm_fit_binary, DtConfig, Node, SvmConfig};
use pmu_gaf::rng::{self, Purpose};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub fn rng(index: u64) -> ChaCha20Rng {
    rng::stream(20_240_601, Purpose::Synth, index)
}

fn gini(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    1.0 - (0..3)
        .map(|k| {
            let p = labels.iter().filter(|&&l| l == k).count() as f64 / n;
            p * p
        })
        .sum::<f64>()
}

/// Exhaustive search over every (feature, midpoint) split; ties go to the
/// lowest feature, then the lowest threshold. `None` when no split strictly
/// lowers the weighted impurity.
pub fn oracle_root_split(x: &[Vec<f64>], y: &[usize]) -> Option<(usize, f64)> {
    let n = y.len() as f64;
    let parent = gini(y);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = {
                let l = x.iter().zip(y).filter(|(row, _)| row[f] <= t).map(|(_, &c)| c).collect();
                let r = x.iter().zip(y).filter(|(row, _)| row[f] > t).map(|(_, &c)| c).collect();
                (l, r)
            };
            let imp = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n;
            if best.is_none_or(|(_, _, b)| imp < b - 1e-12) {
                best = Some((f, t, imp));
            }
        }
    }
    best.filter(|&(_, _, imp)| imp < parent - 1e-12).map(|(f, t, _)| (f, t))
}

/// Solve a small dense linear system; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact dual optimum by enumerating which multipliers sit at 0, at C, or
/// are free, and solving the equality-constrained KKT system on the free set.
pub fn brute_force_dual(y: &[f64], k: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut b = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r][s] = q(i, j);
                }
                a[r][m] = y[i];
                a[m][r] = y[i];
                b[r] = 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q(i, j) * c).sum::<f64>();
            }
            b[m] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = solve(a, b) else { continue };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let feasible = alpha.iter().all(|&a| (-1e-12..=c + 1e-12).contains(&a))
            && alpha.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs() < 1e-9;
        if feasible {
            best = best.max(dual_objective(&alpha, y, k));
        }
    }
    best
}

/// CART root split versus exhaustive search on 100 random datasets with
/// n <= 8 samples and d <= 2 features. Returns how many roots split.
pub fn cart_family() -> Result<usize, String> {
    let mut splits = 0;
    for case in 0..100u64 {
        let mut r = rng(case);
        let n = r.random_range(1..=8);
        let d = r.random_range(1..=2);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(0..5) as f64 * 0.5).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        let tree = dt_fit(&x, &y, &DtConfig::default()).map_err(|e| e.to_string())?;
        let got = match tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        };
        let want = oracle_root_split(&x, &y);
        if got != want {
            return Err(format!("case {case}: tree {got:?} vs oracle {want:?} on x={x:?} y={y:?}"));
        }
        splits += usize::from(got.is_some());
    }
    Ok(splits)
}

/// SMO dual objective versus the exact optimum on 200 toy sets with
/// n <= 4. Returns the largest objective gap.
pub fn smo_family() -> Result<f64, String> {
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let mut r = rng(5000 + case);
        let n = r.random_range(2..=4);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)])
            .collect();
        let mut y: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = [0.5, 1.0, 10.0][r.random_range(0..3)];
        let gamma = [0.033, 0.5, 2.0][r.random_range(0..3)];
        // A KKT gap of 1e-3 (the default) can leave ~1e-6 of objective on
        // the table, so the comparison runs the solver to a tight gap.
        let cfg = SvmConfig {
            c,
            gamma,
            tolerance: 1e-9,
            ..SvmConfig::default()
        };
        let fit = svm_fit_binary(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let k = kernel_matrix(&x, gamma);
        let gap = (dual_objective(&fit.alphas, &y, &k) - brute_force_dual(&y, &k, c)).abs();
        worst = worst.max(gap);
        let balance: f64 = fit.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        if gap >= 1e-6 || balance.abs() >= 1e-9 || fit.alphas.iter().any(|a| !(0.0..=c).contains(a)) {
            return Err(format!("case {case}: objective gap {gap:e}, balance {balance:e}, alphas {:?}", fit.alphas));
        }
    }
    Ok(worst)
}

/// Multipliers of the two-point problem x = (0), (1), y = -1, +1 at defaults.
pub fn two_point_alphas() -> Vec<f64> {
    svm_fit_binary(&[vec![0.0], vec![1.0]], &[-1.0, 1.0], &SvmConfig::default())
        .unwrap()
        .alphas
}
