use rand::Rng;

use super::{DownstreamError, TaskType};
use crate::rng;

/// One linear map per task; None marks a task skipped for degenerate
/// training labels.
#[derive(Debug, Clone)]
pub struct ProbeModel {
    pub task_type: TaskType,
    pub tasks: Vec<Option<TaskProbe>>,
}

#[derive(Debug, Clone)]
pub struct TaskProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl TaskProbe {
    /// Raw linear score; for classification this is the logit.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic regression by full-batch gradient descent on the mean log loss
/// with an L2 penalty, run until the gradient norm drops below 1e-6 or
/// 5000 iterations. The step size is the inverse of a Lipschitz bound on
/// the gradient, so the descent never diverges.
fn fit_logistic(
    x: &[&[f64]],
    y: &[f64],
    reg: f64,
    seed: u64,
    task: usize,
) -> TaskProbe {
    let n = x.len();
    let d = x[0].len();
    let frob_sq: f64 = x
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum();
    let lipschitz = frob_sq / (4.0 * n as f64) + reg;
    let lr = 1.0 / lipschitz;

    let mut init = rng::stream(seed, &format!("probe.t{task}"));
    let mut w: Vec<f64> = (0..d).map(|_| init.gen_range(-0.01..0.01)).collect();
    let mut b = 0.0;
    for _ in 0..5000 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let z = w.iter().zip(*row).map(|(wi, v)| wi * v).sum::<f64>() + b;
            let p = sigmoid(z);
            let err = p - label;
            for (g, &v) in gw.iter_mut().zip(*row) {
                *g += err * v;
            }
            gb += err;
        }
        let inv_n = 1.0 / n as f64;
        for (g, &wi) in gw.iter_mut().zip(&w) {
            *g = *g * inv_n + reg * wi;
        }
        gb *= inv_n;
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm < 1e-6 {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    TaskProbe { weights: w, bias: b }
}

/// Ridge regression in closed form: solve (XᵀX + λI)w = Xᵀy with a bias
/// column appended to X, via Cholesky.
fn fit_ridge(x: &[&[f64]], y: &[f64], reg: f64) -> Result<TaskProbe, DownstreamError> {
    let d = x[0].len() + 1;
    let mut a = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let augmented = |row: &[f64], j: usize| if j < row.len() { row[j] } else { 1.0 };
    for (row, &label) in x.iter().zip(y) {
        for i in 0..d {
            let vi = augmented(row, i);
            rhs[i] += vi * label;
            for j in 0..d {
                a[i * d + j] += vi * augmented(row, j);
            }
        }
    }
    for i in 0..d - 1 {
        a[i * d + i] += reg;
    }
    let w = cholesky_solve(&a, &rhs, d)?;
    Ok(TaskProbe {
        bias: w[d - 1],
        weights: w[..d - 1].to_vec(),
    })
}

fn cholesky_solve(a: &[f64], rhs: &[f64], d: usize) -> Result<Vec<f64>, DownstreamError> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return Err(DownstreamError::SingularSystem);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    // forward then back substitution
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * d + k] * z[k];
        }
        z[i] = sum / l[i * d + i];
    }
    let mut w = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = z[i];
        for k in i + 1..d {
            sum -= l[k * d + i] * w[k];
        }
        w[i] = sum / l[i * d + i];
    }
    Ok(w)
}

/// Fits one linear probe per task on frozen features, masking missing
/// labels. A classification task with only one class present is skipped.
pub fn probe_fit(
    features: &[Vec<f64>],
    labels: &[Vec<Option<f64>>],
    task_type: TaskType,
    reg: f64,
    seed: u64,
) -> Result<ProbeModel, DownstreamError> {
    if features.len() != labels.len() {
        return Err(DownstreamError::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    let n_tasks = labels.first().map_or(0, |r| r.len());
    let mut tasks = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, lab) in features.iter().zip(labels) {
            if let Some(v) = lab[t] {
                x.push(row.as_slice());
                y.push(v);
            }
        }
        let degenerate = match task_type {
            TaskType::Classification => {
                !(y.contains(&0.0) && y.contains(&1.0))
            }
            TaskType::Regression => y.is_empty(),
        };
        if degenerate {
            tasks.push(None);
            continue;
        }
        let probe = match task_type {
            TaskType::Classification => fit_logistic(&x, &y, reg, seed, t),
            TaskType::Regression => fit_ridge(&x, &y, reg)?,
        };
        tasks.push(Some(probe));
    }
    Ok(ProbeModel { task_type, tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn separable_toy_set_reaches_training_accuracy_one() {
        let features: Vec<Vec<f64>> = vec![
            vec![2.0, 0.1],
            vec![1.5, -0.2],
            vec![2.5, 0.3],
            vec![-2.0, 0.2],
            vec![-1.8, -0.1],
            vec![-2.2, 0.0],
        ];
        let labels: Vec<Vec<Option<f64>>> = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
            .iter()
            .map(|&v| vec![Some(v)])
            .collect();
        let model =
            probe_fit(&features, &labels, TaskType::Classification, 1e-3, 0).unwrap();
        let probe = model.tasks[0].as_ref().unwrap();
        for (f, l) in features.iter().zip(&labels) {
            let predicted = if probe.decision(f) > 0.0 { 1.0 } else { 0.0 };
            assert_eq!(predicted, l[0].unwrap());
        }
    }

    #[test]
    fn ridge_without_penalty_interpolates_determined_system() {
        // two points, one feature + bias: line through both exactly
        let features = vec![vec![1.0], vec![3.0]];
        let labels: Vec<Vec<Option<f64>>> =
            vec![vec![Some(2.0)], vec![Some(8.0)]];
        let model = probe_fit(&features, &labels, TaskType::Regression, 0.0, 0).unwrap();
        let probe = model.tasks[0].as_ref().unwrap();
        assert_relative_eq!(probe.decision(&[1.0]), 2.0, epsilon = 1e-9);
        assert_relative_eq!(probe.decision(&[3.0]), 8.0, epsilon = 1e-9);
    }

    #[test]
    fn single_class_task_is_skipped() {
        let features = vec![vec![1.0], vec![2.0]];
        let labels: Vec<Vec<Option<f64>>> =
            vec![vec![Some(1.0), Some(1.0)], vec![Some(1.0), Some(0.0)]];
        let model =
            probe_fit(&features, &labels, TaskType::Classification, 1e-2, 0).unwrap();
        assert!(model.tasks[0].is_none());
        assert!(model.tasks[1].is_some());
    }

    #[test]
    fn all_missing_task_is_skipped() {
        let features = vec![vec![1.0], vec![2.0]];
        let labels: Vec<Vec<Option<f64>>> = vec![vec![None], vec![None]];
        let model = probe_fit(&features, &labels, TaskType::Regression, 1e-2, 0).unwrap();
        assert!(model.tasks[0].is_none());
    }

    #[test]
    fn missing_labels_are_excluded_per_task() {
        // the conflicting third row is masked out for task 0
        let features = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let labels: Vec<Vec<Option<f64>>> = vec![
            vec![Some(1.0)],
            vec![Some(0.0)],
            vec![None],
        ];
        let model =
            probe_fit(&features, &labels, TaskType::Classification, 1e-3, 0).unwrap();
        let probe = model.tasks[0].as_ref().unwrap();
        assert!(probe.decision(&[1.0]) > 0.0);
        assert!(probe.decision(&[-1.0]) < 0.0);
    }
}
