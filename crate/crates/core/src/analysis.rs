//! Evaluation of kernel expansions, discrete Sobolev errors and rate fits.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use faer::MatRef;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KansaError, Result};
use crate::geometry::{closed_grid, Domain, PointSet};
use crate::jet::Jet;
use crate::kernels::Kernel;
use crate::pde::ManufacturedSolution;
use crate::solvers::{self, LeastSquaresSolution, Theta};

/// Jets of `u = Σ λ_j Φ(· − t_j)` at every point of `points`.
pub fn evaluate_expansion(kernel: &Kernel, centers: &PointSet, coefficients: &[f64], points: &PointSet) -> Vec<Jet> {
    assert_eq!(centers.len(), coefficients.len(), "one coefficient per center");
    let dim = points.dim();
    points
        .coords()
        .par_chunks_exact(dim)
        .map(|x| {
            let mut acc = Jet::zero(dim);
            for (t, &c) in centers.iter().zip(coefficients) {
                if c != 0.0 {
                    acc.add_scaled(c, &kernel.jet(x, t));
                }
            }
            acc
        })
        .collect()
}

/// Jets of a solved expansion at every point of `points`.
pub fn evaluate_solution(solution: &LeastSquaresSolution, points: &PointSet) -> Vec<Jet> {
    evaluate_expansion(&solution.kernel, &solution.trial_centers, &solution.coefficients, points)
}

/// A derivative multi-index `α` with `|α| ≤ 2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// All multi-indices of order at most 2 in `dim` variables, by increasing order.
    pub fn up_to_second(dim: usize) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(vec![0; dim])];
        for i in 0..dim {
            let mut a = vec![0; dim];
            a[i] = 1;
            out.push(MultiIndex(a));
        }
        for i in 0..dim {
            for j in i..dim {
                let mut a = vec![0; dim];
                a[i] += 1;
                a[j] += 1;
                out.push(MultiIndex(a));
            }
        }
        out
    }

    /// `D^α` read off a jet.
    pub fn apply(&self, jet: &Jet) -> f64 {
        let axes: Vec<usize> = self
            .0
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat(i).take(k as usize))
            .collect();
        match axes.as_slice() {
            [] => jet.value(),
            [i] => jet.gradient()[*i],
            [i, j] => jet.hessian(*i, *j),
            _ => panic!("jets carry derivatives up to order 2"),
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Discrete errors over an evaluation set `χ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `(Σ_χ e² / n_χ)^{1/2}`.
    pub l2: f64,
    /// `(Σ_{|α|≤2} Σ_χ (D^α e)² / n_χ)^{1/2}`; mixed derivatives counted once.
    pub h2: f64,
    /// Plain `ℓ₂` sums without the `1/n_χ` normalization.
    pub l2_raw: f64,
    pub h2_raw: f64,
    /// RMS error of each derivative.
    pub per_derivative: BTreeMap<MultiIndex, f64>,
    pub eval_set_size: usize,
}

/// Errors of `approx − exact` given jets at the same evaluation points.
pub fn error_from_jets(approx: &[Jet], exact: &[Jet]) -> Result<ErrorReport> {
    if approx.len() != exact.len() {
        return Err(KansaError::Numeric(format!(
            "{} approximate and {} exact jets",
            approx.len(),
            exact.len()
        )));
    }
    let n = approx.len();
    if n == 0 {
        return Err(KansaError::DegenerateSet("empty evaluation set".into()));
    }
    let dim = approx[0].dim();
    let mut sums = BTreeMap::new();
    for alpha in MultiIndex::up_to_second(dim) {
        let s: f64 = approx
            .iter()
            .zip(exact)
            .map(|(a, e)| {
                let d = alpha.apply(a) - alpha.apply(e);
                d * d
            })
            .sum();
        sums.insert(alpha, s);
    }
    let value_sum = sums[&MultiIndex(vec![0; dim])];
    let total: f64 = sums.values().sum();
    let nf = n as f64;
    Ok(ErrorReport {
        l2: (value_sum / nf).sqrt(),
        h2: (total / nf).sqrt(),
        l2_raw: value_sum.sqrt(),
        h2_raw: total.sqrt(),
        per_derivative: sums.into_iter().map(|(a, s)| (a, (s / nf).sqrt())).collect(),
        eval_set_size: n,
    })
}

/// Errors of an expansion against a manufactured solution on the closed
/// tensor grid with `eval_grid_n` points per side.
pub fn error_report(
    solution: &LeastSquaresSolution,
    exact: &ManufacturedSolution,
    domain: &Domain,
    eval_grid_n: usize,
) -> Result<ErrorReport> {
    let grid = closed_grid(domain, eval_grid_n)?;
    let approx = evaluate_solution(solution, &grid);
    let truth: Vec<Jet> = grid.coords().par_chunks_exact(grid.dim()).map(|x| exact.jet(x)).collect();
    error_from_jets(&approx, &truth)
}

/// Slope of the least-squares line through `(log h, log e)`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(KansaError::Domain(format!(
            "a rate fit needs at least 2 points, got {}",
            pairs.len()
        )));
    }
    if let Some((h, e)) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(KansaError::Domain(format!(
            "rate fits need positive finite data, got ({h}, {e})"
        )));
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (h, e)| (sx + h.ln(), sy + e.ln()));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (h, e) in pairs {
        let dx = h.ln() - mx;
        sxy += dx * (e.ln() - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(KansaError::Domain("all spacings are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Rates between consecutive pairs, in the given order.
pub fn local_rates(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
        .collect()
}

/// Number of singular values above `rcond·σ_max`.
pub fn numerical_rank(m: MatRef<'_, f64>, rcond: f64) -> Result<usize> {
    Ok(solvers::rank_of(&solvers::singular_values(m)?, rcond))
}

/// One solved cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub kernel: String,
    pub operator: String,
    pub problem: String,
    pub trial: String,
    pub n_z: usize,
    pub h_z: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub theta: Theta,
    /// `None` for the constrained solve.
    pub weight: Option<f64>,
    pub outcome: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub l2: f64,
    pub h2: f64,
    pub bdy_rank: usize,
    pub cond_est: f64,
    pub solve_seconds: f64,
}

/// Rows sharing everything but the resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub kernel: String,
    pub operator: String,
    pub problem: String,
    pub trial: String,
    pub theta: String,
}

impl StudyRow {
    pub fn group(&self) -> GroupKey {
        GroupKey {
            kernel: self.kernel.clone(),
            operator: self.operator.clone(),
            problem: self.problem.clone(),
            trial: self.trial.clone(),
            theta: self.theta.to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedRates {
    pub l2_rate: Option<f64>,
    pub h2_rate: Option<f64>,
    /// Rows used in the fit.
    pub points: usize,
}

/// Results of a sweep, with log-log rate fits per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub name: String,
    pub rows: Vec<StudyRow>,
    /// Finest levels excluded from the rate fits.
    pub drop_last: usize,
}

impl ConvergenceStudy {
    /// Rows are stably sorted by decreasing `h_Z` inside each group, groups
    /// keeping their first-appearance order.
    pub fn new(name: impl Into<String>, rows: Vec<StudyRow>, drop_last: usize) -> Self {
        let mut order: Vec<GroupKey> = Vec::new();
        for r in &rows {
            let g = r.group();
            if !order.contains(&g) {
                order.push(g);
            }
        }
        let mut sorted = rows;
        sorted.sort_by(|a, b| {
            let ga = order.iter().position(|g| *g == a.group());
            let gb = order.iter().position(|g| *g == b.group());
            ga.cmp(&gb).then(b.h_z.total_cmp(&a.h_z))
        });
        ConvergenceStudy {
            name: name.into(),
            rows: sorted,
            drop_last,
        }
    }

    pub fn all_solved(&self) -> bool {
        self.rows.iter().all(StudyRow::is_ok)
    }

    /// Groups in first-appearance order.
    pub fn groups(&self) -> Vec<GroupKey> {
        let mut out: Vec<GroupKey> = Vec::new();
        for r in &self.rows {
            let g = r.group();
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    pub fn group_rows(&self, key: &GroupKey) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| r.group() == *key).collect()
    }

    /// Rate fits over the solved rows of a group, finest `drop_last` excluded.
    /// Rates are absent with fewer than two usable rows.
    pub fn fitted_rates(&self, key: &GroupKey) -> FittedRates {
        let solved: Vec<(f64, &CellResult)> = self
            .group_rows(key)
            .into_iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|c| (r.h_z, c)))
            .collect();
        let keep = solved.len().saturating_sub(self.drop_last);
        let used = &solved[..keep];
        let fit = |pick: fn(&CellResult) -> f64| {
            let pairs: Vec<(f64, f64)> = used.iter().map(|(h, c)| (*h, pick(c))).collect();
            fit_rate(&pairs).ok()
        };
        FittedRates {
            l2_rate: fit(|c| c.l2),
            h2_rate: fit(|c| c.h2),
            points: used.len(),
        }
    }

    /// CSV with a leading `#` comment line. `timestamp` goes into that line
    /// only; with `record_timing` off, `solve_seconds` is written as `NA` so
    /// the remaining bytes depend on the configuration alone.
    pub fn write_csv<W: Write>(&self, mut w: W, timestamp: Option<u64>, record_timing: bool) -> Result<()> {
        match timestamp {
            Some(t) => writeln!(w, "# kansa study {} generated_unix={t}", self.name)?,
            None => writeln!(w, "# kansa study {}", self.name)?,
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            let weight = r.weight.map_or_else(|| "inf".to_string(), |w| format!("{w:e}"));
            let mut rec = vec![
                r.n_z.to_string(),
                format!("{:e}", r.h_z),
                format!("{:e}", r.h_x),
                format!("{:e}", r.h_y),
                r.theta.to_string(),
                weight,
            ];
            match &r.outcome {
                Ok(c) => {
                    rec.push(format!("{:e}", c.l2));
                    rec.push(format!("{:e}", c.h2));
                    rec.push(c.bdy_rank.to_string());
                    rec.push(format!("{:e}", c.cond_est));
                    rec.push(if record_timing {
                        format!("{:.6}", c.solve_seconds)
                    } else {
                        "NA".into()
                    });
                }
                Err(_) => rec.extend(std::iter::repeat("NA".to_string()).take(5)),
            }
            rec.extend([
                r.kernel.clone(),
                r.operator.clone(),
                r.problem.clone(),
                r.trial.clone(),
            ]);
            rec.push(match &r.outcome {
                Ok(_) => "ok".into(),
                Err(e) => format!("error: {e}"),
            });
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Plain-text table per group with fitted rates.
    pub fn summary(&self) -> String {
        let mut out = format!("study {}\n", self.name);
        for key in self.groups() {
            out.push_str(&format!(
                "\n{} | {} | {} | trial {} | theta {}\n",
                key.kernel, key.operator, key.problem, key.trial, key.theta
            ));
            out.push_str("   n_Z       h_Z        L2 rms       H2 rms  rank\n");
            for r in self.group_rows(&key) {
                match &r.outcome {
                    Ok(c) => out.push_str(&format!(
                        "{:6}  {:8.5}  {:11.4e}  {:11.4e}  {:4}\n",
                        r.n_z, r.h_z, c.l2, c.h2, c.bdy_rank
                    )),
                    Err(e) => out.push_str(&format!("{:6}  {:8.5}  failed: {e}\n", r.n_z, r.h_z)),
                }
            }
            let rates = self.fitted_rates(&key);
            match (rates.l2_rate, rates.h2_rate) {
                (Some(l2), Some(h2)) => out.push_str(&format!(
                    "fitted rates over {} levels: L2 {l2:.3}, H2 {h2:.3}\n",
                    rates.points
                )),
                _ => out.push_str("fitted rates: not available (fewer than 2 solved levels)\n"),
            }
        }
        out
    }
}

/// CSV header: resolution and solver columns first, labels and status last.
pub const CSV_COLUMNS: [&str; 16] = [
    "n_Z",
    "h_Z",
    "h_X",
    "h_Y",
    "theta",
    "weight_W",
    "l2_rms",
    "h2_rms",
    "bdy_rank",
    "cond_est",
    "solve_seconds",
    "kernel",
    "operator",
    "problem",
    "trial",
    "status",
];
