//! Self-financing replication along simulated paths.

use super::{CallValuation, HedgePosition, Valuation};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::pricer::call::{CallSpec, SeriesControls};
use crate::regime::{ModelParams, RegimePath};
use crate::rng::path_rng;

/// `k`-th point of the uniform grid with `steps` intervals on `[0, T]`.
pub fn grid_time(k: usize, steps: usize, maturity: f64) -> f64 {
    if k >= steps {
        maturity
    } else {
        k as f64 * (maturity / steps as f64)
    }
}

/// Regime paths under the physical intensities, path `i` drawn from stream
/// `i` of `seed`.
pub fn sample_paths(params: &ModelParams, horizon: f64, n_paths: usize, seed: u64, exec: Execution) -> Result<Vec<RegimePath>> {
    params.validate_dynamics()?;
    Ok(map_indexed(n_paths, exec, |i| {
        let mut rng = path_rng(seed, i as u64);
        RegimePath::sample(params.lambda_plus, params.lambda_minus, params.sigma0, horizon, &mut rng)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathReport {
    /// Terminal capital minus the payoff.
    pub terminal_error: f64,
    pub min_capital: f64,
    /// `|V_T - V_0 - sum(phi dS + psi dB)|`.
    pub self_financing_defect: f64,
    /// Largest `|dV - phi h S(tau-)|` over the switch times.
    pub jump_defect: f64,
    /// Largest difference between the ratio used at a switch and the one
    /// recomputed from the state just before it.
    pub left_limit_gap: f64,
    pub switches: usize,
    pub rebalances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub initial_capital: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub min_capital: f64,
    /// Capital never fell below zero by more than the largest terminal
    /// replication error, i.e. beyond what rebalancing on a grid explains.
    pub admissible: bool,
    pub max_self_financing_defect: f64,
    pub max_jump_defect: f64,
    pub max_left_limit_gap: f64,
    pub paths: Vec<PathReport>,
}

/// Runs the hedge `phi = (F(t, S(1 + h), -sigma) - F(t, S, sigma)) / (S h)`
/// on each path, rebalancing on the uniform grid with `steps` intervals and
/// at every switch time, starting from capital `F(0, S0, sigma0)`.
pub fn replicate<V: Valuation>(v: &V, paths: &[RegimePath], steps: usize, exec: Execution) -> Result<BacktestReport> {
    if steps == 0 {
        return Err(Error::InvalidGrid("need at least one rebalancing step"));
    }
    let params = v.params();
    let maturity = v.maturity();
    for path in paths {
        if path.horizon() < maturity || path.sigma0() != params.sigma0 {
            return Err(Error::InvalidGrid("paths must start in sigma0 and cover the maturity"));
        }
    }
    let initial_capital = v.value(0.0, params.s0, params.sigma0)?;
    let reports: Vec<PathReport> = map_indexed(paths.len(), exec, |i| run_path(v, &paths[i], steps, initial_capital))
        .into_iter()
        .collect::<Result<_>>()?;
    let n = reports.len().max(1) as f64;
    let fold = |f: fn(&PathReport) -> f64| reports.iter().map(f).fold(0.0f64, f64::max);
    let min_capital = reports.iter().map(|r| r.min_capital).fold(f64::INFINITY, f64::min);
    let max_abs_error = fold(|r| r.terminal_error.abs());
    Ok(BacktestReport {
        initial_capital,
        mean_abs_error: reports.iter().map(|r| r.terminal_error.abs()).sum::<f64>() / n,
        max_abs_error,
        min_capital,
        admissible: min_capital + max_abs_error >= 0.0,
        max_self_financing_defect: fold(|r| r.self_financing_defect),
        max_jump_defect: fold(|r| r.jump_defect),
        max_left_limit_gap: fold(|r| r.left_limit_gap),
        paths: reports,
    })
}

fn run_path<V: Valuation>(v: &V, path: &RegimePath, steps: usize, initial_capital: f64) -> Result<PathReport> {
    let params = v.params();
    let maturity = v.maturity();
    let switches: Vec<f64> = path.switch_times().iter().copied().filter(|&t| t < maturity).collect();

    let mut sigma = params.sigma0;
    let (mut s, mut b) = (params.s0, 1.0);
    let mut capital = initial_capital;
    let mut gains = 0.0;
    let mut report = PathReport {
        terminal_error: 0.0,
        min_capital: capital,
        self_financing_defect: 0.0,
        jump_defect: 0.0,
        left_limit_gap: 0.0,
        switches: switches.len(),
        rebalances: 0,
    };
    let mut k = 0usize;
    let mut seg_start = 0.0;
    for seg in 0..=switches.len() {
        let seg_end = switches.get(seg).copied().unwrap_or(maturity);
        let h = params.h(sigma);
        let own = v.along(seg_start, s, sigma, sigma)?;
        let other = v.along(seg_start, s * (1.0 + h), sigma, -sigma)?;
        let (c, r) = (params.c(sigma), params.r(sigma));
        let (s_start, b_start) = (s, b);
        let state = |t: f64| (s_start * (c * (t - seg_start)).exp(), b_start * (r * (t - seg_start)).exp());
        let ratio = |t: f64, s: f64| -> Result<f64> { Ok((other(t)? - own(t)?) / (s * h)) };

        let mut t = seg_start;
        while t < seg_end {
            let phi = ratio(t, s)?;
            let pos = HedgePosition::rebalance(phi, capital, s, b);
            report.rebalances += 1;
            while k <= steps && grid_time(k, steps, maturity) <= t {
                k += 1;
            }
            let next = if k <= steps { grid_time(k, steps, maturity).min(seg_end) } else { seg_end };
            let (s_next, b_next) = state(next);
            gains += pos.phi * (s_next - s) + pos.psi * (b_next - b);
            capital = pos.value(s_next, b_next);
            report.min_capital = report.min_capital.min(capital);
            (s, b, t) = (s_next, b_next, next);
        }
        if seg < switches.len() {
            // rebalance in the state just before the switch, then jump
            let phi = ratio(seg_end, s)?;
            let direct = super::hedge_ratio_at_jump(v, seg_end, s, sigma)?;
            report.left_limit_gap = report.left_limit_gap.max((phi - direct).abs());
            let pos = HedgePosition::rebalance(phi, capital, s, b);
            report.rebalances += 1;
            let s_after = s * (1.0 + h);
            let jump = pos.value(s_after, b) - capital;
            report.jump_defect = report.jump_defect.max((jump - phi * h * s).abs());
            gains += pos.phi * (s_after - s);
            capital = pos.value(s_after, b);
            report.min_capital = report.min_capital.min(capital);
            s = s_after;
            sigma = -sigma;
        }
        seg_start = seg_end;
    }
    report.terminal_error = capital - v.payoff(s);
    report.self_financing_defect = (capital - initial_capital - gains).abs();
    Ok(report)
}

/// Replicates the call `spec` on `paths` with `steps` uniform rebalancing
/// intervals plus the switch times.
pub fn replication_backtest(
    paths: &[RegimePath],
    spec: &CallSpec,
    params: &ModelParams,
    steps: usize,
    controls: &SeriesControls,
    exec: Execution,
) -> Result<BacktestReport> {
    let v = CallValuation::new(params, *spec, *controls)?.with_time_grid(steps)?;
    replicate(&v, paths, steps, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedging::tests::params;
    use crate::hedging::PayoffValuation;
    use crate::pricer::european::Stock;
    use crate::regime::Regime;

    #[test]
    fn stock_is_replicated_exactly() {
        let p = params();
        let v = PayoffValuation::new(&p, Stock, 1.0, SeriesControls::default()).unwrap();
        let path = RegimePath::new(Regime::Plus, vec![0.31, 0.52, 0.9], 1.5).unwrap();
        let rep = replicate(&v, &[path], 7, Execution::Sequential).unwrap();
        assert!(rep.max_abs_error < 1e-8 * p.s0, "{rep:?}");
        assert!(rep.max_self_financing_defect < 1e-9);
    }

    #[test]
    fn call_replication_converges() {
        let p = params();
        let spec = CallSpec::new(100.0, 1.0).unwrap();
        let paths = sample_paths(&p, 1.0, 40, 7, Execution::Sequential).unwrap();
        let c = SeriesControls::default();
        let coarse = replication_backtest(&paths, &spec, &p, 200, &c, Execution::Sequential).unwrap();
        let fine = replication_backtest(&paths, &spec, &p, 400, &c, Execution::Sequential).unwrap();
        let ratio = coarse.mean_abs_error / fine.mean_abs_error;
        assert!((ratio - 2.0).abs() < 0.6, "{ratio}");
        assert!(fine.admissible);
        assert!(fine.max_jump_defect < 1e-9);
        assert!(fine.max_left_limit_gap < 1e-10, "{}", fine.max_left_limit_gap);
        assert!(fine.max_self_financing_defect < 1e-8);
    }
}
