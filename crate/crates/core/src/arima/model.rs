use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported differencing order.
pub const MAX_D: usize = 2;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Number of estimated coefficients including the intercept.
    pub fn n_params(&self) -> usize {
        1 + self.p + self.q
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// `d`-th order differences.
pub fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Rolling one-step forecasting state: the last value of each difference
/// level, the last `p` differenced values and the last `q` residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaState {
    /// Last observed `Δʲy` for `j = 0..d`.
    pub level_tails: Vec<f64>,
    /// Most recent differenced values, oldest first, at most `p`.
    pub recent: Vec<f64>,
    /// Most recent residuals, oldest first, at most `q`.
    pub residuals: Vec<f64>,
    /// Levels observed so far.
    pub observed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub residual_variance: f64,
    pub css: f64,
    /// Residuals entering the objective.
    pub n_residuals: usize,
    pub iterations: usize,
    /// State after consuming the training series.
    pub tail: ArimaState,
}

impl ArimaModel {
    /// `n·ln(CSS/n) + 2(p+q+1)`.
    pub fn aic(&self) -> f64 {
        aic(self.css, self.n_residuals, self.order)
    }

    /// Conditional mean of the next differenced value.
    fn predict_differenced(&self, state: &ArimaState) -> f64 {
        let p = self.order.p;
        let q = self.order.q;
        let mut w = self.intercept;
        for i in 0..p {
            w += self.ar_coeffs[i] * state.recent[state.recent.len() - 1 - i];
        }
        for j in 0..q.min(state.residuals.len()) {
            w += self.ma_coeffs[j] * state.residuals[state.residuals.len() - 1 - j];
        }
        w
    }

    fn ready(&self, state: &ArimaState) -> bool {
        state.observed > self.order.d && state.recent.len() >= self.order.p
    }

    /// Fresh state fed with `history`.
    pub fn state_from(&self, history: &[f64]) -> Result<ArimaState> {
        let mut state = ArimaState {
            level_tails: Vec::with_capacity(self.order.d),
            recent: Vec::new(),
            residuals: Vec::new(),
            observed: 0,
        };
        for &y in history {
            self.observe(&mut state, y)?;
        }
        Ok(state)
    }

    /// Advances `state` by one observed level.
    pub fn observe(&self, state: &mut ArimaState, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::Data(format!("non-finite observation {y}")));
        }
        let d = self.order.d;
        let mut v = y;
        let mut complete = true;
        for j in 0..d {
            if j < state.level_tails.len() {
                let next = v - state.level_tails[j];
                state.level_tails[j] = v;
                v = next;
            } else {
                state.level_tails.push(v);
                complete = false;
                break;
            }
        }
        state.observed += 1;
        if !complete {
            return Ok(());
        }
        let w = v;
        let e = if state.recent.len() >= self.order.p {
            w - self.predict_differenced(state)
        } else {
            0.0
        };
        push_bounded(&mut state.recent, w, self.order.p);
        push_bounded(&mut state.residuals, e, self.order.q);
        Ok(())
    }

    /// One-step forecast on the original scale from `state`.
    pub fn forecast(&self, state: &ArimaState) -> Result<f64> {
        if !self.ready(state) {
            return Err(Error::Insufficient(format!(
                "ARIMA{} forecast needs at least {} observations, got {}",
                self.order,
                self.order.p + self.order.d + usize::from(self.order.p == 0),
                state.observed
            )));
        }
        Ok(integrate(
            &state.level_tails,
            self.predict_differenced(state),
        ))
    }

    /// Forecast of the value following `history`.
    pub fn forecast_one_step(&self, history: &[f64]) -> Result<f64> {
        self.forecast(&self.state_from(history)?)
    }

    /// Forecasts each test value from the training tail, feeding actuals
    /// back into the state after each prediction.
    pub fn rolling_forecast(&self, test: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.tail.clone();
        let mut out = Vec::with_capacity(test.len());
        for &y in test {
            out.push(self.forecast(&state)?);
            self.observe(&mut state, y)?;
        }
        Ok(out)
    }
}

/// Minimum modulus allowed for AR and MA polynomial roots in an admissible model.
pub const MIN_ROOT_MODULUS: f64 = 1.01;

/// Smallest root modulus of `1 + c₁z + … + cₖzᵏ`, or infinity for `k = 0`.
pub fn min_root_modulus(coeffs: &[f64]) -> f64 {
    let k = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    if k == 0 {
        return f64::INFINITY;
    }
    // Roots of the polynomial are reciprocals of the companion eigenvalues
    // of zᵏ + c₁zᵏ⁻¹ + … + cₖ.
    let companion = DMatrix::from_fn(k, k, |r, c| {
        if r == 0 {
            -coeffs[c]
        } else if c + 1 == r {
            1.0
        } else {
            0.0
        }
    });
    let largest = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if largest == 0.0 {
        f64::INFINITY
    } else {
        1.0 / largest
    }
}

impl ArimaModel {
    /// True when the AR part is stationary and the MA part invertible with
    /// all roots at modulus at least [`MIN_ROOT_MODULUS`].
    pub fn is_admissible(&self) -> bool {
        let ar: Vec<f64> = self.ar_coeffs.iter().map(|v| -v).collect();
        min_root_modulus(&ar) >= MIN_ROOT_MODULUS
            && min_root_modulus(&self.ma_coeffs) >= MIN_ROOT_MODULUS
    }
}

fn push_bounded(buf: &mut Vec<f64>, v: f64, cap: usize) {
    if cap == 0 {
        return;
    }
    if buf.len() == cap {
        buf.remove(0);
    }
    buf.push(v);
}

/// Undoes `d` differences: `ŷ = Σⱼ last(Δʲy) + ŵ`.
pub fn integrate(level_tails: &[f64], differenced_forecast: f64) -> f64 {
    level_tails.iter().sum::<f64>() + differenced_forecast
}

pub fn aic(css: f64, n: usize, order: ArimaOrder) -> f64 {
    let n = n as f64;
    n * (css / n).ln() + 2.0 * order.n_params() as f64
}

/// Residuals from index `start` on and their Jacobian with respect to
/// `[c, φ…, θ…]`. Residuals before `p` are fixed at zero; those in
/// `[p, start)` feed the MA recursion but are excluded from the output.
fn residuals(w: &[f64], order: ArimaOrder, beta: &[f64], start: usize) -> (Vec<f64>, DMatrix<f64>) {
    let ArimaOrder { p, q, .. } = order;
    let k = order.n_params();
    let c = beta[0];
    let phi = &beta[1..1 + p];
    let theta = &beta[1 + p..];
    let start = start.max(p);
    let n = w.len() - start;
    let mut e = vec![0.0; w.len()];
    let mut de = vec![vec![0.0; k]; w.len()];
    for t in p..w.len() {
        let mut pred = c;
        for i in 0..p {
            pred += phi[i] * w[t - 1 - i];
        }
        for j in 0..q {
            if t > j && t - 1 - j >= p {
                pred += theta[j] * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
        let mut g = vec![0.0; k];
        g[0] = -1.0;
        for i in 0..p {
            g[1 + i] = -w[t - 1 - i];
        }
        for j in 0..q {
            if t > j && t - 1 - j >= p {
                let lag = t - 1 - j;
                g[1 + p + j] -= e[lag];
                for (gm, dm) in g.iter_mut().zip(&de[lag]) {
                    *gm -= theta[j] * dm;
                }
            }
        }
        de[t] = g;
    }
    let jac = DMatrix::from_fn(n, k, |r, col| de[r + start][col]);
    (e.split_off(start), jac)
}

fn sum_sq(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum()
}

/// Conditional-sum-of-squares fit by Levenberg-Marquardt from zero.
pub fn fit(train: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    fit_with(train, order, DEFAULT_MAX_ITERATIONS)
}

pub fn fit_with(train: &[f64], order: ArimaOrder, max_iterations: usize) -> Result<ArimaModel> {
    fit_conditioned(train, order, order.p, max_iterations)
}

/// CSS fit whose objective sums residuals of the differenced series from
/// index `start` (at least `p`), so models of different orders can be
/// compared on a common sample.
pub fn fit_conditioned(
    train: &[f64],
    order: ArimaOrder,
    start: usize,
    max_iterations: usize,
) -> Result<ArimaModel> {
    if order.d > MAX_D {
        return Err(Error::Usage(format!(
            "differencing order {} exceeds {MAX_D}",
            order.d
        )));
    }
    let start = start.max(order.p);
    let need = start + order.q + order.d + 10;
    if train.len() <= need {
        return Err(Error::Insufficient(format!(
            "ARIMA{order} fit needs more than {need} observations, got {}",
            train.len()
        )));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "ARIMA training series contains non-finite values".into(),
        ));
    }
    let w = difference(train, order.d);
    let k = order.n_params();
    let mut beta = vec![0.0; k];
    let (mut e, mut jac) = residuals(&w, order, &beta, start);
    let mut css = sum_sq(&e);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    while iterations < max_iterations {
        iterations += 1;
        let ev = DVector::from_column_slice(&e);
        let g = jac.transpose() * &ev;
        let a = jac.transpose() * &jac;
        grad_norm = 2.0 * g.norm();
        if grad_norm <= 1e-10 * css.max(1.0) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..k {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + d).collect();
            let (e_new, jac_new) = residuals(&w, order, &trial, start);
            let css_new = sum_sq(&e_new);
            if css_new.is_finite() && css_new < css {
                let step = delta.norm();
                let scale = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
                let gain = (css - css_new) / css.max(1e-300);
                beta = trial;
                e = e_new;
                jac = jac_new;
                css = css_new;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step <= 1e-10 * (scale + 1e-10) || gain < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        // No damped step reduces CSS: numerically stationary.
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            grad_norm,
        });
    }
    let n = e.len();
    let mut model = ArimaModel {
        order,
        intercept: beta[0],
        ar_coeffs: beta[1..1 + order.p].to_vec(),
        ma_coeffs: beta[1 + order.p..].to_vec(),
        residual_variance: css / n as f64,
        css,
        n_residuals: n,
        iterations,
        tail: ArimaState {
            level_tails: Vec::new(),
            recent: Vec::new(),
            residuals: Vec::new(),
            observed: 0,
        },
    };
    model.tail = model.state_from(train)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn null_model_is_mean_and_variance() {
        let x = synth::white_noise(1, 500, 3.0, 2.0);
        let m = fit(&x, ArimaOrder::new(0, 0, 0)).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((m.intercept - mean).abs() < 1e-9);
        assert!((m.residual_variance - var).abs() < 0.05 * var);
    }

    #[test]
    fn recovers_ar1() {
        let est: Vec<f64> = (0..5)
            .map(|s| {
                fit(
                    &synth::ar1(s, 2000, 0.0, 0.8, 1.0),
                    ArimaOrder::new(1, 0, 0),
                )
                .unwrap()
                .ar_coeffs[0]
            })
            .collect();
        assert!(est.iter().all(|p| (0.75..=0.85).contains(p)), "{est:?}");
    }

    #[test]
    fn recovers_ma1() {
        let est: Vec<f64> = (0..5)
            .map(|s| {
                fit(
                    &synth::ma1(s, 2000, 0.0, 0.5, 1.0),
                    ArimaOrder::new(0, 0, 1),
                )
                .unwrap()
                .ma_coeffs[0]
            })
            .collect();
        assert!(
            median(est.clone()) > 0.4 && median(est.clone()) < 0.6,
            "{est:?}"
        );
        assert!(est.iter().all(|t| (0.4..=0.6).contains(t)), "{est:?}");
    }

    /// The LM solution is a stationary point: finite-difference CSS gradient vanishes.
    #[test]
    fn arma11_solution_is_stationary_point() {
        let x = synth::ar1(7, 800, 1.0, 0.6, 1.0);
        let order = ArimaOrder::new(1, 0, 1);
        let m = fit(&x, order).unwrap();
        let beta = [m.intercept, m.ar_coeffs[0], m.ma_coeffs[0]];
        let w = difference(&x, 0);
        for i in 0..3 {
            let h = 1e-6;
            let mut up = beta;
            let mut dn = beta;
            up[i] += h;
            dn[i] -= h;
            let g = (sum_sq(&residuals(&w, order, &up, 1).0)
                - sum_sq(&residuals(&w, order, &dn, 1).0))
                / (2.0 * h);
            assert!(g.abs() < 1e-3 * m.css, "coordinate {i}: {g}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = synth::ar1(3, 80, 0.2, 0.5, 1.0);
        let order = ArimaOrder::new(2, 0, 2);
        let w = difference(&x, 0);
        let beta = [0.1, 0.3, -0.2, 0.4, 0.1];
        let (_, jac) = residuals(&w, order, &beta, 3);
        for col in 0..5 {
            let h = 1e-6;
            let mut up = beta;
            let mut dn = beta;
            up[col] += h;
            dn[col] -= h;
            let (eu, _) = residuals(&w, order, &up, 3);
            let (ed, _) = residuals(&w, order, &dn, 3);
            for r in 0..eu.len() {
                let num = (eu[r] - ed[r]) / (2.0 * h);
                assert!(
                    (num - jac[(r, col)]).abs() < 1e-6 * (1.0 + num.abs()),
                    "r{r} c{col}"
                );
            }
        }
    }

    #[test]
    fn random_walk_forecast_is_last_value_plus_drift() {
        let x = synth::random_walk(2, 300, 50.0, 1.0);
        let m = fit(&x, ArimaOrder::new(0, 1, 0)).unwrap();
        let last = *x.last().unwrap();
        assert!((m.forecast_one_step(&x).unwrap() - (last + m.intercept)).abs() < 1e-12);
    }

    #[test]
    fn ar1_forecast_is_recursion() {
        let x = synth::ar1(4, 300, 2.0, 0.7, 1.0);
        let m = fit(&x, ArimaOrder::new(1, 0, 0)).unwrap();
        let y = *x.last().unwrap();
        let f = m.forecast_one_step(&x).unwrap();
        assert!((f - (m.intercept + m.ar_coeffs[0] * y)).abs() < 1e-12);
    }

    #[test]
    fn differencing_round_trip() {
        let x = synth::random_walk(8, 200, 10.0, 1.0);
        for d in 0..=2 {
            let m = fit(&x, ArimaOrder::new(1, d, 1)).unwrap();
            let state = m.state_from(&x).unwrap();
            let w_hat = m.predict_differenced(&state);
            let level = m.forecast(&state).unwrap();
            // Re-difference the level forecast appended to the series.
            let mut ext = x.clone();
            ext.push(level);
            let back = *difference(&ext, d).last().unwrap();
            assert!((back - w_hat).abs() < 1e-9 * (1.0 + w_hat.abs()), "d={d}");
        }
    }

    #[test]
    fn rolling_matches_refeeding_history_and_is_deterministic() {
        let x = synth::ar1(11, 210, 1.0, 0.5, 1.0);
        let (train, test) = x.split_at(200);
        let m = fit(train, ArimaOrder::new(2, 0, 1)).unwrap();
        let rolled = m.rolling_forecast(test).unwrap();
        assert_eq!(rolled, m.rolling_forecast(test).unwrap());
        for (i, r) in rolled.iter().enumerate() {
            let direct = m.forecast_one_step(&x[..200 + i]).unwrap();
            assert!((direct - r).abs() < 1e-9, "step {i}");
        }
    }

    #[test]
    fn tail_matches_fit_residuals() {
        let x = synth::ma1(5, 300, 0.0, 0.4, 1.0);
        let m = fit(&x, ArimaOrder::new(0, 0, 1)).unwrap();
        let beta = [m.intercept, m.ma_coeffs[0]];
        let (e, _) = residuals(&x, m.order, &beta, 0);
        assert!((m.tail.residuals[0] - e.last().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn root_moduli() {
        // 1 − 0.5z has its root at 2.
        assert!((min_root_modulus(&[-0.5]) - 2.0).abs() < 1e-12);
        // 1 + 0.25z² has roots ±2i.
        assert!((min_root_modulus(&[0.0, 0.25]) - 2.0).abs() < 1e-9);
        // (1 − 0.5z)(1 − 0.8z) = 1 − 1.3z + 0.4z², nearest root 1.25.
        assert!((min_root_modulus(&[-1.3, 0.4]) - 1.25).abs() < 1e-9);
        assert_eq!(min_root_modulus(&[]), f64::INFINITY);
        assert_eq!(min_root_modulus(&[0.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn insufficient_inputs() {
        assert!(fit(&[1.0; 5], ArimaOrder::new(0, 0, 0)).is_err());
        let m = fit(&synth::ar1(1, 100, 0.0, 0.5, 1.0), ArimaOrder::new(2, 1, 0)).unwrap();
        assert!(m.forecast_one_step(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let x = synth::ma1(5, 300, 0.0, 0.4, 1.0);
        match fit_with(&x, ArimaOrder::new(1, 0, 2), 1) {
            Err(Error::NoConvergence {
                iterations: 1,
                grad_norm,
            }) => assert!(grad_norm > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
