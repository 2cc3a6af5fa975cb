use rayon::prelude::*;

use super::adf::{adf_default, AdfResult};
use super::model::{
    difference, fit_conditioned, ArimaModel, ArimaOrder, DEFAULT_MAX_ITERATIONS, MAX_D,
};
use crate::error::{Error, Result};

pub const DEFAULT_P_MAX: usize = 3;
pub const DEFAULT_Q_MAX: usize = 3;
pub const MIN_SELECT_LEN: usize = 50;

/// Smallest `d ≤ 2` whose differenced series passes the stationarity gate.
pub fn select_d(train: &[f64]) -> Result<(usize, AdfResult)> {
    let mut last = None;
    for d in 0..=MAX_D {
        let r = adf_default(&difference(train, d))?;
        if r.is_stationary {
            return Ok((d, r));
        }
        last = Some(r);
    }
    Err(Error::Data(format!(
        "series is not stationary after {MAX_D} differences (statistic {:.3})",
        last.map_or(f64::NAN, |r| r.statistic)
    )))
}

/// Candidate models over the `(p, q)` grid in row-major order, all
/// conditioned on the first `p_max` differenced values; cells whose
/// optimisation fails are `None`.
pub fn grid_fits(
    train: &[f64],
    d: usize,
    p_max: usize,
    q_max: usize,
) -> Vec<(ArimaOrder, Option<ArimaModel>)> {
    let cells: Vec<ArimaOrder> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| ArimaOrder::new(p, d, q)))
        .collect();
    cells
        .into_par_iter()
        .map(|order| {
            let fitted = fit_conditioned(train, order, p_max, DEFAULT_MAX_ITERATIONS);
            if let Err(e) = &fitted {
                log::debug!("ARIMA{order} failed: {e}");
            }
            (order, fitted.ok())
        })
        .collect()
}

/// Order with minimum AIC among admissible fits; ties go to smaller `p+q`,
/// then smaller `p`.
pub fn select_order(train: &[f64], p_max: usize, q_max: usize) -> Result<(ArimaOrder, ArimaModel)> {
    if train.len() < MIN_SELECT_LEN {
        return Err(Error::Insufficient(format!(
            "order selection needs at least {MIN_SELECT_LEN} observations, got {}",
            train.len()
        )));
    }
    let (d, _) = select_d(train)?;
    let mut best: Option<(f64, ArimaOrder, ArimaModel)> = None;
    for (order, model) in grid_fits(train, d, p_max, q_max) {
        let Some(model) = model else { continue };
        if !model.is_admissible() {
            log::debug!("ARIMA{order} rejected: roots too close to the unit circle");
            continue;
        }
        let aic = model.aic();
        if !aic.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b_aic, b_order, _)) => {
                aic < *b_aic
                    || (aic == *b_aic
                        && (order.p + order.q, order.p) < (b_order.p + b_order.q, b_order.p))
            }
        };
        if better {
            best = Some((aic, order, model));
        }
    }
    best.map(|(_, o, m)| (o, m)).ok_or_else(|| Error::Training {
        stage: "arima",
        index: 0,
        message: format!("no ARIMA order in the {p_max}x{q_max} grid could be fitted"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn ar1_selects_low_ar_order_without_differencing() {
        let ok = (0..50)
            .filter(|&s| {
                let (o, _) = select_order(&synth::ar1(100 + s, 1000, 0.0, 0.8, 1.0), 2, 2).unwrap();
                o.d == 0 && (1..=2).contains(&o.p) && o.q <= 1
            })
            .count();
        assert!(ok >= 40, "{ok}/50");
    }

    #[test]
    fn random_walk_selects_first_difference() {
        let ok = (0..10)
            .filter(|&s| {
                select_d(&synth::random_walk(200 + s, 500, 100.0, 1.0))
                    .unwrap()
                    .0
                    == 1
            })
            .count();
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn singleton_grid() {
        let (o, _) = select_order(&synth::white_noise(3, 200, 0.0, 1.0), 0, 0).unwrap();
        assert_eq!(o, ArimaOrder::new(0, 0, 0));
    }

    #[test]
    fn null_data_prefers_null_model() {
        let null = (0..100)
            .filter(|&s| {
                let (o, _) =
                    select_order(&synth::white_noise(300 + s, 300, 1.0, 1.0), 1, 1).unwrap();
                o.p + o.q == 0
            })
            .count();
        assert!(null >= 70, "{null}/100");
    }

    #[test]
    fn admissibility_filter_applies() {
        for s in 0..10 {
            let (_, m) = select_order(&synth::white_noise(500 + s, 300, 0.0, 1.0), 3, 3).unwrap();
            assert!(m.is_admissible());
        }
    }

    #[test]
    fn in_sample_css_never_rises_with_order() {
        let x = synth::white_noise(9, 300, 0.0, 1.0);
        let cells = grid_fits(&x, 0, 2, 0);
        let css: Vec<f64> = cells.iter().map(|(_, m)| m.as_ref().unwrap().css).collect();
        assert!(css.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{css:?}");
    }

    #[test]
    fn gate_is_respected() {
        for s in 0..5 {
            let x = synth::random_walk(s, 300, 10.0, 1.0);
            let (o, _) = select_order(&x, 1, 1).unwrap();
            assert!(adf_default(&difference(&x, o.d)).unwrap().is_stationary);
        }
    }

    #[test]
    fn short_input_errors() {
        assert!(select_order(&[1.0; 20], 1, 1).is_err());
    }
}
