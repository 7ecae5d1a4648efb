mod common;

use proptest::prelude::*;
use spinrelax::dynamics::rate_equations::{integrate_rate_equations, RateEquationOptions};
use spinrelax::dynamics::{slr_population_1e, RegimeModel};
use spinrelax::model::{FFParams, SLRParams};

fn check_against_oracle(model: &RegimeModel) -> Result<(), TestCaseError> {
    let (fast, slow) = model.timescales();
    let mut grid = common::linspace(0.0, 10.0 * slow, 60);
    grid.extend(
        common::delays(fast / 50.0, 10.0 * slow, 30)
            .into_iter()
            .skip(1),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let states = integrate_rate_equations(model, &grid, &RateEquationOptions::default()).unwrap();
    let n = model.n0();
    let total = states[0].total();
    for s in &states {
        let closed = model.deficit(s.t).unwrap();
        prop_assert!(
            ((n - s.n_g[3]) - closed).abs() <= 1e-6 * n,
            "t = {}: {} vs {}",
            s.t,
            n - s.n_g[3],
            closed
        );
        prop_assert!((s.total() - total).abs() <= 1e-9 * total);
        if let RegimeModel::SLRHT(p) = model {
            prop_assert!((s.n_e[0] - slr_population_1e(p, s.t).unwrap()).abs() <= 1e-6 * n);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ff_closed_form_matches_rate_equations(
        log_tff in -4.0f64..-1.7,
        t_opt in 0.5e-3f64..3e-3,
        n0 in 0.1f64..10.0,
        beta14 in 0.2f64..0.9,
        frac in 0.0f64..1.0,
    ) {
        let p = FFParams {
            t_ff: 10f64.powf(log_tff),
            n0,
            beta14,
            beta11_plus_12: frac * (1.0 - beta14),
            t_opt,
            scale_c: 1.0,
        };
        check_against_oracle(&RegimeModel::FlipFlopLT(p))?;
    }

    #[test]
    fn slr_closed_form_matches_rate_equations(
        log_ts in -4.5f64..-1.7,
        t_opt in 0.5e-3f64..3e-3,
        n0 in 0.1f64..10.0,
        beta14 in 0.2f64..0.9,
        beta_bar in 0.0f64..0.4,
    ) {
        let p = SLRParams { t_s: 10f64.powf(log_ts), n0, beta14, beta_bar, t_opt };
        check_against_oracle(&RegimeModel::SLRHT(p))?;
    }

    #[test]
    fn slr_deficit_stays_between_zero_and_n(
        log_ts in -4.5f64..-1.7,
        t_opt in 0.5e-3f64..3e-3,
        t in 0.0f64..0.1,
    ) {
        let p = SLRParams::new(10f64.powf(log_ts), t_opt);
        let d = RegimeModel::SLRHT(p).deficit(t).unwrap();
        prop_assert!(d <= p.n0 * (1.0 + 1e-12));
        prop_assert!(d >= -1e-12);
    }
}

#[test]
fn deficit_is_continuous_across_degenerate_rates() {
    let t_opt = 1.3e-3;
    for t in [1e-5, 5e-4, 2e-3, 1e-2] {
        for t_ff in [t_opt / 2.0, 2.0 * t_opt] {
            let at = |x: f64| {
                RegimeModel::FlipFlopLT(FFParams::new(x, t_opt))
                    .deficit(t)
                    .unwrap()
            };
            let mid = at(t_ff);
            assert!(((at(t_ff * (1.0 + 1e-9)) - mid) / mid).abs() < 1e-6);
        }
        let at = |x: f64| {
            RegimeModel::SLRHT(SLRParams::new(x, t_opt))
                .deficit(t)
                .unwrap()
        };
        let t_s = 4.0 * t_opt / 3.0;
        let mid = at(t_s);
        assert!(((at(t_s * (1.0 - 1e-9)) - mid) / mid).abs() < 1e-6);
    }
}
