//! Decentralized per-station laws: outlet charging rates and renewable
//! storage input. Both are linear programs over an interval, so the solutions
//! sit on an endpoint.

use crate::model::{pos, StationConfig};

/// Rate chosen for one outlet in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutletRate {
    /// Bang-bang decision, either `0` or `r_{i,max}`.
    pub decision: f64,
    /// Energy actually pushed into the vehicle: the decision capped by the
    /// remaining demand.
    pub delivered: f64,
}

/// Charging rate of one outlet.
///
/// `incoming` is the demand directed to the outlet this slot and must be zero
/// unless the outlet is empty. The sign of the linear coefficient
/// `(q or incoming) + h eta^-` picks the endpoint; zero maps to rate zero.
pub fn outlet_rate(q: f64, incoming: f64, h: f64, cfg: &StationConfig) -> OutletRate {
    let demand = if q > 0.0 { q } else { incoming };
    let coefficient = demand + h * cfg.eta_discharge;
    let decision = if demand > 0.0 && coefficient > 0.0 {
        cfg.rate_max
    } else {
        0.0
    };
    OutletRate {
        decision,
        delivered: decision.min(q + incoming),
    }
}

/// Renewable energy routed into the battery: everything the outlets leave
/// over, up to the charging limit, while the shifted level is nonpositive.
pub fn renewable_input(h: f64, u: f64, outlet_sum: f64, cfg: &StationConfig) -> f64 {
    if h <= 0.0 {
        cfg.battery_charge_max.min(pos(u - outlet_sum))
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::shifted_level;
    use proptest::prelude::*;

    fn cfg(eta_discharge: f64) -> StationConfig {
        StationConfig {
            outlets: 3,
            rate_max: 20.0,
            battery_capacity: 500.0,
            battery_charge_max: 225.0,
            grid_draw_max: 20.0,
            eta_charge: 1.0,
            eta_discharge,
        }
    }

    #[test]
    fn positive_coefficient_charges_at_full_rate() {
        let r = outlet_rate(10.0, 0.0, -5.0, &cfg(1.0));
        assert_eq!(r.decision, 20.0);
        assert_eq!(r.delivered, 10.0);
    }

    #[test]
    fn negative_coefficient_idles() {
        let r = outlet_rate(2.0, 0.0, -100.0, &cfg(1.0));
        assert_eq!(r.decision, 0.0);
        assert_eq!(r.delivered, 0.0);
    }

    #[test]
    fn nothing_to_serve() {
        let r = outlet_rate(0.0, 0.0, 400.0, &cfg(1.0));
        assert_eq!(r, OutletRate { decision: 0.0, delivered: 0.0 });
    }

    #[test]
    fn zero_coefficient_maps_to_zero() {
        assert_eq!(outlet_rate(10.0, 0.0, -10.0, &cfg(1.0)).decision, 0.0);
    }

    #[test]
    fn incoming_demand_drives_empty_outlet() {
        let r = outlet_rate(0.0, 30.0, -12.0, &cfg(1.0));
        assert_eq!(r.decision, 20.0);
        assert_eq!(r.delivered, 20.0);
        // eta^- scales the battery term
        assert_eq!(outlet_rate(0.0, 30.0, -26.0, &cfg(1.2)).decision, 0.0);
    }

    #[test]
    fn renewable_examples() {
        let c = cfg(1.0);
        assert_eq!(renewable_input(-460.0, 225.0, 60.0, &c), 165.0);
        assert_eq!(renewable_input(40.0, 225.0, 0.0, &c), 0.0);
        assert_eq!(renewable_input(-10.0, 50.0, 60.0, &c), 0.0);
        let mut limited = c.clone();
        limited.battery_charge_max = 100.0;
        assert_eq!(renewable_input(-460.0, 225.0, 60.0, &limited), 100.0);
    }

    proptest! {
        #[test]
        fn rate_is_bang_bang_and_never_overdelivers(
            q in 0.0..30.0f64,
            incoming in 0.0..30.0f64,
            h in -600.0..600.0f64,
        ) {
            let incoming = if q > 0.0 { 0.0 } else { incoming };
            let r = outlet_rate(q, incoming, h, &cfg(1.0));
            prop_assert!(r.decision == 0.0 || r.decision == 20.0);
            prop_assert!(r.delivered <= q + incoming);
            prop_assert!(r.delivered <= r.decision);
        }

        #[test]
        fn renewable_serves_outlets_first(
            h in -600.0..600.0f64,
            u in 0.0..225.0f64,
            sum in 0.0..60.0f64,
        ) {
            let rin = renewable_input(h, u, sum, &cfg(1.0));
            prop_assert!(rin >= 0.0);
            prop_assert!(rin <= (u - sum).max(0.0));
        }

        #[test]
        fn full_battery_never_takes_renewable(
            v_frac in 0.001..1.0f64,
            fill in 0.0..1.0f64,
            u in 0.0..225.0f64,
        ) {
            // B_max = 500, eta^+ U_max = 225, J r = 60, L lambda_max = 19, C_max = 0.2
            let c = cfg(1.0);
            let v_max = (500.0 - 225.0 - 60.0 - 19.0) / 0.2;
            let t_max = v_frac * v_max * 0.2 + 19.0;
            let b = (500.0 - 225.0) + fill * 225.0;
            let h = shifted_level(b, &c, t_max);
            prop_assert!(h > 0.0);
            prop_assert_eq!(renewable_input(h, u, 0.0, &c), 0.0);
        }
    }
}
