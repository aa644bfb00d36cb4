//! Compute and energy costs: per-user CPU fraction, processor and VNF
//! energy, and the network-wide energy total.

use serde::{Deserialize, Serialize};

use crate::netmodel::{ap_power, BeamformingSet, C64};
use crate::{Error, Result};

/// Coefficients of the CPU-demand and processor-energy model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeModel {
    /// Cores per nat of achieved rate.
    pub theta_hat: f64,
    /// Constant baseband (FFT) load in cores.
    pub c0: f64,
    /// Cores per active AP link.
    pub delta: f64,
    /// A link counts as active when `|v_{n,m}|` exceeds this.
    pub active_link_epsilon: f64,
    pub iota: f64,
    pub p_z: f64,
    /// Energy per deployed VNF instance, in watts.
    pub psi_vnf: f64,
    pub max_vnfs: usize,
    pub max_cpus: usize,
    pub vnf_capacity_cores: f64,
}

impl Default for ComputeModel {
    fn default() -> Self {
        Self {
            theta_hat: 0.2,
            c0: 0.1,
            delta: 0.01,
            active_link_epsilon: 1e-9,
            iota: 1e-26,
            p_z: 1e9,
            psi_vnf: 5.0,
            max_vnfs: 16,
            max_cpus: 64,
            vnf_capacity_cores: 4.0,
        }
    }
}

impl ComputeModel {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.theta_hat,
            self.c0,
            self.delta,
            self.active_link_epsilon,
            self.iota,
            self.psi_vnf,
        ];
        if coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Config("compute-model coefficients must be non-negative".into()));
        }
        if !(self.p_z > 0.0) || !(self.vnf_capacity_cores > 0.0) {
            return Err(Error::Config("p_z and vnf_capacity_cores must be positive".into()));
        }
        if self.max_vnfs == 0 || self.max_cpus == 0 {
            return Err(Error::Config("max_vnfs and max_cpus must be at least 1".into()));
        }
        Ok(())
    }

    /// Energy of one running processor, `iota * P_z^3`.
    pub fn cpu_energy_w(&self) -> f64 {
        self.iota * self.p_z.powi(3)
    }
}

/// Result of the network energy accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    /// Processor and VNF energy.
    pub baseband_w: f64,
    /// Sum of per-AP transmit powers.
    pub transmission_w: f64,
    pub total_w: f64,
    /// Sum of per-user CPU fractions.
    pub cpu_demand_cores: f64,
    pub active_cpus: usize,
    pub active_vnfs: usize,
    /// Demand exceeded the processor pool.
    pub over_capacity: bool,
}

/// CPU cores needed by one user: `theta_hat * rate + c0 + delta * (#active links)`.
pub fn cpu_fraction(rate_m: f64, v_column: &[C64], model: &ComputeModel) -> f64 {
    let links = v_column
        .iter()
        .filter(|v| v.norm() > model.active_link_epsilon)
        .count();
    model.theta_hat * rate_m + model.c0 + model.delta * links as f64
}

/// Total network energy with the processor pool sized to the CPU demand.
pub fn network_energy(v: &BeamformingSet, deltas: &[f64], model: &ComputeModel) -> CostBreakdown {
    let demand: f64 = deltas.iter().sum();
    provisioned_energy(v, demand, demand, model)
}

/// Total network energy with `provisioned_cores` of CPU switched on.
///
/// Active processors are `ceil(provisioned)` and VNF instances
/// `ceil(provisioned / vnf_capacity)`, each clamped to the pool limits.
pub fn provisioned_energy(
    v: &BeamformingSet,
    provisioned_cores: f64,
    demand_cores: f64,
    model: &ComputeModel,
) -> CostBreakdown {
    let provisioned = provisioned_cores.max(0.0);
    let active_cpus = (provisioned.ceil() as usize).min(model.max_cpus);
    let active_vnfs = ((provisioned / model.vnf_capacity_cores).ceil() as usize).min(model.max_vnfs);
    let baseband_w = active_cpus as f64 * model.cpu_energy_w() + active_vnfs as f64 * model.psi_vnf;
    let transmission_w: f64 = (0..v.n_aps()).map(|n| ap_power(v, n)).sum();
    CostBreakdown {
        baseband_w,
        transmission_w,
        total_w: baseband_w + transmission_w,
        cpu_demand_cores: demand_cores,
        active_cpus,
        active_vnfs,
        over_capacity: demand_cores > model.max_cpus as f64,
    }
}

/// Per-user cost `total / n_users`; `None` when nobody is served.
pub fn normalized_cost(breakdown: &CostBreakdown, n_users: usize) -> Option<f64> {
    (n_users > 0).then(|| breakdown.total_w / n_users as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn model() -> ComputeModel {
        ComputeModel {
            theta_hat: 0.5,
            c0: 0.1,
            delta: 0.05,
            psi_vnf: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn fraction_constant_term_only() {
        assert_eq!(cpu_fraction(0.0, &[c(0.0); 4], &model()), 0.1);
    }

    #[test]
    fn fraction_fixture() {
        let col = [c(0.3), c(0.0), c(1e-3), c(2.0)];
        assert_relative_eq!(cpu_fraction(2.0, &col, &model()), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn doubling_delta_doubles_link_term() {
        let col = [c(0.3), c(0.5), c(0.0)];
        let m = model();
        let base = cpu_fraction(1.0, &col, &m) - (m.theta_hat + m.c0);
        let m2 = ComputeModel { delta: 2.0 * m.delta, ..m.clone() };
        let doubled = cpu_fraction(1.0, &col, &m2) - (m.theta_hat + m.c0);
        assert_relative_eq!(doubled, 2.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn link_crossing_threshold_adds_delta() {
        let m = model();
        let below = cpu_fraction(1.0, &[c(m.active_link_epsilon)], &m);
        let above = cpu_fraction(1.0, &[c(m.active_link_epsilon * 1.0001)], &m);
        assert_relative_eq!(above - below, m.delta, epsilon = 1e-12);
    }

    #[test]
    fn one_cpu_is_ten_watts() {
        let v = BeamformingSet::zeros(2, 1);
        let b = network_energy(&v, &[0.7], &ComputeModel { psi_vnf: 0.0, ..Default::default() });
        assert_eq!(b.active_cpus, 1);
        assert_relative_eq!(b.total_w, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn idle_network_costs_nothing() {
        let v = BeamformingSet::zeros(3, 2);
        let b = network_energy(&v, &[0.0, 0.0], &ComputeModel::default());
        assert_eq!((b.active_cpus, b.active_vnfs, b.total_w), (0, 0, 0.0));
        assert_eq!(normalized_cost(&b, 0), None);
    }

    #[test]
    fn two_user_fixture_matches_hand_sum() {
        let m = ComputeModel {
            psi_vnf: 3.0,
            vnf_capacity_cores: 1.0,
            ..Default::default()
        };
        let v = BeamformingSet {
            vectors: DMatrix::from_column_slice(2, 2, &[c(1.0), C64::new(0.0, 2.0), c(0.5), c(-1.0)]),
            powers: vec![5.0, 1.25],
        };
        let b = network_energy(&v, &[0.6, 0.9], &m);
        // demand 1.5 -> 2 CPUs (20 W) and 2 VNFs (6 W); |v|^2 sums to 6.25 W
        assert_eq!((b.active_cpus, b.active_vnfs), (2, 2));
        assert_relative_eq!(b.baseband_w, 26.0, max_relative = 1e-12);
        assert_relative_eq!(b.transmission_w, 6.25, max_relative = 1e-12);
        assert_eq!(b.total_w, b.baseband_w + b.transmission_w);
        assert_relative_eq!(normalized_cost(&b, 2).unwrap(), 32.25 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn normalization() {
        let b = CostBreakdown { total_w: 10.0, ..Default::default() };
        assert_eq!(normalized_cost(&b, 5), Some(2.0));
        assert_eq!(normalized_cost(&CostBreakdown::default(), 3), Some(0.0));
    }

    #[test]
    fn pool_limits_clamp_counts() {
        let m = ComputeModel { max_cpus: 2, max_vnfs: 1, ..Default::default() };
        let b = network_energy(&BeamformingSet::zeros(1, 1), &[7.5], &m);
        assert_eq!((b.active_cpus, b.active_vnfs), (2, 1));
        assert!(b.over_capacity);
    }
}
