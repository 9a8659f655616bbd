//! Node-pressure ODEs of a pneumatic network and their fixed-step RK4
//! integration.
//!
//! Each volume node obeys `dp/dt = (p/V) · Σ Q_in`, where `Q_in` is the
//! volumetric inflow referred to the node's own pressure. Laminar links
//! carry `Q_in = (p_j² − p_i²) / (2·R·p_i)` (isothermal Hagen–Poiseuille
//! with compressibility), which makes the node equation
//! `dp_i/dt = (p_j² − p_i²) / (2·R·V_i)` per link.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pneumatics::{ejector_flow, EjectorParams};
use crate::units::{pascal_to_vacuum, SignalValue, ATMOSPHERE_PA, PA_PER_MBAR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("integration diverged at node `{node}` (t = {time} s)")]
    Diverged { node: String, time: f64 },
    #[error("expected {expected} input values, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    /// m³
    pub volume: f64,
}

/// Laminar flow resistance between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// Pa·s/m³
    pub resistance: f64,
}

/// Leak to atmosphere; `coefficient` is the inflow (m³/s) at full vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leak {
    pub node: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub leaks: Vec<Leak>,
    pub ejector_node: usize,
    pub ejector: EjectorParams,
}

/// Ejector control signals for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub suction: SignalValue,
    pub blow: SignalValue,
}

impl Drive {
    pub const IDLE: Drive = Drive {
        suction: SignalValue::Discrete(0.0),
        blow: SignalValue::Discrete(0.0),
    };
}

impl Network {
    pub fn total_volume(&self) -> f64 {
        self.nodes.iter().map(|n| n.volume).sum()
    }

    /// Time derivative of all node pressures (Pa/s).
    pub fn derivative(&self, p: &[f64], drive: Drive, dp: &mut [f64]) {
        dp.iter_mut().for_each(|d| *d = 0.0);
        for link in &self.links {
            let (pa, pb) = (p[link.a], p[link.b]);
            // Mass-equivalent flow from b into a.
            let q = (pb * pb - pa * pa) / (2.0 * link.resistance);
            dp[link.a] += q / self.nodes[link.a].volume;
            dp[link.b] -= q / self.nodes[link.b].volume;
        }
        for leak in &self.leaks {
            let pn = p[leak.node];
            let q_in = leak.coefficient * (ATMOSPHERE_PA - pn) / ATMOSPHERE_PA;
            dp[leak.node] += pn / self.nodes[leak.node].volume * q_in;
        }
        let e = self.ejector_node;
        let pe = p[e];
        let q_out = ejector_flow(&self.ejector, pascal_to_vacuum(pe), drive.suction, drive.blow);
        dp[e] -= pe / self.nodes[e].volume * q_out;
    }

    /// Upper bound on the Jacobian spectral radius (Gershgorin), assuming
    /// no node pressure exceeds `p_max`.
    pub fn stiffness_bound(&self, p_max: f64) -> f64 {
        let mut rows = vec![0.0f64; self.nodes.len()];
        for link in &self.links {
            rows[link.a] += 2.0 * p_max / (link.resistance * self.nodes[link.a].volume);
            rows[link.b] += 2.0 * p_max / (link.resistance * self.nodes[link.b].volume);
        }
        for leak in &self.leaks {
            rows[leak.node] += 2.0 * p_max * leak.coefficient
                / (ATMOSPHERE_PA * self.nodes[leak.node].volume);
        }
        let e = &self.ejector;
        let v = self.nodes[self.ejector_node].volume;
        let pv_pa = e.pv_max * PA_PER_MBAR;
        let span_pa = (e.pv_max - e.blow_overpressure) * PA_PER_MBAR;
        let suction = e.s_max * 2.0 * p_max / (v * pv_pa);
        let blow = e.blow_flow * 2.0 * p_max / (v * span_pa);
        rows[self.ejector_node] += suction.max(blow);
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Largest RK4 step that stays inside the real-axis stability interval.
    pub fn stable_step(&self) -> f64 {
        let p_max = ATMOSPHERE_PA.max(
            ATMOSPHERE_PA - self.ejector.blow_overpressure * PA_PER_MBAR,
        ) * 1.1;
        let lambda = self.stiffness_bound(p_max);
        if lambda > 0.0 {
            2.0 / lambda
        } else {
            f64::INFINITY
        }
    }
}

/// Scratch space for [`Rk4`]; kept alongside the state to avoid
/// allocating per step.
#[derive(Debug, Clone, Default)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// One classic RK4 step of size `h`.
    pub fn step(&mut self, net: &Network, p: &mut [f64], drive: Drive, h: f64) {
        let n = p.len();
        net.derivative(p, drive, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = p[i] + 0.5 * h * self.k1[i];
        }
        net.derivative(&self.tmp, drive, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = p[i] + 0.5 * h * self.k2[i];
        }
        net.derivative(&self.tmp, drive, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = p[i] + h * self.k3[i];
        }
        net.derivative(&self.tmp, drive, &mut self.k4);
        for i in 0..n {
            p[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Advance `p` by `dt` in `ceil(dt / max_step)` equal RK4 substeps.
pub fn integrate(
    net: &Network,
    rk: &mut Rk4,
    p: &mut [f64],
    drive: Drive,
    dt: f64,
    max_step: f64,
    time: f64,
) -> Result<(), ModelError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::InvalidStep(dt));
    }
    let substeps = ((dt / max_step) - 1e-9).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        rk.step(net, p, drive, h);
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(ModelError::Diverged {
            node: net.nodes[i].label.clone(),
            time: time + dt,
        });
    }
    Ok(())
}
