//! The arrow over a lattice of space thimacs.
//!
//! Space is modeled as a linear chain of thimacs connected by transfer
//! handshakes. A moving thing reaches a node's boundary (arrive) but is
//! not admitted while it still carries movement energy: it is ejected and
//! transferred onward, losing one unit per bounce. Only when the energy
//! is exhausted — or the lattice ends — is the thing accepted, and it
//! settles. The arrow is never inside a node of the trajectory; every
//! record but the final settle happens at boundary posts.

use serde::Serialize;
use thiserror::Error;

use crate::model::{StageKind, StaticModel, ThimacId, TransferDir};
use crate::trace::Action;

/// A static model of `n` space thimacs in a line. Each node carries the
/// boundary plumbing for a thing to pass through — transfer-in, receive,
/// release, transfer-out — and no interior create/process machinery.
#[derive(Debug, Clone)]
pub struct SpaceLattice {
    model: StaticModel,
    nodes: Vec<ThimacId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZenoError {
    #[error("a lattice needs at least one node")]
    EmptyLattice,
    #[error("the arrow has already settled")]
    AlreadySettled,
}

impl SpaceLattice {
    pub fn model(&self) -> &StaticModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, index: usize) -> Option<&ThimacId> {
        self.nodes.get(index)
    }
}

/// Build a linear lattice of `n` space thimacs.
pub fn build_lattice(n: usize) -> Result<SpaceLattice, ZenoError> {
    if n == 0 {
        return Err(ZenoError::EmptyLattice);
    }
    let mut model = StaticModel::new(format!("space_lattice_{n}"));
    let mut nodes = Vec::with_capacity(n);
    let mut prev_out = None;
    for i in 0..n {
        let node = model
            .add_thimac(&format!("Space{i}"), None)
            .expect("fresh name");
        let t_in = model
            .add_stage(&node, StageKind::Transfer(TransferDir::In))
            .expect("fresh thimac");
        let recv = model
            .add_stage(&node, StageKind::Receive)
            .expect("fresh thimac");
        let rel = model
            .add_stage(&node, StageKind::Release)
            .expect("fresh thimac");
        let t_out = model
            .add_stage(&node, StageKind::Transfer(TransferDir::Out))
            .expect("fresh thimac");
        model.add_flow(&t_in, &recv).expect("legal");
        model.add_flow(&recv, &rel).expect("legal");
        model.add_flow(&rel, &t_out).expect("legal");
        if let Some(prev) = prev_out {
            model.add_flow(&prev, &t_in).expect("legal");
        }
        prev_out = Some(t_out);
        nodes.push(node);
    }
    debug_assert!(model.validate().is_clean());
    Ok(SpaceLattice { model, nodes })
}

/// One record of the arrow's trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BounceRecord {
    pub node: usize,
    pub action: Action,
    pub energy_after: u64,
}

/// Full trajectory: arrive/bounce pairs along the way, one settle record
/// at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BounceTrace {
    pub records: Vec<BounceRecord>,
    pub settle_node: usize,
    pub residual_energy: u64,
    pub bounces: u64,
}

impl BounceTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// A launched arrow: pending at a node's boundary until it settles.
#[derive(Debug, Clone)]
pub struct ArrowSim<'l> {
    lattice: &'l SpaceLattice,
    node: usize,
    energy: u64,
    settled: Option<usize>,
    records: Vec<BounceRecord>,
    bounces: u64,
}

/// Position the arrow at node 0's boundary, arrival pending. Nothing is
/// accepted anywhere yet.
pub fn launch(lattice: &SpaceLattice, energy: u64) -> ArrowSim<'_> {
    ArrowSim {
        lattice,
        node: 0,
        energy,
        settled: None,
        records: Vec::new(),
        bounces: 0,
    }
}

/// Outcome of one arrow step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrowStep {
    Bounced { node: usize, energy_after: u64 },
    Settled { node: usize, residual: u64 },
}

impl<'l> ArrowSim<'l> {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn energy(&self) -> u64 {
        self.energy
    }

    pub fn settled(&self) -> Option<usize> {
        self.settled
    }

    pub fn records(&self) -> &[BounceRecord] {
        &self.records
    }

    /// The arrow arrives at the current node; with energy left and a next
    /// node ahead it is refused and bounces onward, losing one unit;
    /// otherwise it is accepted and settles with its residual energy.
    pub fn arrow_step(&mut self) -> Result<ArrowStep, ZenoError> {
        if self.settled.is_some() {
            return Err(ZenoError::AlreadySettled);
        }
        self.records.push(BounceRecord {
            node: self.node,
            action: Action::Arrive,
            energy_after: self.energy,
        });
        let last = self.lattice.len() - 1;
        if self.energy > 0 && self.node < last {
            self.energy -= 1;
            self.bounces += 1;
            self.records.push(BounceRecord {
                node: self.node,
                action: Action::Bounce,
                energy_after: self.energy,
            });
            self.node += 1;
            Ok(ArrowStep::Bounced {
                node: self.node - 1,
                energy_after: self.energy,
            })
        } else {
            self.settled = Some(self.node);
            self.records.push(BounceRecord {
                node: self.node,
                action: Action::Settle,
                energy_after: self.energy,
            });
            Ok(ArrowStep::Settled {
                node: self.node,
                residual: self.energy,
            })
        }
    }

    /// Step to settlement and return the trajectory.
    pub fn run_until_settled(mut self) -> BounceTrace {
        while self.settled.is_none() {
            self.arrow_step().expect("not settled");
        }
        BounceTrace {
            settle_node: self.settled.expect("settled in loop"),
            residual_energy: self.energy,
            bounces: self.bounces,
            records: self.records,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form, independent of the stepper: the arrow bounces once
    /// per node it clears, so it settles at min(e, n-1).
    fn oracle(n: u64, e: u64) -> (u64, u64, u64) {
        let settle = e.min(n - 1);
        (settle, settle, e - settle)
    }

    #[test]
    fn lattice_shapes() {
        let one = build_lattice(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.model().flow_count(), 3); // intra-node chain only

        let five = build_lattice(5).unwrap();
        assert_eq!(five.len(), 5);
        // 3 intra flows per node plus 4 inter-node handshakes
        assert_eq!(five.model().flow_count(), 5 * 3 + 4);
        assert!(five.model().validate().is_clean());

        assert!(matches!(build_lattice(0), Err(ZenoError::EmptyLattice)));
    }

    #[test]
    fn zero_energy_settles_immediately() {
        let lattice = build_lattice(5).unwrap();
        let mut sim = launch(&lattice, 0);
        let step = sim.arrow_step().unwrap();
        assert_eq!(
            step,
            ArrowStep::Settled {
                node: 0,
                residual: 0
            }
        );
        assert!(matches!(sim.arrow_step(), Err(ZenoError::AlreadySettled)));
    }

    #[test]
    fn bounce_decrements_and_advances() {
        let lattice = build_lattice(5).unwrap();
        let mut sim = launch(&lattice, 3);
        assert_eq!(sim.node(), 0);
        let step = sim.arrow_step().unwrap();
        assert_eq!(
            step,
            ArrowStep::Bounced {
                node: 0,
                energy_after: 2
            }
        );
        assert_eq!(sim.node(), 1);
    }

    #[test]
    fn absorbing_far_end() {
        let lattice = build_lattice(1).unwrap();
        let trace = launch(&lattice, 10).run_until_settled();
        assert_eq!(trace.settle_node, 0);
        assert_eq!(trace.residual_energy, 10);
        assert_eq!(trace.bounces, 0);

        let lattice = build_lattice(4).unwrap();
        let trace = launch(&lattice, 10).run_until_settled();
        assert_eq!(trace.settle_node, 3);
        assert_eq!(trace.residual_energy, 7);
        assert_eq!(trace.bounces, 3);
    }

    #[test]
    fn closed_form_holds_on_grid() {
        for n in 1..=16u64 {
            let lattice = build_lattice(n as usize).unwrap();
            for e in 0..=32u64 {
                let trace = launch(&lattice, e).run_until_settled();
                let (settle, bounces, residual) = oracle(n, e);
                assert_eq!(trace.settle_node as u64, settle, "n={n} e={e}");
                assert_eq!(trace.bounces, bounces, "n={n} e={e}");
                assert_eq!(trace.residual_energy, residual, "n={n} e={e}");
            }
        }
    }

    #[test]
    fn never_inside_and_energy_monotone() {
        let lattice = build_lattice(8).unwrap();
        for e in [0u64, 1, 5, 7, 20] {
            let trace = launch(&lattice, e).run_until_settled();
            // exactly one settle record, and it is last
            let settles: Vec<usize> = trace
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.action == Action::Settle)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(settles, vec![trace.records.len() - 1]);
            // no accept anywhere else: actions are arrive/bounce only
            assert!(trace.records[..trace.records.len() - 1]
                .iter()
                .all(|r| matches!(r.action, Action::Arrive | Action::Bounce)));
            // energy never increases
            let energies: Vec<u64> = trace.records.iter().map(|r| r.energy_after).collect();
            assert!(energies.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn trace_jsonl_shape() {
        let lattice = build_lattice(2).unwrap();
        let trace = launch(&lattice, 1).run_until_settled();
        let jsonl = trace.to_jsonl();
        let first = jsonl.lines().next().unwrap();
        assert_eq!(first, r#"{"node":0,"action":"arrive","energy_after":1}"#);
        assert!(jsonl.lines().last().unwrap().contains("\"settle\""));
    }
}
