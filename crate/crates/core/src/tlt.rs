//! Temporal logic trees: set nodes alternating with set operators, built
//! bottom-up from a normalized formula.
//!
//! Boolean operators map to level-set algebra, `U` to a reachable tube and
//! `G` to an invariant set. A conjunction of one `U` over Boolean operands
//! with any number of `G` over Boolean operands is compiled to a single
//! reachable tube whose constraint is the intersection of all of them.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::hjsolver::{solve_brt, solve_rci, BrtRequest, SolverOptions};
use crate::ltl::{to_text, Formula};
use crate::statespace::{tube_complement, tube_intersect, tube_union, Grid, ValueField, ValueTube};

/// Atom name to the time-state set it denotes.
pub type Bindings = HashMap<String, ValueTube>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetOperator {
    Union,
    Intersection,
    Complement,
    /// Reachable tube; children are `[target, constraint]`.
    Reach,
    /// Robust control invariant set; the only child is the constraint.
    Invariant,
}

#[derive(Debug, Clone)]
pub struct OperatorNode {
    pub operator: SetOperator,
    pub children: Vec<SetNode>,
}

#[derive(Debug, Clone)]
pub struct SetNode {
    /// Canonical text of the subformula this node satisfies.
    pub label: String,
    pub tube: ValueTube,
    /// `None` for leaves.
    pub operator: Option<Box<OperatorNode>>,
}

impl SetNode {
    fn leaf(label: String, tube: ValueTube) -> Self {
        Self { label, tube, operator: None }
    }

    fn internal(label: String, tube: ValueTube, operator: SetOperator, children: Vec<SetNode>) -> Self {
        Self { label, tube, operator: Some(Box::new(OperatorNode { operator, children })) }
    }

    pub fn is_leaf(&self) -> bool {
        self.operator.is_none()
    }

    /// Number of set nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.operator.as_ref().map_or(0, |op| op.children.iter().map(SetNode::size).sum())
    }

    fn contains_temporal(&self) -> bool {
        match &self.operator {
            None => false,
            Some(op) => matches!(op.operator, SetOperator::Reach | SetOperator::Invariant) || op.children.iter().any(SetNode::contains_temporal),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tlt {
    pub root: SetNode,
    /// Set when two subtrees that both contain temporal operators were
    /// intersected; the root may then over-approximate the satisfying set.
    pub approximate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Satisfiable,
    /// Member of an over-approximated root set.
    ApproximateSatisfiable,
    Unsatisfiable,
}

impl Verdict {
    pub fn is_satisfiable(self) -> bool {
        !matches!(self, Verdict::Unsatisfiable)
    }
}

struct Builder<'a, M: Dynamics> {
    model: &'a M,
    grid: &'a Arc<Grid>,
    bindings: &'a Bindings,
    t_span: (f64, f64),
    opts: &'a SolverOptions,
    approximate: bool,
}

/// Builds the tree for a normalized formula (see [`crate::ltl::normalize`]).
pub fn build_tlt<M: Dynamics>(f: &Formula, bindings: &Bindings, model: &M, grid: &Arc<Grid>, t_span: (f64, f64), opts: &SolverOptions) -> Result<Tlt> {
    for atom in f.atoms() {
        match bindings.get(&atom) {
            None => return Err(Error::UnboundAtom(atom)),
            Some(t) if t.grid().as_ref() != grid.as_ref() => return Err(Error::GridMismatch),
            Some(_) => {}
        }
    }
    let mut b = Builder { model, grid, bindings, t_span, opts, approximate: false };
    let root = b.node(f)?;
    Ok(Tlt { root, approximate: b.approximate })
}

/// The satisfaction set of the whole formula.
pub fn root_set(t: &Tlt) -> &ValueTube {
    &t.root.tube
}

pub fn check_feasible(t: &Tlt, z0: &[f64], t0: f64) -> Result<Verdict> {
    let (inside, _) = t.root.tube.membership(z0, t0)?;
    Ok(match (inside, t.approximate) {
        (false, _) => Verdict::Unsatisfiable,
        (true, false) => Verdict::Satisfiable,
        (true, true) => Verdict::ApproximateSatisfiable,
    })
}

/// Brings two tubes onto a common stamp list so that they can be combined
/// node-wise: invariant tubes broadcast, otherwise both are resampled on the
/// union of their stamps.
fn aligned(a: &ValueTube, b: &ValueTube) -> Result<(ValueTube, ValueTube)> {
    if a.is_invariant() || b.is_invariant() || a.times() == b.times() {
        return Ok((a.clone(), b.clone()));
    }
    let (a0, a1) = a.time_range().unwrap();
    let (b0, b1) = b.time_range().unwrap();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return Err(Error::InvalidRequest("operand tubes have disjoint time ranges".into()));
    }
    let mut times: Vec<f64> = a.times().iter().chain(b.times()).copied().filter(|t| *t >= lo && *t <= hi).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    Ok((a.resample(&times)?, b.resample(&times)?))
}

fn combine(a: &ValueTube, b: &ValueTube, op: fn(&ValueTube, &ValueTube) -> Result<ValueTube>) -> Result<ValueTube> {
    let (a, b) = aligned(a, b)?;
    op(&a, &b)
}

/// Flattens a tree of `And` nodes into its conjuncts.
fn conjuncts<'f>(f: &'f Formula, out: &mut Vec<&'f Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        other => out.push(other),
    }
}

impl<M: Dynamics> Builder<'_, M> {
    fn constant(&self, value: ValueField) -> ValueTube {
        ValueTube::invariant(value)
    }

    fn node(&mut self, f: &Formula) -> Result<SetNode> {
        let label = to_text(f);
        match f {
            Formula::Atom(name) => Ok(SetNode::leaf(label, self.bindings[name].clone())),
            Formula::True => Ok(SetNode::leaf(label, self.constant(ValueField::full(self.grid.clone())))),
            Formula::False => Ok(SetNode::leaf(label, self.constant(ValueField::empty(self.grid.clone())))),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Atom(_) | Formula::True | Formula::False => {
                    let child = self.node(inner)?;
                    let tube = tube_complement(&child.tube);
                    Ok(SetNode::internal(label, tube, SetOperator::Complement, vec![child]))
                }
                _ => Err(Error::UnsupportedFragment(format!("negation of non-atomic subformula {}", to_text(inner)))),
            },
            Formula::Or(a, b) => {
                let (ca, cb) = (self.node(a)?, self.node(b)?);
                let tube = combine(&ca.tube, &cb.tube, tube_union)?;
                Ok(SetNode::internal(label, tube, SetOperator::Union, vec![ca, cb]))
            }
            Formula::And(..) => self.conjunction(f, label),
            Formula::Until(a, g) => {
                let (ca, cg) = (self.node(a)?, self.node(g)?);
                let tube = self.reach(&cg.tube, &ca.tube)?;
                Ok(SetNode::internal(label, tube, SetOperator::Reach, vec![cg, ca]))
            }
            Formula::Eventually(g) => {
                let cg = self.node(g)?;
                let ca = self.node(&Formula::True)?;
                let tube = self.reach(&cg.tube, &ca.tube)?;
                Ok(SetNode::internal(label, tube, SetOperator::Reach, vec![cg, ca]))
            }
            Formula::Always(c) => {
                let cc = self.node(c)?;
                let tube = solve_rci(self.model, self.grid, &cc.tube, self.t_span, self.opts)?;
                Ok(SetNode::internal(label, tube, SetOperator::Invariant, vec![cc]))
            }
        }
    }

    fn reach(&self, target: &ValueTube, constraint: &ValueTube) -> Result<ValueTube> {
        let req = BrtRequest { model: self.model, grid: self.grid.clone(), target, constraint, t_span: self.t_span };
        solve_brt(&req, self.opts)
    }

    fn conjunction(&mut self, f: &Formula, label: String) -> Result<SetNode> {
        let mut parts = Vec::new();
        conjuncts(f, &mut parts);
        if let Some(node) = self.fused(&parts, &label)? {
            return Ok(node);
        }
        let children = parts.iter().map(|p| self.node(p)).collect::<Result<Vec<_>>>()?;
        if children.iter().filter(|c| c.contains_temporal()).count() >= 2 {
            self.approximate = true;
        }
        let mut tube = children[0].tube.clone();
        for c in &children[1..] {
            tube = combine(&tube, &c.tube, tube_intersect)?;
        }
        Ok(SetNode::internal(label, tube, SetOperator::Intersection, children))
    }

    /// `(a U g) ∧ G c₁ ∧ … ∧ G cₖ` with Boolean `a`, `g`, `cᵢ` becomes the
    /// single tube `ℛ(g; a ∩ c₁ ∩ … ∩ cₖ)`.
    fn fused(&mut self, parts: &[&Formula], label: &str) -> Result<Option<SetNode>> {
        let mut until = None;
        let mut invariants = Vec::new();
        for p in parts {
            match p {
                Formula::Until(a, g) if !a.is_temporal() && !g.is_temporal() && until.is_none() => until = Some((a.as_ref(), g.as_ref())),
                Formula::Eventually(g) if !g.is_temporal() && until.is_none() => until = Some((&Formula::True, g.as_ref())),
                Formula::Always(c) if !c.is_temporal() => invariants.push(c.as_ref()),
                _ => return Ok(None),
            }
        }
        let Some((a, g)) = until else { return Ok(None) };
        if invariants.is_empty() {
            return Ok(None);
        }
        let target = self.node(g)?;
        let mut constraint_parts = vec![self.node(a)?];
        for c in invariants {
            constraint_parts.push(self.node(c)?);
        }
        let mut c_tube = constraint_parts[0].tube.clone();
        for c in &constraint_parts[1..] {
            c_tube = combine(&c_tube, &c.tube, tube_intersect)?;
        }
        let c_label = constraint_parts.iter().map(|c| c.label.clone()).collect::<Vec<_>>().join(" & ");
        let constraint = SetNode::internal(format!("({c_label})"), c_tube, SetOperator::Intersection, constraint_parts);
        let tube = self.reach(&target.tube, &constraint.tube)?;
        Ok(Some(SetNode::internal(label.to_string(), tube, SetOperator::Reach, vec![target, constraint])))
    }
}

/// Checks that set and operator nodes alternate and every leaf is either a
/// bound atom or a constant.
pub fn audit(t: &Tlt, bindings: &Bindings) -> Result<()> {
    fn walk(n: &SetNode, bindings: &Bindings) -> Result<()> {
        match &n.operator {
            None => {
                if n.label == "true" || n.label == "false" || bindings.contains_key(&n.label) {
                    Ok(())
                } else {
                    Err(Error::UnboundAtom(n.label.clone()))
                }
            }
            Some(op) => {
                let arity_ok = match op.operator {
                    SetOperator::Complement | SetOperator::Invariant => op.children.len() == 1,
                    SetOperator::Reach => op.children.len() == 2,
                    SetOperator::Union | SetOperator::Intersection => op.children.len() >= 2,
                };
                if !arity_ok {
                    return Err(Error::InvalidRequest(format!("operator {:?} has {} children", op.operator, op.children.len())));
                }
                op.children.iter().try_for_each(|c| walk(c, bindings))
            }
        }
    }
    walk(&t.root, bindings)
}
