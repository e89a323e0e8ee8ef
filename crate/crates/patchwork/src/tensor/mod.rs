//! Reverse-mode automatic differentiation over dynamic-shape f64 arrays.
//!
//! A small eager engine: every operation computes its value immediately and
//! records its parents plus a backward rule. [`Var::backward`] walks the graph
//! in reverse topological order and returns gradients keyed by node id, so
//! parameter leaves created once at model init keep stable ids across steps.
//!
//! Everything runs in f64; the gradient oracles in the test suite compare
//! against central finite differences at double precision.

use ndarray::ArrayD;
use std::cell::{Cell, Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

pub mod conv;
pub mod ops;

pub type Arr = ArrayD<f64>;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Backward rule for one graph node: given the gradient of the loss with
/// respect to the node's output, accumulate contributions into the parents.
pub(crate) trait Op {
    fn backward(&self, node: &Node, grad_out: &Arr, grads: &mut Grads);
}

pub struct Node {
    id: u64,
    value: RefCell<Arr>,
    parents: Vec<Var>,
    op: Option<Box<dyn Op>>,
    needs_grad: Cell<bool>,
}

/// A value in the computation graph. Cloning is cheap (shared node).
#[derive(Clone)]
pub struct Var {
    node: Rc<Node>,
}

impl Var {
    /// Trainable leaf: gradients are collected for it.
    pub fn leaf(value: Arr) -> Var {
        Var::new_leaf(value, true)
    }

    /// Constant input: backward never descends into it.
    pub fn constant(value: Arr) -> Var {
        Var::new_leaf(value, false)
    }

    pub fn scalar(x: f64) -> Var {
        Var::constant(ndarray::arr0(x).into_dyn())
    }

    fn new_leaf(value: Arr, needs_grad: bool) -> Var {
        Var {
            node: Rc::new(Node {
                id: next_id(),
                value: RefCell::new(value),
                parents: Vec::new(),
                op: None,
                needs_grad: Cell::new(needs_grad),
            }),
        }
    }

    pub(crate) fn from_op(value: Arr, parents: Vec<Var>, op: Box<dyn Op>) -> Var {
        let needs = parents.iter().any(|p| p.needs_grad());
        Var {
            node: Rc::new(Node {
                id: next_id(),
                value: RefCell::new(value),
                parents,
                op: Some(op),
                needs_grad: Cell::new(needs),
            }),
        }
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    pub fn value(&self) -> Arr {
        self.node.value.borrow().clone()
    }

    pub fn value_ref(&self) -> Ref<'_, Arr> {
        self.node.value.borrow()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.node.value.borrow().shape().to_vec()
    }

    /// Extract a scalar from a 0-d (or single-element) value.
    pub fn item(&self) -> f64 {
        let v = self.node.value.borrow();
        assert_eq!(v.len(), 1, "item() on non-scalar of shape {:?}", v.shape());
        *v.iter().next().unwrap()
    }

    pub fn needs_grad(&self) -> bool {
        self.node.needs_grad.get()
    }

    /// Toggle gradient collection on a leaf (used to freeze critics while the
    /// generator trains: input gradients still flow through, weight gradients
    /// are neither computed nor returned).
    pub fn set_trainable(&self, trainable: bool) {
        assert!(self.node.op.is_none(), "set_trainable on non-leaf");
        self.node.needs_grad.set(trainable);
    }

    /// Overwrite a leaf's value in place (optimizer updates).
    pub fn set_value(&self, value: Arr) {
        assert!(self.node.op.is_none(), "set_value on non-leaf");
        *self.node.value.borrow_mut() = value;
    }

    /// A constant leaf sharing a copy of this value (stop-gradient).
    pub fn detach(&self) -> Var {
        Var::constant(self.value())
    }

    /// Gradients of this (scalar) node with respect to every reachable leaf
    /// that has `needs_grad` set. Seeds the root gradient with ones.
    pub fn backward(&self) -> Grads {
        let order = self.topo_order();
        let mut grads = Grads::default();
        grads
            .map
            .insert(self.id(), Arr::ones(self.node.value.borrow().raw_dim()));
        for var in order.iter().rev() {
            if !var.needs_grad() {
                continue;
            }
            if let Some(op) = &var.node.op {
                // Interior gradients are consumed exactly once: all consumers
                // of `var` appear later in reverse order, so accumulation into
                // this entry has finished by now.
                if let Some(g) = grads.map.remove(&var.id()) {
                    op.backward(&var.node, &g, &mut grads);
                }
            }
        }
        grads
    }

    /// Post-order (parents before consumers), iterative to keep deep graphs
    /// off the call stack.
    fn topo_order(&self) -> Vec<Var> {
        let mut order = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        // (var, expanded): a node is emitted only after its parents.
        let mut stack: Vec<(Var, bool)> = vec![(self.clone(), false)];
        while let Some((var, expanded)) = stack.pop() {
            if expanded {
                order.push(var);
                continue;
            }
            if !visited.insert(var.id()) {
                continue;
            }
            stack.push((var.clone(), true));
            for p in &var.node.parents {
                if !visited.contains(&p.id()) && p.needs_grad() {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }

}

impl Node {
    pub(crate) fn parents(&self) -> &[Var] {
        &self.parents
    }

    pub(crate) fn value(&self) -> Ref<'_, Arr> {
        self.value.borrow()
    }
}

/// Per-leaf gradients produced by one backward pass.
#[derive(Default)]
pub struct Grads {
    map: HashMap<u64, Arr>,
}

impl Grads {
    pub fn get(&self, v: &Var) -> Option<&Arr> {
        self.map.get(&v.id())
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.map.contains_key(&v.id())
    }

    /// Accumulate a contribution for `target`, skipping constants.
    pub(crate) fn accum(&mut self, target: &Var, contribution: Arr) {
        if !target.needs_grad() {
            return;
        }
        match self.map.entry(target.id()) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &contribution;
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(contribution);
            }
        }
    }
}
