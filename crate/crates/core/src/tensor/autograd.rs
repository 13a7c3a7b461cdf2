use std::cell::Cell;
use std::collections::{HashMap, HashSet};

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Backward rule of one recorded operation. Given the gradient of the
/// output, returns one gradient per input (`None` where the input does not
/// need one).
pub(crate) trait BackwardOp<T: Real>: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[Tensor<T>], grad_out: &[T]) -> Vec<Option<Vec<T>>>;
}

/// A recorded operation: the rule plus the tensors it consumed.
pub(crate) struct OpNode<T: Real> {
    pub(crate) op: Box<dyn BackwardOp<T>>,
    pub(crate) inputs: Vec<Tensor<T>>,
}

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Run `f` without recording any graph on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

/// Post-order over the graph reachable from `root`; each node appears once.
fn topo_order<T: Real>(root: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !seen.insert(t.id()) {
            continue;
        }
        if t.is_consumed() {
            return Err(Error::StaleGraph);
        }
        let children: Vec<Tensor<T>> = t.with_node(|node| {
            node.map(|n| {
                n.inputs
                    .iter()
                    .filter(|i| i.requires_grad())
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
        });
        stack.push((t, true));
        for c in children.into_iter().rev() {
            if !seen.contains(&c.id()) {
                stack.push((c, false));
            }
        }
    }
    Ok(order)
}

pub(crate) fn run_backward<T: Real>(root: &Tensor<T>, seed: Vec<T>) -> Result<()> {
    if root.is_consumed() {
        return Err(Error::StaleGraph);
    }
    if !root.requires_grad() {
        return Err(Error::contract(
            "backward on a tensor that does not require grad",
        ));
    }
    if seed.len() != root.numel() {
        return Err(Error::dim(
            "backward",
            format!("seed has {} values, tensor has {}", seed.len(), root.numel()),
        ));
    }

    let order = topo_order(root)?;
    let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
    pending.insert(root.id(), seed);

    for t in order.iter().rev() {
        let Some(g) = pending.remove(&t.id()) else {
            continue;
        };
        let node = t.take_node();
        match node {
            None => {
                // Leaf parameter.
                t.accumulate_grad(&g);
            }
            Some(node) => {
                if t.retains_grad() {
                    t.set_grad(g.clone());
                }
                let grads = node.op.backward(&node.inputs, &g);
                debug_assert_eq!(grads.len(), node.inputs.len());
                for (input, gi) in node.inputs.iter().zip(grads) {
                    let Some(gi) = gi else { continue };
                    if !input.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(gi.len(), input.numel(), "{}", node.op.name());
                    match pending.get_mut(&input.id()) {
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(gi) {
                                *a = *a + b;
                            }
                        }
                        None => {
                            pending.insert(input.id(), gi);
                        }
                    }
                }
                t.mark_consumed();
            }
        }
    }
    Ok(())
}
