use super::{Circuit, ParamVector, UnitId, UnitKind, VarSet};
use crate::error::{Error, Result};
use crate::math::logsumexp;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

/// Description of one unit as supplied by the caller. Child indices refer to
/// positions in the spec list; any DAG order is accepted.
#[derive(Clone, Debug)]
pub enum UnitSpec {
    Input { var: usize, value: usize },
    Sum { children: Vec<usize> },
    Product { children: Vec<usize> },
}

/// Incremental circuit constructor.
///
/// `build` normalizes the description: unreachable units are pruned, units
/// are re-ordered topologically, pass-through units are inserted wherever a
/// sum feeds a sum or a product feeds a product, and product units with
/// several parents are duplicated until each has exactly one. Smoothness and
/// decomposability are verified on the normalized DAG.
pub struct CircuitBuilder {
    specs: Vec<UnitSpec>,
    params: Vec<Option<Vec<f64>>>,
    var_arity: Option<Vec<u32>>,
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CircuitBuilder {
    pub fn new() -> Self {
        CircuitBuilder {
            specs: Vec::new(),
            params: Vec::new(),
            var_arity: None,
        }
    }

    pub fn from_specs(specs: Vec<UnitSpec>) -> Self {
        let params = vec![None; specs.len()];
        CircuitBuilder {
            specs,
            params,
            var_arity: None,
        }
    }

    /// Fixes the variable arities instead of inferring them from indicators.
    pub fn set_var_arity(&mut self, arity: Vec<u32>) {
        self.var_arity = Some(arity);
    }

    /// Replaces the per-spec parameter table (aligned with the spec list).
    pub(crate) fn replace_params(&mut self, params: Vec<Option<Vec<f64>>>) {
        assert_eq!(params.len(), self.specs.len());
        self.params = params;
    }

    fn push(&mut self, spec: UnitSpec, params: Option<Vec<f64>>) -> usize {
        self.specs.push(spec);
        self.params.push(params);
        self.specs.len() - 1
    }

    /// Indicator input unit matching `var == value`.
    pub fn input(&mut self, var: usize, value: usize) -> usize {
        self.push(UnitSpec::Input { var, value }, None)
    }

    pub fn sum(&mut self, children: &[usize]) -> usize {
        self.push(
            UnitSpec::Sum {
                children: children.to_vec(),
            },
            None,
        )
    }

    /// Sum unit with explicit log-space edge parameters.
    pub fn sum_with_params(&mut self, children: &[usize], log_params: &[f64]) -> usize {
        assert_eq!(children.len(), log_params.len());
        self.push(
            UnitSpec::Sum {
                children: children.to_vec(),
            },
            Some(log_params.to_vec()),
        )
    }

    pub fn product(&mut self, children: &[usize]) -> usize {
        self.push(
            UnitSpec::Product {
                children: children.to_vec(),
            },
            None,
        )
    }

    /// Builds the circuit, ignoring any attached parameters.
    pub fn build(self, root: usize) -> Result<Circuit> {
        Ok(self.build_inner(root, false)?.0)
    }

    /// Builds the circuit together with its parameter vector. Every sum unit
    /// in the spec must carry parameters; builder-inserted pass-through sums
    /// receive log θ = 0. Parameters are accepted if normalized within 1e-6
    /// and kept verbatim when within 1e-12 (exact decimal round-trips).
    pub fn build_with_params(self, root: usize) -> Result<(Circuit, ParamVector)> {
        let (c, p) = self.build_inner(root, true)?;
        Ok((c, p.expect("params requested")))
    }

    fn build_inner(self, root: usize, want_params: bool) -> Result<(Circuit, Option<ParamVector>)> {
        let CircuitBuilder {
            specs,
            params,
            var_arity,
        } = self;
        if root >= specs.len() {
            return Err(Error::InvalidUnit(format!(
                "root {root} out of range ({} units)",
                specs.len()
            )));
        }
        for (i, s) in specs.iter().enumerate() {
            let children = match s {
                UnitSpec::Input { .. } => &[][..],
                UnitSpec::Sum { children } | UnitSpec::Product { children } => children,
            };
            if children.iter().any(|&c| c >= specs.len()) {
                return Err(Error::InvalidUnit(format!(
                    "unit {i} references a child outside the spec list"
                )));
            }
            if !matches!(s, UnitSpec::Input { .. }) && children.is_empty() {
                return Err(Error::InvalidUnit(format!("inner unit {i} has no children")));
            }
            if want_params {
                if let UnitSpec::Sum { children } = s {
                    match &params[i] {
                        None => {
                            return Err(Error::InvalidUnit(format!(
                                "sum unit {i} has no parameters"
                            )))
                        }
                        Some(p) if p.len() != children.len() => {
                            return Err(Error::InvalidUnit(format!(
                                "sum unit {i} has {} parameters for {} children",
                                p.len(),
                                children.len()
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }

        let order = toposort_reachable(&specs, root)?;
        let arity = resolve_arity(&specs, &order, var_arity)?;

        let mut out = Normalizer {
            specs: &specs,
            spec_params: &params,
            kinds: Vec::new(),
            children: Vec::new(),
            input_spec: Vec::new(),
            origin: Vec::new(),
            params: Vec::new(),
            claimed: Vec::new(),
            map: vec![usize::MAX; specs.len()],
        };
        for &s in &order {
            out.emit(s);
        }
        let final_root = UnitId(out.map[root] as u32);

        finish(
            out.kinds,
            out.children,
            out.input_spec,
            out.origin,
            if want_params { Some(out.params) } else { None },
            final_root,
            arity,
        )
    }
}

fn resolve_arity(specs: &[UnitSpec], reachable: &[usize], given: Option<Vec<u32>>) -> Result<Vec<u32>> {
    match given {
        Some(arity) => {
            for &i in reachable {
                if let UnitSpec::Input { var, value } = &specs[i] {
                    if *var >= arity.len() || *value as u32 >= arity[*var] {
                        return Err(Error::InvalidUnit(format!(
                            "input unit {i} references variable {var} = {value} outside the declared arity"
                        )));
                    }
                }
            }
            Ok(arity)
        }
        None => {
            let mut max_var: Option<usize> = None;
            for &i in reachable {
                if let UnitSpec::Input { var, .. } = &specs[i] {
                    max_var = Some(max_var.map_or(*var, |m| m.max(*var)));
                }
            }
            let k = max_var.map_or(0, |m| m + 1);
            let mut arity = vec![2u32; k];
            for &i in reachable {
                if let UnitSpec::Input { var, value } = &specs[i] {
                    arity[*var] = arity[*var].max(*value as u32 + 1);
                }
            }
            Ok(arity)
        }
    }
}

/// Kahn's algorithm restricted to units reachable from the root, popping the
/// smallest ready index so that an already-topological spec keeps its order.
fn toposort_reachable(specs: &[UnitSpec], root: usize) -> Result<Vec<usize>> {
    let n = specs.len();
    let mut reachable = vec![false; n];
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        if std::mem::replace(&mut reachable[u], true) {
            continue;
        }
        if let UnitSpec::Sum { children } | UnitSpec::Product { children } = &specs[u] {
            stack.extend(children.iter().copied());
        }
    }

    let mut pending = vec![0usize; n];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        if !reachable[u] {
            continue;
        }
        if let UnitSpec::Sum { children } | UnitSpec::Product { children } = &specs[u] {
            // count each distinct child once; duplicate edges are legal
            let mut seen: Vec<usize> = children.clone();
            seen.sort_unstable();
            seen.dedup();
            pending[u] = seen.len();
            for c in seen {
                parents[c].push(u);
            }
        }
    }

    let mut heap: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&u| reachable[u] && pending[u] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = heap.pop() {
        order.push(u);
        for &p in &parents[u] {
            pending[p] -= 1;
            if pending[p] == 0 {
                heap.push(Reverse(p));
            }
        }
    }
    let total_reachable = reachable.iter().filter(|&&r| r).count();
    if order.len() != total_reachable {
        let stuck = (0..n)
            .find(|&u| reachable[u] && pending[u] > 0)
            .unwrap_or(root);
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

struct Normalizer<'a> {
    specs: &'a [UnitSpec],
    spec_params: &'a [Option<Vec<f64>>],
    kinds: Vec<UnitKind>,
    children: Vec<Vec<UnitId>>,
    input_spec: Vec<(u32, u32)>,
    origin: Vec<Option<u32>>,
    params: Vec<Option<Vec<f64>>>,
    claimed: Vec<bool>,
    map: Vec<usize>,
}

impl Normalizer<'_> {
    fn add(
        &mut self,
        kind: UnitKind,
        children: Vec<UnitId>,
        input_spec: (u32, u32),
        origin: Option<u32>,
        params: Option<Vec<f64>>,
    ) -> UnitId {
        self.kinds.push(kind);
        self.children.push(children);
        self.input_spec.push(input_spec);
        self.origin.push(origin);
        self.params.push(params);
        self.claimed.push(false);
        UnitId(self.kinds.len() as u32 - 1)
    }

    /// Returns a product unit equal to `u` with a free parent slot,
    /// duplicating it (children shared) if it is already claimed.
    fn claim_product(&mut self, u: UnitId) -> UnitId {
        let i = u.index();
        if !self.claimed[i] {
            self.claimed[i] = true;
            return u;
        }
        let copy = self.add(
            UnitKind::Product,
            self.children[i].clone(),
            (0, 0),
            self.origin[i],
            None,
        );
        self.claimed[copy.index()] = true;
        copy
    }

    /// Child of a sum unit: products are claimed, sums are wrapped in a
    /// fresh pass-through product, inputs pass through unchanged.
    fn as_sum_child(&mut self, c: UnitId) -> UnitId {
        match self.kinds[c.index()] {
            UnitKind::Product => self.claim_product(c),
            UnitKind::Sum => {
                let w = self.add(UnitKind::Product, vec![c], (0, 0), None, None);
                self.claimed[w.index()] = true;
                w
            }
            UnitKind::Input => c,
        }
    }

    /// Child of a product unit: products are wrapped in a pass-through sum
    /// (claiming the product first), sums and inputs pass through.
    fn as_product_child(&mut self, c: UnitId) -> UnitId {
        match self.kinds[c.index()] {
            UnitKind::Product => {
                let inner = self.claim_product(c);
                self.add(UnitKind::Sum, vec![inner], (0, 0), None, Some(vec![0.0]))
            }
            _ => c,
        }
    }

    fn emit(&mut self, s: usize) {
        let id = match &self.specs[s] {
            UnitSpec::Input { var, value } => self.add(
                UnitKind::Input,
                Vec::new(),
                (*var as u32, *value as u32),
                Some(s as u32),
                None,
            ),
            UnitSpec::Sum { children } => {
                let mapped: Vec<UnitId> = children
                    .iter()
                    .map(|&c| {
                        let f = UnitId(self.map[c] as u32);
                        self.as_sum_child(f)
                    })
                    .collect();
                self.add(
                    UnitKind::Sum,
                    mapped,
                    (0, 0),
                    Some(s as u32),
                    self.spec_params[s].clone(),
                )
            }
            UnitSpec::Product { children } => {
                let mapped: Vec<UnitId> = children
                    .iter()
                    .map(|&c| {
                        let f = UnitId(self.map[c] as u32);
                        self.as_product_child(f)
                    })
                    .collect();
                self.add(UnitKind::Product, mapped, (0, 0), Some(s as u32), None)
            }
        };
        self.map[s] = id.index();
    }
}

fn finish(
    kinds: Vec<UnitKind>,
    children_nested: Vec<Vec<UnitId>>,
    input_spec: Vec<(u32, u32)>,
    origin: Vec<Option<u32>>,
    params_nested: Option<Vec<Option<Vec<f64>>>>,
    root: UnitId,
    var_arity: Vec<u32>,
) -> Result<(Circuit, Option<ParamVector>)> {
    let n = kinds.len();
    let num_vars = var_arity.len();

    // scopes bottom-up + structural property checks
    let mut scope: Vec<VarSet> = Vec::with_capacity(n);
    let name = |origin: &[Option<u32>], u: usize| origin[u].map(|o| o as usize).unwrap_or(u);
    for u in 0..n {
        let s = match kinds[u] {
            UnitKind::Input => VarSet::singleton(num_vars, input_spec[u].0 as usize),
            UnitKind::Sum => {
                let cs = &children_nested[u];
                let first = &scope[cs[0].index()];
                for (j, c) in cs.iter().enumerate().skip(1) {
                    if scope[c.index()] != *first {
                        return Err(Error::SmoothnessViolation {
                            unit: name(&origin, u),
                            child_a: name(&origin, cs[0].index()),
                            child_b: name(&origin, cs[j].index()),
                        });
                    }
                }
                first.clone()
            }
            UnitKind::Product => {
                let cs = &children_nested[u];
                let mut acc = VarSet::empty(num_vars);
                let mut total = 0usize;
                for c in cs {
                    let cs_scope = &scope[c.index()];
                    total += cs_scope.count();
                    acc.union_with(cs_scope);
                }
                if acc.count() != total {
                    // locate a concrete offending pair for the error
                    let mut pair = (cs[0], cs[0]);
                    'outer: for i in 0..cs.len() {
                        for j in i + 1..cs.len() {
                            if scope[cs[i].index()].intersects(&scope[cs[j].index()]) {
                                pair = (cs[i], cs[j]);
                                break 'outer;
                            }
                        }
                    }
                    return Err(Error::DecomposabilityViolation {
                        unit: name(&origin, u),
                        child_a: name(&origin, pair.0.index()),
                        child_b: name(&origin, pair.1.index()),
                    });
                }
                acc
            }
        };
        scope.push(s);
    }

    // depths and layers
    let mut depth = vec![0u32; n];
    let mut max_depth = 0;
    for u in 0..n {
        if kinds[u] != UnitKind::Input {
            let d = children_nested[u]
                .iter()
                .map(|c| depth[c.index()])
                .max()
                .unwrap()
                + 1;
            depth[u] = d;
            max_depth = max_depth.max(d);
        }
    }
    let mut layers: Vec<Vec<UnitId>> = vec![Vec::new(); max_depth as usize + 1];
    for u in 0..n {
        layers[depth[u] as usize].push(UnitId(u as u32));
    }

    // flatten children, assign sum-edge slots
    let mut child_start = Vec::with_capacity(n + 1);
    let mut children = Vec::new();
    let mut sum_edge_start = Vec::with_capacity(n + 1);
    let mut num_sum_edges = 0usize;
    for u in 0..n {
        child_start.push(children.len() as u32);
        sum_edge_start.push(num_sum_edges as u32);
        children.extend_from_slice(&children_nested[u]);
        if kinds[u] == UnitKind::Sum {
            num_sum_edges += children_nested[u].len();
        }
    }
    child_start.push(children.len() as u32);
    sum_edge_start.push(num_sum_edges as u32);

    let circuit = Circuit {
        kinds,
        child_start,
        children,
        input_spec,
        scope,
        depth,
        layers,
        root,
        num_vars,
        var_arity,
        sum_edge_start,
        num_sum_edges,
        origin,
        det_cache: OnceLock::new(),
    };

    let params = match params_nested {
        None => None,
        Some(nested) => {
            let mut log_theta = Vec::with_capacity(num_sum_edges);
            for u in circuit.units() {
                if circuit.kind(u) == UnitKind::Sum {
                    let p = nested[u.index()]
                        .as_ref()
                        .expect("sum parameters checked earlier");
                    log_theta.extend_from_slice(p);
                }
            }
            let mut pv = ParamVector { log_theta };
            for u in circuit.sum_units() {
                let r = circuit.sum_edges(u);
                let lse = logsumexp(&pv.log_theta[r.clone()]);
                if lse.abs() > 1e-6 {
                    return Err(Error::NonFiniteValue(format!(
                        "sum unit {u} parameters are not normalized (logsumexp = {lse:e})"
                    )));
                }
                // keep exactly-round-tripped parameters verbatim
                if lse.abs() > 1e-12 {
                    for e in r {
                        pv.log_theta[e] -= lse;
                    }
                }
            }
            Some(pv)
        }
    };

    Ok((circuit, params))
}
