//! Order shareability graphs, clique partitioning and bundle construction.
//!
//! Within one batch, two orders are linked when their vendors lie within
//! `d_v` and their customers within `d_c` (straight-line). The graph is
//! partitioned into cliques by a greedy minimum-clique-cover heuristic, and
//! each clique is split into bundles of at most `k` orders. A multi-order
//! bundle is only kept when its route is strictly shorter than the sum of the
//! solo trips it replaces.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geo::{straight_line_distance, GeoError, GeoPoint, TravelProvider};
use crate::model::{BundlingMode, Order};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot route an empty order set")]
    EmptyBundle,
    #[error("effective pickup delay {0} s is negative; internal route too long")]
    NegativeEffectivePud(Timestamp),
    #[error(transparent)]
    Travel(#[from] GeoError),
}

/// Undirected graph over the orders of one batch (nodes are batch indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ShareabilityGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
    matrix: Vec<bool>,
    edges: usize,
}

impl ShareabilityGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
            matrix: vec![false; n * n],
            edges: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    /// Adds an undirected edge; self-loops and duplicates are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b || self.matrix[a * self.n + b] {
            return;
        }
        self.matrix[a * self.n + b] = true;
        self.matrix[b * self.n + a] = true;
        self.adj[a].push(b);
        self.adj[b].push(a);
        self.edges += 1;
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.matrix[a * self.n + b]
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adj[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = (0..self.n)
            .flat_map(|a| self.adj[a].iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    /// Debug dump as `order_a,order_b` lines.
    pub fn edge_list_csv(&self, orders: &[Order]) -> String {
        let mut s = String::from("order_a,order_b\n");
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{},{}", orders[a].id, orders[b].id);
        }
        s
    }
}

/// Builds the shareability graph of one batch using straight-line proximity.
pub fn build_graph(orders: &[Order], d_v: f64, d_c: f64, mode: BundlingMode) -> ShareabilityGraph {
    let n = orders.len();
    let mut g = ShareabilityGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&orders[i], &orders[j]);
            let vendors_ok = match mode {
                BundlingMode::SameVendor => a.vendor_id == b.vendor_id,
                BundlingMode::Radius => straight_line_distance(&a.vendor_loc, &b.vendor_loc) <= d_v,
            };
            if vendors_ok && straight_line_distance(&a.customer_loc, &b.customer_loc) <= d_c {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Components up to this size are partitioned exactly.
pub const EXACT_COVER_MAX: usize = 10;

/// Clique partition: exact on small connected components, greedy on larger ones.
///
/// Cliques are listed by their smallest node.
pub fn clique_cover(g: &ShareabilityGraph) -> Vec<Vec<usize>> {
    let mut cliques = Vec::new();
    for comp in components(g) {
        if comp.len() == 1 {
            cliques.push(comp);
        } else if comp.len() <= EXACT_COVER_MAX {
            cliques.extend(exact_cover(g, &comp));
        } else {
            let sub = induced(g, &comp);
            cliques.extend(
                greedy_clique_cover(&sub)
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| comp[v]).collect::<Vec<_>>()),
            );
        }
    }
    cliques.sort_by_key(|c| c[0]);
    cliques
}

/// Connected components, each sorted ascending.
fn components(g: &ShareabilityGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &u in g.neighbors(comp[i]) {
                if !seen[u] {
                    seen[u] = true;
                    comp.push(u);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn induced(g: &ShareabilityGraph, nodes: &[usize]) -> ShareabilityGraph {
    let mut sub = ShareabilityGraph::new(nodes.len());
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &b) in nodes.iter().enumerate().skip(i + 1) {
            if g.has_edge(a, b) {
                sub.add_edge(i, j);
            }
        }
    }
    sub
}

/// Minimum clique partition of a small node set by dynamic programming over subsets.
fn exact_cover(g: &ShareabilityGraph, nodes: &[usize]) -> Vec<Vec<usize>> {
    let m = nodes.len();
    let full = (1usize << m) - 1;
    let mut adj = vec![0usize; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && g.has_edge(nodes[i], nodes[j]) {
                adj[i] |= 1 << j;
            }
        }
    }
    let mut is_clique = vec![true; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        is_clique[mask] = is_clique[rest] && adj[low] & rest == rest;
    }
    // best[mask] = (cliques needed, clique containing the lowest node of mask)
    let mut best = vec![(usize::MAX, 0usize); full + 1];
    best[0] = (0, 0);
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let c = sub | low;
            if is_clique[c] {
                let cost = best[mask ^ c].0 + 1;
                // prefer larger cliques first for a deterministic, compact choice
                if cost < best[mask].0 || (cost == best[mask].0 && c > best[mask].1) {
                    best[mask] = (cost, c);
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut out = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let c = best[mask].1;
        out.push((0..m).filter(|&i| c >> i & 1 == 1).map(|i| nodes[i]).collect());
        mask ^= c;
    }
    out
}

/// Greedy clique partition.
///
/// Each clique is seeded with the uncovered node that has the fewest uncovered
/// neighbours, so the most constrained nodes are placed first. It grows by
/// the uncovered candidate adjacent to every current member with the most
/// uncovered neighbours. Ties go to the smaller index.
pub fn greedy_clique_cover(g: &ShareabilityGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut covered = vec![false; n];
    let mut uncovered_deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let cover_node = |v: usize, covered: &mut Vec<bool>, deg: &mut Vec<usize>| {
        covered[v] = true;
        for &u in g.neighbors(v) {
            deg[u] -= 1;
        }
    };
    let mut cliques = Vec::new();
    while let Some(seed) = (0..n).filter(|&v| !covered[v]).min_by_key(|&v| (uncovered_deg[v], v)) {
        cover_node(seed, &mut covered, &mut uncovered_deg);
        let mut clique = vec![seed];
        let mut candidates: Vec<usize> = g
            .neighbors(seed)
            .iter()
            .copied()
            .filter(|&u| !covered[u])
            .collect();
        candidates.sort_unstable();
        while !candidates.is_empty() {
            let (pos, &next) = candidates
                .iter()
                .enumerate()
                .max_by(|(_, &a), (_, &b)| uncovered_deg[a].cmp(&uncovered_deg[b]).then(b.cmp(&a)))
                .expect("non-empty");
            candidates.swap_remove(pos);
            cover_node(next, &mut covered, &mut uncovered_deg);
            clique.push(next);
            candidates.retain(|&u| g.has_edge(u, next));
            candidates.sort_unstable();
        }
        clique.sort_unstable();
        cliques.push(clique);
    }
    cliques
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Pickup,
    Drop,
}

/// One stop of a bundle route; `order` is a batch index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub order: usize,
    pub kind: StopKind,
    pub loc: GeoPoint,
}

/// A bundle reduced to a single pseudo-order for dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentOrder {
    pub pickup: GeoPoint,
    pub drop: GeoPoint,
    pub ready: Timestamp,
    pub effective_pud: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    /// Batch indices, ascending.
    pub orders: Vec<usize>,
    pub route: Vec<Stop>,
    /// Route length (d_b), km.
    pub route_length: f64,
    /// Sum of solo trip lengths (d_o), km.
    pub solo_length: f64,
    pub equivalent: EquivalentOrder,
}

impl Bundle {
    pub fn size(&self) -> usize {
        self.orders.len()
    }
}

/// Times at which each stop of a route is served, given arrival at the first stop.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Service time per route stop.
    pub stop_times: Vec<Timestamp>,
    pub end: Timestamp,
}

/// Walks a route: pickups wait for the order to be ready, legs take the
/// provider's travel time at their departure hour.
pub fn route_schedule(
    route: &[Stop],
    orders: &[Order],
    arrival: Timestamp,
    travel: &TravelProvider,
) -> Result<Schedule, GeoError> {
    let mut t = arrival;
    let mut stop_times = Vec::with_capacity(route.len());
    for (i, stop) in route.iter().enumerate() {
        if i > 0 {
            t += travel.travel_time(&route[i - 1].loc, &stop.loc, t)?;
        }
        if stop.kind == StopKind::Pickup {
            t = t.max(orders[stop.order].t_r);
        }
        stop_times.push(t);
    }
    Ok(Schedule { stop_times, end: t })
}

/// Ready time and effective maximum pickup delay of a routed bundle.
///
/// The schedule is walked from the earliest member ready time; each member's
/// pickup offset is how long after its own ready time it is picked up. The
/// effective delay is `max_pud` minus the largest offset, so any arrival at the
/// first stop within the effective delay keeps every member within `max_pud`.
pub fn make_equivalent_order(
    route: &[Stop],
    orders: &[Order],
    max_pud: Timestamp,
    travel: &TravelProvider,
) -> Result<EquivalentOrder, BundleError> {
    let first = route.first().ok_or(BundleError::EmptyBundle)?;
    let last = route.last().expect("non-empty");
    let ready = route
        .iter()
        .map(|s| orders[s.order].t_r)
        .min()
        .expect("non-empty");
    let sched = route_schedule(route, orders, ready, travel)?;
    let worst = route
        .iter()
        .zip(&sched.stop_times)
        .filter(|(s, _)| s.kind == StopKind::Pickup)
        .map(|(s, &t)| t - orders[s.order].t_r)
        .max()
        .unwrap_or(0);
    let effective_pud = max_pud - worst;
    if effective_pud < 0 {
        return Err(BundleError::NegativeEffectivePud(effective_pud));
    }
    Ok(EquivalentOrder {
        pickup: first.loc,
        drop: last.loc,
        ready,
        effective_pud,
    })
}

/// Pairwise road distances between the pickup (2p) and drop (2p+1) points of a member set.
struct LocalDistances {
    n: usize,
    d: Vec<f64>,
}

impl LocalDistances {
    fn new(members: &[&Order], travel: &TravelProvider) -> Result<Self, GeoError> {
        let pts: Vec<GeoPoint> = members
            .iter()
            .flat_map(|o| [o.vendor_loc, o.customer_loc])
            .collect();
        let n = pts.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i * n + j] = travel.travel_distance(&pts[i], &pts[j])?;
                }
            }
        }
        Ok(Self { n, d })
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.d[a * self.n + b]
    }

    fn solo(&self, p: usize) -> f64 {
        self.get(2 * p, 2 * p + 1)
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Shortest pickups-first route over member positions; returns (point sequence, length).
fn best_route(members: &[usize], dist: &LocalDistances) -> (Vec<usize>, f64) {
    let path_len = |seq: &[usize]| seq.windows(2).map(|w| dist.get(w[0], w[1])).sum::<f64>();
    let m = members.len();
    if m <= 4 {
        let perms = permutations(members);
        let mut best: Option<(Vec<usize>, f64)> = None;
        for picks in &perms {
            for drops in &perms {
                let seq: Vec<usize> = picks
                    .iter()
                    .map(|&p| 2 * p)
                    .chain(drops.iter().map(|&p| 2 * p + 1))
                    .collect();
                let len = path_len(&seq);
                if best.as_ref().map_or(true, |(_, b)| len < *b) {
                    best = Some((seq, len));
                }
            }
        }
        return best.expect("at least one permutation");
    }
    // nearest-neighbour construction, tried from every starting pickup
    let mut best: Option<(Vec<usize>, f64)> = None;
    for &start in members {
        let mut seq = vec![2 * start];
        let mut picks: Vec<usize> = members.iter().copied().filter(|&p| p != start).collect();
        let mut drops: Vec<usize> = members.to_vec();
        while !picks.is_empty() {
            let cur = *seq.last().expect("non-empty");
            let (i, _) = picks
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| dist.get(cur, 2 * a).total_cmp(&dist.get(cur, 2 * b)))
                .expect("non-empty");
            seq.push(2 * picks.remove(i));
        }
        while !drops.is_empty() {
            let cur = *seq.last().expect("non-empty");
            let (i, _) = drops
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    dist.get(cur, 2 * a + 1).total_cmp(&dist.get(cur, 2 * b + 1))
                })
                .expect("non-empty");
            seq.push(2 * drops.remove(i) + 1);
        }
        let len = path_len(&seq);
        if best.as_ref().map_or(true, |(_, b)| len < *b) {
            best = Some((seq, len));
        }
    }
    best.expect("non-empty member set")
}

fn to_stops(seq: &[usize], batch_ids: &[usize], members: &[&Order]) -> Vec<Stop> {
    seq.iter()
        .map(|&pt| {
            let p = pt / 2;
            let (kind, loc) = if pt % 2 == 0 {
                (StopKind::Pickup, members[p].vendor_loc)
            } else {
                (StopKind::Drop, members[p].customer_loc)
            };
            Stop {
                order: batch_ids[p],
                kind,
                loc,
            }
        })
        .collect()
}

/// Shortest pickups-before-drops route over a set of batch orders.
///
/// Exact for up to four orders (all pickup orderings times all drop
/// orderings), nearest-neighbour beyond.
pub fn bundle_route(
    order_ids: &[usize],
    orders: &[Order],
    travel: &TravelProvider,
) -> Result<(Vec<Stop>, f64), BundleError> {
    if order_ids.is_empty() {
        return Err(BundleError::EmptyBundle);
    }
    let members: Vec<&Order> = order_ids.iter().map(|&i| &orders[i]).collect();
    let dist = LocalDistances::new(&members, travel)?;
    let positions: Vec<usize> = (0..members.len()).collect();
    let (seq, len) = best_route(&positions, &dist);
    Ok((to_stops(&seq, order_ids, &members), len))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub k: usize,
    pub max_pud: Timestamp,
    /// Earliest instant a vehicle can start serving the batch. Multi-order
    /// bundles whose pickup window closes before it are not formed.
    pub dispatch_at: Timestamp,
}

struct Candidate {
    members: Vec<usize>,
    seq: Vec<usize>,
    route_length: f64,
    solo_length: f64,
    equivalent: EquivalentOrder,
}

impl Candidate {
    fn saving(&self) -> f64 {
        self.solo_length - self.route_length
    }
}

fn evaluate(
    members: &[usize],
    dist: &LocalDistances,
    clique: &[usize],
    locals: &[&Order],
    orders: &[Order],
    params: &SplitParams,
    travel: &TravelProvider,
) -> Result<Option<Candidate>, GeoError> {
    let solo: f64 = members.iter().map(|&p| dist.solo(p)).sum();
    let (seq, len) = best_route(members, dist);
    if members.len() > 1 && len >= solo {
        return Ok(None);
    }
    let stops = to_stops(&seq, clique, locals);
    match make_equivalent_order(&stops, orders, params.max_pud, travel) {
        Ok(eq) if eq.ready + eq.effective_pud < params.dispatch_at => Ok(None),
        Ok(equivalent) => Ok(Some(Candidate {
            members: members.to_vec(),
            seq,
            route_length: len,
            solo_length: solo,
            equivalent,
        })),
        Err(BundleError::Travel(e)) => Err(e),
        Err(_) => Ok(None),
    }
}

/// Splits a clique into capacity-feasible, mileage-saving bundles.
///
/// Repeatedly seeds a bundle with the remaining pair of largest saving, then
/// grows it with the order that increases the saving most, up to `k`. Orders
/// left without a saving partner become singletons.
pub fn split_clique(
    clique: &[usize],
    orders: &[Order],
    params: &SplitParams,
    travel: &TravelProvider,
) -> Result<Vec<Bundle>, BundleError> {
    let locals: Vec<&Order> = clique.iter().map(|&i| &orders[i]).collect();
    let m = clique.len();
    let dist = LocalDistances::new(&locals, travel)?;
    let mut emitted: Vec<Candidate> = Vec::new();
    let mut remaining = vec![true; m];

    if params.k >= 2 && m >= 2 {
        let mut pairs: Vec<Candidate> = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                if let Some(c) = evaluate(&[i, j], &dist, clique, &locals, orders, params, travel)? {
                    pairs.push(c);
                }
            }
        }
        loop {
            let best = pairs
                .iter()
                .filter(|c| c.members.iter().all(|&p| remaining[p]))
                .fold(None::<&Candidate>, |acc, c| match acc {
                    Some(b) if b.saving() >= c.saving() => Some(b),
                    _ => Some(c),
                });
            let Some(seed) = best else { break };
            let mut current = Candidate {
                members: seed.members.clone(),
                seq: seed.seq.clone(),
                route_length: seed.route_length,
                solo_length: seed.solo_length,
                equivalent: seed.equivalent,
            };
            for &p in &current.members {
                remaining[p] = false;
            }
            while current.members.len() < params.k {
                let mut grown: Option<Candidate> = None;
                for p in (0..m).filter(|&p| remaining[p]) {
                    let mut members = current.members.clone();
                    members.push(p);
                    members.sort_unstable();
                    if let Some(c) = evaluate(&members, &dist, clique, &locals, orders, params, travel)? {
                        let bar = grown.as_ref().map_or(current.saving(), |g| g.saving());
                        if c.saving() > bar {
                            grown = Some(c);
                        }
                    }
                }
                match grown {
                    Some(c) => {
                        for &p in &c.members {
                            remaining[p] = false;
                        }
                        current = c;
                    }
                    None => break,
                }
            }
            emitted.push(current);
        }
    }

    let mut bundles = Vec::with_capacity(m);
    for c in emitted {
        bundles.push(Bundle {
            orders: c.members.iter().map(|&p| clique[p]).collect(),
            route: to_stops(&c.seq, clique, &locals),
            route_length: c.route_length,
            solo_length: c.solo_length,
            equivalent: c.equivalent,
        });
    }
    for p in (0..m).filter(|&p| remaining[p]) {
        let seq = [2 * p, 2 * p + 1];
        let route = to_stops(&seq, clique, &locals);
        let d = dist.solo(p);
        let o = locals[p];
        bundles.push(Bundle {
            orders: vec![clique[p]],
            route,
            route_length: d,
            solo_length: d,
            equivalent: EquivalentOrder {
                pickup: o.vendor_loc,
                drop: o.customer_loc,
                ready: o.t_r,
                effective_pud: params.max_pud,
            },
        });
    }
    for b in &mut bundles {
        b.orders.sort_unstable();
    }
    bundles.sort_by_key(|b| b.orders[0]);
    Ok(bundles)
}

/// Full bundling pass over one batch: graph, clique cover, split.
pub fn bundle_batch(
    orders: &[Order],
    d_v: f64,
    d_c: f64,
    mode: BundlingMode,
    params: &SplitParams,
    travel: &TravelProvider,
) -> Result<Vec<Bundle>, BundleError> {
    let g = build_graph(orders, d_v, d_c, mode);
    let mut bundles = Vec::with_capacity(orders.len());
    for clique in clique_cover(&g) {
        bundles.extend(split_clique(&clique, orders, params, travel)?);
    }
    bundles.sort_by_key(|b| b.orders[0]);
    Ok(bundles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> GeoPoint {
        GeoPoint::new(25.2, 55.3).unwrap()
    }

    fn order(id: &str, vendor: &str, v: GeoPoint, c: GeoPoint, t_o: Timestamp) -> Order {
        Order::new(id, vendor, v, c, t_o, 300)
    }

    fn sl() -> TravelProvider {
        TravelProvider::straight_line(30.0)
    }

    #[test]
    fn graph_edge_rules() {
        let v = base();
        let single = [order("a", "v", v, v.offset_km(1.0, 0.0), 0)];
        let g = build_graph(&single, 1.0, 1.0, BundlingMode::Radius);
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));

        let pair = [
            order("a", "v", v, v.offset_km(3.0, 0.0), 0),
            order("b", "v", v, v.offset_km(3.0, 0.5), 10),
        ];
        assert_eq!(build_graph(&pair, 1.0, 1.0, BundlingMode::Radius).edge_count(), 1);

        let far = [
            order("a", "v1", v, v.offset_km(0.0, 1.0), 0),
            order("b", "v2", v.offset_km(10.0, 0.0), v.offset_km(0.0, 1.0), 0),
        ];
        assert_eq!(build_graph(&far, 2.0, 100.0, BundlingMode::Radius).edge_count(), 0);
    }

    #[test]
    fn same_vendor_mode_uses_ids() {
        let v = base();
        let orders = [
            order("a", "v1", v, v.offset_km(1.0, 0.0), 0),
            order("b", "v2", v, v.offset_km(1.0, 0.1), 0),
        ];
        assert_eq!(build_graph(&orders, 1.0, 1.0, BundlingMode::Radius).edge_count(), 1);
        assert_eq!(build_graph(&orders, 1.0, 1.0, BundlingMode::SameVendor).edge_count(), 0);
    }

    #[test]
    fn cover_small_graphs() {
        let empty = ShareabilityGraph::new(4);
        assert_eq!(clique_cover(&empty).len(), 4);
        let k4 = ShareabilityGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(clique_cover(&k4), vec![vec![0, 1, 2, 3]]);
        let path = ShareabilityGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let cover = clique_cover(&path);
        assert_eq!(cover.len(), 2);
        for c in &cover {
            assert!(path.is_clique(c));
        }
    }

    #[test]
    fn singleton_route() {
        let v = base();
        let orders = [order("a", "v", v, v.offset_km(0.0, 2.0), 0)];
        let (route, d) = bundle_route(&[0], &orders, &sl()).unwrap();
        assert_eq!(route.len(), 2);
        assert_eq!(route[0].kind, StopKind::Pickup);
        assert!((d - 2.0).abs() < 1e-9);
        assert!(matches!(bundle_route(&[], &orders, &sl()), Err(BundleError::EmptyBundle)));
    }

    #[test]
    fn same_vendor_collinear_pair() {
        // V, C2, C1 on a line at 1 km spacing: drop C2 first, then C1.
        let v = base();
        let orders = [
            order("a", "v", v, v.offset_km(0.0, 2.0), 0),
            order("b", "v", v, v.offset_km(0.0, 1.0), 0),
        ];
        let (route, d) = bundle_route(&[0, 1], &orders, &sl()).unwrap();
        assert!((d - 2.0).abs() < 1e-6, "{d}");
        let drops: Vec<usize> = route
            .iter()
            .filter(|s| s.kind == StopKind::Drop)
            .map(|s| s.order)
            .collect();
        assert_eq!(drops, vec![1, 0]);
    }

    #[test]
    fn pair_route_matches_four_path_enumeration() {
        let v1 = base();
        let v2 = v1.offset_km(0.4, 0.3);
        let c1 = v1.offset_km(2.0, 2.5);
        let c2 = v1.offset_km(2.6, 1.9);
        let orders = [order("a", "v1", v1, c1, 0), order("b", "v2", v2, c2, 0)];
        let d = |a: &GeoPoint, b: &GeoPoint| straight_line_distance(a, b);
        let paths = [
            d(&v1, &v2) + d(&v2, &c2) + d(&c2, &c1),
            d(&v1, &v2) + d(&v2, &c1) + d(&c1, &c2),
            d(&v2, &v1) + d(&v1, &c1) + d(&c1, &c2),
            d(&v2, &v1) + d(&v1, &c2) + d(&c2, &c1),
        ];
        let expect = paths.iter().copied().fold(f64::INFINITY, f64::min);
        let (_, got) = bundle_route(&[0, 1], &orders, &sl()).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn split_accepts_adjacent_customers() {
        let v = base();
        let orders = [
            order("a", "v", v, v.offset_km(3.0, 0.0), 0),
            order("b", "v", v, v.offset_km(3.0, 0.1), 0),
        ];
        let params = SplitParams { k: 2, max_pud: 600, dispatch_at: 0 };
        let bundles = split_clique(&[0, 1], &orders, &params, &sl()).unwrap();
        assert_eq!(bundles.len(), 1);
        let b = &bundles[0];
        assert!((b.route_length - 3.1).abs() < 1e-3, "{}", b.route_length);
        assert!((b.solo_length - 3.0 - 9.01f64.sqrt()).abs() < 1e-3);
        assert!(b.route_length < b.solo_length);
        // same vendor, same ready time: no internal pickup offset
        assert_eq!(b.equivalent.effective_pud, 600);
    }

    #[test]
    fn split_rejects_opposite_customers() {
        let v = base();
        let orders = [
            order("a", "v", v, v.offset_km(3.0, 0.0), 0),
            order("b", "v", v, v.offset_km(-3.0, 0.0), 0),
        ];
        let params = SplitParams { k: 2, max_pud: 600, dispatch_at: 0 };
        let bundles = split_clique(&[0, 1], &orders, &params, &sl()).unwrap();
        assert_eq!(bundles.len(), 2);
        assert!(bundles.iter().all(|b| b.size() == 1));
        let (_, d_b) = bundle_route(&[0, 1], &orders, &sl()).unwrap();
        assert!((d_b - 9.0).abs() < 1e-6);
    }

    #[test]
    fn k_one_gives_singletons() {
        let v = base();
        let orders: Vec<Order> = (0..4)
            .map(|i| order(&format!("o{i}"), "v", v, v.offset_km(3.0, 0.05 * i as f64), 0))
            .collect();
        let params = SplitParams { k: 1, max_pud: 600, dispatch_at: 0 };
        let bundles = split_clique(&[0, 1, 2, 3], &orders, &params, &sl()).unwrap();
        assert_eq!(bundles.len(), 4);
        for b in &bundles {
            assert_eq!(b.route_length, b.solo_length);
        }
    }

    #[test]
    fn split_respects_capacity() {
        let v = base();
        let orders: Vec<Order> = (0..7)
            .map(|i| order(&format!("o{i}"), "v", v, v.offset_km(3.0, 0.05 * i as f64), 0))
            .collect();
        let clique: Vec<usize> = (0..7).collect();
        let params = SplitParams { k: 3, max_pud: 900, dispatch_at: 0 };
        let bundles = split_clique(&clique, &orders, &params, &sl()).unwrap();
        let mut covered: Vec<usize> = bundles.iter().flat_map(|b| b.orders.clone()).collect();
        covered.sort_unstable();
        assert_eq!(covered, clique);
        assert!(bundles.iter().all(|b| b.size() <= 3));
        assert!(bundles.iter().filter(|b| b.size() > 1).all(|b| b.route_length < b.solo_length));
    }

    #[test]
    fn effective_pud_for_two_vendor_bundle() {
        // inter-vendor leg of exactly 4 minutes at 30 km/h = 2 km
        let v1 = base();
        let v2 = v1.offset_km(2.0, 0.0);
        let orders = [
            order("a", "v1", v1, v2.offset_km(5.0, 0.0), 0),
            order("b", "v2", v2, v2.offset_km(5.0, 0.2), 0),
        ];
        let route = vec![
            Stop { order: 0, kind: StopKind::Pickup, loc: v1 },
            Stop { order: 1, kind: StopKind::Pickup, loc: v2 },
            Stop { order: 1, kind: StopKind::Drop, loc: orders[1].customer_loc },
            Stop { order: 0, kind: StopKind::Drop, loc: orders[0].customer_loc },
        ];
        let eq = make_equivalent_order(&route, &orders, 600, &sl()).unwrap();
        assert_eq!(eq.effective_pud, 360);
        assert_eq!(eq.ready, 300);
        assert_eq!(eq.pickup, v1);
        assert_eq!(eq.drop, orders[0].customer_loc);
        assert!(matches!(
            make_equivalent_order(&route, &orders, 100, &sl()),
            Err(BundleError::NegativeEffectivePud(_))
        ));
    }

    #[test]
    fn singleton_equivalent_is_identity() {
        let v = base();
        let orders = [order("a", "v", v, v.offset_km(1.0, 1.0), 50)];
        let (route, _) = bundle_route(&[0], &orders, &sl()).unwrap();
        let eq = make_equivalent_order(&route, &orders, 420, &sl()).unwrap();
        assert_eq!(eq.pickup, orders[0].vendor_loc);
        assert_eq!(eq.drop, orders[0].customer_loc);
        assert_eq!(eq.ready, orders[0].t_r);
        assert_eq!(eq.effective_pud, 420);
    }

    #[test]
    fn edge_list_dump() {
        let v = base();
        let orders = [
            order("a", "v", v, v.offset_km(3.0, 0.0), 0),
            order("b", "v", v, v.offset_km(3.0, 0.5), 10),
        ];
        let g = build_graph(&orders, 1.0, 1.0, BundlingMode::Radius);
        assert_eq!(g.edge_list_csv(&orders), "order_a,order_b\na,b\n");
    }
}
