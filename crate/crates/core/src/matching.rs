//! Minimum-weight maximum-cardinality bipartite matching (Hungarian method).

/// Sparse bipartite instance: only feasible edges are listed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BipartiteInstance {
    pub n_left: usize,
    pub n_right: usize,
    /// `(left, right, weight)`; weights must be finite and non-negative.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    /// `(left, right)` pairs sorted by left index.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Dense rectangular assignment with `rows <= cols`. Returns the column
/// assigned to each row.
fn hungarian(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    debug_assert!(rows <= cols);
    let a = |i: usize, j: usize| cost[(i - 1) * cols + (j - 1)];
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Solves one connected component given as local left/right index lists.
fn solve_component(
    lefts: &[usize],
    rights: &[usize],
    edges: &[(usize, usize, f64)],
) -> Vec<(usize, usize, f64)> {
    let transpose = lefts.len() > rights.len();
    let (rows, cols) = if transpose {
        (rights.len(), lefts.len())
    } else {
        (lefts.len(), rights.len())
    };
    let lpos = |x: usize| lefts.binary_search(&x).expect("left in component");
    let rpos = |x: usize| rights.binary_search(&x).expect("right in component");
    // any real edge beats every padded cell, so cardinality is maximised first
    let prohibitive = 1.0 + edges.iter().map(|e| e.2).sum::<f64>();
    let mut cost = vec![prohibitive; rows * cols];
    let mut real = vec![None; rows * cols];
    for &(l, r, w) in edges {
        let (i, j) = if transpose { (rpos(r), lpos(l)) } else { (lpos(l), rpos(r)) };
        let cell = i * cols + j;
        if real[cell].map_or(true, |old: f64| w < old) {
            cost[cell] = w;
            real[cell] = Some(w);
        }
    }
    hungarian(&cost, rows, cols)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| {
            let w = real[i * cols + j]?;
            Some(if transpose {
                (lefts[j], rights[i], w)
            } else {
                (lefts[i], rights[j], w)
            })
        })
        .collect()
}

/// Maximum-cardinality matching of minimum total weight.
///
/// The instance is decomposed into connected components, each solved as a
/// dense rectangular assignment in which missing edges carry a prohibitive
/// weight. Results are deterministic for a given edge order.
pub fn min_weight_matching(inst: &BipartiteInstance) -> Matching {
    let nl = inst.n_left;
    let mut dsu = Dsu((0..nl + inst.n_right).collect());
    for &(l, r, w) in &inst.edges {
        assert!(l < nl && r < inst.n_right, "edge ({l}, {r}) out of range");
        assert!(w.is_finite() && w >= 0.0, "edge weight {w} must be finite and >= 0");
        dsu.union(l, nl + r);
    }
    let mut comps: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>, Vec<(usize, usize, f64)>)> =
        Default::default();
    for &(l, r, w) in &inst.edges {
        let root = dsu.find(l);
        comps.entry(root).or_default().2.push((l, r, w));
    }
    for (root, (ls, rs, es)) in comps.iter_mut() {
        debug_assert_eq!(dsu.0[*root], *root);
        for &(l, r, _) in es.iter() {
            ls.push(l);
            rs.push(r);
        }
        ls.sort_unstable();
        ls.dedup();
        rs.sort_unstable();
        rs.dedup();
    }
    let mut pairs: Vec<(usize, usize, f64)> = comps
        .values()
        .flat_map(|(ls, rs, es)| solve_component(ls, rs, es))
        .collect();
    pairs.sort_unstable_by_key(|p| p.0);
    Matching {
        cost: pairs.iter().map(|p| p.2).sum(),
        pairs: pairs.into_iter().map(|(l, r, _)| (l, r)).collect(),
    }
}
