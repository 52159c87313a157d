//! Network data model: validation, box and induced-subgraph generators, and
//! the JSON file format.
//!
//! A network is a finite vertex set with a symmetric conductance array
//! `c(i,j)` (exchange rates), per-vertex external rates `kappa(i)` (reservoir
//! contact rates), and a reservoir density `rho`. Valid networks are
//! connected through their positive conductances and have at least one vertex
//! with `kappa(i) > 0`.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::{Error, Result};

/// Per-axis boundary condition of a lattice box.
///
/// `Open` embeds the axis in the full line (reservoirs past both faces);
/// `SemiOpen` embeds it in the half line `{1, 2, ...}`, leaving a reservoir
/// past the upper face only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Open,
    SemiOpen,
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(BoundaryKind::Open),
            "semiopen" | "semi-open" | "semi_open" => Ok(BoundaryKind::SemiOpen),
            other => Err(Error::Parse(format!(
                "unknown boundary kind {other:?} (expected \"open\" or \"semiopen\")"
            ))),
        }
    }
}

impl std::fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryKind::Open => write!(f, "open"),
            BoundaryKind::SemiOpen => write!(f, "semiopen"),
        }
    }
}

/// A validated network instance `(V, c, kappa, rho)`.
///
/// Immutable after construction and safe to share across threads. Vertices
/// are indexed `0..n-1`; optional string labels from a network file are kept
/// for round-tripping but play no role in the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    cond: DMatrix<f64>,
    kappa: DVector<f64>,
    rho: f64,
    labels: Option<Vec<String>>,
}

impl Network {
    /// Builds and validates a network from raw parts.
    pub fn new(cond: DMatrix<f64>, kappa: DVector<f64>, rho: f64) -> Result<Self> {
        let net = Network { n: kappa.len(), cond, kappa, rho, labels: None };
        net.validate()?;
        Ok(net)
    }

    /// Re-checks every invariant. `new` and the loaders call this; it is
    /// public so callers holding a mutated copy can re-establish the contract.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Parse("network needs at least one vertex".into()));
        }
        if self.cond.nrows() != n || self.cond.ncols() != n {
            return Err(Error::Parse(format!(
                "conductance array is {}x{}, expected {n}x{n}",
                self.cond.nrows(),
                self.cond.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let c = self.cond[(i, j)];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::NegativeRate(format!("c({i},{j}) = {c}")));
                }
                if self.cond[(j, i)] != c {
                    return Err(Error::Asymmetric(i, j));
                }
            }
            if self.cond[(i, i)] != 0.0 {
                return Err(Error::NegativeRate(format!(
                    "self-conductance c({i},{i}) must be zero"
                )));
            }
            let k = self.kappa[i];
            if !k.is_finite() || k < 0.0 {
                return Err(Error::NegativeRate(format!("kappa({i}) = {k}")));
            }
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::BadDensity(self.rho));
        }
        if self.kappa.iter().all(|&k| k == 0.0) {
            return Err(Error::EmptyBoundary);
        }
        // BFS over positive conductances.
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && self.cond[(u, v)] > 0.0 {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        if reached != n {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Symmetric conductance array with zero diagonal.
    pub fn cond(&self) -> &DMatrix<f64> {
        &self.cond
    }

    /// External (reservoir contact) rates.
    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `rho_star = min(rho, 1 - rho)`.
    pub fn rho_star(&self) -> f64 {
        self.rho.min(1.0 - self.rho)
    }

    /// True when the extremal start `x_star` is the all-ones configuration
    /// (`rho <= 1/2`); false when it is all-zeros.
    pub fn x_star_is_ones(&self) -> bool {
        self.rho <= 0.5
    }

    /// Returns a copy with a different reservoir density (CLI override).
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::BadDensity(rho));
        }
        let mut net = self.clone();
        net.rho = rho;
        Ok(net)
    }

    /// Undirected positive-conductance edges, each listed once as `(i, j, c)`
    /// with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let c = self.cond[(i, j)];
                if c > 0.0 {
                    out.push((i, j, c));
                }
            }
        }
        out
    }
}

/// Lattice box with the given side lengths and per-axis boundary conditions.
///
/// Vertices are the tuples of `[n_1] x ... x [n_d]` in row-major order (last
/// axis fastest). Lattice neighbors get unit conductance. `kappa(i)` counts
/// the ambient neighbors missing from the box: one per face the vertex
/// touches on an `Open` axis (both faces count), and the upper face only on a
/// `SemiOpen` axis, whose ambient line `{1, 2, ...}` simply ends below 1.
pub fn build_box(dims: &[usize], boundary: &[BoundaryKind], rho: f64) -> Result<Network> {
    if dims.is_empty() {
        return Err(Error::Parse("box needs at least one axis".into()));
    }
    if dims.len() != boundary.len() {
        return Err(Error::Parse(format!(
            "{} dims but {} boundary kinds",
            dims.len(),
            boundary.len()
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Parse("box sides must be >= 1".into()));
    }
    let n: usize = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(
        || Error::Parse("box size overflows".into()),
    )?;

    // Row-major strides: stride[d-1] = 1.
    let d = dims.len();
    let mut stride = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * dims[k + 1];
    }

    let mut cond = DMatrix::<f64>::zeros(n, n);
    let mut kappa = DVector::<f64>::zeros(n);
    let mut tuple = vec![1usize; d]; // 1-based coordinates
    for idx in 0..n {
        for k in 0..d {
            if tuple[k] < dims[k] {
                let j = idx + stride[k];
                cond[(idx, j)] = 1.0;
                cond[(j, idx)] = 1.0;
            }
            let at_low = tuple[k] == 1;
            let at_high = tuple[k] == dims[k];
            kappa[idx] += match boundary[k] {
                BoundaryKind::Open => (at_low as usize + at_high as usize) as f64,
                BoundaryKind::SemiOpen => at_high as usize as f64,
            };
        }
        // Advance the tuple in row-major order.
        for k in (0..d).rev() {
            if tuple[k] < dims[k] {
                tuple[k] += 1;
                break;
            }
            tuple[k] = 1;
        }
    }
    Network::new(cond, kappa, rho)
}

/// Network induced by a vertex subset of an ambient graph.
///
/// `ambient` is a symmetric neighbor-list adjacency over vertices
/// `0..ambient.len()`. Internal ambient edges get unit conductance;
/// `kappa(i)` counts the ambient neighbors of `subset[i]` outside the subset.
pub fn induced_network(ambient: &[Vec<usize>], subset: &[usize], rho: f64) -> Result<Network> {
    let m = ambient.len();
    let n = subset.len();
    if n == 0 {
        return Err(Error::Parse("subset must be nonempty".into()));
    }
    let mut index_of = vec![usize::MAX; m];
    for (i, &v) in subset.iter().enumerate() {
        if v >= m {
            return Err(Error::Parse(format!("subset vertex {v} outside universe 0..{m}")));
        }
        if index_of[v] != usize::MAX {
            return Err(Error::Parse(format!("subset lists vertex {v} twice")));
        }
        index_of[v] = i;
    }
    let mut cond = DMatrix::<f64>::zeros(n, n);
    let mut kappa = DVector::<f64>::zeros(n);
    for (i, &v) in subset.iter().enumerate() {
        for &w in &ambient[v] {
            if w >= m {
                return Err(Error::Parse(format!("ambient neighbor {w} outside universe")));
            }
            let j = index_of[w];
            if j == usize::MAX {
                kappa[i] += 1.0;
            } else {
                cond[(i, j)] = 1.0;
            }
        }
    }
    Network::new(cond, kappa, rho)
}

fn bad(field: &str, why: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{field}: {why}"))
}

fn as_f64(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(field, format!("expected a number, got {v}")))
}

/// Parses a network document.
///
/// Schema: `{"vertices": <count or list of labels>, "edges": [[i, j, c], ...],
/// "kappa": {<vertex>: rate, ...} or [rates...], "rho": density}`. Vertex
/// references are indices, or labels when `vertices` is a label list. Each
/// undirected edge appears once; the loader mirrors it.
pub fn load_network(text: &str) -> Result<Network> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("network file: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| bad("document", "expected a JSON object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "vertices" | "edges" | "kappa" | "rho") {
            return Err(bad(key, "unknown field"));
        }
    }

    let (n, labels) = match obj.get("vertices") {
        Some(Value::Number(num)) => {
            let n = num
                .as_u64()
                .filter(|&n| n >= 1)
                .ok_or_else(|| bad("vertices", "expected a positive integer"))?;
            (n as usize, None)
        }
        Some(Value::Array(items)) => {
            let mut labels = Vec::with_capacity(items.len());
            for item in items {
                let s = item
                    .as_str()
                    .ok_or_else(|| bad("vertices", "label list entries must be strings"))?;
                labels.push(s.to_string());
            }
            if labels.is_empty() {
                return Err(bad("vertices", "label list is empty"));
            }
            let mut sorted = labels.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(bad("vertices", "duplicate label"));
            }
            (labels.len(), Some(labels))
        }
        _ => return Err(bad("vertices", "missing (expected a count or a label list)")),
    };

    let resolve = |v: &Value, field: &str| -> Result<usize> {
        match v {
            Value::Number(num) => {
                let i = num
                    .as_u64()
                    .ok_or_else(|| bad(field, format!("bad vertex index {num}")))?
                    as usize;
                if i >= n {
                    return Err(bad(field, format!("vertex index {i} out of range 0..{n}")));
                }
                Ok(i)
            }
            Value::String(s) => labels
                .as_ref()
                .and_then(|ls| ls.iter().position(|l| l == s))
                .ok_or_else(|| bad(field, format!("unknown label {s:?}"))),
            other => Err(bad(field, format!("expected a vertex reference, got {other}"))),
        }
    };

    let mut cond = DMatrix::<f64>::zeros(n, n);
    if let Some(edges) = obj.get("edges") {
        let edges = edges.as_array().ok_or_else(|| bad("edges", "expected a list"))?;
        for (k, e) in edges.iter().enumerate() {
            let field = format!("edges[{k}]");
            let triple = e.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                bad(&field, "expected [i, j, c]")
            })?;
            let i = resolve(&triple[0], &field)?;
            let j = resolve(&triple[1], &field)?;
            let c = as_f64(&triple[2], &field)?;
            if i == j {
                return Err(bad(&field, "self-loops are not allowed"));
            }
            if cond[(i, j)] != 0.0 {
                return Err(bad(&field, format!("edge ({i}, {j}) given twice")));
            }
            cond[(i, j)] = c;
            cond[(j, i)] = c;
        }
    }

    let mut kappa = DVector::<f64>::zeros(n);
    match obj.get("kappa") {
        Some(Value::Array(items)) => {
            if items.len() != n {
                return Err(bad("kappa", format!("list has {} entries, expected {n}", items.len())));
            }
            for (i, item) in items.iter().enumerate() {
                kappa[i] = as_f64(item, &format!("kappa[{i}]"))?;
            }
        }
        Some(Value::Object(map)) => {
            for (key, val) in map {
                let i = match labels.as_ref().and_then(|ls| ls.iter().position(|l| l == key)) {
                    Some(i) => i,
                    None => key
                        .parse::<usize>()
                        .ok()
                        .filter(|&i| i < n)
                        .ok_or_else(|| bad("kappa", format!("unknown vertex {key:?}")))?,
                };
                kappa[i] = as_f64(val, &format!("kappa.{key}"))?;
            }
        }
        Some(other) => return Err(bad("kappa", format!("expected a list or map, got {other}"))),
        None => {} // defaults to zero everywhere; validation will reject it
    }

    let rho = match obj.get("rho") {
        Some(v) => as_f64(v, "rho")?,
        None => return Err(bad("rho", "missing")),
    };

    let net = Network { n, cond, kappa, rho, labels };
    net.validate()?;
    Ok(net)
}

/// Serializes a network to the document format accepted by [`load_network`].
///
/// Canonical form: each edge once with `i < j`, `kappa` as a full list, so
/// `load_network(save_network(net))` reproduces `net` exactly (JSON float
/// round-tripping is exact for finite values).
pub fn save_network(net: &Network) -> String {
    let vertices = match net.labels() {
        Some(ls) => json!(ls),
        None => json!(net.n()),
    };
    let edges: Vec<Value> = net.edges().iter().map(|&(i, j, c)| json!([i, j, c])).collect();
    let kappa: Vec<Value> = net.kappa().iter().map(|&k| json!(k)).collect();
    let mut doc = Map::new();
    doc.insert("vertices".into(), vertices);
    doc.insert("edges".into(), Value::Array(edges));
    doc.insert("kappa".into(), Value::Array(kappa));
    doc.insert("rho".into(), json!(net.rho()));
    serde_json::to_string_pretty(&Value::Object(doc)).expect("static schema")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize, kappa: Vec<f64>, rho: f64) -> Result<Network> {
        let mut cond = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            cond[(i, i + 1)] = 1.0;
            cond[(i + 1, i)] = 1.0;
        }
        Network::new(cond, DVector::from_vec(kappa), rho)
    }

    #[test]
    fn single_vertex_is_legal() {
        let net = Network::new(DMatrix::zeros(1, 1), DVector::from_vec(vec![1.0]), 0.3).unwrap();
        assert_eq!(net.n(), 1);
        assert_eq!(net.rho_star(), 0.3);
        assert!(net.x_star_is_ones());
    }

    #[test]
    fn empty_boundary_is_rejected() {
        let err = path(3, vec![0.0, 0.0, 0.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::EmptyBoundary));
    }

    #[test]
    fn disconnected_is_rejected() {
        let err = Network::new(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 1.0]), 0.5)
            .unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn asymmetric_is_rejected() {
        let mut cond = DMatrix::<f64>::zeros(2, 2);
        cond[(0, 1)] = 1.0;
        let err = Network::new(cond, DVector::from_vec(vec![1.0, 1.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::Asymmetric(..)));
    }

    #[test]
    fn bad_density_is_rejected() {
        for rho in [0.0, 1.0, -0.1, 1.7, f64::NAN] {
            let err = path(2, vec![1.0, 1.0], rho).unwrap_err();
            assert!(matches!(err, Error::BadDensity(_)), "rho = {rho}");
        }
    }

    #[test]
    fn negative_and_nonfinite_rates_are_rejected() {
        let mut cond = DMatrix::<f64>::zeros(2, 2);
        cond[(0, 1)] = -1.0;
        cond[(1, 0)] = -1.0;
        let err = Network::new(cond, DVector::from_vec(vec![1.0, 1.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::NegativeRate(_)));

        let err = path(2, vec![f64::INFINITY, 0.0], 0.5).unwrap_err();
        assert!(matches!(err, Error::NegativeRate(_)));
    }

    #[test]
    fn x_star_flips_with_density() {
        assert!(path(2, vec![1.0, 0.0], 0.5).unwrap().x_star_is_ones());
        assert!(!path(2, vec![1.0, 0.0], 0.7).unwrap().x_star_is_ones());
        assert!((path(2, vec![1.0, 0.0], 0.7).unwrap().rho_star() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn box_single_site_boundaries() {
        let open = build_box(&[1], &[BoundaryKind::Open], 0.5).unwrap();
        assert_eq!(open.n(), 1);
        assert_eq!(open.kappa()[0], 2.0);
        let semi = build_box(&[1], &[BoundaryKind::SemiOpen], 0.5).unwrap();
        assert_eq!(semi.kappa()[0], 1.0);
    }

    #[test]
    fn box_2x2_open_matches_hand_enumeration() {
        // Each corner of the 2x2 box has two ambient Z^2 neighbors outside.
        let net = build_box(&[2, 2], &[BoundaryKind::Open; 2], 0.5).unwrap();
        assert_eq!(net.n(), 4);
        assert_eq!(net.edges().len(), 4);
        assert!(net.kappa().iter().all(|&k| k == 2.0));
        // Row-major order: vertex 0 = (1,1) neighbors (1,2)=1 and (2,1)=2.
        assert_eq!(net.cond()[(0, 1)], 1.0);
        assert_eq!(net.cond()[(0, 2)], 1.0);
        assert_eq!(net.cond()[(0, 3)], 0.0);
    }

    #[test]
    fn path_boxes_match_ambient_line_kappas() {
        // Open: both ends see one missing Z neighbor.
        let open = build_box(&[4], &[BoundaryKind::Open], 0.5).unwrap();
        assert_eq!(open.kappa().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        // Semi-open: the ambient half line ends below 1, reservoir above n only.
        let semi = build_box(&[4], &[BoundaryKind::SemiOpen], 0.5).unwrap();
        assert_eq!(semi.kappa().as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    /// Ambient lattice adjacency for a padded window around a box: open axes
    /// are padded on both faces, semi-open axes above only. The box sits at
    /// offset 1 per open axis, 0 per semi-open axis.
    fn padded_ambient(
        dims: &[usize],
        boundary: &[BoundaryKind],
    ) -> (Vec<Vec<usize>>, Vec<usize>) {
        let d = dims.len();
        let pad_lo: Vec<usize> =
            boundary.iter().map(|b| usize::from(*b == BoundaryKind::Open)).collect();
        let full: Vec<usize> =
            (0..d).map(|k| dims[k] + pad_lo[k] + 1).collect(); // +1 pad above always
        let n_full: usize = full.iter().product();
        let mut stride = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            stride[k] = stride[k + 1] * full[k + 1];
        }
        let coords = |idx: usize| {
            let mut c = vec![0usize; d];
            let mut rest = idx;
            for k in 0..d {
                c[k] = rest / stride[k];
                rest %= stride[k];
            }
            c
        };
        let mut adj = vec![Vec::new(); n_full];
        for idx in 0..n_full {
            let c = coords(idx);
            for k in 0..d {
                if c[k] + 1 < full[k] {
                    adj[idx].push(idx + stride[k]);
                    adj[idx + stride[k]].push(idx);
                }
            }
        }
        let mut subset = Vec::new();
        for idx in 0..n_full {
            let c = coords(idx);
            if (0..d).all(|k| c[k] >= pad_lo[k] && c[k] < pad_lo[k] + dims[k]) {
                subset.push(idx);
            }
        }
        (adj, subset)
    }

    #[test]
    fn box_equals_induced_ambient_lattice() {
        use BoundaryKind::{Open, SemiOpen};
        let cases: Vec<(Vec<usize>, Vec<BoundaryKind>)> = vec![
            (vec![5], vec![Open]),
            (vec![5], vec![SemiOpen]),
            (vec![3, 2], vec![Open, Open]),
            (vec![3, 2], vec![Open, SemiOpen]),
            (vec![3, 2], vec![SemiOpen, Open]),
            (vec![2, 2, 3], vec![SemiOpen, Open, SemiOpen]),
        ];
        for (dims, boundary) in cases {
            let from_box = build_box(&dims, &boundary, 0.5).unwrap();
            let (adj, subset) = padded_ambient(&dims, &boundary);
            let induced = induced_network(&adj, &subset, 0.5).unwrap();
            assert_eq!(from_box, induced, "dims {dims:?} boundary {boundary:?}");
        }
    }

    #[test]
    fn induced_line_segment_of_z_and_n() {
        // Window {0..n+1} of Z, subset {1..n}: reservoirs at both ends.
        let n = 5;
        let mut adj = vec![Vec::new(); n + 2];
        for v in 0..n + 1 {
            adj[v].push(v + 1);
            adj[v + 1].push(v);
        }
        let subset: Vec<usize> = (1..=n).collect();
        let net = induced_network(&adj, &subset, 0.4).unwrap();
        assert_eq!(net.kappa().as_slice(), &[1.0, 0.0, 0.0, 0.0, 1.0]);

        // Prefix {0..n-1} of the half line {0..n}: reservoir at the top only.
        let mut adj = vec![Vec::new(); n + 1];
        for v in 0..n {
            adj[v].push(v + 1);
            adj[v + 1].push(v);
        }
        let subset: Vec<usize> = (0..n).collect();
        let net = induced_network(&adj, &subset, 0.4).unwrap();
        assert_eq!(net.kappa().as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn kappa_formula_by_enumeration_small_boxes() {
        use BoundaryKind::{Open, SemiOpen};
        // All boxes with at most 64 vertices and d <= 4, every boundary mix.
        let mut shapes: Vec<Vec<usize>> = Vec::new();
        fn extend(prefix: Vec<usize>, d_left: usize, out: &mut Vec<Vec<usize>>) {
            if !prefix.is_empty() {
                out.push(prefix.clone());
            }
            if d_left == 0 {
                return;
            }
            let used: usize = prefix.iter().product::<usize>().max(1);
            for nk in 1..=64 {
                if used * nk > 64 {
                    break;
                }
                let mut next = prefix.clone();
                next.push(nk);
                extend(next, d_left - 1, out);
            }
        }
        extend(Vec::new(), 4, &mut shapes);
        for dims in shapes {
            let d = dims.len();
            for mask in 0..(1usize << d) {
                let boundary: Vec<BoundaryKind> =
                    (0..d).map(|k| if mask >> k & 1 == 1 { SemiOpen } else { Open }).collect();
                let net = build_box(&dims, &boundary, 0.5).unwrap();
                let mut stride = vec![1usize; d];
                for k in (0..d.saturating_sub(1)).rev() {
                    stride[k] = stride[k + 1] * dims[k + 1];
                }
                for idx in 0..net.n() {
                    let mut rest = idx;
                    let mut expected = 0.0;
                    for k in 0..d {
                        let ik = rest / stride[k] + 1;
                        rest %= stride[k];
                        expected += match boundary[k] {
                            Open => f64::from(u8::from(ik == 1) + u8::from(ik == dims[k])),
                            SemiOpen => f64::from(u8::from(ik == dims[k])),
                        };
                    }
                    assert_eq!(net.kappa()[idx], expected, "dims {dims:?} mask {mask} idx {idx}");
                }
            }
        }
    }

    #[test]
    fn load_minimal_single_site_document() {
        let net = load_network(r#"{"vertices": 1, "kappa": [1.0], "rho": 0.3}"#).unwrap();
        assert_eq!(net.n(), 1);
        assert_eq!(net.kappa()[0], 1.0);
        assert_eq!(net.rho(), 0.3);
    }

    #[test]
    fn loader_mirrors_single_edge_entries() {
        let net = load_network(
            r#"{"vertices": 2, "edges": [[0, 1, 2.5]], "kappa": {"0": 1.0}, "rho": 0.5}"#,
        )
        .unwrap();
        assert_eq!(net.cond()[(1, 0)], 2.5);
        assert_eq!(net.cond()[(0, 1)], 2.5);
        assert_eq!(net.kappa().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn labels_resolve_in_listed_order() {
        let net = load_network(
            r#"{"vertices": ["left", "right"], "edges": [["left", "right", 1.0]],
                "kappa": {"right": 2.0}, "rho": 0.25}"#,
        )
        .unwrap();
        assert_eq!(net.labels().unwrap(), ["left", "right"]);
        assert_eq!(net.kappa().as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn duplicate_edges_and_self_loops_are_parse_errors() {
        let doc = r#"{"vertices": 2, "edges": [[0,1,1.0],[1,0,2.0]], "kappa": [1,0], "rho": 0.5}"#;
        assert!(matches!(load_network(doc), Err(Error::Parse(_))));
        let doc = r#"{"vertices": 2, "edges": [[0,0,1.0]], "kappa": [1,0], "rho": 0.5}"#;
        assert!(matches!(load_network(doc), Err(Error::Parse(_))));
        let doc = r#"{"vertices": 2, "edges": [[0,1,1.0]], "kappa": [1,0], "rho": 0.5, "unknown": 3}"#;
        assert!(matches!(load_network(doc), Err(Error::Parse(_))));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let boxy = build_box(&[3, 3], &[BoundaryKind::Open, BoundaryKind::SemiOpen], 0.37)
            .unwrap();
        assert_eq!(load_network(&save_network(&boxy)).unwrap(), boxy);

        let labeled = load_network(
            r#"{"vertices": ["a", "b", "c"], "edges": [["a","b",0.125], ["b","c",3.0]],
                "kappa": {"a": 0.7}, "rho": 0.2}"#,
        )
        .unwrap();
        assert_eq!(load_network(&save_network(&labeled)).unwrap(), labeled);
    }

    #[test]
    fn boundary_kind_parses_and_displays() {
        assert_eq!("open".parse::<BoundaryKind>().unwrap(), BoundaryKind::Open);
        assert_eq!("Semi-Open".parse::<BoundaryKind>().unwrap(), BoundaryKind::SemiOpen);
        assert!("closed".parse::<BoundaryKind>().is_err());
        assert_eq!(BoundaryKind::SemiOpen.to_string(), "semiopen");
    }
}
