//! Network model and ground truth: topologies, monitor paths, routing
//! matrices, link-delay assignment and path-delay sampling.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{analytic_cumulant, DelaySample, LinkDistribution};
use crate::error::{Error, Result};
use crate::io;
use crate::lattice::{downward_closure, PathSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub src: String,
    pub dst: String,
    /// Delay distribution. Optional in skeleton topologies, where the
    /// scenario generator assigns one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<LinkDistribution>,
}

/// A monitor path given explicitly as an ordered list of link ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub id: String,
    pub links: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    #[serde(default)]
    pub directed: bool,
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    /// User-supplied monitor paths. When present they replace the
    /// shortest-path construction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathSpec>,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        let mut nodes = HashSet::new();
        for v in &self.nodes {
            if !nodes.insert(v.as_str()) {
                return Err(Error::invalid(format!("node {v:?} listed twice")));
            }
        }
        let mut ids = HashSet::new();
        for l in &self.links {
            if !ids.insert(l.id.as_str()) {
                return Err(Error::invalid(format!("link id {:?} listed twice", l.id)));
            }
            for end in [&l.src, &l.dst] {
                if !nodes.contains(end.as_str()) {
                    return Err(Error::invalid(format!("link {:?} references unknown node {end:?}", l.id)));
                }
            }
            if l.src == l.dst {
                return Err(Error::invalid(format!("link {:?} is a self-loop", l.id)));
            }
            if let Some(d) = &l.dist {
                d.validate()?;
            }
        }
        let mut path_ids = HashSet::new();
        for p in &self.paths {
            if !path_ids.insert(p.id.as_str()) {
                return Err(Error::invalid(format!("path id {:?} listed twice", p.id)));
            }
            self.trace_path(p)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: Topology = io::read_json(path)?;
        t.validate().map_err(|e| Error::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect()
    }

    fn link_index(&self) -> HashMap<&str, usize> {
        self.links.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect()
    }

    /// Node sequence of an explicit path; fails unless the links form a
    /// simple path (respecting direction on directed topologies).
    pub fn trace_path(&self, p: &PathSpec) -> Result<Vec<String>> {
        let bad = |why: &str| Error::invalid(format!("path {:?} {why}", p.id));
        if p.links.is_empty() {
            return Err(bad("has no links"));
        }
        let index = self.link_index();
        let links: Vec<&Link> = p
            .links
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| &self.links[i])
                    .ok_or_else(|| bad(&format!("uses unknown link {id:?}")))
            })
            .collect::<Result<_>>()?;
        // Orientation of the first link is fixed when directed; otherwise
        // it is whichever end the second link does not touch.
        let first = links[0];
        let start = if self.directed || links.len() == 1 {
            &first.src
        } else {
            let next = links[1];
            if *next.src == first.dst || *next.dst == first.dst {
                &first.src
            } else {
                &first.dst
            }
        };
        let mut nodes = vec![start.clone()];
        for l in &links {
            let cur = nodes.last().unwrap();
            let next = if l.src == *cur {
                &l.dst
            } else if !self.directed && l.dst == *cur {
                &l.src
            } else {
                return Err(bad(&format!("is not connected at link {:?}", l.id)));
            };
            nodes.push(next.clone());
        }
        let distinct: HashSet<&String> = nodes.iter().collect();
        if distinct.len() != nodes.len() {
            return Err(bad("revisits a node"));
        }
        Ok(nodes)
    }
}

/// Binary incidence of monitor paths (rows) and links (columns). Column `j`
/// is stored as the set of paths that traverse link `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RoutingMatrixRepr", into = "RoutingMatrixRepr")]
pub struct RoutingMatrix {
    path_ids: Vec<String>,
    link_ids: Vec<String>,
    columns: Vec<PathSet>,
}

#[derive(Serialize, Deserialize)]
struct RoutingMatrixRepr {
    path_ids: Vec<String>,
    link_ids: Vec<String>,
    rows: Vec<Vec<u8>>,
}

impl TryFrom<RoutingMatrixRepr> for RoutingMatrix {
    type Error = Error;
    fn try_from(r: RoutingMatrixRepr) -> Result<Self> {
        let m = RoutingMatrix::from_rows(&r.rows)?;
        if r.rows.is_empty() && r.path_ids.is_empty() {
            return RoutingMatrix::new(vec![], r.link_ids, vec![]);
        }
        m.with_ids(r.path_ids, r.link_ids)
    }
}

impl From<RoutingMatrix> for RoutingMatrixRepr {
    fn from(m: RoutingMatrix) -> Self {
        RoutingMatrixRepr {
            rows: m.rows(),
            path_ids: m.path_ids,
            link_ids: m.link_ids,
        }
    }
}

impl RoutingMatrix {
    pub fn new(path_ids: Vec<String>, link_ids: Vec<String>, columns: Vec<PathSet>) -> Result<Self> {
        if link_ids.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} link ids for {} columns",
                link_ids.len(),
                columns.len()
            )));
        }
        let n = path_ids.len();
        if n > 64 {
            return Err(Error::invalid(format!("at most 64 monitor paths are supported, got {n}")));
        }
        for c in &columns {
            c.check_fits(n)?;
        }
        Ok(RoutingMatrix {
            path_ids,
            link_ids,
            columns,
        })
    }

    /// From row-major 0/1 entries, with ids `p1..pn` and `l1..lm`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut columns = vec![PathSet::EMPTY; m];
        for (p, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!("row {} has {} entries, expected {m}", p + 1, row.len())));
            }
            for (l, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => columns[l] = columns[l].with(p),
                    _ => return Err(Error::invalid(format!("routing entry ({}, {}) is {v}, not 0/1", p + 1, l + 1))),
                }
            }
        }
        RoutingMatrix::new(default_ids('p', n), default_ids('l', m), columns)
    }

    /// From columns given as path sets over `n` paths.
    pub fn from_columns(n: usize, columns: Vec<PathSet>) -> Result<Self> {
        let m = columns.len();
        RoutingMatrix::new(default_ids('p', n), default_ids('l', m), columns)
    }

    pub fn with_ids(self, path_ids: Vec<String>, link_ids: Vec<String>) -> Result<Self> {
        if path_ids.len() != self.n() {
            return Err(Error::Dimension(format!("{} path ids for {} rows", path_ids.len(), self.n())));
        }
        RoutingMatrix::new(path_ids, link_ids, self.columns)
    }

    /// Number of monitor paths.
    pub fn n(&self) -> usize {
        self.path_ids.len()
    }

    /// Number of links.
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn path_ids(&self) -> &[String] {
        &self.path_ids
    }

    pub fn link_ids(&self) -> &[String] {
        &self.link_ids
    }

    pub fn columns(&self) -> &[PathSet] {
        &self.columns
    }

    pub fn entry(&self, path: usize, link: usize) -> u8 {
        self.columns[link].contains(path) as u8
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n())
            .map(|p| (0..self.m()).map(|l| self.entry(p, l)).collect())
            .collect()
    }

    /// Distinct nonempty columns, sorted canonically.
    pub fn column_sets(&self) -> Vec<PathSet> {
        let mut v: Vec<PathSet> = self.columns.iter().copied().filter(|c| !c.is_empty()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// First pair of identical columns, if any.
    pub fn duplicate_columns(&self) -> Option<(usize, usize)> {
        let mut seen: HashMap<PathSet, usize> = HashMap::new();
        for (j, &c) in self.columns.iter().enumerate() {
            if let Some(&i) = seen.get(&c) {
                return Some((i, j));
            }
            seen.insert(c, j);
        }
        None
    }

    /// Drop links used by no path, returning the kept column indices.
    pub fn prune_unused(&self) -> (RoutingMatrix, Vec<usize>) {
        let keep: Vec<usize> = (0..self.m()).filter(|&j| !self.columns[j].is_empty()).collect();
        let pruned = RoutingMatrix {
            path_ids: self.path_ids.clone(),
            link_ids: keep.iter().map(|&j| self.link_ids[j].clone()).collect(),
            columns: keep.iter().map(|&j| self.columns[j]).collect(),
        };
        (pruned, keep)
    }
}

fn default_ids(prefix: char, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

/// Indices of links used by every path in `set`.
pub fn common_links(r: &RoutingMatrix, set: PathSet) -> Vec<usize> {
    (0..r.m()).filter(|&j| set.is_subset_of(r.columns[j])).collect()
}

/// Indices of links used by exactly the paths in `set`.
pub fn exact_links(r: &RoutingMatrix, set: PathSet) -> Vec<usize> {
    (0..r.m()).filter(|&j| r.columns[j] == set).collect()
}

/// `f_i(P)`: sum of link cumulants over the common links of `set`.
pub fn true_common_cumulant(r: &RoutingMatrix, links: &[LinkDistribution], set: PathSet, order: usize) -> f64 {
    common_links(r, set)
        .into_iter()
        .map(|j| analytic_cumulant(&links[j], order))
        .sum()
}

/// `g_i` on its support: each distinct column with the summed cumulants of
/// the links it stands for. Entries that cancel to zero are dropped.
pub fn true_exact_cumulants(r: &RoutingMatrix, links: &[LinkDistribution], order: usize) -> BTreeMap<PathSet, f64> {
    let mut g: BTreeMap<PathSet, f64> = BTreeMap::new();
    for (&c, d) in r.columns.iter().zip(links) {
        if !c.is_empty() {
            *g.entry(c).or_insert(0.0) += analytic_cumulant(d, order);
        }
    }
    g.retain(|_, v| *v != 0.0);
    g
}

/// `f_i` on its support, enumerated from the subsets of the columns.
pub fn true_common_cumulants(r: &RoutingMatrix, links: &[LinkDistribution], order: usize) -> BTreeMap<PathSet, f64> {
    let tops = r.column_sets();
    downward_closure(&tops)
        .into_iter()
        .map(|p| (p, true_common_cumulant(r, links, p, order)))
        .filter(|(_, v)| *v != 0.0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// No two columns of the routing matrix coincide.
    pub distinct_links: bool,
    pub duplicate_pair: Option<(String, String)>,
    /// Every link cumulant of order 2 through `max_order` is nonzero.
    pub nonzero_link_cumulants: bool,
    pub zero_link_cumulant: Option<(String, usize)>,
    /// No path set with common links has cumulants cancelling to zero.
    pub nonzero_common_cumulants: bool,
    pub zero_common_cumulant: Option<(PathSet, usize)>,
    /// False when the common-cumulant check only sampled path sets.
    pub common_check_exhaustive: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.distinct_links && self.nonzero_link_cumulants && self.nonzero_common_cumulants
    }
}

const EXHAUSTIVE_PATH_LIMIT: usize = 20;
const SAMPLED_SETS: usize = 20_000;

pub fn check_assumptions(r: &RoutingMatrix, links: &[LinkDistribution], max_order: usize) -> Result<AssumptionReport> {
    if links.len() != r.m() {
        return Err(Error::Dimension(format!(
            "{} link distributions for {} links",
            links.len(),
            r.m()
        )));
    }
    let duplicate_pair = r
        .duplicate_columns()
        .map(|(i, j)| (r.link_ids[i].clone(), r.link_ids[j].clone()));

    let zero_link_cumulant = (2..=max_order)
        .flat_map(|i| (0..r.m()).map(move |j| (j, i)))
        .find(|&(j, i)| analytic_cumulant(&links[j], i) == 0.0)
        .map(|(j, i)| (r.link_ids[j].clone(), i));

    let exhaustive = r.n() <= EXHAUSTIVE_PATH_LIMIT;
    let candidates: Vec<PathSet> = if exhaustive {
        downward_closure(&r.column_sets())
    } else {
        // Random nonempty subsets of random columns.
        let tops = r.column_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = HashSet::new();
        if !tops.is_empty() {
            for _ in 0..SAMPLED_SETS {
                let top = tops[rng.random_range(0..tops.len())];
                let sub = PathSet::from_indices(top.iter().filter(|_| rng.random_bool(0.5)));
                out.insert(if sub.is_empty() { top } else { sub });
            }
        }
        let mut v: Vec<PathSet> = out.into_iter().collect();
        v.sort_unstable();
        v
    };
    let zero_common_cumulant = (2..=max_order)
        .flat_map(|i| candidates.iter().map(move |&p| (p, i)))
        .find(|&(p, i)| true_common_cumulant(r, links, p, i) == 0.0);

    Ok(AssumptionReport {
        distinct_links: duplicate_pair.is_none(),
        duplicate_pair,
        nonzero_link_cumulants: zero_link_cumulant.is_none(),
        zero_link_cumulant,
        nonzero_common_cumulants: zero_common_cumulant.is_none(),
        zero_common_cumulant,
        common_check_exhaustive: exhaustive,
    })
}

/// Parameters of the default link-delay model: each link gets
/// `Gamma(shape = mu / scale, rate = 1 / scale)` with
/// `mu ~ Normal(mean_mu, sd_mu^2)` redrawn until `mu > min_mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayConfig {
    pub mean_mu: f64,
    pub sd_mu: f64,
    pub min_mu: f64,
    pub scale: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            mean_mu: 10.0,
            sd_mu: 2.0,
            min_mu: 0.5,
            scale: 4.0,
        }
    }
}

impl DelayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_mu > 0.0 && self.scale > 0.0 && self.min_mu > 0.0 && self.mean_mu.is_finite()) {
            return Err(Error::invalid(format!("invalid delay configuration {self:?}")));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<LinkDistribution> {
        let normal = Normal::new(self.mean_mu, self.sd_mu).map_err(|e| Error::invalid(e.to_string()))?;
        for _ in 0..10_000 {
            let mu: f64 = normal.sample(rng);
            if mu > self.min_mu {
                return Ok(LinkDistribution::Gamma {
                    shape: mu / self.scale,
                    rate: 1.0 / self.scale,
                });
            }
        }
        Err(Error::invalid("link mean truncation rejected every draw"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorPath {
    pub id: String,
    pub nodes: Vec<String>,
    pub links: Vec<String>,
}

/// A topology with delays assigned, its monitor paths and the routing
/// matrix they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub monitors: Vec<String>,
    pub paths: Vec<MonitorPath>,
    pub routing_matrix: RoutingMatrix,
    pub seed: u64,
}

impl Scenario {
    /// Link distributions in routing-matrix column order.
    pub fn link_distributions(&self) -> Result<Vec<LinkDistribution>> {
        let by_id: HashMap<&str, &Link> = self.topology.links.iter().map(|l| (l.id.as_str(), l)).collect();
        self.routing_matrix
            .link_ids()
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .and_then(|l| l.dist)
                    .ok_or_else(|| Error::invalid(format!("link {id:?} has no delay distribution")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let r = &self.routing_matrix;
        if r.n() != self.paths.len() {
            return Err(Error::Dimension(format!(
                "{} monitor paths but routing matrix has {} rows",
                self.paths.len(),
                r.n()
            )));
        }
        let col: HashMap<&str, usize> = r.link_ids().iter().enumerate().map(|(j, id)| (id.as_str(), j)).collect();
        for (p, mp) in self.paths.iter().enumerate() {
            let nodes = self.topology.trace_path(&PathSpec {
                id: mp.id.clone(),
                links: mp.links.clone(),
            })?;
            if nodes != mp.nodes {
                return Err(Error::invalid(format!("path {:?} node list does not match its links", mp.id)));
            }
            let mut used = PathSet::EMPTY;
            for l in &mp.links {
                let j = *col
                    .get(l.as_str())
                    .ok_or_else(|| Error::invalid(format!("path {:?} uses link {l:?} missing from the matrix", mp.id)))?;
                used = used.with(j);
            }
            let row = PathSet::from_indices((0..r.m()).filter(|&j| r.entry(p, j) == 1));
            if row != used {
                return Err(Error::invalid(format!("routing matrix row {} does not match path {:?}", p + 1, mp.id)));
            }
        }
        self.link_distributions()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Scenario = io::read_json(path)?;
        s.validate().map_err(|e| Error::Input {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Directed arc view of a topology with positive weights.
struct Graph {
    /// `out[u]` lists `(v, weight, link index)`.
    out: Vec<Vec<(usize, f64, usize)>>,
    /// Reverse arcs, for distances to a destination.
    inc: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    fn new(t: &Topology, weights: &[f64]) -> Graph {
        let idx = t.node_index();
        let k = t.nodes.len();
        let mut out = vec![Vec::new(); k];
        let mut inc = vec![Vec::new(); k];
        for (j, l) in t.links.iter().enumerate() {
            let (a, b) = (idx[l.src.as_str()], idx[l.dst.as_str()]);
            out[a].push((b, weights[j], j));
            inc[b].push((a, weights[j]));
            if !t.directed {
                out[b].push((a, weights[j], j));
                inc[a].push((b, weights[j]));
            }
        }
        Graph { out, inc }
    }

    fn distances_to(&self, dst: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.out.len()];
        let mut heap = BinaryHeap::new();
        dist[dst] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: dst });
        while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(u, w) in &self.inc[v] {
                let nd = d + w;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(HeapItem { dist: nd, node: u });
                }
            }
        }
        dist
    }

    /// Shortest path from `src` to `dst` whose node sequence is
    /// lexicographically smallest (by node index). Parallel links are
    /// resolved by smaller weight, then lower link index.
    fn shortest_path(&self, src: usize, dst: usize) -> Option<(Vec<usize>, Vec<usize>)> {
        let dist = self.distances_to(dst);
        if !dist[src].is_finite() {
            return None;
        }
        let tight = |u: usize, v: usize, w: f64| (w + dist[v] - dist[u]).abs() <= 1e-9 * dist[u].max(1.0);
        let mut nodes = vec![src];
        let mut links = Vec::new();
        let mut u = src;
        while u != dst {
            let (v, _, j) = self.out[u]
                .iter()
                .copied()
                .filter(|&(v, w, _)| dist[v] < dist[u] && tight(u, v, w))
                .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))?;
            nodes.push(v);
            links.push(j);
            u = v;
        }
        Some((nodes, links))
    }
}

/// Builds a scenario from a topology skeleton: assigns link delays where
/// none are given, picks `n_monitors` monitor nodes uniformly at random and
/// routes one shortest path (by mean delay) per unordered monitor pair.
///
/// If the topology lists explicit paths, those are used instead and
/// `n_monitors` is ignored.
pub fn generate_scenario(skeleton: &Topology, n_monitors: usize, delay: &DelayConfig, seed: u64) -> Result<Scenario> {
    skeleton.validate()?;
    delay.validate()?;
    let mut topology = skeleton.clone();
    let mut link_rng = ChaCha8Rng::seed_from_u64(seed);
    for l in &mut topology.links {
        if l.dist.is_none() {
            l.dist = Some(delay.draw(&mut link_rng)?);
        }
    }
    let weights: Vec<f64> = topology.links.iter().map(|l| l.dist.unwrap().mean()).collect();

    let (monitors, raw_paths) = if topology.paths.is_empty() {
        route_monitor_pairs(&topology, &weights, n_monitors, seed)?
    } else {
        explicit_paths(&topology)?
    };

    // Columns over used links only, in topology link order.
    let mut used = vec![PathSet::EMPTY; topology.links.len()];
    for (p, mp) in raw_paths.iter().enumerate() {
        for &j in &mp.1 {
            used[j] = used[j].with(p);
        }
    }
    let keep: Vec<usize> = (0..used.len()).filter(|&j| !used[j].is_empty()).collect();
    let path_ids: Vec<String> = raw_paths.iter().map(|p| p.2.clone()).collect();
    let routing_matrix = RoutingMatrix::new(
        path_ids,
        keep.iter().map(|&j| topology.links[j].id.clone()).collect(),
        keep.iter().map(|&j| used[j]).collect(),
    )?;
    let paths = raw_paths
        .into_iter()
        .map(|(nodes, links, id)| MonitorPath {
            id,
            nodes: nodes.into_iter().map(|v| topology.nodes[v].clone()).collect(),
            links: links.into_iter().map(|j| topology.links[j].id.clone()).collect(),
        })
        .collect();
    Ok(Scenario {
        topology,
        monitors,
        paths,
        routing_matrix,
        seed,
    })
}

type RawPath = (Vec<usize>, Vec<usize>, String);

fn route_monitor_pairs(
    t: &Topology,
    weights: &[f64],
    n_monitors: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<RawPath>)> {
    if n_monitors < 2 || n_monitors > t.nodes.len() {
        return Err(Error::invalid(format!(
            "need between 2 and {} monitors, got {n_monitors}",
            t.nodes.len()
        )));
    }
    if let Some(j) = weights.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::invalid(format!(
            "link {:?} has nonpositive mean delay; shortest-path routing needs positive weights",
            t.links[j].id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut chosen = index::sample(&mut rng, t.nodes.len(), n_monitors).into_vec();
    chosen.sort_unstable();
    let graph = Graph::new(t, weights);
    let mut paths = Vec::new();
    for (a, &s) in chosen.iter().enumerate() {
        for &d in &chosen[a + 1..] {
            let (nodes, links) = graph
                .shortest_path(s, d)
                .ok_or_else(|| Error::Unreachable(t.nodes[s].clone(), t.nodes[d].clone()))?;
            let id = format!("p{}", paths.len() + 1);
            paths.push((nodes, links, id));
        }
    }
    Ok((chosen.into_iter().map(|v| t.nodes[v].clone()).collect(), paths))
}

fn explicit_paths(t: &Topology) -> Result<(Vec<String>, Vec<RawPath>)> {
    let nidx = t.node_index();
    let lidx = t.link_index();
    let mut monitors: Vec<usize> = Vec::new();
    let mut paths = Vec::new();
    for p in &t.paths {
        let nodes: Vec<usize> = t.trace_path(p)?.iter().map(|v| nidx[v.as_str()]).collect();
        monitors.push(nodes[0]);
        monitors.push(*nodes.last().unwrap());
        let links = p.links.iter().map(|l| lidx[l.as_str()]).collect();
        paths.push((nodes, links, p.id.clone()));
    }
    monitors.sort_unstable();
    monitors.dedup();
    Ok((monitors.into_iter().map(|v| t.nodes[v].clone()).collect(), paths))
}

/// A random connected, undirected ISP-like skeleton: a random tree grown
/// with degree-proportional attachment, topped up with random chords until
/// the average degree reaches `avg_degree`. Links carry no distributions.
pub fn random_topology(nodes: usize, avg_degree: f64, seed: u64) -> Result<Topology> {
    if nodes < 2 {
        return Err(Error::invalid("a topology needs at least two nodes"));
    }
    let max_edges = nodes * (nodes - 1) / 2;
    let target = ((avg_degree * nodes as f64 / 2.0).round() as usize).clamp(nodes - 1, max_edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut present = HashSet::new();
    let mut degree = vec![0usize; nodes];
    for v in 1..nodes {
        let total: usize = degree[..v].iter().map(|d| d + 1).sum();
        let mut pick = rng.random_range(0..total);
        let mut u = 0;
        while pick > degree[u] {
            pick -= degree[u] + 1;
            u += 1;
        }
        edges.push((u, v));
        present.insert((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    while edges.len() < target {
        let a = rng.random_range(0..nodes);
        let b = rng.random_range(0..nodes);
        let e = (a.min(b), a.max(b));
        if a != b && present.insert(e) {
            edges.push(e);
        }
    }
    Ok(Topology {
        directed: false,
        nodes: (0..nodes).map(|v| format!("n{v}")).collect(),
        links: edges
            .into_iter()
            .enumerate()
            .map(|(j, (a, b))| Link {
                id: format!("e{j}"),
                src: format!("n{a}"),
                dst: format!("n{b}"),
                dist: None,
            })
            .collect(),
        paths: Vec::new(),
    })
}

/// Rows per RNG stream when sampling. Blocks are independent, so they can
/// be drawn in any order or in parallel with identical output.
const SAMPLE_BLOCK: usize = 4096;

enum Sampler {
    Normal(Normal<f64>),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
}

impl Sampler {
    fn new(d: &LinkDistribution) -> Result<Sampler> {
        d.validate()?;
        let err = |e: String| Error::invalid(e);
        Ok(match *d {
            LinkDistribution::Normal { mean, variance } => {
                Sampler::Normal(Normal::new(mean, variance.sqrt()).map_err(|e| err(e.to_string()))?)
            }
            LinkDistribution::Exponential { rate } => Sampler::Exp(Exp::new(rate).map_err(|e| err(e.to_string()))?),
            LinkDistribution::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| err(e.to_string()))?)
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
        }
    }
}

/// `rows` independent draws of every link delay, one column per link.
pub fn sample_link_delays(links: &[LinkDistribution], rows: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let samplers: Vec<Sampler> = links.iter().map(Sampler::new).collect::<Result<_>>()?;
    let m = links.len();
    let blocks = rows.div_ceil(SAMPLE_BLOCK);
    let drawn: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = SAMPLE_BLOCK.min(rows - b * SAMPLE_BLOCK);
            let mut buf = Vec::with_capacity(len * m);
            for _ in 0..len {
                buf.extend(samplers.iter().map(|s| s.draw(&mut rng)));
            }
            buf
        })
        .collect();
    let mut cols = vec![Vec::with_capacity(rows); m];
    for block in &drawn {
        for row in block.chunks_exact(m.max(1)) {
            for (c, &v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
    }
    Ok(cols)
}

/// Path delays `V = R U` for given link-delay columns.
pub fn apply_routing(r: &RoutingMatrix, link_columns: &[Vec<f64>]) -> Result<DelaySample> {
    if link_columns.len() != r.m() {
        return Err(Error::Dimension(format!(
            "{} link columns for {} links",
            link_columns.len(),
            r.m()
        )));
    }
    let rows = link_columns.first().map_or(0, |c| c.len());
    let mut paths = vec![vec![0.0; rows]; r.n()];
    for (col, &set) in link_columns.iter().zip(r.columns()) {
        for p in set.iter() {
            for (acc, &u) in paths[p].iter_mut().zip(col) {
                *acc += u;
            }
        }
    }
    DelaySample::from_columns(r.path_ids().to_vec(), paths)
}

/// `rows` i.i.d. path-delay observations for a routing matrix and its link
/// distributions.
pub fn sample_from_routing(r: &RoutingMatrix, links: &[LinkDistribution], rows: usize, seed: u64) -> Result<DelaySample> {
    if links.len() != r.m() {
        return Err(Error::Dimension(format!(
            "{} link distributions for {} links",
            links.len(),
            r.m()
        )));
    }
    if rows < 2 {
        return Err(Error::SampleTooSmall { needed: 1, got: rows });
    }
    apply_routing(r, &sample_link_delays(links, rows, seed)?)
}

pub fn sample_delays(sc: &Scenario, rows: usize, seed: u64) -> Result<DelaySample> {
    sample_from_routing(&sc.routing_matrix, &sc.link_distributions()?, rows, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub order: usize,
    /// `|supp(g_i)|`: number of distinct logical links.
    pub supp_g: usize,
    /// `|supp(f_i)|`.
    pub supp_f: usize,
    /// `|supp(f_i)| / (2^n - 1)`.
    pub density: f64,
    /// Size of the largest set in `supp(f_i)`.
    pub largest_f: usize,
}

pub fn sparsity_report(r: &RoutingMatrix, links: &[LinkDistribution], order: usize) -> Result<SparsityReport> {
    if links.len() != r.m() {
        return Err(Error::Dimension(format!(
            "{} link distributions for {} links",
            links.len(),
            r.m()
        )));
    }
    let g = true_exact_cumulants(r, links, order);
    let f = true_common_cumulants(r, links, order);
    let lattice_size = 2f64.powi(r.n() as i32) - 1.0;
    Ok(SparsityReport {
        order,
        supp_g: g.len(),
        supp_f: f.len(),
        density: f.len() as f64 / lattice_size,
        largest_f: f.keys().map(|p| p.len()).max().unwrap_or(0),
    })
}
