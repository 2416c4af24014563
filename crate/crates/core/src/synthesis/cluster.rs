use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, CorpusEntry};
use crate::error::{Error, Result};
use crate::space::{ConfigSpace, Configuration, Domain, EncodedVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<CorpusEntry>,
    pub centroid: Configuration,
    pub median_loss: f64,
}

/// Clusters in ascending order of median loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCorpus {
    pub objective: String,
    pub fingerprint: String,
    pub clusters: Vec<Cluster>,
    /// Cluster index of each corpus entry, in corpus order.
    pub assignments: Vec<usize>,
    pub best_known_loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ClusterCorpus {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cluster corpus serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Corpus(e.to_string()))
    }
}

/// Ward linkage over squared pairwise distances, cut at `k` clusters.
///
/// `d2` is the full row-major `n × n` matrix of squared distances. Labels are
/// numbered by first appearance.
pub fn ward_labels(mut d2: Vec<f64>, n: usize, k: usize) -> Vec<usize> {
    assert_eq!(d2.len(), n * n);
    let k = k.clamp(1, n.max(1));
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut merges: Vec<(f64, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(alive.iter().position(|&a| a).expect("alive cluster"));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d2[a * n + p]);
            for j in 0..n {
                if alive[j] && j != a && d2[a * n + j] < best_d {
                    best = Some(j);
                    best_d = d2[a * n + j];
                }
            }
            let b = best.expect("two alive clusters");
            if Some(b) == prev {
                break (a, b);
            }
            chain.push(b);
        };
        chain.truncate(chain.len() - 2);

        let dab = d2[a * n + b];
        merges.push((dab.max(0.0).sqrt(), a, b));
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for j in 0..n {
            if !alive[j] || j == a || j == b {
                continue;
            }
            let nj = size[j] as f64;
            let v = ((na + nj) * d2[a * n + j] + (nb + nj) * d2[b * n + j] - nj * dab) / (na + nb + nj);
            d2[a * n + j] = v;
            d2[j * n + a] = v;
        }
        alive[b] = false;
        size[a] += size[b];
        remaining -= 1;
    }

    merges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(_, a, b) in merges.iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut ids = HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = ids.len();
            *ids.entry(r).or_insert(next)
        })
        .collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn centroid(members: &[&EncodedVector], space: &ConfigSpace) -> Result<Configuration> {
    let mut coords = vec![crate::space::INACTIVE; space.dim()];
    for pass in 0..2 {
        for (i, p) in space.params().iter().enumerate() {
            if (pass == 0) == space.is_conditional(i) || !space.is_active_encoded(&coords, i) {
                continue;
            }
            let values: Vec<f64> = members
                .iter()
                .map(|m| m[i])
                .filter(|&v| v != crate::space::INACTIVE || !space.is_conditional(i))
                .collect();
            coords[i] = match &p.domain {
                Domain::Numeric { integer, .. } => {
                    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
                    let v = if *integer { mean.round() } else { mean };
                    space.legalize(i, v)
                }
                Domain::Categorical { categories } => {
                    let mut counts = vec![0usize; categories.len()];
                    for &v in &values {
                        counts[v as usize] += 1;
                    }
                    // first category wins ties
                    let best = counts.iter().copied().max().unwrap_or(0);
                    counts.iter().position(|&c| c == best).unwrap_or(0) as f64
                }
            };
        }
    }
    space.decode(&coords)
}

/// Agglomerative Ward clustering of the corpus on Gower distance.
pub fn cluster_corpus(corpus: &Corpus, space: &ConfigSpace, k: usize) -> Result<ClusterCorpus> {
    let n = corpus.entries.len();
    if n == 0 {
        return Err(Error::Corpus("cannot cluster an empty corpus".into()));
    }
    let mut warnings = Vec::new();
    let k = if k > n {
        warnings.push(format!("only {n} corpus entries; using {n} clusters instead of {k}"));
        n
    } else {
        k.max(1)
    };
    let encoded = corpus
        .entries
        .iter()
        .map(|e| space.encode(&e.config))
        .collect::<Result<Vec<_>>>()?;
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let g = space.gower_encoded(&encoded[i], &encoded[j]);
            d2[i * n + j] = g * g;
            d2[j * n + i] = g * g;
        }
    }
    let labels = ward_labels(d2, n, k);

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let mut clusters = Vec::with_capacity(k);
    for g in &groups {
        let mut losses: Vec<f64> = g.iter().map(|&i| corpus.entries[i].loss).collect();
        losses.sort_by(f64::total_cmp);
        let vecs: Vec<&EncodedVector> = g.iter().map(|&i| &encoded[i]).collect();
        clusters.push((
            Cluster {
                members: g.iter().map(|&i| corpus.entries[i].clone()).collect(),
                centroid: centroid(&vecs, space)?,
                median_loss: median(&losses),
            },
            g,
        ));
    }
    clusters.sort_by(|a, b| a.0.median_loss.total_cmp(&b.0.median_loss));
    let mut assignments = vec![0; n];
    for (c, (_, g)) in clusters.iter().enumerate() {
        for &i in g.iter() {
            assignments[i] = c;
        }
    }
    Ok(ClusterCorpus {
        objective: corpus.objective.clone(),
        fingerprint: corpus.fingerprint.clone(),
        clusters: clusters.into_iter().map(|(c, _)| c).collect(),
        assignments,
        best_known_loss: corpus.entries.iter().map(|e| e.loss).fold(f64::INFINITY, f64::min),
        warnings,
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut ra: HashMap<usize, f64> = HashMap::new();
    let mut rb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = ra.values().map(|&v| c2(v)).sum();
    let sb: f64 = rb.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
