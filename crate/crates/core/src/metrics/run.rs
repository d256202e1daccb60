use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::is_permutation;
use crate::dense::{self, DenseMatrix, RUN_MAGIC};
use crate::error::{Error, Result};
use crate::proxy::SimilarityMatrix;

/// A model's rankings: for each query, every item ordered closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRun {
    query_ids: Vec<String>,
    item_ids: Vec<String>,
    rankings: Vec<Vec<u32>>,
    /// `positions[q][item]` is the 0-based rank of `item` for query `q`.
    positions: Vec<Vec<u32>>,
    scores: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RankingLine {
    query_id: String,
    ranking: Vec<String>,
}

impl RetrievalRun {
    /// Ranks items by descending score; ties go to the lower item index.
    pub fn from_scores(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        let (nq, ni) = (query_ids.len(), item_ids.len());
        if scores.len() != nq * ni {
            return Err(Error::InvalidInput(format!(
                "score matrix has {} values, expected {nq}x{ni}",
                scores.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::InvalidInput(format!(
                "NaN score for query {} item {}",
                query_ids[pos / ni],
                item_ids[pos % ni]
            )));
        }
        let rankings = scores
            .chunks(ni.max(1))
            .take(nq)
            .map(|row| {
                let mut order: Vec<u32> = (0..ni as u32).collect();
                order.sort_by(|&a, &b| row[b as usize].total_cmp(&row[a as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        let mut run = Self::assemble(query_ids, item_ids, rankings)?;
        run.scores = Some(scores);
        Ok(run)
    }

    /// Explicit rankings; each must be a permutation of `0..item_ids.len()`.
    pub fn from_rankings(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        rankings: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if rankings.len() != query_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} rankings for {} queries",
                rankings.len(),
                query_ids.len()
            )));
        }
        for (q, r) in rankings.iter().enumerate() {
            if !is_permutation(r, item_ids.len()) {
                return Err(Error::InvalidInput(format!(
                    "ranking for query {} is not a permutation of the items",
                    query_ids[q]
                )));
            }
        }
        let rankings = rankings
            .into_iter()
            .map(|r| r.into_iter().map(|i| i as u32).collect())
            .collect();
        Self::assemble(query_ids, item_ids, rankings)
    }

    fn assemble(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        rankings: Vec<Vec<u32>>,
    ) -> Result<Self> {
        check_unique(&query_ids)?;
        check_unique(&item_ids)?;
        let positions = rankings
            .iter()
            .map(|r| {
                let mut p = vec![0u32; r.len()];
                for (rank, &item) in r.iter().enumerate() {
                    p[item as usize] = rank as u32;
                }
                p
            })
            .collect();
        Ok(RetrievalRun {
            query_ids,
            item_ids,
            rankings,
            positions,
            scores: None,
        })
    }

    /// Ranks items by a similarity matrix's scores (implicit zeros included).
    pub fn from_similarity(sim: &SimilarityMatrix) -> Result<Self> {
        let scores = (0..sim.num_queries())
            .flat_map(|q| sim.dense_row(q))
            .collect();
        Self::from_scores(sim.query_ids().to_vec(), sim.item_ids().to_vec(), scores)
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn num_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    /// Item indices for query `q`, best first.
    pub fn ranking(&self, q: usize) -> &[u32] {
        &self.rankings[q]
    }

    /// 0-based rank of `item` for query `q`.
    pub fn position(&self, q: usize, item: usize) -> usize {
        self.positions[q][item] as usize
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    /// The opposite direction. Only score-based runs can be transposed.
    pub fn transpose(&self) -> Result<Self> {
        let scores = self.scores.as_ref().ok_or_else(|| {
            Error::InvalidInput(
                "a ranking-only run cannot be transposed; supply both directions".into(),
            )
        })?;
        let (nq, ni) = (self.num_queries(), self.num_items());
        let mut t = vec![0.0; nq * ni];
        for q in 0..nq {
            for i in 0..ni {
                t[i * nq + q] = scores[q * ni + i];
            }
        }
        Self::from_scores(self.item_ids.clone(), self.query_ids.clone(), t)
    }

    /// Reorders queries to `query_ids` and relabels items to `item_ids`
    /// without changing any ranking. Both id sets must match exactly.
    pub fn aligned(&self, query_ids: &[String], item_ids: &[String]) -> Result<Self> {
        if query_ids == self.query_ids && item_ids == self.item_ids {
            return Ok(self.clone());
        }
        let q_index = id_map(&self.query_ids, query_ids)?;
        let i_index = id_map(&self.item_ids, item_ids)?;
        // new item index of each old item
        let mut remap = vec![0u32; self.num_items()];
        for (new, &old) in i_index.iter().enumerate() {
            remap[old] = new as u32;
        }
        let rankings = q_index
            .iter()
            .map(|&old_q| {
                self.rankings[old_q]
                    .iter()
                    .map(|&i| remap[i as usize])
                    .collect()
            })
            .collect();
        let mut run = Self::assemble(query_ids.to_vec(), item_ids.to_vec(), rankings)?;
        if let Some(scores) = &self.scores {
            let ni = self.num_items();
            run.scores = Some(
                q_index
                    .iter()
                    .flat_map(|&old_q| i_index.iter().map(move |&old_i| scores[old_q * ni + old_i]))
                    .collect(),
            );
        }
        Ok(run)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (q, r) in self.rankings.iter().enumerate() {
            let line = RankingLine {
                query_id: self.query_ids[q].clone(),
                ranking: r
                    .iter()
                    .map(|&i| self.item_ids[i as usize].clone())
                    .collect(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads `{"query_id", "ranking"}` lines. The item id order is taken
    /// from the sorted ids of the first ranking.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut query_ids = Vec::new();
        let mut raw = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RankingLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            query_ids.push(parsed.query_id);
            raw.push((line_no, parsed.ranking));
        }
        let Some((_, first)) = raw.first() else {
            return Err(Error::InvalidInput("retrieval run has no queries".into()));
        };
        let mut item_ids = first.clone();
        item_ids.sort();
        let index: HashMap<&str, usize> = item_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut rankings = Vec::with_capacity(raw.len());
        for (line_no, ranking) in &raw {
            let r = ranking
                .iter()
                .map(|id| {
                    index.get(id.as_str()).copied().ok_or_else(|| Error::Parse {
                        line: *line_no,
                        message: format!("item {id:?} missing from the first ranking"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if !is_permutation(&r, item_ids.len()) {
                return Err(Error::Parse {
                    line: *line_no,
                    message: "ranking is not a permutation of the item set".into(),
                });
            }
            rankings.push(r);
        }
        Self::from_rankings(query_ids, item_ids, rankings)
    }

    /// Dense `RETRUN1` score file; requires a score-based run.
    pub fn write_dense(&self, path: &Path) -> Result<()> {
        let scores = self
            .scores
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("only score-based runs have a dense form".into()))?;
        let m = DenseMatrix {
            row_ids: self.query_ids.clone(),
            col_ids: self.item_ids.clone(),
            values: scores.iter().map(|&s| s as f32).collect(),
        };
        dense::write(path, RUN_MAGIC, &m)
    }

    pub fn read_dense(path: &Path) -> Result<Self> {
        let m = dense::read(path, RUN_MAGIC)?;
        let scores = m.values.iter().map(|&v| f64::from(v)).collect();
        Self::from_scores(m.row_ids, m.col_ids, scores)
    }

    /// Loads a run by extension: `.jsonl` rankings, anything else dense.
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "jsonl") {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Self::read_jsonl(std::io::BufReader::new(file))
        } else {
            Self::read_dense(path)
        }
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

/// For each id in `target`, its index in `source`.
fn id_map(source: &[String], target: &[String]) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = source
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut offenders: Vec<String> = target
        .iter()
        .filter(|t| !index.contains_key(t.as_str()))
        .cloned()
        .collect();
    if target.len() != source.len() || !offenders.is_empty() {
        let tset: std::collections::HashSet<&str> = target.iter().map(String::as_str).collect();
        offenders.extend(
            source
                .iter()
                .filter(|s| !tset.contains(s.as_str()))
                .cloned(),
        );
        offenders.truncate(5);
        return Err(Error::IdMismatch(offenders));
    }
    Ok(target.iter().map(|t| index[t.as_str()]).collect())
}

/// Which items correspond to each query (a video's captions, or a caption's video).
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    items: Vec<Vec<u32>>,
}

impl Correspondence {
    pub fn new(items: Vec<Vec<u32>>) -> Self {
        Correspondence { items }
    }

    /// From `(video, caption)` pairs, in whichever orientation the id lists
    /// imply. Every query must correspond to at least one item.
    pub fn from_pairs(
        pairs: &[(String, String)],
        query_ids: &[String],
        item_ids: &[String],
    ) -> Result<Self> {
        let qi: HashMap<&str, usize> = query_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let ii: HashMap<&str, usize> = item_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidInput("no correspondence pairs".into()));
        }
        let forward = pairs
            .iter()
            .filter(|(v, c)| qi.contains_key(v.as_str()) && ii.contains_key(c.as_str()))
            .count();
        let backward = pairs
            .iter()
            .filter(|(v, c)| qi.contains_key(c.as_str()) && ii.contains_key(v.as_str()))
            .count();
        let videos_are_queries = forward >= backward;
        let mut items = vec![Vec::new(); query_ids.len()];
        let mut unknown = Vec::new();
        for (v, c) in pairs {
            let (q, i) = if videos_are_queries { (v, c) } else { (c, v) };
            match (qi.get(q.as_str()), ii.get(i.as_str())) {
                (Some(&q), Some(&i)) => items[q].push(i as u32),
                (None, _) => unknown.push(q.clone()),
                (_, None) => unknown.push(i.clone()),
            }
        }
        // Run ids without a counterpart are the most telling offenders.
        let mut offenders: Vec<String> = items
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_empty())
            .map(|(q, _)| query_ids[q].clone())
            .collect();
        unknown.sort();
        unknown.dedup();
        offenders.extend(unknown);
        if !offenders.is_empty() {
            offenders.truncate(5);
            return Err(Error::IdMismatch(offenders));
        }
        for v in &mut items {
            v.sort_unstable();
            v.dedup();
        }
        Ok(Correspondence { items })
    }

    /// The diagonal correspondence `query i ↔ item i`.
    pub fn identity(n: usize) -> Self {
        Correspondence {
            items: (0..n as u32).map(|i| vec![i]).collect(),
        }
    }

    pub fn items(&self, q: usize) -> &[u32] {
        &self.items[q]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn scores_rank_descending_with_index_ties() {
        let run =
            RetrievalRun::from_scores(ids(&["q"]), ids(&["a", "b", "c"]), vec![0.5, 0.9, 0.5])
                .unwrap();
        assert_eq!(run.ranking(0), &[1, 0, 2]);
        assert_eq!(run.position(0, 2), 2);
    }

    #[test]
    fn nan_and_non_permutations_are_rejected() {
        assert!(RetrievalRun::from_scores(ids(&["q"]), ids(&["a"]), vec![f64::NAN]).is_err());
        assert!(
            RetrievalRun::from_rankings(ids(&["q"]), ids(&["a", "b"]), vec![vec![0, 0]]).is_err()
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let run = RetrievalRun::from_rankings(
            ids(&["q1", "q2"]),
            ids(&["a", "b", "c"]),
            vec![vec![2, 0, 1], vec![0, 1, 2]],
        )
        .unwrap();
        let mut buf = Vec::new();
        run.write_jsonl(&mut buf).unwrap();
        assert_eq!(RetrievalRun::read_jsonl(buf.as_slice()).unwrap(), run);
    }

    #[test]
    fn dense_round_trip_and_transpose() {
        let run = RetrievalRun::from_scores(
            ids(&["v1", "v2"]),
            ids(&["a", "b", "c"]),
            vec![0.5, 0.25, 1.0, 0.0, 0.75, 0.5],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.bin");
        run.write_dense(&path).unwrap();
        assert_eq!(RetrievalRun::load(&path).unwrap(), run);
        let t = run.transpose().unwrap();
        assert_eq!(t.query_ids(), run.item_ids());
        assert_eq!(t.ranking(0), &[0, 1]);
        assert_eq!(t.ranking(1), &[1, 0]);
    }

    #[test]
    fn alignment_preserves_rankings() {
        let run = RetrievalRun::from_rankings(
            ids(&["q1", "q2"]),
            ids(&["a", "b"]),
            vec![vec![1, 0], vec![0, 1]],
        )
        .unwrap();
        let a = run.aligned(&ids(&["q2", "q1"]), &ids(&["b", "a"])).unwrap();
        assert_eq!(a.ranking(0), &[1, 0]);
        assert_eq!(a.ranking(1), &[0, 1]);
        assert!(matches!(
            run.aligned(&ids(&["q1", "zz"]), &ids(&["a", "b"])),
            Err(Error::IdMismatch(v)) if v.contains(&"zz".to_string())
        ));
    }

    #[test]
    fn correspondence_detects_orientation() {
        let pairs = vec![
            ("v1".to_string(), "a".to_string()),
            ("v1".to_string(), "b".to_string()),
            ("v2".to_string(), "c".to_string()),
        ];
        let v2t = Correspondence::from_pairs(&pairs, &ids(&["v1", "v2"]), &ids(&["a", "b", "c"]))
            .unwrap();
        assert_eq!(v2t.items(0), &[0, 1]);
        let t2v = Correspondence::from_pairs(&pairs, &ids(&["a", "b", "c"]), &ids(&["v1", "v2"]))
            .unwrap();
        assert_eq!(t2v.items(2), &[1]);
        assert!(
            Correspondence::from_pairs(&pairs, &ids(&["v1", "v3"]), &ids(&["a", "b", "c"]))
                .is_err()
        );
    }
}
