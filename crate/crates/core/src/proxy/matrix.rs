use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};

/// Sparse query-by-item similarity matrix with implicit zeros.
///
/// Rows are sorted by item index and hold only scores in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    query_ids: Vec<String>,
    item_ids: Vec<String>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SimilarityMatrix {
    /// Validates ranges and ordering; zero entries are dropped.
    pub fn new(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Result<Self> {
        if rows.len() != query_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows for {} queries",
                rows.len(),
                query_ids.len()
            )));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for row in rows {
            let mut last: Option<u32> = None;
            let mut kept = Vec::with_capacity(row.len());
            for (item, score) in row {
                if item as usize >= item_ids.len() {
                    return Err(Error::InvalidInput(format!(
                        "item index {item} out of range"
                    )));
                }
                if last.is_some_and(|l| l >= item) {
                    return Err(Error::InvalidInput(
                        "row not strictly sorted by item".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&score) {
                    return Err(Error::InvalidInput(format!("score {score} outside [0, 1]")));
                }
                last = Some(item);
                if score > 0.0 {
                    kept.push((item, score));
                }
            }
            clean.push(kept);
        }
        Ok(SimilarityMatrix {
            query_ids,
            item_ids,
            rows: clean,
        })
    }

    /// Builds from dense row-major scores.
    pub fn from_dense(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        scores: &[f64],
    ) -> Result<Self> {
        let cols = item_ids.len();
        if scores.len() != query_ids.len() * cols {
            return Err(Error::InvalidInput("dense shape mismatch".into()));
        }
        let rows = scores
            .chunks(cols.max(1))
            .take(query_ids.len())
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &s)| s != 0.0)
                    .map(|(j, &s)| (j as u32, s))
                    .collect()
            })
            .collect();
        Self::new(query_ids, item_ids, rows)
    }

    pub(crate) fn from_rows_unchecked(
        query_ids: Vec<String>,
        item_ids: Vec<String>,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Self {
        SimilarityMatrix {
            query_ids,
            item_ids,
            rows,
        }
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

    /// Stored (non-zero) entries of row `q`.
    pub fn row(&self, q: usize) -> &[(u32, f64)] {
        &self.rows[q]
    }

    pub fn get(&self, q: usize, item: usize) -> f64 {
        let row = &self.rows[q];
        row.binary_search_by_key(&(item as u32), |&(i, _)| i)
            .map_or(0.0, |k| row[k].1)
    }

    pub fn dense_row(&self, q: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.item_ids.len()];
        for &(i, s) in &self.rows[q] {
            out[i as usize] = s;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.item_ids.len()];
        for (q, row) in self.rows.iter().enumerate() {
            for &(i, s) in row {
                rows[i as usize].push((q as u32, s));
            }
        }
        SimilarityMatrix {
            query_ids: self.item_ids.clone(),
            item_ids: self.query_ids.clone(),
            rows,
        }
    }

    /// Every entry at or above `threshold`, as a boolean relevance mask.
    pub fn threshold(&self, threshold: f64) -> Vec<Vec<u32>> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .filter(|&&(_, s)| s >= threshold)
                    .map(|&(i, _)| i)
                    .collect()
            })
            .collect()
    }

    pub fn query_index(&self) -> HashMap<&str, usize> {
        index_of(&self.query_ids)
    }

    pub fn item_index(&self) -> HashMap<&str, usize> {
        index_of(&self.item_ids)
    }

    /// Sparse TSV: `query_id \t item_id \t score`, six decimals, sorted by
    /// `(query_id, item_id)`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut order: Vec<usize> = (0..self.query_ids.len()).collect();
        order.sort_by(|&a, &b| self.query_ids[a].cmp(&self.query_ids[b]));
        for q in order {
            let mut entries: Vec<&(u32, f64)> = self.rows[q].iter().collect();
            entries.sort_by(|a, b| self.item_ids[a.0 as usize].cmp(&self.item_ids[b.0 as usize]));
            for &&(i, s) in &entries {
                writeln!(
                    out,
                    "{}\t{}\t{:.6}",
                    self.query_ids[q], self.item_ids[i as usize], s
                )?;
            }
        }
        Ok(())
    }

    /// Reads the sparse TSV. Ids are ordered lexicographically; an id only
    /// exists if it has at least one stored entry.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut items = std::collections::BTreeSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected query_id<TAB>item_id<TAB>score".into(),
                });
            }
            let score: f64 = cols[2].trim().parse().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("score: {e}"),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("score {score} outside [0, 1]"),
                });
            }
            items.insert(cols[1].to_owned());
            entries
                .entry(cols[0].to_owned())
                .or_default()
                .insert(cols[1].to_owned(), score);
        }
        let item_ids: Vec<String> = items.into_iter().collect();
        let item_index = index_of(&item_ids);
        let mut query_ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (q, row) in &entries {
            query_ids.push(q.clone());
            let mut r: Vec<(u32, f64)> = row
                .iter()
                .filter(|(_, &s)| s > 0.0)
                .map(|(i, &s)| (item_index[i.as_str()] as u32, s))
                .collect();
            r.sort_by_key(|&(i, _)| i);
            rows.push(r);
        }
        Ok(SimilarityMatrix::from_rows_unchecked(
            query_ids, item_ids, rows,
        ))
    }

    pub fn write_dense(&self, path: &Path) -> Result<()> {
        let mut values = vec![0f32; self.query_ids.len() * self.item_ids.len()];
        let cols = self.item_ids.len();
        for (q, row) in self.rows.iter().enumerate() {
            for &(i, s) in row {
                values[q * cols + i as usize] = s as f32;
            }
        }
        dense::write(
            path,
            dense::SIMILARITY_MAGIC,
            &DenseMatrix {
                row_ids: self.query_ids.clone(),
                col_ids: self.item_ids.clone(),
                values,
            },
        )
    }

    pub fn read_dense(path: &Path) -> Result<Self> {
        let m = dense::read(path, dense::SIMILARITY_MAGIC)?;
        let scores: Vec<f64> = m.values.iter().map(|&v| v as f64).collect();
        Self::from_dense(m.row_ids, m.col_ids, &scores)
    }

    /// Reorders rows and columns to the given id orders. Ids absent from the
    /// matrix get empty rows / zero columns; listed ids must be unique.
    pub fn reindexed(&self, query_ids: &[String], item_ids: &[String]) -> Result<Self> {
        let qi = self.query_index();
        let new_item: HashMap<&str, usize> = index_of(item_ids);
        if new_item.len() != item_ids.len() || index_of(query_ids).len() != query_ids.len() {
            return Err(Error::InvalidInput("duplicate ids in reindex".into()));
        }
        let mut offenders: Vec<String> = self
            .item_ids
            .iter()
            .filter(|id| !new_item.contains_key(id.as_str()))
            .cloned()
            .collect();
        let qset = index_of(query_ids);
        offenders.extend(
            self.query_ids
                .iter()
                .filter(|id| !qset.contains_key(id.as_str()))
                .cloned(),
        );
        if !offenders.is_empty() {
            offenders.truncate(5);
            return Err(Error::IdMismatch(offenders));
        }
        let rows = query_ids
            .iter()
            .map(|q| match qi.get(q.as_str()) {
                None => Vec::new(),
                Some(&old) => {
                    let mut r: Vec<(u32, f64)> = self.rows[old]
                        .iter()
                        .map(|&(i, s)| (new_item[self.item_ids[i as usize].as_str()] as u32, s))
                        .collect();
                    r.sort_by_key(|&(i, _)| i);
                    r
                }
            })
            .collect();
        Ok(SimilarityMatrix::from_rows_unchecked(
            query_ids.to_vec(),
            item_ids.to_vec(),
            rows,
        ))
    }
    /// Loads a matrix by extension: `.bin` is the dense form, anything else
    /// the sparse TSV.
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_dense(path)
        } else {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Self::read_tsv(std::io::BufReader::new(file))
        }
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_tsv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn sample() -> SimilarityMatrix {
        SimilarityMatrix::from_dense(
            ids(&["v2", "v1"]),
            ids(&["c2", "c1", "c3"]),
            &[1.0, 0.0, 0.25, 0.5, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn zeros_are_not_stored() {
        let m = sample();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.5);
    }

    #[test]
    fn rejects_out_of_range_scores() {
        assert!(SimilarityMatrix::new(ids(&["q"]), ids(&["i"]), vec![vec![(0, 1.5)]]).is_err());
        assert!(SimilarityMatrix::new(
            ids(&["q"]),
            ids(&["i", "j"]),
            vec![vec![(1, 0.5), (0, 0.5)]]
        )
        .is_err());
    }

    #[test]
    fn tsv_is_sorted_by_ids() {
        let mut out = Vec::new();
        sample().write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "v1\tc1\t1.000000\nv1\tc2\t0.500000\nv2\tc2\t1.000000\nv2\tc3\t0.250000\n"
        );
        let back = SimilarityMatrix::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(back.query_ids(), &ids(&["v1", "v2"])[..]);
        let back = back
            .reindexed(sample().query_ids(), sample().item_ids())
            .unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn transpose_twice_is_identity() {
        let m = sample();
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.transpose().get(2, 0), 0.25);
    }

    #[test]
    fn reindex_reports_unknown_ids() {
        let err = sample()
            .reindexed(&ids(&["v1", "v2"]), &ids(&["c1", "c2"]))
            .unwrap_err();
        assert!(matches!(err, Error::IdMismatch(v) if v == vec!["c3".to_string()]));
    }
}
