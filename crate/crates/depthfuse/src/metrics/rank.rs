//! Score-and-rank harness for comparing fusion methods across scenes and
//! metrics: per (scene, metric) cell, methods receive scores N..1 by
//! descending metric value, and the summed totals produce the final ranking.

use crate::{Error, Result};

/// Bundled reference comparison table (five scenes, six metrics, eight
/// methods) so ranking reproduction needs no external data.
pub const REFERENCE_TABLE_CSV: &str = include_str!("../../fixtures/table3.csv");

/// One `(scene, metric)` row of method values.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub scene: String,
    pub metric: String,
    pub values: Vec<f64>,
}

/// Parsed ranking input: method names plus value rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RankInput {
    pub methods: Vec<String>,
    pub rows: Vec<RankRow>,
}

/// Parses the `scene,metric,<method>,...` CSV layout.
pub fn parse_rank_csv(text: &str) -> Result<RankInput> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedTable("empty table".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[0] != "scene" || columns[1] != "metric" {
        return Err(Error::MalformedTable(
            "header must start with `scene,metric` followed by method names".into(),
        ));
    }
    let methods: Vec<String> = columns[2..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != methods.len() + 2 {
            return Err(Error::MalformedTable(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                methods.len() + 2
            )));
        }
        let values = fields[2..]
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::MalformedTable(format!("`{s}` is not a number (row {})", lineno + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RankRow {
            scene: fields[0].to_string(),
            metric: fields[1].to_string(),
            values,
        });
    }
    Ok(RankInput { methods, rows })
}

/// Scores, totals, per-score counts, and the final ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    /// One score row per input row, aligned with `rows`.
    pub rows: Vec<RankRow>,
    pub scores: Vec<Vec<u32>>,
    /// Summed score per method.
    pub totals: Vec<u64>,
    /// `counts[m][i]` is how often method `m` received score `N - i`.
    pub counts: Vec<Vec<u64>>,
    /// Method indices ordered best first (total descending, index
    /// ascending).
    pub ranking: Vec<usize>,
}

/// Assigns per-cell scores `N..1` by descending value. Tied methods share
/// the higher score and keep their input order.
pub fn rank_methods(input: &RankInput) -> Result<ScoreTable> {
    let n = input.methods.len();
    if n < 2 {
        return Err(Error::TooFewMethods(n));
    }
    let mut scores = Vec::with_capacity(input.rows.len());
    let mut totals = vec![0u64; n];
    let mut counts = vec![vec![0u64; n]; n];
    for row in &input.rows {
        if row.values.len() != n {
            return Err(Error::MalformedTable(format!(
                "row ({}, {}) has {} values, expected {n}",
                row.scene,
                row.metric,
                row.values.len()
            )));
        }
        if let Some(m) = row.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRankValue {
                scene: row.scene.clone(),
                metric: row.metric.clone(),
                method: input.methods[m].clone(),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            row.values[b]
                .partial_cmp(&row.values[a])
                .expect("finite values")
                .then(a.cmp(&b))
        });
        let mut row_scores = vec![0u32; n];
        for (pos, &m) in order.iter().enumerate() {
            row_scores[m] = if pos > 0 && row.values[m] == row.values[order[pos - 1]] {
                row_scores[order[pos - 1]]
            } else {
                (n - pos) as u32
            };
        }
        for m in 0..n {
            totals[m] += row_scores[m] as u64;
            counts[m][n - row_scores[m] as usize] += 1;
        }
        scores.push(row_scores);
    }
    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then(a.cmp(&b)));
    Ok(ScoreTable {
        methods: input.methods.clone(),
        rows: input.rows.clone(),
        scores,
        totals,
        counts,
        ranking,
    })
}

impl ScoreTable {
    fn n(&self) -> usize {
        self.methods.len()
    }

    /// Rank (1-based) of each method.
    pub fn rank_of(&self) -> Vec<usize> {
        let mut rank = vec![0usize; self.n()];
        for (pos, &m) in self.ranking.iter().enumerate() {
            rank[m] = pos + 1;
        }
        rank
    }

    /// Summary CSV: per-score counts, totals, and ranking.
    pub fn summary_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("method");
        for s in (1..=n).rev() {
            out.push_str(&format!(",score_{s}"));
        }
        out.push_str(",total,rank\n");
        let rank = self.rank_of();
        for (m, method) in self.methods.iter().enumerate() {
            out.push_str(method);
            for count in &self.counts[m] {
                out.push_str(&format!(",{count}"));
            }
            out.push_str(&format!(",{},{}\n", self.totals[m], rank[m]));
        }
        out
    }

    /// Per-cell scores CSV, aligned with the input rows.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("scene,metric");
        for m in &self.methods {
            out.push_str(&format!(",{m}"));
        }
        out.push('\n');
        for (row, scores) in self.rows.iter().zip(&self.scores) {
            out.push_str(&format!("{},{}", row.scene, row.metric));
            for s in scores {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned Markdown summary, methods ordered best first.
    pub fn summary_markdown(&self) -> String {
        let n = self.n();
        let mut header = vec!["Method".to_string()];
        header.extend((1..=n).rev().map(|s| format!("x{s}")));
        header.push("Total".into());
        header.push("Rank".into());
        let rank = self.rank_of();
        let mut body = Vec::new();
        for &m in &self.ranking {
            let mut row = vec![self.methods[m].clone()];
            row.extend(self.counts[m].iter().map(|c| c.to_string()));
            row.push(self.totals[m].to_string());
            row.push(rank[m].to_string());
            body.push(row);
        }
        render_markdown(&header, &body)
    }
}

/// Pads every column to its widest cell.
pub(crate) fn render_markdown(header: &[String], body: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in body {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        out.push('|');
        for i in 0..cols {
            out.push_str(&format!(" {:width$} |", cells[i], width = widths[i]));
        }
        out.push('\n');
    };
    emit(&mut out, header);
    out.push('|');
    for width in &widths {
        out.push_str(&"-".repeat(width + 2));
        out.push('|');
    }
    out.push('\n');
    for row in body {
        emit(&mut out, row);
    }
    out
}
