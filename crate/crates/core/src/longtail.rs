//! Citation concentration statistics: top-k and bottom-quantile triads and
//! cumulative citation curves over per-paper counts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRecord {
    pub venue: String,
    pub paper_label: String,
    pub citations: u64,
}

/// `(% of papers, % of citations, average citations)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTriad {
    pub pct_papers: f64,
    pub pct_citations: f64,
    pub avg_citations: f64,
}

impl fmt::Display for ConcentrationTriad {
    /// Rounded half-up, e.g. `(19/74/364)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}/{}/{})",
            round_half_up(self.pct_papers),
            round_half_up(self.pct_citations),
            round_half_up(self.avg_citations)
        )
    }
}

/// `(paper count, % of citations, average citations)` for the least-cited papers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTriad {
    pub count: usize,
    pub pct_papers: f64,
    pub pct_citations: f64,
    pub avg_citations: f64,
}

impl fmt::Display for QuantileTriad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}/{}/{})", self.count, round_half_up(self.pct_citations), round_half_up(self.avg_citations))
    }
}

pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Reads `venue,paper,citations`. Row errors carry their 1-based line number.
pub fn load_citations(path: &Path) -> Result<Vec<CitationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_citations(&text, path)
}

fn parse_citations(text: &str, path: &Path) -> Result<Vec<CitationRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["venue", "paper", "citations"] {
        return Err(parse_err(
            1,
            format!("expected header venue,paper,citations, found {}", header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", row.len())));
        }
        let raw = &row[2];
        let citations: u64 = match raw.parse::<i64>() {
            Ok(c) if c < 0 => return Err(parse_err(line, format!("negative citation count {c}"))),
            Ok(c) => c as u64,
            Err(_) => return Err(parse_err(line, format!("citation count '{raw}' is not an integer"))),
        };
        out.push(CitationRecord { venue: row[0].to_string(), paper_label: row[1].to_string(), citations });
    }
    Ok(out)
}

/// Records grouped by venue, each group in input order.
pub fn by_venue(records: &[CitationRecord]) -> BTreeMap<String, Vec<CitationRecord>> {
    let mut out: BTreeMap<String, Vec<CitationRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.venue.clone()).or_default().push(r.clone());
    }
    out
}

/// Citation counts, most cited first, ties in input order.
fn sorted_desc(records: &[CitationRecord]) -> Vec<u64> {
    let mut c: Vec<u64> = records.iter().map(|r| r.citations).collect();
    c.sort_by(|a, b| b.cmp(a));
    c
}

fn total(records: &[CitationRecord]) -> Result<u64> {
    if records.is_empty() {
        return Err(Error::data("longtail: no records"));
    }
    let t: u64 = records.iter().map(|r| r.citations).sum();
    if t == 0 {
        return Err(Error::Degenerate("longtail: every paper has zero citations".into()));
    }
    Ok(t)
}

/// Share of papers, share of citations and mean citations of the `k` most cited papers.
pub fn top_k_triad(records: &[CitationRecord], k: usize) -> Result<ConcentrationTriad> {
    let all = total(records)?;
    let n = records.len();
    if k == 0 || k > n {
        return Err(Error::data(format!("longtail: k = {k} outside 1..={n}")));
    }
    let top: u64 = sorted_desc(records).into_iter().take(k).sum();
    Ok(ConcentrationTriad {
        pct_papers: 100.0 * k as f64 / n as f64,
        pct_citations: 100.0 * top as f64 / all as f64,
        avg_citations: top as f64 / k as f64,
    })
}

/// The `floor(q·n)` least cited papers.
pub fn bottom_quantile_triad(records: &[CitationRecord], q: f64) -> Result<QuantileTriad> {
    let all = total(records)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::data(format!("longtail: quantile {q} outside (0, 1]")));
    }
    let n = records.len();
    let count = (q * n as f64).floor() as usize;
    let mut asc = sorted_desc(records);
    asc.reverse();
    let bottom: u64 = asc.into_iter().take(count).sum();
    Ok(QuantileTriad {
        count,
        pct_papers: 100.0 * count as f64 / n as f64,
        pct_citations: 100.0 * bottom as f64 / all as f64,
        avg_citations: if count == 0 { 0.0 } else { bottom as f64 / count as f64 },
    })
}

/// `(rank, cumulative % of citations)` from the most cited paper down.
pub fn cumulative_curve(records: &[CitationRecord]) -> Result<Vec<(usize, f64)>> {
    let all = total(records)? as f64;
    let mut acc = 0u64;
    Ok(sorted_desc(records)
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            acc += c;
            (i + 1, 100.0 * acc as f64 / all)
        })
        .collect())
}

/// Which statistics to report per venue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongtailConfig {
    pub top_k: Vec<usize>,
    pub bottom_q: Vec<f64>,
}

impl Default for LongtailConfig {
    fn default() -> Self {
        LongtailConfig { top_k: vec![10, 20], bottom_q: vec![0.8, 0.75, 0.5] }
    }
}

/// One `longtail.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongtailRow {
    pub venue: String,
    pub stat: String,
    pub k_or_q: String,
    pub pct_papers: f64,
    pub pct_citations: f64,
    pub avg: f64,
}

/// Triads for every venue. `top_k` values above a venue's size are skipped.
pub fn analyze(records: &[CitationRecord], cfg: &LongtailConfig) -> Result<Vec<LongtailRow>> {
    let mut rows = Vec::new();
    for (venue, recs) in by_venue(records) {
        for &k in &cfg.top_k {
            if k > recs.len() {
                continue;
            }
            let t = top_k_triad(&recs, k)?;
            rows.push(LongtailRow {
                venue: venue.clone(),
                stat: "top_k".into(),
                k_or_q: k.to_string(),
                pct_papers: t.pct_papers,
                pct_citations: t.pct_citations,
                avg: t.avg_citations,
            });
        }
        for &q in &cfg.bottom_q {
            let t = bottom_quantile_triad(&recs, q)?;
            rows.push(LongtailRow {
                venue: venue.clone(),
                stat: "bottom_q".into(),
                k_or_q: q.to_string(),
                pct_papers: t.pct_papers,
                pct_citations: t.pct_citations,
                avg: t.avg_citations,
            });
        }
    }
    Ok(rows)
}

/// Writes `longtail.csv`: `venue,stat,k_or_q,pct_papers,pct_citations,avg`.
pub fn write_longtail_csv(path: &Path, rows: &[LongtailRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["venue", "stat", "k_or_q", "pct_papers", "pct_citations", "avg"])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `cumulative.csv`: `venue,rank,cumulative_pct`.
pub fn write_cumulative_csv(path: &Path, records: &[CitationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["venue", "rank", "cumulative_pct"])?;
    for (venue, recs) in by_venue(records) {
        for (rank, pct) in cumulative_curve(&recs)? {
            w.write_record([venue.as_str(), &rank.to_string(), &pct.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recs(counts: &[u64]) -> Vec<CitationRecord> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| CitationRecord { venue: "V".into(), paper_label: format!("p{i}"), citations: c })
            .collect()
    }

    fn parse(text: &str) -> Result<Vec<CitationRecord>> {
        parse_citations(text, Path::new("mem.csv"))
    }

    #[test]
    fn parses_well_formed_file() {
        let r = parse("venue,paper,citations\nA,x,3\nA,y,0\nB,z,12\n").unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[2], CitationRecord { venue: "B".into(), paper_label: "z".into(), citations: 12 });
    }

    #[test]
    fn negative_count_names_line() {
        match parse("venue,paper,citations\nA,x,3\nA,y,-1\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("negative"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header_and_garbage_rejected() {
        assert!(matches!(parse("venue,title,cites\nA,x,3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("venue,paper,citations\nA,x,many\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_data_section() {
        assert!(parse("venue,paper,citations\n").unwrap().is_empty());
        assert!(load_citations(Path::new("/nonexistent/file.csv")).is_err());
    }

    #[test]
    fn equal_counts_are_symmetric() {
        let r = recs(&[7; 40]);
        let t = top_k_triad(&r, 10).unwrap();
        assert_eq!((t.pct_papers, t.pct_citations, t.avg_citations), (25.0, 25.0, 7.0));
        let all = top_k_triad(&r, 40).unwrap();
        assert_eq!((all.pct_papers, all.pct_citations, all.avg_citations), (100.0, 100.0, 7.0));
        let b = bottom_quantile_triad(&r, 1.0).unwrap();
        assert_eq!((b.count, b.pct_citations, b.avg_citations), (40, 100.0, 7.0));
    }

    #[test]
    fn k_above_n_is_error() {
        assert!(top_k_triad(&recs(&[1, 2]), 3).is_err());
        assert!(top_k_triad(&[], 1).is_err());
        assert!(bottom_quantile_triad(&recs(&[1]), 0.0).is_err());
    }

    #[test]
    fn curve_examples() {
        assert_eq!(cumulative_curve(&recs(&[5])).unwrap(), vec![(1, 100.0)]);
        assert_eq!(cumulative_curve(&recs(&[25, 75])).unwrap(), vec![(1, 75.0), (2, 100.0)]);
    }

    #[test]
    fn display_rounds_half_up() {
        let t = ConcentrationTriad { pct_papers: 18.5, pct_citations: 73.6, avg_citations: 363.5 };
        assert_eq!(t.to_string(), "(19/74/364)");
    }

    #[test]
    fn analyze_groups_by_venue() {
        let mut r = recs(&[1, 2, 3, 4, 5]);
        r.push(CitationRecord { venue: "W".into(), paper_label: "q".into(), citations: 9 });
        let cfg = LongtailConfig { top_k: vec![2, 10], bottom_q: vec![0.5] };
        let rows = analyze(&r, &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].venue, "V");
        assert_eq!(rows[2].venue, "W");
    }

    proptest! {
        #[test]
        fn curve_monotone_and_normalized(counts in prop::collection::vec(0u64..10_000, 1..200)) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let curve = cumulative_curve(&recs(&counts)).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1));
            prop_assert!((curve.last().unwrap().1 - 100.0).abs() < 1e-9);
        }
    }
}
