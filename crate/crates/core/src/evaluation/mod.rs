//! Target selection, rank statistics, recall curves and results tables.

mod table;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Article, NctId, Pmid, Registration, ReportedLink};
use crate::similarity::{MethodConfig, Ranker, INDEX_FORMAT_VERSION};
use crate::weighting::WeightedVector;

pub use table::{
    format_count, format_rank_cell, write_curves_csv, write_results_table, RESULTS_TABLE_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Reported,
    Curated,
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkKind::Reported => "reported",
            BenchmarkKind::Curated => "curated",
        })
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reported" => Ok(BenchmarkKind::Reported),
            "curated" => Ok(BenchmarkKind::Curated),
            _ => Err(Error::InvalidConfig(format!(
                "unknown benchmark kind {s:?}"
            ))),
        }
    }
}

/// Registration/article links to evaluate against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub name: String,
    pub kind: BenchmarkKind,
    pub links: Vec<ReportedLink>,
}

impl Benchmark {
    /// Links are sorted and deduplicated.
    pub fn new(name: impl Into<String>, kind: BenchmarkKind, mut links: Vec<ReportedLink>) -> Self {
        links.sort();
        links.dedup();
        Benchmark {
            name: name.into(),
            kind,
            links,
        }
    }

    /// Reads `nct_id<TAB>pmid` rows. A leading `nct_id` header row, blank
    /// lines and `#` comments are skipped.
    pub fn from_tsv<R: BufRead>(
        reader: R,
        name: impl Into<String>,
        kind: BenchmarkKind,
    ) -> Result<Self> {
        let mut links = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("nct_id")) {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(nct), Some(pmid)) = (cols.next(), cols.next()) else {
                return Err(Error::InvalidConfig(format!(
                    "benchmark line {}: expected nct_id<TAB>pmid",
                    i + 1
                )));
            };
            links.push(ReportedLink {
                nct_id: NctId::new(nct.trim())?,
                pmid: pmid.parse()?,
            });
        }
        Ok(Benchmark::new(name, kind, links))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nct_id\tpmid")?;
        for l in &self.links {
            writeln!(out, "{}\t{}", l.nct_id, l.pmid)?;
        }
        Ok(())
    }
}

/// A registration left out of the statistics, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub nct_id: NctId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Target {
    pub nct_id: NctId,
    pub pmid: Pmid,
}

/// One target article per registration, plus the registrations that had none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub benchmark: String,
    pub kind: BenchmarkKind,
    pub targets: Vec<Target>,
    pub excluded: Vec<Exclusion>,
}

pub const NO_POST_COMPLETION_LINK: &str = "no post-completion link";
pub const MISSING_COMPLETION_DATE: &str = "missing completion date";

/// The linked article published earliest strictly after the registration's
/// completion date, ties by smaller pmid. Links without a publication date
/// cannot qualify.
pub fn select_target(
    registration: &Registration,
    linked: &[&Article],
) -> std::result::Result<Pmid, String> {
    let Some(completed) = registration.completion_date else {
        return Err(MISSING_COMPLETION_DATE.to_string());
    };
    linked
        .iter()
        .filter_map(|a| {
            a.publication_date
                .filter(|d| *d > completed)
                .map(|d| (d, a.pmid))
        })
        .min()
        .map(|(_, pmid)| pmid)
        .ok_or_else(|| NO_POST_COMPLETION_LINK.to_string())
}

/// Resolves the benchmark against the corpora and selects one target per
/// registration. Sorted by nct_id.
pub fn build_targets(
    benchmark: &Benchmark,
    registrations: &[Registration],
    articles: &[Article],
) -> TargetSet {
    let regs: HashMap<&NctId, &Registration> =
        registrations.iter().map(|r| (&r.nct_id, r)).collect();
    let arts: HashMap<Pmid, &Article> = articles.iter().map(|a| (a.pmid, a)).collect();
    let mut grouped: BTreeMap<&NctId, Vec<Pmid>> = BTreeMap::new();
    for l in &benchmark.links {
        grouped.entry(&l.nct_id).or_default().push(l.pmid);
    }
    let mut targets = Vec::new();
    let mut excluded = Vec::new();
    for (nct, pmids) in grouped {
        let exclude = |reason: String| Exclusion {
            nct_id: nct.clone(),
            reason,
        };
        let Some(reg) = regs.get(nct) else {
            excluded.push(exclude("registration not in corpus".into()));
            continue;
        };
        let linked: Vec<&Article> = pmids.iter().filter_map(|p| arts.get(p).copied()).collect();
        if linked.is_empty() {
            excluded.push(exclude("no linked article in corpus".into()));
            continue;
        }
        if linked.iter().any(|a| a.publication_date.is_none()) {
            log::warn!("{nct}: linked articles without a publication date cannot be targets");
        }
        match select_target(reg, &linked) {
            Ok(pmid) => targets.push(Target {
                nct_id: nct.clone(),
                pmid,
            }),
            Err(reason) => excluded.push(exclude(reason)),
        }
    }
    TargetSet {
        benchmark: benchmark.name.clone(),
        kind: benchmark.kind,
        targets,
        excluded,
    }
}

/// Points at which the recall curve is sampled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveGrid {
    /// Every n in 1..=100, then about 20 log-spaced steps per decade up to
    /// the corpus size.
    #[default]
    Default,
    Explicit(Vec<usize>),
}

impl CurveGrid {
    pub fn points(&self, corpus_size: usize) -> Vec<usize> {
        let mut out: Vec<usize> = match self {
            CurveGrid::Explicit(points) => points.clone(),
            CurveGrid::Default => {
                let mut v: Vec<usize> = (1..=100).collect();
                let mut k = 1;
                loop {
                    let n = (100.0 * 10f64.powf(k as f64 / 20.0)).round() as usize;
                    if n >= corpus_size {
                        break;
                    }
                    v.push(n);
                    k += 1;
                }
                if corpus_size > 100 {
                    v.push(corpus_size);
                }
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRank {
    pub nct_id: NctId,
    pub pmid: Pmid,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iqr {
    pub q1: f64,
    pub q3: f64,
}

/// Conventions the statistics depend on, stored with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub corpus_size: usize,
    pub quartile_method: String,
    pub tie_break: String,
    pub zero_overlap: String,
    pub index_format_version: u32,
}

impl ReportMetadata {
    pub fn new(corpus_size: usize) -> Self {
        ReportMetadata {
            corpus_size,
            quartile_method: "linear interpolation between order statistics (type 7)".into(),
            tie_break: "ascending pmid".into(),
            zero_overlap: "articles sharing no feature keep their true score; under euclidean, articles with no features are not ranked".into(),
            index_format_version: INDEX_FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub benchmark: String,
    pub kind: BenchmarkKind,
    pub config: MethodConfig,
    pub n_registrations: usize,
    pub median_rank: f64,
    pub iqr: Iqr,
    pub first_ranked_pct: f64,
    pub recall_at_50_pct: f64,
    pub recall_curve: Vec<CurvePoint>,
    pub ranks: Vec<TargetRank>,
    pub excluded: Vec<Exclusion>,
    pub metadata: ReportMetadata,
}

/// Type-7 sample quantile of ascending `sorted`, `p` in [0, 1].
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of ranks at or above position `n`; 0 when `n` is 0.
pub fn recall_at(ranks: &[usize], n: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64
}

/// Aggregates already computed target ranks. `ranks` may be in any order.
pub fn summarize(
    targets: &TargetSet,
    config: MethodConfig,
    mut ranks: Vec<TargetRank>,
    mut excluded: Vec<Exclusion>,
    corpus_size: usize,
    grid: &CurveGrid,
) -> Result<EvalReport> {
    if ranks.is_empty() {
        return Err(Error::EmptyBenchmark(targets.benchmark.clone()));
    }
    ranks.sort_by(|a, b| a.nct_id.cmp(&b.nct_id));
    excluded.sort();
    let plain: Vec<usize> = ranks.iter().map(|r| r.rank).collect();
    let mut sorted: Vec<f64> = plain.iter().map(|&r| r as f64).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(EvalReport {
        benchmark: targets.benchmark.clone(),
        kind: targets.kind,
        config,
        n_registrations: ranks.len(),
        median_rank: quantile(&sorted, 0.5),
        iqr: Iqr {
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
        },
        first_ranked_pct: 100.0 * recall_at(&plain, 1),
        recall_at_50_pct: 100.0 * recall_at(&plain, 50),
        recall_curve: grid
            .points(corpus_size)
            .into_iter()
            .map(|n| CurvePoint {
                n,
                recall: recall_at(&plain, n),
            })
            .collect(),
        ranks,
        excluded,
        metadata: ReportMetadata::new(corpus_size),
    })
}

enum Outcome {
    Ranked(TargetRank),
    Excluded(Exclusion),
}

/// Ranks every target's registration under `config` and aggregates.
///
/// Registrations whose query vector is empty, or whose target cannot be
/// ranked in this space, are excluded with a reason.
pub fn evaluate<R: Ranker + Sync + ?Sized>(
    targets: &TargetSet,
    queries: &HashMap<NctId, WeightedVector>,
    ranker: &R,
    config: MethodConfig,
    corpus_size: usize,
    grid: &CurveGrid,
) -> Result<EvalReport> {
    let one = |t: &Target| -> Result<Outcome> {
        let exclude = |reason: &str| {
            Ok(Outcome::Excluded(Exclusion {
                nct_id: t.nct_id.clone(),
                reason: reason.into(),
            }))
        };
        let Some(query) = queries.get(&t.nct_id) else {
            return Err(Error::UnknownRegistration(t.nct_id.to_string()));
        };
        match ranker.rank_of(&t.nct_id, query, config, t.pmid) {
            Ok(Some(rank)) => Ok(Outcome::Ranked(TargetRank {
                nct_id: t.nct_id.clone(),
                pmid: t.pmid,
                rank,
            })),
            Ok(None) => exclude("target not ranked under this config"),
            Err(Error::Unrankable(_)) => exclude("unrankable: empty query vector"),
            Err(e) => Err(e),
        }
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<Outcome>> = targets.targets.par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<Outcome>> = targets.targets.iter().map(one).collect();

    let mut ranks = Vec::with_capacity(outcomes.len());
    let mut excluded = targets.excluded.clone();
    for o in outcomes {
        match o? {
            Outcome::Ranked(r) => ranks.push(r),
            Outcome::Excluded(e) => excluded.push(e),
        }
    }
    summarize(targets, config, ranks, excluded, corpus_size, grid)
}

impl EvalReport {
    /// Pretty JSON with a trailing newline. Stable across runs.
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Plot-ready curve rows for this config, header included.
    pub fn recall_curve_export<W: Write>(&self, out: W) -> Result<()> {
        write_curves_csv(std::slice::from_ref(self), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{OverallStatus, StudyType};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn reg(id: &str, completion: Option<&str>) -> Registration {
        Registration {
            nct_id: NctId::new(id).unwrap(),
            brief_title: "t".into(),
            official_title: String::new(),
            brief_summary: String::new(),
            detailed_description: String::new(),
            conditions: vec![],
            received_date: date("2008-01-01"),
            completion_date: completion.map(date),
            overall_status: OverallStatus::Completed,
            study_type: StudyType::Interventional,
            phase: None,
            enrollment: None,
            funding_class: None,
        }
    }

    fn art(pmid: u64, published: Option<&str>) -> Article {
        Article {
            pmid: Pmid(pmid),
            title: "t".into(),
            abstract_text: String::new(),
            publication_date: published.map(date),
            publication_types: Default::default(),
            linked_nct_ids: Default::default(),
        }
    }

    #[test]
    fn target_is_the_post_completion_link() {
        let r = reg("NCT00000001", Some("2010-06-30"));
        let (a, b) = (art(5, Some("2010-01-01")), art(6, Some("2011-01-01")));
        assert_eq!(select_target(&r, &[&a, &b]), Ok(Pmid(6)));
    }

    #[test]
    fn link_before_completion_is_excluded() {
        let r = reg("NCT00000001", Some("2010-06-30"));
        let a = art(5, Some("2009-01-01"));
        assert_eq!(
            select_target(&r, &[&a]),
            Err(NO_POST_COMPLETION_LINK.to_string())
        );
        let same_day = art(7, Some("2010-06-30"));
        assert!(select_target(&r, &[&same_day]).is_err());
    }

    #[test]
    fn same_date_prefers_smaller_pmid() {
        let r = reg("NCT00000001", Some("2010-06-30"));
        let (a, b) = (art(900, Some("2012-03-01")), art(40, Some("2012-03-01")));
        assert_eq!(select_target(&r, &[&a, &b]), Ok(Pmid(40)));
    }

    #[test]
    fn missing_dates() {
        let a = art(5, Some("2012-01-01"));
        assert_eq!(
            select_target(&reg("NCT00000001", None), &[&a]),
            Err(MISSING_COMPLETION_DATE.to_string())
        );
        let undated = art(6, None);
        let r = reg("NCT00000001", Some("2010-01-01"));
        assert!(select_target(&r, &[&undated]).is_err());
        assert_eq!(select_target(&r, &[&undated, &a]), Ok(Pmid(5)));
    }

    #[test]
    fn build_targets_reports_unresolvable_ids() {
        let regs = vec![
            reg("NCT00000001", Some("2010-01-01")),
            reg("NCT00000002", Some("2010-01-01")),
        ];
        let arts = vec![art(1, Some("2011-01-01"))];
        let link = |n: &str, p: u64| ReportedLink {
            nct_id: NctId::new(n).unwrap(),
            pmid: Pmid(p),
        };
        let b = Benchmark::new(
            "b",
            BenchmarkKind::Curated,
            vec![
                link("NCT00000001", 1),
                link("NCT00000002", 2),
                link("NCT00000003", 1),
            ],
        );
        let t = build_targets(&b, &regs, &arts);
        assert_eq!(
            t.targets,
            vec![Target {
                nct_id: NctId::new("NCT00000001").unwrap(),
                pmid: Pmid(1)
            }]
        );
        let reasons: Vec<&str> = t.excluded.iter().map(|e| e.reason.as_str()).collect();
        assert_eq!(
            reasons,
            vec!["no linked article in corpus", "registration not in corpus"]
        );
    }

    fn target_set(n: usize) -> TargetSet {
        TargetSet {
            benchmark: "fixture".into(),
            kind: BenchmarkKind::Reported,
            targets: (0..n)
                .map(|i| Target {
                    nct_id: NctId::new(&format!("NCT{i:08}")).unwrap(),
                    pmid: Pmid(i as u64 + 1),
                })
                .collect(),
            excluded: vec![],
        }
    }

    fn ranks_of(t: &TargetSet, ranks: &[usize]) -> Vec<TargetRank> {
        t.targets
            .iter()
            .zip(ranks)
            .map(|(t, &rank)| TargetRank {
                nct_id: t.nct_id.clone(),
                pmid: t.pmid,
                rank,
            })
            .collect()
    }

    #[test]
    fn engineered_ranks() {
        let t = target_set(4);
        let r = summarize(
            &t,
            MethodConfig::default(),
            ranks_of(&t, &[1, 1, 3, 60]),
            vec![],
            100,
            &CurveGrid::Default,
        )
        .unwrap();
        assert_eq!(r.median_rank, 2.0);
        assert_eq!(r.first_ranked_pct, 50.0);
        assert_eq!(r.recall_at_50_pct, 75.0);
        assert_eq!(r.iqr, Iqr { q1: 1.0, q3: 17.25 });
        assert_eq!(r.recall_curve.last().unwrap().recall, 1.0);
    }

    #[test]
    fn all_first() {
        let t = target_set(3);
        let r = summarize(
            &t,
            MethodConfig::default(),
            ranks_of(&t, &[1, 1, 1]),
            vec![],
            10,
            &CurveGrid::Default,
        )
        .unwrap();
        assert_eq!(
            (r.median_rank, r.iqr.q1, r.iqr.q3, r.recall_at_50_pct),
            (1.0, 1.0, 1.0, 100.0)
        );
        assert!(r.recall_curve.iter().all(|p| p.recall == 1.0));
    }

    #[test]
    fn cumulative_curve() {
        let t = target_set(3);
        let grid = CurveGrid::Explicit(vec![0, 1, 2, 3]);
        let r = summarize(
            &t,
            MethodConfig::default(),
            ranks_of(&t, &[1, 2, 3]),
            vec![],
            3,
            &grid,
        )
        .unwrap();
        let got: Vec<(usize, f64)> = r.recall_curve.iter().map(|p| (p.n, p.recall)).collect();
        assert_eq!(
            got,
            vec![(0, 0.0), (1, 1.0 / 3.0), (2, 2.0 / 3.0), (3, 1.0)]
        );
    }

    #[test]
    fn empty_after_exclusions_is_an_error() {
        let t = target_set(0);
        let err = summarize(
            &t,
            MethodConfig::default(),
            vec![],
            vec![],
            10,
            &CurveGrid::Default,
        );
        assert!(matches!(err, Err(Error::EmptyBenchmark(_))));
    }

    #[test]
    fn default_grid() {
        let g = CurveGrid::Default.points(276_307);
        assert_eq!(&g[..3], &[1, 2, 3]);
        assert!(g.contains(&50) && g.contains(&100) && g.contains(&112));
        assert_eq!(*g.last().unwrap(), 276_307);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(CurveGrid::Default.points(40).len(), 100);
    }

    #[test]
    fn benchmark_tsv_round_trip() {
        let text = "nct_id\tpmid\n# comment\nNCT00000002\t7\nNCT00000001\t9\nNCT00000001\t9\n";
        let b = Benchmark::from_tsv(text.as_bytes(), "x", BenchmarkKind::Curated).unwrap();
        assert_eq!(b.links.len(), 2);
        assert_eq!(b.links[0].nct_id.as_str(), "NCT00000001");
        let mut out = Vec::new();
        b.write_tsv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "nct_id\tpmid\nNCT00000001\t9\nNCT00000002\t7\n"
        );
        assert!(Benchmark::from_tsv("NCT1\t7\n".as_bytes(), "x", BenchmarkKind::Curated).is_err());
    }

    fn reference_quantile(xs: &[f64], p: f64) -> f64 {
        // Hyndman and Fan definition 7 via 1-based positions.
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let pos = 1.0 + (n - 1.0) * p;
        let j = pos.floor();
        let g = pos - j;
        let x = |k: f64| v[(k.clamp(1.0, n) as usize) - 1];
        (1.0 - g) * x(j) + g * x(j + 1.0)
    }

    proptest! {
        #[test]
        fn quartiles_match_reference(ranks in proptest::collection::vec(1usize..5000, 1..60)) {
            let mut sorted: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
            sorted.sort_by(f64::total_cmp);
            for p in [0.25, 0.5, 0.75] {
                let got = quantile(&sorted, p);
                let want = reference_quantile(&sorted, p);
                prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
            }
            prop_assert!(quantile(&sorted, 0.25) <= quantile(&sorted, 0.5));
            prop_assert!(quantile(&sorted, 0.5) <= quantile(&sorted, 0.75));
        }

        #[test]
        fn curve_is_monotone_and_reaches_one(ranks in proptest::collection::vec(1usize..500, 1..40)) {
            let t = target_set(ranks.len());
            let r = summarize(&t, MethodConfig::default(), ranks_of(&t, &ranks), vec![], 500, &CurveGrid::Default).unwrap();
            prop_assert!(r.recall_curve.windows(2).all(|w| w[0].recall <= w[1].recall));
            prop_assert_eq!(r.recall_curve.last().unwrap().recall, 1.0);
            prop_assert_eq!(recall_at(&ranks, 0), 0.0);
        }
    }
}
