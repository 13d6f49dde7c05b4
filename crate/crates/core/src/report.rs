//! Template-driven individual and group reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instruments::{audit_zone, AUDIT_ID, FAS_ID, GSE_ID, KIDSCREEN_ID, KIDSCREEN_SCALES};
use crate::scalar::{display_decimal, RealScalar, Scalar};
use crate::scoring::ScoreReport;
use crate::sna::{suggest_influencers, suggest_mediators, AnalysisResult, Centrality, SnaError, Sociomatrix};

const ENGLISH: &str = include_str!("../templates/en.toml");

/// Values closer than this count as equal when ranking percentiles.
pub const PERCENTILE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("respondent `{0}` has no submitted response")]
    NoData(String),
    #[error("respondent `{0}` is not in the network")]
    UnknownNode(String),
    #[error("group report needs at least 2 scored respondents, found {0}")]
    InsufficientData(usize),
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
    #[error("template file: {0}")]
    Template(String),
    #[error("structured report: {0}")]
    Parse(String),
    #[error(transparent)]
    Sna(#[from] SnaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub very_high: u32,
    pub high: u32,
    pub moderate: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Words {
    pub very_high: String,
    pub high: String,
    pub moderate: String,
    pub low: String,
    pub none: String,
    pub list_separator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualTemplates {
    pub network: String,
    pub influencers: String,
    pub mediators: String,
    pub consumption: String,
    pub no_audit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTemplates {
    pub summary: String,
    pub community: String,
    pub community_no_audit: String,
    pub correlation: String,
    pub not_computable: String,
}

/// A locale's template file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub locale: String,
    pub levels: Levels,
    pub words: Words,
    pub individual: IndividualTemplates,
    pub group: GroupTemplates,
}

const NETWORK_SLOTS: &[&str] = &[
    "respondent",
    "relation",
    "wave",
    "popularity_level",
    "popularity_percentile",
    "influence_level",
    "influence_percentile",
    "mediation_level",
    "mediation_percentile",
    "community",
    "community_size",
];

fn slots(template: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or_else(|| format!("unclosed slot in `{template}`"))?;
        out.push(&after[..end]);
        rest = &after[end + 1..];
    }
    Ok(out)
}

/// Replaces each `{name}` slot with its value.
pub fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                let name = &after[..end];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[start..start + end + 2]),
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

impl Templates {
    /// The shipped English templates.
    pub fn english() -> Self {
        Templates::from_toml(ENGLISH).expect("shipped templates are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, ReportError> {
        let t: Templates = toml::from_str(text).map_err(|e| ReportError::Template(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), ReportError> {
        let checks: [(&str, &str, &[&str]); 10] = [
            ("individual.network", &self.individual.network, NETWORK_SLOTS),
            ("individual.influencers", &self.individual.influencers, &["respondent", "influencers"]),
            ("individual.mediators", &self.individual.mediators, &["respondent", "mediators"]),
            (
                "individual.consumption",
                &self.individual.consumption,
                &["respondent", "audit_score", "zone", "zone_label", "intervention"],
            ),
            ("individual.no_audit", &self.individual.no_audit, &["respondent"]),
            ("group.summary", &self.group.summary, &["wave", "relation", "respondents", "communities", "modularity"]),
            ("group.community", &self.group.community, &["community", "size", "mean_audit", "audit_n"]),
            ("group.community_no_audit", &self.group.community_no_audit, &["community", "size"]),
            ("group.correlation", &self.group.correlation, &["left", "right", "rho", "n"]),
            ("group.not_computable", &self.group.not_computable, &["left", "right", "n"]),
        ];
        for (name, template, allowed) in checks {
            for slot in slots(template).map_err(ReportError::Template)? {
                if !allowed.contains(&slot) {
                    return Err(ReportError::Template(format!("{name}: unknown slot `{{{slot}}}`")));
                }
            }
        }
        let l = &self.levels;
        if !(l.very_high > l.high && l.high > l.moderate && l.very_high <= 100) {
            return Err(ReportError::Template("levels must satisfy 100 >= very_high > high > moderate".into()));
        }
        Ok(())
    }

    pub fn level(&self, percentile: u32) -> &str {
        let l = &self.levels;
        if percentile >= l.very_high {
            &self.words.very_high
        } else if percentile >= l.high {
            &self.words.high
        } else if percentile >= l.moderate {
            &self.words.moderate
        } else {
            &self.words.low
        }
    }

    fn list(&self, items: &[String]) -> String {
        if items.is_empty() {
            self.words.none.clone()
        } else {
            items.join(&self.words.list_separator)
        }
    }
}

impl Default for Templates {
    fn default() -> Self {
        Templates::english()
    }
}

/// `floor(100 × share of other nodes with a strictly lower value)`.
pub fn percentile<F: RealScalar>(values: &[F], i: usize) -> u32 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let tol = F::from_f64(PERCENTILE_TOLERANCE).unwrap_or_else(F::epsilon);
    let lower = values.iter().enumerate().filter(|&(j, v)| j != i && *v < values[i] - tol).count();
    (100 * lower / (n - 1)) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight<F> {
    pub measure: Centrality,
    pub value: F,
    pub percentile: u32,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub zone: u8,
    pub label: String,
    pub intervention: String,
    pub score: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualReport<F> {
    pub respondent_id: String,
    pub wave_id: String,
    pub relation: String,
    pub network: String,
    pub consumption: String,
    pub gauge: Option<Gauge>,
    pub highlights: Vec<Highlight<F>>,
    /// 1-based community number.
    pub community: usize,
    pub community_size: usize,
    pub influencers: Vec<String>,
    pub mediators: Vec<String>,
}

const SLOT_KEYS: [(Centrality, &str, &str); 3] = [
    (Centrality::Popularity, "popularity_level", "popularity_percentile"),
    (Centrality::Mediation, "mediation_level", "mediation_percentile"),
    (Centrality::Influence, "influence_level", "influence_percentile"),
];

pub fn audit_scale() -> String {
    format!("{AUDIT_ID}.total")
}

/// Network and consumption paragraphs for one respondent.
pub fn individual_report<S: Scalar, W: Scalar, F: RealScalar>(
    templates: &Templates,
    scores: Option<&ScoreReport<S>>,
    matrix: &Sociomatrix<W>,
    analysis: &AnalysisResult<F>,
    node: &str,
    k: usize,
) -> Result<IndividualReport<F>, ReportError> {
    let scores = scores.ok_or_else(|| ReportError::NoData(node.to_string()))?;
    let i = analysis.index_of(node).ok_or_else(|| ReportError::UnknownNode(node.to_string()))?;
    let highlights: Vec<Highlight<F>> = Centrality::ALL
        .iter()
        .map(|&m| {
            let values = &analysis.measure(m).values;
            let p = percentile(values, i);
            Highlight { measure: m, value: values[i], percentile: p, level: templates.level(p).to_string() }
        })
        .collect();
    let community = analysis.partition.membership[i];
    let community_size = analysis.partition.membership.iter().filter(|&&c| c == community).count();
    let influencers = suggest_influencers(matrix, &analysis.influence, node, k)?;
    let mediators = suggest_mediators(matrix, node, k)?;

    let h = |m: Centrality| &highlights[Centrality::ALL.iter().position(|&x| x == m).unwrap_or(0)];
    let who = node.to_string();
    let mut vars = vec![
        ("respondent", who.clone()),
        ("relation", analysis.relation.clone()),
        ("wave", analysis.wave_id.clone()),
        ("community", (community + 1).to_string()),
        ("community_size", community_size.to_string()),
        ("influencers", templates.list(&influencers)),
        ("mediators", templates.list(&mediators)),
    ];
    for (m, level, pct) in SLOT_KEYS {
        vars.push((level, h(m).level.clone()));
        vars.push((pct, h(m).percentile.to_string()));
    }
    let network = [
        fill(&templates.individual.network, &vars),
        fill(&templates.individual.influencers, &vars),
        fill(&templates.individual.mediators, &vars),
    ]
    .join(" ");

    let (consumption, gauge) = match scores.score(&audit_scale()) {
        Some(total) => {
            let z = audit_zone(total).map_err(|e| ReportError::Parse(e.to_string()))?;
            let gauge = Gauge { zone: z.zone, label: z.label, intervention: z.intervention, score: display_decimal(total) };
            let vars = [
                ("respondent", who.clone()),
                ("audit_score", gauge.score.clone()),
                ("zone", gauge.zone.to_string()),
                ("zone_label", gauge.label.clone()),
                ("intervention", gauge.intervention.clone()),
            ];
            (fill(&templates.individual.consumption, &vars), Some(gauge))
        }
        None => (fill(&templates.individual.no_audit, &[("respondent", who.clone())]), None),
    };

    Ok(IndividualReport {
        respondent_id: who,
        wave_id: analysis.wave_id.clone(),
        relation: analysis.relation.clone(),
        network,
        consumption,
        gauge,
        highlights,
        community: community + 1,
        community_size,
        influencers,
        mediators,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityRow {
    /// 1-based community number.
    pub community: usize,
    pub size: usize,
    pub members: Vec<String>,
    pub mean_audit: Option<String>,
    pub audit_n: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationNote<F> {
    pub left: String,
    pub right: String,
    pub n: usize,
    /// `None` when a variable has zero variance or fewer than 2 pairs exist.
    pub rho: Option<F>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport<F> {
    pub wave_id: String,
    pub relation: String,
    pub respondents: usize,
    pub modularity: F,
    pub summary: String,
    pub communities: Vec<CommunityRow>,
    pub correlations: Vec<CorrelationNote<F>>,
}

impl<F> GroupReport<F> {
    pub fn community_sizes(&self) -> Vec<usize> {
        self.communities.iter().map(|c| c.size).collect()
    }
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks<T: PartialOrd, F: RealScalar>(values: &[T]) -> Vec<F> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![F::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = F::from_f64((start + 1 + end) as f64 / 2.0).unwrap_or_else(F::nan);
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation; `None` for fewer than 2 pairs or zero variance.
pub fn spearman<T: PartialOrd, F: RealScalar>(x: &[T], y: &[T]) -> Option<F> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let rx: Vec<F> = average_ranks(x);
    let ry: Vec<F> = average_ranks(y);
    let nf = F::from_usize(n)?;
    let mx = rx.iter().copied().sum::<F>() / nf;
    let my = ry.iter().copied().sum::<F>() / nf;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (*a - mx, *b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx <= F::zero() || syy <= F::zero() {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Scales correlated against the AUDIT total.
pub fn correlated_scales() -> Vec<String> {
    let mut out = vec![format!("{FAS_ID}.total"), format!("{GSE_ID}.total")];
    out.extend(KIDSCREEN_SCALES.iter().map(|(name, _, _)| format!("{KIDSCREEN_ID}.{name}")));
    out
}

pub fn format_measure<F: RealScalar>(v: F) -> String {
    format!("{:.3}", v.to_f64().unwrap_or(f64::NAN))
}

/// Community table and descriptive rank correlations for a wave.
pub fn group_report<S: Scalar, F: RealScalar>(
    templates: &Templates,
    analysis: &AnalysisResult<F>,
    scores: &[ScoreReport<S>],
) -> Result<GroupReport<F>, ReportError> {
    if scores.len() < 2 {
        return Err(ReportError::InsufficientData(scores.len()));
    }
    let by_id: BTreeMap<&str, &ScoreReport<S>> = scores.iter().map(|r| (r.respondent_id.as_str(), r)).collect();
    let audit = audit_scale();

    let communities = analysis
        .partition
        .communities()
        .into_iter()
        .enumerate()
        .map(|(c, idx)| {
            let members: Vec<String> = idx.iter().map(|&i| analysis.nodes[i].clone()).collect();
            let totals: Vec<&S> = members.iter().filter_map(|m| by_id.get(m.as_str())?.score(&audit)).collect();
            let mean_audit = (!totals.is_empty()).then(|| {
                let sum = totals.iter().fold(S::zero(), |acc, v| acc + (*v).clone());
                display_decimal(&(sum / S::from_count(totals.len())))
            });
            let mut vars = vec![
                ("community", (c + 1).to_string()),
                ("size", members.len().to_string()),
                ("audit_n", totals.len().to_string()),
            ];
            let text = match &mean_audit {
                Some(m) => {
                    vars.push(("mean_audit", m.clone()));
                    fill(&templates.group.community, &vars)
                }
                None => fill(&templates.group.community_no_audit, &vars),
            };
            CommunityRow { community: c + 1, size: members.len(), members, mean_audit, audit_n: totals.len(), text }
        })
        .collect::<Vec<_>>();

    let mut correlations = Vec::new();
    for right in correlated_scales() {
        let pairs: Vec<(&S, &S)> = scores.iter().filter_map(|r| Some((r.score(&audit)?, r.score(&right)?))).collect();
        if !scores.iter().any(|r| r.score(&right).is_some()) {
            continue;
        }
        let (x, y): (Vec<&S>, Vec<&S>) = pairs.into_iter().unzip();
        let rho: Option<F> = spearman(&x, &y);
        let mut vars = vec![("left", audit.clone()), ("right", right.clone()), ("n", x.len().to_string())];
        let text = match rho {
            Some(r) => {
                vars.push(("rho", format_measure(r)));
                fill(&templates.group.correlation, &vars)
            }
            None => fill(&templates.group.not_computable, &vars),
        };
        correlations.push(CorrelationNote { left: audit.clone(), right, n: x.len(), rho, text });
    }

    let summary = fill(
        &templates.group.summary,
        &[
            ("wave", analysis.wave_id.clone()),
            ("relation", analysis.relation.clone()),
            ("respondents", scores.len().to_string()),
            ("communities", communities.len().to_string()),
            ("modularity", format_measure(analysis.partition.modularity)),
        ],
    );
    Ok(GroupReport {
        wave_id: analysis.wave_id.clone(),
        relation: analysis.relation.clone(),
        respondents: scores.len(),
        modularity: analysis.partition.modularity,
        summary,
        communities,
        correlations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Report<F> {
    Individual(IndividualReport<F>),
    Group(GroupReport<F>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "plain" | "txt" => Ok(ReportFormat::Text),
            "json" | "structured" => Ok(ReportFormat::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Text => "text",
            ReportFormat::Json => "json",
        })
    }
}

impl<F: RealScalar + Serialize> Report<F> {
    pub fn plain_text(&self) -> String {
        match self {
            Report::Individual(r) => format!("{}\n\n{}\n", r.network, r.consumption),
            Report::Group(g) => {
                let mut out = g.summary.clone();
                out.push('\n');
                for row in &g.communities {
                    out.push('\n');
                    out.push_str(&row.text);
                }
                if !g.correlations.is_empty() {
                    out.push('\n');
                }
                for c in &g.correlations {
                    out.push('\n');
                    out.push_str(&c.text);
                }
                out.push('\n');
                out
            }
        }
    }
}

pub fn render_report<F: RealScalar + Serialize>(report: &Report<F>, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => report.plain_text().into_bytes(),
        ReportFormat::Json => serde_json::to_vec_pretty(report).expect("reports serialize"),
    }
}

/// Renders by format name; unknown names are an error.
pub fn render_report_as<F: RealScalar + Serialize>(report: &Report<F>, format: &str) -> Result<Vec<u8>, ReportError> {
    Ok(render_report(report, format.parse()?))
}

pub fn parse_structured<F: RealScalar + for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Report<F>, ReportError> {
    serde_json::from_slice(bytes).map_err(|e| ReportError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roster::EdgeList;
    use crate::scoring::ScoreEntry;
    use crate::sna::{analyze, build_matrix};
    use crate::Score;

    fn int(v: i64) -> Score {
        Score::from_integer(v.into())
    }

    fn scores(id: &str, audit: i64, fas: Option<i64>) -> ScoreReport {
        let mut entries =
            vec![ScoreEntry { scale: audit_scale(), score: int(audit), band: None, guidance: None }];
        if let Some(f) = fas {
            entries.push(ScoreEntry { scale: format!("{FAS_ID}.total"), score: int(f), band: None, guidance: None });
        }
        ScoreReport { wave_id: "w1".into(), respondent_id: id.into(), questionnaire_id: "q".into(), version: 1, entries }
    }

    fn network(n: usize, edges: &[(usize, usize)]) -> (Sociomatrix, AnalysisResult<f64>) {
        let nodes: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
        let mut e = EdgeList::new("friendship", "w1");
        for &(a, b) in edges {
            e.push(nodes[a].clone(), nodes[b].clone(), int(1));
        }
        let m = build_matrix(&e, &nodes).unwrap();
        let a = analyze(&m).unwrap();
        (m, a)
    }

    #[test]
    fn shipped_templates_load() {
        let t = Templates::english();
        assert_eq!(t.level(90), "very high");
        assert_eq!(t.level(89), "high");
        assert_eq!(t.level(70), "high");
        assert_eq!(t.level(30), "moderate");
        assert_eq!(t.level(29), "low");
    }

    #[test]
    fn unknown_slot_is_rejected() {
        let bad = ENGLISH.replace("{community_size} members", "{size_of_group} members");
        assert!(matches!(Templates::from_toml(&bad), Err(ReportError::Template(_))));
    }

    #[test]
    fn fill_replaces_slots() {
        assert_eq!(fill("a {x} b {y}", &[("x", "1".into()), ("y", "2".into())]), "a 1 b 2");
        assert_eq!(fill("{z}", &[]), "{z}");
    }

    #[test]
    fn percentile_counts_strictly_lower() {
        let v = [1.0, 2.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 3), 100);
        assert_eq!(percentile(&v, 1), 33);
        assert_eq!(percentile(&v, 0), 0);
        assert_eq!(percentile(&[3.0], 0), 0);
    }

    #[test]
    fn most_nominated_is_very_high() {
        let (m, a) = network(5, &[(1, 0), (2, 0), (3, 0), (4, 0), (0, 1)]);
        let r = individual_report(&Templates::english(), Some(&scores("S0", 0, None)), &m, &a, "S0", 3).unwrap();
        assert_eq!(r.highlights[0].percentile, 100);
        assert!(r.network.contains("very high popularity (100th percentile)"));
        assert!(r.consumption.contains("Zone I"));
        assert!(r.consumption.contains("Alcohol education"));
        assert_eq!(r.influencers, vec!["S1"]);
    }

    #[test]
    fn missing_response_is_no_data() {
        let (m, a) = network(3, &[(0, 1)]);
        let err = individual_report::<Score, _, _>(&Templates::english(), None, &m, &a, "S0", 3).unwrap_err();
        assert_eq!(err, ReportError::NoData("S0".into()));
        let err = individual_report(&Templates::english(), Some(&scores("X", 0, None)), &m, &a, "X", 3).unwrap_err();
        assert_eq!(err, ReportError::UnknownNode("X".into()));
    }

    #[test]
    fn group_report_tables_and_correlations() {
        let (_, a) = network(7, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 6), (6, 3), (3, 5), (2, 3)]);
        let reports: Vec<ScoreReport> = (0..7).map(|i| scores(&format!("S{i}"), i as i64, Some(i as i64 * 2))).collect();
        let g = group_report(&Templates::english(), &a, &reports).unwrap();
        assert_eq!(g.community_sizes(), vec![3, 4]);
        assert_eq!(g.communities[0].mean_audit.as_deref(), Some("1"));
        assert_eq!(g.correlations[0].rho, Some(1.0));
        assert!(g.correlations[0].text.contains("1.000"));
        assert!(matches!(group_report::<Score, f64>(&Templates::english(), &a, &reports[..1]), Err(ReportError::InsufficientData(1))));
    }

    #[test]
    fn constant_audit_is_not_computable() {
        let (_, a) = network(3, &[(0, 1)]);
        let reports: Vec<ScoreReport> = (0..3).map(|i| scores(&format!("S{i}"), 4, Some(i))).collect();
        let g = group_report(&Templates::english(), &a, &reports).unwrap();
        assert_eq!(g.correlations[0].rho, None);
        assert!(g.correlations[0].text.contains("not computable"));
    }

    #[test]
    fn spearman_uses_average_ranks() {
        let r: Vec<f64> = average_ranks(&[10, 20, 20, 30]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(spearman::<_, f64>(&[1, 2, 3], &[3, 2, 1]), Some(-1.0));
        assert_eq!(spearman::<_, f64>(&[1], &[1]), None);
    }

    #[test]
    fn render_formats() {
        let (m, a) = network(3, &[(0, 1), (1, 2)]);
        let r = Report::Individual(
            individual_report(&Templates::english(), Some(&scores("S1", 12, None)), &m, &a, "S1", 3).unwrap(),
        );
        let text = render_report(&r, ReportFormat::Text);
        assert!(!text.is_empty());
        let json = render_report(&r, ReportFormat::Json);
        let back: Report<f64> = parse_structured(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(render_report(&back, ReportFormat::Json), json);
        assert!(matches!(render_report_as(&r, "docx"), Err(ReportError::UnknownFormat(_))));
    }
}
