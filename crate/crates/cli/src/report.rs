//! Deterministic structured-text reports. Every report starts with a
//! versioned header line; iteration everywhere is over ordered collections,
//! so identical inputs produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write;

use parakb::config::LikelihoodCombinator;
use parakb::grounding::{render_support, render_support_family, GroundedKB, SupportSet};
use parakb::query::ScoredSummary;
use parakb::worlds::{likelihood, RankedAnswer, World};
use parakb::{Atom, Candidate, Query};

pub fn ground_report(gkb: &GroundedKB) -> String {
    let mut out = String::from("# parakb ground report v1\n");
    for atom in &gkb.atoms {
        let _ = writeln!(
            out,
            "{}\t{}",
            atom,
            render_support_family(gkb.provenance.supports(atom))
        );
    }
    out
}

pub fn ground_report_atoms_only<'a>(atoms: impl Iterator<Item = &'a Atom>) -> String {
    let mut out = String::from("# parakb ground report v1\n");
    for atom in atoms {
        let _ = writeln!(out, "{atom}");
    }
    out
}

pub fn mis_report(mis: &[SupportSet]) -> String {
    let mut lines: Vec<String> = mis.iter().map(render_support).collect();
    lines.sort();
    let mut out = String::from("# parakb mis report v1\n");
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn summary_block(
    out: &mut String,
    summary: &ScoredSummary<f64>,
    combinator: LikelihoodCombinator,
    indent: &str,
) {
    let like = likelihood(&World::default(), summary, combinator);
    let _ = writeln!(
        out,
        "{indent}summary likelihood={like:.6} merged={}",
        summary.graph.merged
    );
    for (member, (score, error)) in summary.graph.members.iter().zip(&summary.matches) {
        let _ = writeln!(
            out,
            "{indent}  member score={score:.6} error={error:.6} {member}"
        );
    }
}

pub fn query_report(
    query: &Query,
    justification: &BTreeMap<Candidate, Vec<ScoredSummary<f64>>>,
    combinator: LikelihoodCombinator,
) -> String {
    let mut out = String::from("# parakb query report v1\n");
    let _ = writeln!(out, "query: {query}");
    if justification.is_empty() {
        out.push_str("no candidates\n");
        return out;
    }
    for (candidate, summaries) in justification {
        let _ = writeln!(out, "candidate {candidate}");
        for summary in summaries {
            summary_block(&mut out, summary, combinator, "  ");
        }
    }
    out
}

pub fn rank_report(
    query: &Query,
    ranked: &[RankedAnswer<f64>],
    justification: &BTreeMap<Candidate, Vec<ScoredSummary<f64>>>,
    combinator: LikelihoodCombinator,
) -> String {
    let mut out = String::from("# parakb rank report v1\n");
    let _ = writeln!(out, "query: {query}");
    if ranked.is_empty() {
        out.push_str("no candidates\n");
        return out;
    }
    for answer in ranked {
        let _ = writeln!(
            out,
            "candidate {} probability={:.12}",
            answer.candidate, answer.probability
        );
        for w in &answer.worlds {
            let _ = writeln!(
                out,
                "  world likelihood={:.6} prior={:.6} true={}",
                w.likelihood, w.prior, w.world
            );
        }
        if let Some(summaries) = justification.get(&answer.candidate) {
            for summary in summaries {
                summary_block(&mut out, summary, combinator, "  ");
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn explain_report(
    query: &Query,
    candidate: &Candidate,
    gkb: &GroundedKB,
    summaries: Option<&Vec<ScoredSummary<f64>>>,
    answer: Option<&RankedAnswer<f64>>,
    combinator: LikelihoodCombinator,
) -> String {
    let mut out = String::from("# parakb explain report v1\n");
    let _ = writeln!(out, "query: {query}");
    let _ = writeln!(out, "candidate {candidate}");
    let Some(summaries) = summaries else {
        out.push_str("status: not a candidate (no consistent match produces it)\n");
        return out;
    };
    out.push_str("status: candidate\n");
    out.push_str("hypotheses:\n");
    for summary in summaries {
        summary_block(&mut out, summary, combinator, "  ");
        for member in &summary.graph.members {
            for atom in member.atoms() {
                let _ = writeln!(
                    out,
                    "    support {}\t{}",
                    atom,
                    render_support_family(gkb.provenance.supports(atom))
                );
            }
        }
    }
    out.push_str("mis checks:\n");
    let mis = gkb.minimal_inconsistent_subsets();
    if mis.is_empty() {
        out.push_str("  knowledge base is consistent\n");
    }
    for m in mis {
        let contained = summaries.iter().any(|s| {
            s.graph
                .members
                .iter()
                .any(|member| m.iter().all(|atom| member.atoms().contains(atom)))
        });
        let _ = writeln!(
            out,
            "  mis {} embedded_in_hypothesis={}",
            render_support(m),
            contained
        );
    }
    out.push_str("worlds:\n");
    match answer {
        Some(answer) => {
            for w in &answer.worlds {
                let _ = writeln!(
                    out,
                    "  world likelihood={:.6} prior={:.6} true={}",
                    w.likelihood, w.prior, w.world
                );
            }
            let _ = writeln!(out, "probability={:.12}", answer.probability);
        }
        None => out.push_str("  (ranking unavailable)\n"),
    }
    out
}
