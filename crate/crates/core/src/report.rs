//! One run: overlap table → linear systems → feasibility → flow → inequalities.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::Serialize;

use crate::config::{CapsDoc, ChecksDoc, RunConfig};
use crate::error::{Error, Result};
use crate::feasibility::{solve_feasibility, verify_certificate, FeasibilityResult, LinearSystem, Status};
use crate::flownet::{build_network, flow_to_distribution, max_flow, min_cut, FlowNetwork};
use crate::fosd::{
    classify, corollary1_report, dedup_records, enumerate_part1, enumerate_part2, BinaryRelation, Case, InequalityRecord, Part,
};
use crate::obs::{ObservedDistribution, Support};
use crate::psi::{psi_table, PsiTable};
use crate::scalar::Scalar;
use crate::submono::{lemma_harness, HARNESS_MAX_TREATMENTS};
use crate::subset::Subset;
use crate::typespace::{build_full_system, Preset, RestrictionSpec, TypeSpace};
use crate::Rational;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FALSIFIED: i32 = 2;

/// Everything a run needs, resolved from a config.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub d: ObservedDistribution<Rational>,
    pub spec: RestrictionSpec<Rational>,
    pub checks: ChecksDoc,
    pub caps: CapsDoc,
    pub binarized_at: Option<String>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let d = cfg.distribution()?;
    let ts = TypeSpace::for_support(&d.support, cfg.caps.types)?;
    let spec = cfg.restriction.build(&d.support, &ts)?;
    Ok(Prepared { d, spec, checks: cfg.checks, caps: cfg.caps, binarized_at: cfg.input.binarize.clone() })
}

#[derive(Clone, Debug, Serialize)]
pub struct CellEcho {
    pub z: String,
    pub x: String,
    pub bin: String,
    pub p: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputEcho {
    pub outcome_bins: Vec<String>,
    pub sigma_algebra: String,
    pub treatments: Vec<String>,
    pub instruments: Vec<String>,
    pub treatment_order: Option<Vec<String>>,
    pub binarized_at: Option<String>,
    pub instrument_mass: Option<Vec<String>>,
    /// `P[x | z]` in (z, x) order.
    pub cond_treatment: Vec<CellEcho>,
    pub cells: Vec<CellEcho>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictionEcho {
    pub preset: Option<String>,
    pub ruled_out: Vec<String>,
    pub extra_rows: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiEcho {
    pub treatment: String,
    pub instruments: Vec<String>,
    pub vector: Vec<String>,
    pub mass: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightEcho {
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityEcho {
    pub system: String,
    pub variables: usize,
    pub rows: usize,
    pub status: Status,
    /// Nonzero type probabilities of the witness.
    pub witness: Vec<WeightEcho>,
    /// Nonzero certificate multipliers, labelled by row.
    pub certificate: Vec<WeightEcho>,
    pub certificate_verified: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowRun {
    pub exclusion_caps: bool,
    pub value: String,
    pub min_cut: String,
    pub cut_edges: Vec<String>,
    pub distribution: Vec<WeightEcho>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecordEcho {
    pub kind: Part,
    pub s: Vec<String>,
    pub lambda: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_prime: Option<Vec<String>>,
    pub lhs: String,
    pub rhs: String,
    pub slack: String,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FosdEcho {
    pub skipped: Option<String>,
    pub part1: Vec<RecordEcho>,
    /// Distinct part-2 inequalities; `part2_enumerated` counts them all.
    pub part2: Vec<RecordEcho>,
    pub part2_enumerated: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderedBoundEcho {
    pub counts_toward_verdict: bool,
    pub records: Vec<RecordEcho>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessEcho {
    pub treatments: usize,
    pub relations: usize,
    pub checks: [usize; 6],
    pub minimality_checks: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Checks {
    pub feasibility: Option<FeasibilityEcho>,
    pub restriction_only: Option<FeasibilityEcho>,
    pub flow: Vec<FlowRun>,
    pub fosd: Option<FosdEcho>,
    pub corollary1: Option<OrderedBoundEcho>,
    pub submono_harness: Option<HarnessEcho>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationEcho {
    pub case: u8,
    pub description: String,
    /// Sets `S` of violated part-1 inequalities.
    pub part1_sets: Vec<Vec<String>>,
    /// Sets `S` of violated part-2 inequalities.
    pub part2_sets: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub falsified: bool,
    pub exit_status: i32,
    pub reasons: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub input: InputEcho,
    pub restriction: RestrictionEcho,
    pub psi: Vec<PsiEcho>,
    pub sharpness: String,
    pub notes: Vec<String>,
    pub checks: Checks,
    pub classification: Option<ClassificationEcho>,
    pub verdict: Verdict,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

fn frac(v: &Rational) -> String {
    v.to_fraction()
}

fn labels(s: &Support<Rational>, set: Subset) -> Vec<String> {
    s.treatment_labels(set)
}

fn echo_record(s: &Support<Rational>, r: &InequalityRecord<Rational>) -> RecordEcho {
    RecordEcho {
        kind: r.kind,
        s: labels(s, r.s),
        lambda: labels(s, r.lambda),
        lambda_prime: r.lambda_prime.map(|lp| labels(s, lp)),
        lhs: frac(&r.lhs),
        rhs: frac(&r.rhs),
        slack: frac(&r.slack),
        violated: r.violated,
    }
}

fn echo_input(p: &Prepared) -> InputEcho {
    let s = &p.d.support;
    let bins: Vec<String> = s
        .outcome_bins
        .iter()
        .enumerate()
        .map(|(i, b)| match &b.interval {
            None => b.label.clone(),
            Some((lo, hi)) => {
                let close = if i + 1 == s.n_bins() { ']' } else { ')' };
                format!("{} [{}, {}{close}", b.label, frac(lo), frac(hi))
            }
        })
        .collect();
    let mut cond = Vec::new();
    for (k, z) in s.instruments.iter().enumerate() {
        for (l, x) in s.treatments.iter().enumerate() {
            cond.push(CellEcho { z: z.clone(), x: x.clone(), bin: "*".into(), p: frac(&p.d.cond_treatment[k][l]) });
        }
    }
    InputEcho {
        sigma_algebra: format!("generated by the {} declared outcome bins; all overlap bounds are evaluated on this algebra", s.n_bins()),
        outcome_bins: bins,
        treatments: s.treatments.clone(),
        instruments: s.instruments.clone(),
        treatment_order: s.treatment_order.as_ref().map(|o| o.iter().map(|&l| s.treatments[l].clone()).collect()),
        binarized_at: p.binarized_at.clone(),
        instrument_mass: p.d.instrument_mass.as_ref().map(|m| m.iter().map(frac).collect()),
        cond_treatment: cond,
        cells: p
            .d
            .to_cells()
            .into_iter()
            .map(|c| CellEcho { z: c.z, x: c.x, bin: c.bin, p: frac(&c.prob) })
            .collect(),
    }
}

fn echo_feasibility(
    sys: &LinearSystem<Rational>,
    res: &FeasibilityResult<Rational>,
    ts: &TypeSpace,
    s: &Support<Rational>,
    name: &str,
) -> FeasibilityEcho {
    let witness = res
        .witness
        .as_ref()
        .map(|w| {
            w.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(j, v)| WeightEcho { name: ts.label(j, s), value: frac(v) })
                .collect()
        })
        .unwrap_or_default();
    let certificate = res
        .certificate
        .as_ref()
        .map(|y| {
            sys.rows
                .iter()
                .zip(y)
                .filter(|(_, v)| !v.is_zero())
                .map(|(r, v)| WeightEcho { name: r.tag.to_string(), value: frac(v) })
                .collect()
        })
        .unwrap_or_default();
    FeasibilityEcho {
        system: name.to_string(),
        variables: sys.n_vars,
        rows: sys.rows.len(),
        status: res.status,
        witness,
        certificate,
        certificate_verified: res.certificate.as_ref().map(|_| verify_certificate(sys, res)),
    }
}

fn run_flow(net: &FlowNetwork<Rational>, caps: bool, ts: &TypeSpace, s: &Support<Rational>) -> Result<FlowRun> {
    let mf = max_flow(net);
    let cut = min_cut(net);
    if cut.capacity != mf.value {
        return Err(Error::Internal("maximum flow and minimum cut differ".into()));
    }
    let name = |v: usize| {
        if v == net.source() {
            "SRC".to_string()
        } else if v == net.sink() {
            "SNK".to_string()
        } else if v < net.l {
            format!("{}@{}", s.treatments[v], s.instruments[0])
        } else {
            format!("{}@{}", s.treatments[v - net.l], s.instruments[1])
        }
    };
    let distribution = match flow_to_distribution(net, &mf) {
        Ok(p) => p
            .probs
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| WeightEcho { name: ts.label(j, s), value: frac(v) })
            .collect(),
        Err(_) => Vec::new(),
    };
    Ok(FlowRun {
        exclusion_caps: caps,
        value: frac(&mf.value),
        min_cut: frac(&cut.capacity),
        cut_edges: cut
            .cut_set
            .iter()
            .map(|&e| format!("{} -> {} ({})", name(net.edges[e].from), name(net.edges[e].to), frac(&net.edges[e].capacity)))
            .collect(),
        distribution,
    })
}

fn case_description(c: Case) -> &'static str {
    match c {
        Case::Case1 => "no enumerated inequality is violated",
        Case::Case2 => "only overlap-sharpened inequalities fail: the response-type restriction is refuted jointly with exclusion",
        Case::Case3 => "a switch-only inequality fails: the response-type restriction is refuted on its own",
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    run_prepared(&prepare(cfg)?)
}

pub fn run_prepared(p: &Prepared) -> Result<Report> {
    let d = &p.d;
    let s = &d.support;
    let (k, l) = (d.k(), d.l());
    let checks = p.checks;
    if k != 2 && (checks.flow || checks.fosd || checks.corollary1) {
        return Err(Error::NeedsBinaryInstrument(k));
    }
    if checks.flow && !p.spec.is_per_type() {
        return Err(Error::ExtraRowsInFlow);
    }
    let ts = TypeSpace::for_support(s, p.caps.types)?;
    let forbidden = p.spec.forbidden(s, &ts)?;
    let max_size = if p.caps.max_subset_size == 0 { k } else { p.caps.max_subset_size };
    let psi: PsiTable<Rational> = psi_table(d, max_size, p.caps.psi())?;

    let mut notes = vec![
        "restrictions are stored as forbidden instrument-response types; every other type is allowed".to_string(),
    ];
    let sharpness = if k == 2 {
        "binary instrument: the consistency + restriction + always-taker system is sharp; feasibility is equivalent to the existence of a valid model at bin resolution".to_string()
    } else {
        notes.push("sufficient-taker rows select types taking x at every instrument value in the subset".into());
        format!("{k}-valued instrument: the sufficient-taker system gives necessary conditions only; feasibility does not certify validity")
    };

    let mut verdict = Verdict { falsified: false, exit_status: EXIT_OK, reasons: Vec::new() };
    let mut out = Checks::default();

    if checks.feasibility {
        let overlap = checks.sufficient_takers.then_some(&psi);
        let sys = build_full_system(d, &p.spec, &ts, overlap)?;
        let res = solve_feasibility(&sys)?;
        let name = match (overlap.is_some(), k) {
            (false, _) => "consistency + restriction",
            (true, 2) => "consistency + restriction + always-taker",
            (true, _) => "consistency + restriction + sufficient-taker",
        };
        if res.status == Status::Infeasible {
            verdict.falsified = true;
            let labels: Vec<String> = res.violated_labels.iter().map(|t| t.to_string()).collect();
            verdict.reasons.push(format!("{name} system is infeasible; certificate rows: {}", labels.join("; ")));
        }
        out.feasibility = Some(echo_feasibility(&sys, &res, &ts, s, name));
        if overlap.is_some() {
            let sys0 = build_full_system(d, &p.spec, &ts, None)?;
            let res0 = solve_feasibility(&sys0)?;
            out.restriction_only = Some(echo_feasibility(&sys0, &res0, &ts, s, "consistency + restriction"));
        }
    }

    if checks.flow {
        let mut lp_says = None;
        for caps in [true, false] {
            let net = build_network(d, &p.spec, &psi, caps)?;
            let run = run_flow(&net, caps, &ts, s)?;
            if caps {
                let unit = run.value == "1/1";
                lp_says = Some(unit);
                if !unit {
                    verdict.falsified = true;
                    verdict.reasons.push(format!("maximum flow with exclusion caps is {} < 1", run.value));
                }
            }
            out.flow.push(run);
        }
        if let (Some(unit), Some(f)) = (lp_says, &out.feasibility) {
            if checks.sufficient_takers && unit != (f.status == Status::Feasible) {
                return Err(Error::Internal("flow and linear-system answers disagree".into()));
            }
        }
    }

    let mut classification = None;
    if checks.fosd {
        let fc = p.caps.fosd();
        let rel = BinaryRelation::from_forbidden(&ts, &forbidden);
        if l > fc.part1_max_treatments || l > fc.part2_max_treatments {
            out.fosd = Some(FosdEcho {
                skipped: Some(format!(
                    "capped: {l} treatments exceed the enumeration caps (part 1: {}, part 2: {})",
                    fc.part1_max_treatments, fc.part2_max_treatments
                )),
                part1: vec![],
                part2: vec![],
                part2_enumerated: 0,
            });
        } else {
            let p1 = enumerate_part1(d, &rel, fc)?;
            let p2 = enumerate_part2(d, &rel, &psi, fc)?;
            let c = classify(&p1, &p2)?;
            if c.case != Case::Case1 {
                verdict.falsified = true;
                verdict.reasons.push(format!("inequality check: case {} ({})", c.case.number(), case_description(c.case)));
            }
            classification = Some(ClassificationEcho {
                case: c.case.number(),
                description: case_description(c.case).to_string(),
                part1_sets: c.part1_sets.iter().map(|&x| labels(s, x)).collect(),
                part2_sets: c.part2_sets.iter().map(|&x| labels(s, x)).collect(),
            });
            out.fosd = Some(FosdEcho {
                skipped: None,
                part1: p1.iter().map(|r| echo_record(s, r)).collect(),
                part2: dedup_records(&p2).iter().map(|r| echo_record(s, r)).collect(),
                part2_enumerated: p2.len(),
            });
        }
    }

    if checks.corollary1 {
        let recs = corollary1_report(d, &psi)?;
        let counts = matches!(p.spec.preset, Some(Preset::OrderedMonotone) | Some(Preset::NoDefiers));
        notes.push("ordered-treatment bounds use the strict upper set: P[X >= x | z0] <= Psi_x + P[X > x | z1]".into());
        if !counts {
            notes.push("ordered-treatment bounds are reported only; they bind under ordered-monotone or no-defiers".into());
        }
        let bad: Vec<String> = recs.iter().filter(|r| r.violated).map(|r| labels(s, r.lambda_prime.unwrap_or(r.s)).join(",")).collect();
        if counts && !bad.is_empty() {
            verdict.falsified = true;
            verdict.reasons.push(format!("ordered-treatment bound violated at {}", bad.join(", ")));
        }
        out.corollary1 = Some(OrderedBoundEcho { counts_toward_verdict: counts, records: recs.iter().map(|r| echo_record(s, r)).collect() });
    }

    if checks.submono_harness {
        if l > HARNESS_MAX_TREATMENTS {
            notes.push(format!("submonotonicity harness skipped: {l} treatments exceed {HARNESS_MAX_TREATMENTS}"));
        } else {
            let h = lemma_harness(l)?;
            if !h.passed() {
                return Err(Error::Internal(format!("submonotonicity harness failed: {:?}", h.failures)));
            }
            out.submono_harness = Some(HarnessEcho {
                treatments: l,
                relations: h.relations,
                checks: h.checks,
                minimality_checks: h.minimality_checks,
                passed: h.passed(),
                failures: h.failures,
            });
        }
    }

    if verdict.falsified {
        verdict.exit_status = EXIT_FALSIFIED;
    }
    let psi_echo = psi
        .entries
        .iter()
        .map(|(&(x, zsub), e)| PsiEcho {
            treatment: s.treatments[x].clone(),
            instruments: zsub.iter().map(|z| s.instruments[z].clone()).collect(),
            vector: e.vector.iter().map(frac).collect(),
            mass: frac(&e.mass),
        })
        .collect();
    Ok(Report {
        tool: format!("ivfalsify {}", env!("CARGO_PKG_VERSION")),
        input: echo_input(p),
        restriction: RestrictionEcho {
            preset: p.spec.preset.as_ref().map(|x| x.name().to_string()),
            ruled_out: forbidden.iter().map(|&j| ts.label(j, s)).collect(),
            extra_rows: p.spec.extra_rows.iter().map(|r| r.label.clone()).collect(),
        },
        psi: psi_echo,
        sharpness,
        notes,
        checks: out,
        classification,
        verdict,
    })
}

pub fn render_text(r: &Report) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "{}", r.tool);
    let _ = writeln!(o, "treatments: {}  instruments: {}", r.input.treatments.join(" "), r.input.instruments.join(" "));
    let _ = writeln!(o, "outcome bins: {}", r.input.outcome_bins.join(" | "));
    if let Some(t) = &r.input.binarized_at {
        let _ = writeln!(o, "binarized at: {t}");
    }
    let _ = writeln!(o, "restriction: {} ruled out [{}]", r.restriction.preset.as_deref().unwrap_or("none"), r.restriction.ruled_out.join(" "));
    if !r.restriction.extra_rows.is_empty() {
        let _ = writeln!(o, "extra rows: {}", r.restriction.extra_rows.join(", "));
    }
    let _ = writeln!(o, "\noverlap (Psi):");
    for e in &r.psi {
        let _ = writeln!(o, "  {} on {{{}}}: {}  [{}]", e.treatment, e.instruments.join(","), e.mass, e.vector.join(" "));
    }
    for f in r.checks.feasibility.iter().chain(&r.checks.restriction_only) {
        let _ = writeln!(o, "\n{} ({} rows, {} types): {:?}", f.system, f.rows, f.variables, f.status);
        for w in &f.witness {
            let _ = writeln!(o, "  p{} = {}", w.name, w.value);
        }
        for w in &f.certificate {
            let _ = writeln!(o, "  y[{}] = {}", w.name, w.value);
        }
    }
    for f in &r.checks.flow {
        let caps = if f.exclusion_caps { "with" } else { "without" };
        let _ = writeln!(o, "\nmax flow {caps} exclusion caps: {} (min cut {})", f.value, f.min_cut);
        for e in &f.cut_edges {
            let _ = writeln!(o, "  cut: {e}");
        }
    }
    if let Some(f) = &r.checks.fosd {
        match &f.skipped {
            Some(why) => {
                let _ = writeln!(o, "\ninequalities: skipped ({why})");
            }
            None => {
                let _ = writeln!(o, "\ninequalities: {} part 1, {} part 2 ({} distinct)", f.part1.len(), f.part2_enumerated, f.part2.len());
                for rec in f.part1.iter().chain(&f.part2).filter(|x| x.violated) {
                    let _ = writeln!(o, "  violated {:?} S={{{}}}: {} > {}", rec.kind, rec.s.join(","), rec.lhs, rec.rhs);
                }
            }
        }
    }
    if let Some(c) = &r.classification {
        let _ = writeln!(o, "case {}: {}", c.case, c.description);
        for s in c.part1_sets.iter().chain(&c.part2_sets) {
            let _ = writeln!(o, "  attributed to S={{{}}}", s.join(","));
        }
    }
    if let Some(c) = &r.checks.corollary1 {
        let _ = writeln!(o, "\nordered-treatment bounds{}:", if c.counts_toward_verdict { "" } else { " (informational)" });
        for rec in &c.records {
            let _ = writeln!(o, "  S={{{}}}: {} <= {}{}", rec.s.join(","), rec.lhs, rec.rhs, if rec.violated { "  VIOLATED" } else { "" });
        }
    }
    if let Some(h) = &r.checks.submono_harness {
        let _ = writeln!(o, "\nsubmonotonicity harness (L={}): {} relations, passed={}", h.treatments, h.relations, h.passed);
    }
    let _ = writeln!(o, "\n{}", r.sharpness);
    for n in &r.notes {
        let _ = writeln!(o, "note: {n}");
    }
    let _ = writeln!(o, "\nverdict: {}", if r.verdict.falsified { "FALSIFIED" } else { "not falsified" });
    for reason in &r.verdict.reasons {
        let _ = writeln!(o, "  - {reason}");
    }
    o
}
