use serde::Serialize;
use serde_json::{json, Value};

use gibbslab::diagnostics::{
    badness_gap, grising_probe, prop4_surrogate, r_vx_scan, randombond_invariance, rfim_theorem1_probe,
    theorem2_goodness_scan, AnnulusFamily, GoodnessScan, FINITE_VOLUME_CAVEAT,
};
use gibbslab::diagnostics::continuity::constant_annulus;
use gibbslab::gibbs::ExactGibbs;
use gibbslab::identities::run_battery;
use gibbslab::lattice::grow;
use gibbslab::mc::{mc_expectation, mc_gap_probe, GapSide, LocalObservable};
use gibbslab::{Error, ModelKind, Site, Volume};

use crate::error::CliError;
use crate::output::{num, Csv, Sink};
use crate::spec::{base_disorder, build_law, need, IdentitySpec, McSpec, Probe, ScanSpec};

/// Exit code and the seeds a run actually used.
pub struct Outcome {
    pub code: u8,
    pub seeds: Vec<u64>,
}

pub fn verify_identities(spec: IdentitySpec, seed: Option<u64>, sink: &mut Sink) -> Result<Outcome, CliError> {
    let mut battery = spec.battery;
    if let Some(s) = seed {
        battery.seed = s;
    }
    let report = run_battery(&battery)?;
    let mut csv = Csv::new(&["identity", "checked", "max_residual", "tolerance", "passed"]);
    for r in &report.identities {
        csv.row(&[r.name.clone(), r.checked.to_string(), num(r.max_residual), num(r.tolerance), r.passed.to_string()]);
    }
    sink.write("identities.csv", &csv.into_string())?;
    sink.write_json("report.json", &report)?;
    for r in report.identities.iter().filter(|r| !r.passed && r.checked > 0) {
        eprintln!("identity {} failed: max residual {} over {} instances", r.name, num(r.max_residual), r.checked);
    }
    Ok(Outcome { code: if report.passed { 0 } else { 1 }, seeds: vec![battery.seed] })
}

/// Where a ladder was cut short because a volume exceeded an enumeration cap.
#[derive(Clone, Debug, Serialize)]
struct Truncation {
    attempted_sites: usize,
    largest_feasible_sites: usize,
    reason: String,
}

/// Runs `f` on the longest feasible prefix of `ladder`.
fn feasible_prefix<T>(
    ladder: &[Volume],
    mut f: impl FnMut(&[Volume]) -> gibbslab::Result<T>,
) -> Result<(T, Vec<Volume>, Option<Truncation>), CliError> {
    let mut first_failure: Option<(usize, String)> = None;
    for n in (1..=ladder.len()).rev() {
        match f(&ladder[..n]) {
            Ok(t) => {
                let cut = first_failure.map(|(_, reason)| Truncation {
                    attempted_sites: ladder[n].len(),
                    largest_feasible_sites: ladder[n - 1].len(),
                    reason,
                });
                return Ok((t, ladder[..n].to_vec(), cut));
            }
            Err(e @ Error::Infeasible { .. }) if n > 1 => {
                if first_failure.is_none() {
                    first_failure = Some((n, e.to_string()));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("the loop returns at n = 1")
}

fn steps(csv: &mut Csv, ladder: &[Volume], columns: &[Vec<f64>]) {
    for (k, v) in ladder.iter().enumerate() {
        let mut cells = vec![k.to_string(), v.len().to_string()];
        cells.extend(columns.iter().map(|c| num(c[k])));
        csv.row(&cells);
    }
}

pub fn scan(spec: ScanSpec, seed: Option<u64>, sink: &mut Sink) -> Result<Outcome, CliError> {
    let seed = seed.unwrap_or(spec.seed);
    let probe = spec.probe;
    let name = probe.name();
    let pot = spec.model.build()?;
    let dim = pot.dim();
    let law = build_law(&spec.model, &spec.law)?;
    let x = spec.site.clone().unwrap_or_else(|| Site::origin(dim));
    let th = spec.thresholds.build();
    let ladder = || -> Result<Vec<Volume>, CliError> { need(&spec.ladder, "ladder", name)?.build(&x, dim) };
    let symbols = || need(&spec.symbols, "symbols", name);
    let family_spec = spec.family.clone().unwrap_or_default();
    let family = AnnulusFamily::new(&law, family_spec.samples, family_spec.seed.unwrap_or(seed));
    let width = |key: &str, value: Option<u32>| need(&value, key, name).copied();
    let mut csv;
    let mut verdict_scan: Option<GoodnessScan> = None;
    let (result, used, cut): (Value, Vec<Volume>, Option<Truncation>) = match probe {
        Probe::RfimTheorem1 => {
            let ladder = ladder()?;
            let eta = base_disorder(&spec.eta, ladder.last().expect("nonempty"), &law, seed)?;
            let (p, used, cut) = feasible_prefix(&ladder, |l| rfim_theorem1_probe(&pot, &eta, &x, l, &th))?;
            csv = Csv::new(&["step", "sites", "m_plus", "m_minus", "gap"]);
            steps(&mut csv, &used, &[p.m_plus.clone(), p.m_minus.clone(), p.gap.clone()]);
            verdict_scan = Some(p.scan.clone());
            (serde_json::to_value(&p)?, used, cut)
        }
        Probe::RVx => {
            let ladder = ladder()?;
            let outer = need(&spec.outer, "outer", name)?.build(&x, dim)?;
            let extent = outer.iter().fold(Volume::empty(dim), |acc, l| acc.union(l));
            let base = base_disorder(&spec.eta, &extent, &law, seed)?;
            let (e1, e2) = symbols()?;
            let (s, used, cut) =
                feasible_prefix(&ladder, |l| r_vx_scan(&pot, &spec.bc, &base, &x, e1, e2, l, &outer, &family, &th))?;
            csv = Csv::new(&["step", "sites", "r_vx"]);
            steps(&mut csv, &used, std::slice::from_ref(&s.values));
            verdict_scan = Some(s.clone());
            (serde_json::to_value(&s)?, used, cut)
        }
        Probe::BadnessGap => {
            let ladder = ladder()?;
            let (aw, ow) = (width("annulus_width", spec.annulus_width)?, width("outer_width", spec.outer_width)?);
            let base = base_disorder(&spec.eta, &grow(ladder.last().expect("nonempty"), aw + ow)?, &law, seed)?;
            let (e1, e2) = symbols()?;
            let (plus, minus) = need(&spec.annuli, "annuli", name)?;
            let (g, used, cut) = feasible_prefix(&ladder, |l| {
                badness_gap(&pot, &law, &spec.bc, &base, &x, e1, e2, l, aw, ow, plus, minus, &th)
            })?;
            csv = Csv::new(&["step", "sites", "q_upper_swapped", "q_upper", "gap"]);
            let col = |f: fn(&gibbslab::diagnostics::rfim::BadnessPoint) -> f64| g.points.iter().map(f).collect::<Vec<f64>>();
            steps(&mut csv, &used, &[col(|p| p.q_upper_swapped), col(|p| p.q_upper), col(|p| p.gap)]);
            verdict_scan = Some(g.scan.clone());
            (serde_json::to_value(&g)?, used, cut)
        }
        Probe::Grising => {
            let coupling = match pot.kind() {
                ModelKind::Grising { coupling } => *coupling,
                other => return Err(CliError::Invalid(format!("probe `grising` needs a grising model, got {}", other.tag()))),
            };
            let ladder = ladder()?;
            let bridge = need(&spec.bridge_site, "bridge_site", name)?;
            let (probes, used, cut) =
                feasible_prefix(&ladder, |l| l.iter().map(|v| grising_probe(coupling, v, bridge)).collect::<gibbslab::Result<Vec<_>>>())?;
            csv = Csv::new(&["corr_without", "corr_with"]);
            for p in &probes {
                csv.row(&[num(p.corr_without), num(p.corr_with)]);
            }
            (serde_json::to_value(&probes)?, used, cut)
        }
        Probe::Randombond => {
            let coupling = match pot.kind() {
                ModelKind::RandomCoupling { alphabet } if alphabet.len() == 1 => alphabet[0],
                _ => return Err(CliError::Invalid("probe `randombond` needs a random_coupling model with one coupling value".into())),
            };
            let window = need(&spec.window, "window", name)?.build(dim)?;
            let bridge = need(&spec.bridge_bond, "bridge_bond", name)?;
            let probed = need(&spec.probed, "probed", name)?;
            let inv = randombond_invariance(coupling, &window, bridge, probed)?;
            csv = Csv::new(&["probed_coupling", "p_without", "p_with", "log_odds_gap"]);
            for (p, g) in inv.probes.iter().zip(&inv.log_odds_gap) {
                csv.row(&[num(p.probed_coupling), num(p.p_without), num(p.p_with), num(*g)]);
            }
            (serde_json::to_value(&inv)?, vec![window], None)
        }
        Probe::Theorem2 => {
            let ladder = ladder()?;
            let aw = width("annulus_width", spec.annulus_width)?;
            let bond = need(&spec.bond, "bond", name)?;
            let base = base_disorder(&spec.eta, &grow(ladder.last().expect("nonempty"), aw)?, &law, seed)?;
            let (s, used, cut) =
                feasible_prefix(&ladder, |l| theorem2_goodness_scan(&pot, &spec.bc, &base, bond, l, aw, &family, &th))?;
            csv = Csv::new(&["step", "sites", "defect"]);
            steps(&mut csv, &used, std::slice::from_ref(&s.values));
            verdict_scan = Some(s.clone());
            (serde_json::to_value(&s)?, used, cut)
        }
        Probe::Prop4 => {
            let ladder = ladder()?;
            let (aw, tw) = (width("annulus_width", spec.annulus_width)?, width("tail_width", spec.tail_width)?);
            let tails = *need(&spec.tails, "tails", name)?;
            let base = base_disorder(&spec.eta, &grow(ladder.last().expect("nonempty"), aw + tw)?, &law, seed)?;
            let (e1, e2) = symbols()?;
            let (plain, bar) = need(&spec.annuli, "annuli", name)?;
            let (plain, bar) = (constant_annulus(plain.clone()), constant_annulus(bar.clone()));
            let (r, used, cut) = feasible_prefix(&ladder, |l| {
                prop4_surrogate(&pot, &spec.bc, &law, &base, &x, e1, e2, l, aw, tw, &plain, &bar, tails, seed)
            })?;
            csv = Csv::new(&["step", "sites", "bar_min", "bar_max", "plain_min", "plain_max"]);
            let col = |f: fn(&gibbslab::diagnostics::continuity::Prop4Point) -> f64| r.points.iter().map(f).collect::<Vec<f64>>();
            steps(&mut csv, &used, &[col(|p| p.bar_min), col(|p| p.bar_max), col(|p| p.plain_min), col(|p| p.plain_max)]);
            (serde_json::to_value(&r)?, used, cut)
        }
    };
    let verdict = verdict_scan.as_ref().map(|s| serde_json::to_value(s.verdict)).transpose()?;
    let mut code = 0;
    if let Some(want) = &spec.expect {
        let Some(got) = &verdict else {
            return Err(CliError::Invalid(format!("probe `{name}` reports no verdict to compare with `expect`")));
        };
        if got.as_str() != Some(want.as_str()) {
            eprintln!("verdict mismatch: expected {want}, got {got}");
            code = 1;
        }
    }
    if let Some(c) = &cut {
        eprintln!(
            "ladder cut at {} sites (largest feasible volume: {} sites): {}",
            c.attempted_sites, c.largest_feasible_sites, c.reason
        );
        code = 1;
    }
    sink.write(&format!("{name}.csv"), &csv.into_string())?;
    let report = json!({
        "probe": name,
        "seed": seed,
        "volumes": used.iter().map(Volume::len).collect::<Vec<_>>(),
        "verdict": verdict,
        "expect": spec.expect,
        "truncated": cut,
        "caveat": FINITE_VOLUME_CAVEAT,
        "result": result,
    });
    sink.write_json("report.json", &report)?;
    Ok(Outcome { code, seeds: vec![seed, family.seed] })
}

fn label(obs: &LocalObservable) -> String {
    let at = |s: &Site| s.coords().iter().map(i64::to_string).collect::<Vec<_>>().join(":");
    match obs {
        LocalObservable::Spin { site } => format!("spin@{}", at(site)),
        LocalObservable::Plus { site } => format!("plus@{}", at(site)),
        LocalObservable::Product { sites } => format!("product@{}", sites.iter().map(at).collect::<Vec<_>>().join("/")),
        LocalObservable::Agree { a, b } => format!("agree@{}/{}", at(a), at(b)),
    }
}

pub fn mc(spec: McSpec, seed: Option<u64>, sink: &mut Sink) -> Result<Outcome, CliError> {
    let mut cfg = spec.mc.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if spec.observables.is_empty() && spec.gap.is_none() {
        return Err(CliError::Invalid("nothing to estimate: give `observables` or `gap`".into()));
    }
    let pot = spec.model.build()?;
    let law = build_law(&spec.model, &spec.law)?;
    let v = spec.volume.build(pot.dim())?;
    let eta = base_disorder(&spec.eta, &v, &law, cfg.seed)?;
    let exact = if spec.cross_check { Some(ExactGibbs::new(&pot, &v, &spec.bc, &eta)?) } else { None };
    let mut rows = Vec::new();
    for obs in &spec.observables {
        let est = mc_expectation(&pot, &eta, &v, &spec.bc, obs, &cfg)?;
        let truth = exact.as_ref().map(|e| e.expectation_local(&obs.sites(), |s| obs.eval(s))).transpose()?;
        rows.push((label(obs), est, truth));
    }
    if let Some(g) = &spec.gap {
        let (upper, lower) = (GapSide { bc: g.upper.clone(), annulus: None }, GapSide { bc: g.lower.clone(), annulus: None });
        let est = mc_gap_probe(&pot, &eta, &g.site, &v, &upper, &lower, &cfg)?;
        let truth = if spec.cross_check {
            let p = |bc| -> Result<f64, CliError> { Ok(ExactGibbs::new(&pot, &v, bc, &eta)?.prob_plus(&g.site)?) };
            Some(p(&g.upper)? - p(&g.lower)?)
        } else {
            None
        };
        rows.push((format!("gap@{}", label(&LocalObservable::Plus { site: g.site.clone() }).trim_start_matches("plus@")), est.gap, truth));
    }
    let mut csv = Csv::new(&[
        "observable", "mean", "std_error", "n_effective", "samples", "batch_size", "rhat", "converged", "exact", "within_tolerance",
    ]);
    let mut code = 0;
    let mut report = Vec::new();
    for (name, est, truth) in &rows {
        let ok = truth.map(|t| est.agrees_with(t, spec.tolerance_sigmas));
        if ok == Some(false) {
            eprintln!("{name}: {} ± {} disagrees with exact {}", num(est.mean), num(est.std_error), num(truth.unwrap_or(f64::NAN)));
            code = 1;
        }
        csv.row(&[
            name.clone(),
            num(est.mean),
            num(est.std_error),
            num(est.n_effective),
            est.samples.to_string(),
            est.batch_size.to_string(),
            num(est.rhat),
            est.converged.to_string(),
            truth.map(num).unwrap_or_default(),
            ok.map(|b| b.to_string()).unwrap_or_default(),
        ]);
        report.push(json!({ "observable": name, "estimate": est, "exact": truth, "within_tolerance": ok }));
    }
    sink.write("mc.csv", &csv.into_string())?;
    sink.write_json("report.json", &json!({ "config": cfg, "tolerance_sigmas": spec.tolerance_sigmas, "rows": report }))?;
    Ok(Outcome { code, seeds: vec![cfg.seed] })
}
