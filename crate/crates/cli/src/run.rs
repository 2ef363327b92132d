//! One function per computation kind. Each fills a CSV table, a JSON
//! summary, and the checks used by `--verify`.

use ndsentropy::catalog::{weak_star_diagnostic, weak_star_threshold, Expectation, TestFunction};
use ndsentropy::certificate::{misiurewicz_certificate, Verdict};
use ndsentropy::information::rokhlin_distance;
use ndsentropy::partition::joined_masses;
use ndsentropy::rational::{format_rational, qi, to_f64};
use ndsentropy::topological::{
    cover_refinement_count, entropy_from_spanning, expanding_circle_entropies, lipschitz_bound_trace,
    spanning_bounds, CoverSequence,
};
use ndsentropy::trace::{emax_blowup_demo, partition_entropy_trace};
use ndsentropy::{Budget, Error, IntervalSet, MeasureSequence};
use serde_json::json;

use crate::config::{ExperimentConfig, Kind, Resolved};
use crate::report::{opt, sig12, Check, Table};

pub struct Outcome {
    pub table: Table,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

fn expectation<'a>(r: &'a Resolved, name: &str) -> Option<&'a Expectation> {
    r.expectations().iter().find(|e| e.name == name)
}

fn need<'a>(r: &'a Resolved, name: &str) -> Result<&'a Expectation, Error> {
    expectation(r, name)
        .ok_or_else(|| Error::Usage(format!("system {} declares no expectation {name:?}", r.system.id())))
}

fn within(e: &Expectation, v: f64) -> Check {
    check(
        &e.name,
        (v - e.value).abs() <= e.tolerance,
        format!("{} vs expected {} ± {}", sig12(v), sig12(e.value), sig12(e.tolerance)),
    )
}

pub fn run(c: &ExperimentConfig, r: &Resolved, budget: Budget, verify: bool) -> Result<Outcome, Error> {
    match c.kind {
        Kind::MeasEntropy => meas_entropy(c, r, budget, verify),
        Kind::TopoSpanning => topo_spanning(c, r, verify),
        Kind::TopoCover => topo_cover(c, r, budget, verify),
        Kind::LipschitzBound => lipschitz(c, r, verify),
        Kind::Rokhlin => rokhlin(c, r, budget),
        Kind::Certify => certify(c, r),
        Kind::PowerRule => power_rule(c, r, budget),
        Kind::WeakStar => weak_star(c, r),
        Kind::EmaxDemo => emax(c, budget),
        Kind::CircleFormulas => circle(c, r, budget, verify),
    }
}

/// Columns: `n, entropy_bits, value_bits, running_max, cells`.
fn meas_entropy(c: &ExperimentConfig, r: &Resolved, budget: Budget, verify: bool) -> Result<Outcome, Error> {
    let seq = r.partition(c.partition.as_deref(), c.k)?;
    let horizons = c.horizons_or(&[1, 2, 4, 8]);
    let t = partition_entropy_trace(&r.system, &r.measure, &r.measure_id, &seq, &horizons, budget)?;
    let mut table = Table::new(&["n", "entropy_bits", "value_bits", "running_max", "cells"]);
    for row in &t.rows {
        table.push(vec![
            row.n.to_string(),
            sig12(row.entropy_bits),
            sig12(row.value_bits),
            sig12(row.running_max),
            row.cells.to_string(),
        ]);
    }
    let mut checks = Vec::new();
    if verify {
        if let (Some(e), Some(v)) = (expectation(r, "measure_lower_16"), t.value_at(16)) {
            checks.push(check(&e.name, v >= e.value - e.tolerance, format!("{} >= {}", sig12(v), sig12(e.value))));
        } else if let Some(e) = expectation(r, "h_measure_trace") {
            let all = t.rows.iter().all(|row| (row.value_bits - e.value).abs() <= e.tolerance);
            checks.push(check(&e.name, all, format!("every value equals {}", sig12(e.value))));
        } else {
            let e = need(r, "h_measure")?;
            checks.push(within(e, t.rows.last().expect("nonempty").value_bits));
        }
    }
    Ok(Outcome { table, summary: json!({ "partition": seq.id(), "trace": t }), checks })
}

/// Columns: `eps, n, grid_step, grid_points, separated_lower, spanning_upper,
/// lower_bits, upper_bits, lower_increment, upper_increment, coarse`.
fn topo_spanning(c: &ExperimentConfig, r: &Resolved, verify: bool) -> Result<Outcome, Error> {
    let horizons = c.horizons_or(&[4, 5, 6]);
    let eps_list = c.eps_list("1/10");
    let mut reports = Vec::new();
    for eps in &eps_list {
        let step = match &c.grid_step {
            Some(_) => c.rational_or(&c.grid_step, "0"),
            None => eps / qi(10),
        };
        for &n in &horizons {
            reports.push(spanning_bounds(&r.system, n, eps, &step)?);
        }
    }
    let traces = entropy_from_spanning(&reports)?;
    let mut table = Table::new(&[
        "eps",
        "n",
        "grid_step",
        "grid_points",
        "separated_lower",
        "spanning_upper",
        "lower_bits",
        "upper_bits",
        "lower_increment",
        "upper_increment",
        "coarse",
    ]);
    for t in &traces {
        for row in &t.rows {
            let rep = reports.iter().find(|x| x.eps == t.eps && x.n == row.n).expect("report for row");
            table.push(vec![
                format_rational(&t.eps),
                row.n.to_string(),
                format_rational(&rep.grid_step),
                rep.grid_points.to_string(),
                rep.separated_lower.to_string(),
                rep.spanning_upper.map(|u| u.to_string()).unwrap_or_default(),
                sig12(row.lower_bits),
                opt(row.upper_bits),
                opt(row.lower_increment),
                opt(row.upper_increment),
                rep.coarse.to_string(),
            ]);
        }
    }
    let mut checks = Vec::new();
    if verify {
        let e = need(r, "h_top")?;
        // Smallest ε, last horizon: prefer the growth increment.
        let last = traces.last().and_then(|t| t.rows.last()).expect("nonempty");
        checks.push(within(e, last.lower_increment.unwrap_or(last.lower_bits)));
    }
    Ok(Outcome { table, summary: json!({ "reports": reports, "traces": traces }), checks })
}

/// Columns: `n, elements, atoms, exact, greedy, rate_bits`.
fn topo_cover(c: &ExperimentConfig, r: &Resolved, budget: Budget, verify: bool) -> Result<Outcome, Error> {
    let delta = c.rational_or(&c.delta, "1/100");
    let cover = CoverSequence::near_halves(&delta)?;
    let horizons = c.horizons_or(&[2, 4, 6, 8]);
    let mut table = Table::new(&["n", "elements", "atoms", "exact", "greedy", "rate_bits"]);
    let mut reports = Vec::new();
    for &n in &horizons {
        let rep = cover_refinement_count(&r.system, &cover, n, 100_000, budget)?;
        let count = rep.exact.unwrap_or(rep.greedy);
        table.push(vec![
            n.to_string(),
            rep.elements.to_string(),
            rep.atoms.to_string(),
            rep.exact.map(|x| x.to_string()).unwrap_or_default(),
            rep.greedy.to_string(),
            sig12((count as f64).log2() / n as f64),
        ]);
        reports.push(rep);
    }
    let mut checks = Vec::new();
    if verify {
        let e = need(r, "h_top")?;
        let last = reports.last().expect("nonempty");
        checks.push(within(e, (last.exact.unwrap_or(last.greedy) as f64).log2() / last.n as f64));
    }
    Ok(Outcome {
        table,
        summary: json!({ "cover": cover.id(), "delta": format_rational(&delta), "reports": reports }),
        checks,
    })
}

/// Columns: `n, value_bits, running_max`.
fn lipschitz(c: &ExperimentConfig, r: &Resolved, verify: bool) -> Result<Outcome, Error> {
    let n = c.max_horizon(64);
    let t = lipschitz_bound_trace(&r.system, n, &qi(1))?;
    let mut table = Table::new(&["n", "value_bits", "running_max"]);
    let rows: Vec<u64> = match &c.horizons {
        Some(h) => h.clone(),
        None => (1..=n).collect(),
    };
    for k in rows {
        table.push(vec![k.to_string(), opt(t.at(k)), sig12(t.running_max[k as usize - 1])]);
    }
    let mut checks = Vec::new();
    if verify {
        let e = need(r, &format!("lipschitz_{n}")).or_else(|_| need(r, "h_top"))?;
        checks.push(within(e, t.at(n).expect("horizon")));
    }
    Ok(Outcome { table, summary: json!({ "n": n, "value_bits": t.at(n) }), checks })
}

/// Columns: `n, distance_bits`.
fn rokhlin(c: &ExperimentConfig, r: &Resolved, budget: Budget) -> Result<Outcome, Error> {
    let p = r.partition(c.partition.as_deref(), c.k)?;
    let q_ = r.partition(Some(c.partition2.as_deref().unwrap_or("uniform-2")), None)?;
    let horizon = c.max_horizon(8);
    let ims = MeasureSequence::new(r.system.clone(), r.measure.clone());
    let rep = rokhlin_distance(&ims, &p, &q_, horizon, budget)?;
    let mut table = Table::new(&["n", "distance_bits"]);
    for (n, v) in rep.trace.iter().enumerate() {
        table.push(vec![n.to_string(), sig12(*v)]);
    }
    Ok(Outcome { table, summary: json!({ "p": p.id(), "q": q_.id(), "report": rep }), checks: Vec::new() })
}

/// Columns: `n, gap, closest_a, closest_b, cells_with_core`.
fn certify(c: &ExperimentConfig, r: &Resolved) -> Result<Outcome, Error> {
    let seq = r.partition(c.partition.as_deref(), c.k)?;
    let eps = c.rational_or(&c.eps_cert, "1/100");
    let horizon = c.max_horizon(64);
    let ims = MeasureSequence::new(r.system.clone(), r.measure.clone());
    let cert = misiurewicz_certificate(&ims, &seq, &eps, horizon)?;
    let mut table = Table::new(&["n", "gap", "closest_a", "closest_b", "cells_with_core"]);
    for s in &cert.steps {
        let (a, b) = s.closest.clone().unwrap_or_default();
        table.push(vec![
            s.n.to_string(),
            s.gap.as_ref().map(format_rational).unwrap_or_default(),
            a,
            b,
            s.margins.iter().filter(|m| m.is_some()).count().to_string(),
        ]);
    }
    let rechecked = cert.verify(&ims, &seq)?;
    let checks = vec![
        check("verdict", cert.verdict == Verdict::Pass, format!("{:?}", cert.verdict)),
        check("independent recheck", rechecked, "cores re-derived from masses".into()),
    ];
    let summary = json!({
        "partition": seq.id(),
        "epsilon": format_rational(&cert.epsilon),
        "delta": format_rational(&cert.delta),
        "horizon": cert.horizon,
        "verdict": cert.verdict,
    });
    Ok(Outcome { table, summary, checks })
}

/// Columns: `n, m, power_join_bits, base_join_bits, join_equal,
/// power_increment, base_increment, ratio`.
fn power_rule(c: &ExperimentConfig, r: &Resolved, budget: Budget) -> Result<Outcome, Error> {
    let m = c.m.unwrap_or(2);
    let seq = r.partition(c.partition.as_deref(), c.k)?;
    let power = r.system.power(m)?;
    let pseq = seq.axiom_c_power(&r.system, m, budget)?.restrict(m)?;
    let horizons = c.horizons_or(&[1, 2, 3, 4]);
    let eps = c.eps_list("1/16").remove(0);
    let step = c.rational_or(&c.grid_step, "1/16384");
    let increment = |sys: &ndsentropy::system::NdSystem, n: u64| -> Result<Option<f64>, Error> {
        if n < 2 {
            return Ok(None);
        }
        let a = spanning_bounds(sys, n - 1, &eps, &step)?;
        let b = spanning_bounds(sys, n, &eps, &step)?;
        Ok(Some((b.separated_lower as f64 / a.separated_lower as f64).log2()))
    };
    let mut table = Table::new(&[
        "n",
        "m",
        "power_join_bits",
        "base_join_bits",
        "join_equal",
        "power_increment",
        "base_increment",
        "ratio",
    ]);
    let mut checks = Vec::new();
    for &n in &horizons {
        let mut lhs = joined_masses(&power, &pseq, &r.measure, 0, n, budget)?;
        let mut rhs = joined_masses(&r.system, &seq, &r.measure, 0, n * m, budget)?;
        let (hl, hr) = (ndsentropy::information::entropy_of_masses(&lhs), ndsentropy::information::entropy_of_masses(&rhs));
        for v in [&mut lhs, &mut rhs] {
            v.retain(|x| *x > qi(0));
            v.sort();
        }
        let equal = lhs == rhs;
        let (pi, bi) = (increment(&power, n)?, increment(&r.system, n * m)?);
        let ratio = pi.zip(bi).map(|(a, b)| a / b);
        table.push(vec![
            n.to_string(),
            m.to_string(),
            sig12(hl),
            sig12(hr),
            equal.to_string(),
            opt(pi),
            opt(bi),
            opt(ratio),
        ]);
        checks.push(check(&format!("join identity n={n}"), equal, format!("{} vs {}", sig12(hl), sig12(hr))));
        if let Some(ratio) = ratio {
            checks.push(check(
                &format!("growth ratio n={n}"),
                (ratio - m as f64).abs() <= 0.1 * m as f64 / 2.0,
                format!("{} vs {m}", sig12(ratio)),
            ));
        }
    }
    Ok(Outcome {
        table,
        summary: json!({ "m": m, "power_system": power.id(), "partition": pseq.id(), "eps": format_rational(&eps) }),
        checks,
    })
}

/// Columns: `n, function, integral, integral_bits`. The integral is exact.
fn weak_star(c: &ExperimentConfig, r: &Resolved) -> Result<Outcome, Error> {
    let a = c.rational_or(&c.target, "1/100");
    let level = c.rational_or(&c.level, "99/100");
    let horizon = c.max_horizon(32);
    let family = [TestFunction::indicator_below(&a), TestFunction::hat_below(&a), TestFunction::constant_one()];
    let ims = MeasureSequence::new(r.system.clone(), r.measure.clone());
    let rows = weak_star_diagnostic(&ims, &family, horizon)?;
    let mut table = Table::new(&["n", "function", "integral", "integral_float"]);
    for row in &rows {
        for (t, v) in family.iter().zip(&row.integrals) {
            table.push(vec![row.n.to_string(), t.name.clone(), format_rational(v), sig12(to_f64(v))]);
        }
    }
    let target = IntervalSet::from_interval(ndsentropy::Interval::half_open(qi(0), a.clone()));
    let threshold = match weak_star_threshold(&ims, &target, &level, 200, 10_000) {
        Ok(t) => Some(t),
        Err(Error::Usage(_)) => None,
        Err(e) => return Err(e),
    };
    let found = threshold.as_ref().and_then(|t| t.as_ref());
    let checks = vec![check(
        "threshold",
        found.is_some(),
        found.map_or("no threshold found".into(), |t| format!("N = {}", t.time)),
    )];
    let summary = json!({
        "target": format!("[0,{})", format_rational(&a)),
        "level": format_rational(&level),
        "target_invariant": threshold.is_some(),
        "threshold": found,
    });
    Ok(Outcome { table, summary, checks })
}

/// Columns: `n, value_bits`.
fn emax(c: &ExperimentConfig, budget: Budget) -> Result<Outcome, Error> {
    let n = c.max_horizon(20);
    let demo = emax_blowup_demo(n, budget)?;
    let mut table = Table::new(&["n", "value_bits"]);
    for row in &demo.trace.rows {
        table.push(vec![row.n.to_string(), sig12(row.value_bits)]);
    }
    let exact = demo.trace.rows.iter().all(|row| row.value_bits == 1.0);
    let topo = demo.topological_upper.max(demo.spanning_increment);
    let checks = vec![
        check("measure trace", exact, "every value is exactly 1".into()),
        check("topological estimate", topo <= 0.05, format!("{} <= 0.05", sig12(topo))),
    ];
    let summary = json!({
        "topological_upper": demo.topological_upper,
        "spanning_increment": demo.spanning_increment,
    });
    Ok(Outcome { table, summary, checks })
}

/// Columns: `n, topological_bits, measure_bits`.
fn circle(c: &ExperimentConfig, r: &Resolved, budget: Budget, verify: bool) -> Result<Outcome, Error> {
    let horizons = c.horizons_or(&[2, 4, 6, 8]);
    let mut table = Table::new(&["n", "topological_bits", "measure_bits"]);
    let mut last = None;
    for &n in &horizons {
        let e = expanding_circle_entropies(&r.system, &r.measure, n, budget)?;
        table.push(vec![n.to_string(), sig12(e.topological), sig12(e.measure)]);
        last = Some(e);
    }
    let last = last.expect("nonempty");
    let mut checks = Vec::new();
    if verify {
        checks.push(within(need(r, "h_top")?, last.topological));
        if let Some(e) = expectation(r, "h_measure") {
            checks.push(within(e, last.measure));
        }
    }
    Ok(Outcome { table, summary: json!({ "last": last }), checks })
}
