//! CSV and plain-text rendering. Floats use Rust's shortest round-trip
//! formatting, which never depends on locale.

use std::fmt::Write;

use super::{DemoReport, DiagnoseReport, RatioRow, SolveReport, SpeedupOutcome, SpeedupRow};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn ratio_csv(rows: &[RatioRow]) -> String {
    let mut out = String::from("rho,m,solvable_fraction,trials,seed\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.rho, r.m, r.solvable_fraction, r.trials, r.seed).unwrap();
    }
    out
}

pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("rho,m,mean_speedup,trials_used,trials_excluded,seed\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            opt(r.rho),
            r.m,
            opt(r.mean_speedup),
            r.trials_used,
            r.trials_excluded,
            r.seed
        )
        .unwrap();
    }
    out
}

pub fn diagnose_csv(reports: &[DiagnoseReport], seed: u64) -> String {
    let mut out = String::from("matrix,m,h_tilde_norm,contractive,rho_abs,infinity_norm,seed\n");
    for d in reports {
        let rho = d.rho_abs.as_ref().map(|v| v.to_string()).unwrap_or_default();
        for (k, v) in d.h_tilde_norms.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&d.label),
                k + 1,
                v,
                *v < 1.0,
                rho,
                d.infinity_norm,
                seed
            )
            .unwrap();
        }
    }
    out
}

pub fn solve_csv(reports: &[SolveReport], seed: u64) -> String {
    let mut out = String::from(
        "matrix,n,m,h_tilde_norm,estimate,probable_error,sample_variance,closed_form_variance,direct,residual,mean_walk_length,cap_hit_fraction,walks,seed\n",
    );
    for s in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&s.label),
            s.n,
            s.m_used,
            s.h_tilde_norm,
            s.estimate.estimate,
            s.estimate.probable_error,
            s.estimate.sample_variance,
            opt(s.variance.converged.then_some(s.variance.variance)),
            s.direct,
            s.residual(),
            s.estimate.mean_walk_length,
            s.estimate.cap_hit_fraction,
            s.estimate.num_walks,
            seed
        )
        .unwrap();
    }
    out
}

pub fn demo_csv(reports: &[DemoReport]) -> String {
    let mut out = String::from("matrix,walk,m,terms,term_norm,partial_variance\n");
    for d in reports {
        for (name, m, rep) in [("standard", 1, &d.standard), ("multiway", d.multiway_m, &d.multiway)] {
            for r in &rep.rows {
                writeln!(out, "{},{},{},{},{},{}", csv_field(&d.label), name, m, r.terms, r.term_norm, r.partial_variance)
                    .unwrap();
            }
        }
    }
    out
}

pub fn render_ratio(rows: &[RatioRow]) -> String {
    let mut out = String::new();
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    write!(out, "{:>6}", "rho").unwrap();
    for m in &ms {
        write!(out, " {:>7}", format!("m={m}")).unwrap();
    }
    out.push('\n');
    let mut last = None;
    for r in rows {
        if last != Some(r.rho) {
            if last.is_some() {
                out.push('\n');
            }
            write!(out, "{:>6.2}", r.rho).unwrap();
            last = Some(r.rho);
        }
        write!(out, " {:>7.2}", r.solvable_fraction).unwrap();
    }
    out.push('\n');
    out
}

pub fn render_speedup(outcome: &SpeedupOutcome) -> String {
    let mut out = String::new();
    writeln!(out, "{:>6} {:>3} {:>10} {:>6} {:>9}", "rho", "m", "speedup", "used", "excluded").unwrap();
    for r in &outcome.rows {
        let rho = r.rho.map(|v| format!("{v:.2}")).unwrap_or_else(|| "files".into());
        let s = r.mean_speedup.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        writeln!(out, "{:>6} {:>3} {:>10} {:>6} {:>9}", rho, r.m, s, r.trials_used, r.trials_excluded).unwrap();
    }
    for (label, m, reason) in &outcome.exclusions {
        let m = m.map(|m| format!(" m={m}")).unwrap_or_default();
        writeln!(out, "excluded {label}{m}: {reason:?}").unwrap();
    }
    out
}

pub fn render_diagnose(reports: &[DiagnoseReport]) -> String {
    let mut out = String::new();
    for d in reports {
        writeln!(out, "{}  (n = {}, nnz = {})", d.label, d.n, d.nnz).unwrap();
        match &d.rho_abs {
            Ok(r) => writeln!(out, "  rho(|H|)   = {r:.6}").unwrap(),
            Err(e) => writeln!(out, "  rho(|H|)   = unavailable ({e})").unwrap(),
        }
        writeln!(out, "  ||H||_inf  = {:.6}", d.infinity_norm).unwrap();
        for (k, v) in d.h_tilde_norms.iter().enumerate() {
            let mark = if Some(k + 1) == d.first_contractive { "  <- first contractive" } else { "" };
            writeln!(out, "  m = {:>3}   ||H~||_inf = {:.6e}{mark}", k + 1, v).unwrap();
        }
        if let Some(reason) = &d.stopped {
            writeln!(out, "  stopped early: {reason}").unwrap();
        }
        match d.first_contractive {
            Some(m) => writeln!(out, "  solvable with m = {m}").unwrap(),
            None => writeln!(out, "  not solvable by this method").unwrap(),
        }
    }
    out
}

pub fn render_solve(reports: &[SolveReport]) -> String {
    let mut out = String::new();
    for s in reports {
        writeln!(out, "{}  (n = {}, m = {}, ||H~||_inf = {:.4e})", s.label, s.n, s.m_used, s.h_tilde_norm).unwrap();
        writeln!(out, "  estimate        = {} +/- {:.3e} (probable error)", s.estimate.estimate, s.estimate.probable_error)
            .unwrap();
        writeln!(out, "  direct <h,x>    = {}", s.direct).unwrap();
        writeln!(out, "  |residual|      = {:.3e}", s.residual()).unwrap();
        writeln!(out, "  sample variance = {:.6e}", s.estimate.sample_variance).unwrap();
        if s.variance.converged {
            writeln!(out, "  closed form     = {:.6e}", s.variance.variance).unwrap();
        } else {
            writeln!(out, "  closed form     = diverges (growth {:.3})", s.variance.growth_factor).unwrap();
        }
        writeln!(
            out,
            "  walks = {}, mean length = {:.2}, cap hits = {:.4}, cap = {}",
            s.estimate.num_walks, s.estimate.mean_walk_length, s.estimate.cap_hit_fraction, s.max_steps
        )
        .unwrap();
        if !s.contractive {
            writeln!(out, "  warning: hypermatrix is not contractive; the variance may be infinite").unwrap();
        }
    }
    out
}

pub fn render_demo(reports: &[DemoReport]) -> String {
    let mut out = String::new();
    for d in reports {
        writeln!(out, "{}", d.label).unwrap();
        for (name, m, rep) in [("standard", 1, &d.standard), ("multi-way", d.multiway_m, &d.multiway)] {
            let verdict = if rep.diverging() { "diverges" } else { "converges" };
            writeln!(
                out,
                "  {name} (m = {m}): ||H~||_inf = {:.4e}, growth {:.4} per term, series {verdict}",
                rep.h_tilde_norm, rep.growth_factor
            )
            .unwrap();
            let stride = (rep.rows.len() / 6).max(1);
            for r in rep.rows.iter().step_by(stride).chain(rep.rows.last()) {
                writeln!(out, "    k = {:>4}  term = {:.4e}  partial variance = {:.6e}", r.terms, r.term_norm, r.partial_variance)
                    .unwrap();
            }
            for (walks, var) in &rep.empirical_trace {
                writeln!(out, "    after {walks:>8} walks  sample variance = {var:.6e}").unwrap();
            }
        }
        if !d.multiway_contractive {
            writeln!(out, "  no contractive m found up to the cap").unwrap();
        }
    }
    out
}
