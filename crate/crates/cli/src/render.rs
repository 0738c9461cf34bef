//! Text tables, CSV and SVG, all drawn from the report structs.

use std::fmt::Write as _;

use regsens_core::fmt_sig;
use regsens_core::idset::CurvePoint;

use crate::report::{
    AdjustOutput, BoundsOutput, BreakdownOutput, IdsetOutput, IdsetRow, OracleOutput, Source,
    SummaryRow,
};

/// Six significant digits, the precision of every table.
pub fn num(x: f64) -> String {
    fmt_sig(x, 6)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "-".into())
}

fn set_str(roots: &[f64]) -> String {
    let v: Vec<String> = roots.iter().map(|r| num(*r)).collect();
    format!("{{{}}}", v.join(", "))
}

pub fn idset_str(row: &IdsetRow) -> String {
    let mut s = if row.empty {
        "∅".to_string()
    } else {
        set_str(&row.roots)
    };
    if !row.excluded.is_empty() {
        let v: Vec<String> = row.excluded.iter().map(|r| num(*r)).collect();
        let _ = write!(s, " (excluded: {})", v.join(", "));
    }
    if row.degenerate_medium {
        s.push_str(" (R²_long = R²_med)");
    }
    s
}

/// Left-aligned columns separated by two spaces.
struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            rows: vec![header.iter().map(|s| s.to_string()).collect()],
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self, out: &mut String) {
        let ncol = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut w = vec![0; ncol];
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                w[i] = w[i].max(c.chars().count());
            }
        }
        for r in &self.rows {
            let mut line = String::new();
            for (i, c) in r.iter().enumerate() {
                line.push_str(c);
                if i + 1 < r.len() {
                    line.extend(std::iter::repeat_n(' ', w[i] - c.chars().count() + 2));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
}

fn header(out: &mut String, title: &str, src: &Source, s: &SummaryRow) {
    let _ = writeln!(out, "{title}");
    let n = src.n.map(|n| format!(", n = {n}")).unwrap_or_default();
    let _ = writeln!(out, "source: {} {}{n}", src.kind, src.path);
    let _ = writeln!(
        out,
        "beta_short = {}  beta_med = {}  R²_short = {}  R²_med = {}",
        num(s.beta_short),
        num(s.beta_med),
        num(s.r2_short),
        num(s.r2_med)
    );
    out.push('\n');
}

pub fn breakdown_table(r: &BreakdownOutput) -> String {
    let mut out = String::new();
    header(&mut out, "Breakdown points", &r.source, &r.summary);
    let mut t = Table::new(&[
        "R² rule",
        "R²_long",
        "explain-away (signed)",
        "|explain-away|",
        "M",
        "sign-change",
        "attained",
        "naive (incorrect)",
    ]);
    for rule in &r.rules {
        let rep = &rule.report;
        for (i, m) in rule.m_bounds.iter().enumerate() {
            let first = i == 0;
            let sc = rule.sign_change_for(i);
            let (value, attained) = match sc {
                Some(sc) if sc.precluded => ("precluded".to_string(), "-".to_string()),
                Some(sc) => (
                    num(sc.value),
                    if sc.attained { "yes" } else { "no (limit)" }.to_string(),
                ),
                None => ("-".into(), "-".into()),
            };
            t.push(vec![
                if first {
                    rule.rule.rule.clone()
                } else {
                    String::new()
                },
                if first {
                    num(rep.r2long)
                } else {
                    String::new()
                },
                if first {
                    opt(rep.explain_away_signed)
                } else {
                    String::new()
                },
                if first {
                    opt(rep.explain_away)
                } else {
                    String::new()
                },
                m.label.clone(),
                value,
                attained,
                if first {
                    opt(rep.naive_incorrect.as_ref().map(|n| n.value))
                } else {
                    String::new()
                },
            ]);
        }
    }
    t.render(&mut out);
    for rule in &r.rules {
        let rep = &rule.report;
        let bs = rep
            .beta_star
            .map(|b| format!("{} (an element of the set, not a bound)", num(b.value)))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "\n[{}] δ = 1 adjustment: {}  beta*: {}",
            rule.rule.rule,
            opt(rep.delta_one_adjustment),
            bs
        );
        for w in &rep.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    out
}

pub fn idset_table(r: &IdsetOutput) -> String {
    let mut out = String::new();
    header(&mut out, "Identified sets", &r.source, &r.summary);
    let mut t = Table::new(&["R² rule", "R²_long", "δ", "identified set"]);
    for rule in &r.rules {
        for (i, row) in rule.sets.iter().enumerate() {
            t.push(vec![
                if i == 0 {
                    rule.rule.rule.clone()
                } else {
                    String::new()
                },
                if i == 0 {
                    num(rule.rule.r2long)
                } else {
                    String::new()
                },
                num(row.delta),
                idset_str(row),
            ]);
        }
    }
    t.render(&mut out);
    out
}

pub fn bounds_table(r: &BoundsOutput) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "Identified sets over |δ| ≤ δ̄",
        &r.source,
        &r.summary,
    );
    let mut t = Table::new(&[
        "R² rule",
        "R²_long",
        "δ̄",
        "M",
        "set",
        "convex hull",
        "contains 0",
    ]);
    for rule in &r.rules {
        for (i, row) in rule.rows.iter().enumerate() {
            t.push(vec![
                if i == 0 {
                    rule.rule.rule.clone()
                } else {
                    String::new()
                },
                if i == 0 {
                    num(rule.rule.r2long)
                } else {
                    String::new()
                },
                num(row.delta_bar),
                row.m.label.clone(),
                row.set.to_string(),
                row.hull
                    .map(|h| h.to_string())
                    .unwrap_or_else(|| "∅".into()),
                if row.contains_zero { "yes" } else { "no" }.into(),
            ]);
        }
    }
    t.render(&mut out);
    out
}

pub fn adjust_table(r: &AdjustOutput) -> String {
    let mut out = String::new();
    header(&mut out, "Bias adjustments", &r.source, &r.summary);
    if let Some(p) = r.proportionality {
        let _ = writeln!(
            out,
            "gamma_med ∝ pi1: {} (relative residual {}{})\n",
            if p.proportional { "yes" } else { "no" },
            num(p.rel_residual),
            if p.proportional {
                format!(", ratio {}", num(p.c_med))
            } else {
                String::new()
            }
        );
    }
    for p in &r.panels {
        let _ = writeln!(
            out,
            "R² rule {} (R²_long = {})",
            p.rule.rule,
            num(p.rule.r2long)
        );
        let mut t = Table::new(&["", "estimate"]);
        t.push(vec!["baseline (beta_med)".into(), num(p.baseline)]);
        t.push(vec!["δ = 1 adjustment".into(), opt(p.delta_one)]);
        for row in &p.sets {
            t.push(vec![
                format!("set at δ = {}", num(row.delta)),
                idset_str(row),
            ]);
        }
        for c in &p.cumulative {
            t.push(vec![
                format!("set over |δ| ≤ {}", num(c.delta_bar)),
                c.set.to_string(),
            ]);
        }
        if let Some(b) = p.beta_star {
            t.push(vec!["beta* (element, not a bound)".into(), num(b.value)]);
        }
        t.render(&mut out);
        for w in &p.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        out.push('\n');
    }
    out
}

pub fn oracle_table(r: &OracleOutput) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Property suites (seed {}, {} instances)",
        r.seed, r.instances
    );
    if let Some(f) = r.c3_fault {
        let _ = writeln!(out, "fault injected: c3 += {f} × max|c|");
    }
    out.push('\n');
    let mut t = Table::new(&["suite", "result", "checks", "worst", "failures"]);
    for s in &r.suites {
        t.push(vec![
            s.name.clone(),
            if s.passed() { "PASS" } else { "FAIL" }.into(),
            s.checks.to_string(),
            num(s.worst),
            s.failures.len().to_string(),
        ]);
    }
    t.render(&mut out);
    let _ = writeln!(
        out,
        "\nlargest explain-away / sign-change ratio: {}",
        num(r.max_ratio)
    );
    for s in &r.suites {
        for f in s.failures.iter().take(5) {
            let _ = writeln!(
                out,
                "{} #{} (seed {}): {}",
                s.name, f.index, f.seed, f.detail
            );
        }
    }
    out
}

fn csv_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("b,delta,gap_flag\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{}",
            csv_num(p.b),
            p.delta.map(csv_num).unwrap_or_default(),
            u8::from(p.gap)
        );
    }
    s
}

pub fn sweep_csv(points: &[crate::report::SweepPoint]) -> String {
    let mut s = String::from("delta_bar,lower,upper,gap\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            csv_num(p.delta_bar),
            csv_num(p.lower),
            csv_num(p.upper),
            u8::from(p.gap)
        );
    }
    s
}

/// δ against b, with gaps at poles and the excluded point and a dashed line
/// at δ = 1.
pub fn curve_svg(points: &[CurvePoint], beta_med: f64, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    const CLIP: f64 = 5.0;
    let (b_lo, b_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.b), hi.max(p.b))
        });
    let (b_lo, b_hi) = if b_lo < b_hi {
        (b_lo, b_hi)
    } else {
        (b_lo - 1.0, b_lo + 1.0)
    };
    let x = |b: f64| PAD + (b - b_lo) / (b_hi - b_lo) * (W - 2.0 * PAD);
    let y = |d: f64| H - PAD - (d + CLIP) / (2.0 * CLIP) * (H - 2.0 * PAD);

    let mut paths = Vec::new();
    let mut cur = String::new();
    for p in points {
        match p.delta {
            Some(d) if !p.gap && d.abs() <= CLIP => {
                let cmd = if cur.is_empty() { 'M' } else { 'L' };
                let _ = write!(cur, "{cmd}{:.2},{:.2} ", x(p.b), y(d));
            }
            _ => {
                if !cur.is_empty() {
                    paths.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        paths.push(cur);
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="20">{}</text>"#, xml_escape(title));
    // axes
    let _ = writeln!(
        s,
        r##"<line x1="{PAD}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
        y(0.0),
        W - PAD,
        y(0.0)
    );
    if (b_lo..=b_hi).contains(&0.0) {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{PAD}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
            x(0.0),
            x(0.0),
            H - PAD
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{PAD}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-dasharray="6 4"/>"##,
        y(1.0),
        W - PAD,
        y(1.0)
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" fill="#c33">δ = 1</text>"##,
        W - PAD + 4.0,
        y(1.0) + 4.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{PAD}" x2="{:.2}" y2="{:.2}" stroke="#36c" stroke-dasharray="2 3"/>"##,
        x(beta_med),
        x(beta_med),
        H - PAD
    );
    for p in &paths {
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#222" stroke-width="1.5"/>"##,
            p.trim_end()
        );
    }
    for (v, label) in [(b_lo, num(b_lo)), (b_hi, num(b_hi))] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            x(v),
            H - PAD + 16.0
        );
    }
    for d in [-CLIP, 0.0, CLIP] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            PAD - 4.0,
            y(d) + 4.0,
            num(d)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">b</text>"#,
        W / 2.0,
        H - 8.0
    );
    let _ = writeln!(s, r#"<text x="14" y="{:.2}">δ</text>"#, H / 2.0);
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
