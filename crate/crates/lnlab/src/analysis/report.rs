use std::fmt::Write;

use super::{BarrierCertificate, RateFit, ReportRow};

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Table cell text with pipes escaped.
fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn markdown_report(rows: &[ReportRow], certs: &[BarrierCertificate]) -> String {
    let mut s = String::from("# Rate verification\n\n");
    if !rows.is_empty() {
        s.push_str("| case | n | predicted | form | measured | model | window | sharp | verdict |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in rows {
            let sharp = match r.sharp {
                Some(true) => "yes",
                Some(false) => "no",
                None => "-",
            };
            let label = cell(&if r.outside_theorem { format!("{} (exploratory)", r.label) } else { r.label.clone() });
            let _ = writeln!(
                s,
                "| {label} | {} | {:.3} | {} | {:.4} | {:?} | [{:.3e}, {:.3e}] | {sharp} | {} |",
                r.n,
                r.predicted,
                cell(&r.form),
                r.alpha_hat,
                r.model,
                r.window.0,
                r.window.1,
                verdict(r.pass)
            );
        }
        s.push('\n');
    }
    if !certs.is_empty() {
        s.push_str("## Barrier certificates\n\n| barrier | operator | n | region | margin | nodes | constants | verdict |\n");
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for c in certs {
            let consts: Vec<String> = c.constants.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.3e} | {} | {} | {} |",
                cell(&c.label),
                cell(&c.operator),
                c.n,
                cell(&c.region),
                c.margin,
                c.nodes,
                cell(&consts.join(", ")),
                verdict(c.pass)
            );
        }
    }
    s
}

/// CSV of the annulus table with a `#` JSON metadata line.
pub fn annulus_csv(fit: &RateFit, meta: &serde_json::Value) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["annulus_r", "max_ratio"]).expect("in-memory write");
    for (r, v) in &fit.table {
        w.write_record([format!("{r:.17e}"), format!("{v:.17e}")]).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
    format!("# {meta}\n{body}")
}

/// Log–log plot of the annulus maxima with the fitted line.
pub fn loglog_svg(fit: &RateFit, title: &str) -> String {
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let xs: Vec<f64> = fit.table.iter().map(|(r, _)| r.log10()).collect();
    let ys: Vec<f64> = fit.table.iter().map(|(_, v)| v.log10()).collect();
    let fy: Vec<f64> = fit.table.iter().map(|(r, _)| (fit.model_value(*r)).log10()).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys.iter().chain(&fy).copied().collect::<Vec<_>>());
    let px = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"24\" font-family=\"monospace\" font-size=\"13\">{} alpha={:.3}</text>", escape(title), fit.alpha);
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"black\" points=\"{pad},{pad} {pad},{} {},{}\"/>",
        h - pad,
        w - pad,
        h - pad
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">log10 r</text>", w / 2.0, h - 12.0);
    let line: Vec<String> = xs.iter().zip(&fy).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
    let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"#c33\" points=\"{}\"/>", line.join(" "));
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#236\"/>", px(*x), py(*y));
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl RateFit {
    /// Value of the preferred fitted model at r.
    pub fn model_value(&self, r: f64) -> f64 {
        match self.model {
            super::RateModel::Power => self.constant * r.powf(self.alpha),
            super::RateModel::PowerLog => self.constant * r.powf(self.alpha) * r.ln().abs(),
        }
    }
}
