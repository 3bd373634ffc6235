//! Static HTML heatmaps: one line of highlighted tokens per explainer.
//! Positive weights are green, negative red, and opacity is `|w| / max|w|`
//! within each explainer.

use std::fmt::Write as _;

use crate::explain::ExplanationReport;
use crate::explanation::Explanation;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Background colour of one token.
pub fn token_color(weight: f64, max_abs: f64) -> String {
    let opacity = if max_abs > 0.0 { weight.abs() / max_abs } else { 0.0 };
    if weight >= 0.0 {
        format!("rgba(0, 160, 0, {opacity:.3})")
    } else {
        format!("rgba(210, 0, 0, {opacity:.3})")
    }
}

fn row(out: &mut String, tokens: &[String], e: &Explanation) {
    let max_abs = e.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let _ = write!(out, "<tr><th>{}</th><td>", escape(e.method.tag()));
    for (tok, &w) in tokens.iter().zip(&e.weights) {
        let _ = write!(
            out,
            "<span style=\"background:{}\" title=\"{w:.6}\">{}</span> ",
            token_color(w, max_abs),
            escape(tok)
        );
    }
    out.push_str("</td></tr>\n");
}

/// One section per report, in order.
pub fn render_heatmap(reports: &[ExplanationReport]) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>xattn explanations</title>\n\
         <style>body{font-family:sans-serif} th{text-align:left;padding-right:1em;font-weight:normal;color:#555} \
         span{padding:1px 3px;border-radius:3px;line-height:1.9}</style>\n</head>\n<body>\n",
    );
    for (i, report) in reports.iter().enumerate() {
        let _ = writeln!(
            out,
            "<section>\n<h3>document {}</h3>\n<p>f(x) = {:.6} ({})</p>",
            i + 1,
            report.output,
            if report.positive { "positive" } else { "negative" }
        );
        out.push_str("<table>\n");
        for e in &report.explanations {
            row(&mut out, &report.tokens, e);
        }
        out.push_str("</table>\n</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_follow_sign_and_magnitude() {
        assert_eq!(token_color(2.0, 2.0), "rgba(0, 160, 0, 1.000)");
        assert_eq!(token_color(-1.0, 2.0), "rgba(210, 0, 0, 0.500)");
        assert_eq!(token_color(0.0, 0.0), "rgba(0, 160, 0, 0.000)");
    }

    #[test]
    fn tokens_are_escaped() {
        assert_eq!(escape("<b>&\"'"), "&lt;b&gt;&amp;&quot;&#39;");
    }
}
