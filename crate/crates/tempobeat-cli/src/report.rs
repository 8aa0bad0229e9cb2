//! Assembles a single self-contained HTML report from artifacts already in
//! the output directory. Nothing is recomputed here: figures are inlined
//! SVG files and tables are rendered from the fit and recommendation JSON.

use std::fmt::Write as _;
use std::path::Path;

use tempobeat::error::Error;
use tempobeat::mlm::{ModelFit, ModelKind};
use tempobeat::rmsd::Recommendation;

use crate::manifest::ManifestBuilder;

type Result<T> = std::result::Result<T, Error>;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn inline_svg(html: &mut String, manifest: &mut ManifestBuilder, path: &Path) -> bool {
    match std::fs::read_to_string(path) {
        Ok(svg) => {
            manifest.input(path);
            html.push_str("<figure>");
            html.push_str(&svg);
            html.push_str("</figure>\n");
            true
        }
        Err(_) => false,
    }
}

fn fixed_effect_table(fit: &ModelFit) -> String {
    let mut out = String::from(
        "<table><thead><tr><th>fixed effect</th><th>coef.</th><th>std. err.</th>\
         <th>z</th><th>P&gt;|z|</th><th>[95% conf. interval]</th></tr></thead><tbody>\n",
    );
    for b in &fit.beta {
        writeln!(
            out,
            "<tr><td>{}</td><td>{:.4}</td><td>{:.4}</td><td>{:.2}</td><td>{:.4}</td>\
             <td>{:.4}&nbsp;… {:.4}</td></tr>",
            esc(&b.name),
            b.coef,
            b.se,
            b.z,
            b.p,
            b.ci95[0],
            b.ci95[1]
        )
        .unwrap();
    }
    out.push_str("</tbody></table>\n");
    out
}

fn components_table(fit: &ModelFit) -> String {
    let mut out = String::from(
        "<table><thead><tr><th>variation</th><th>estimate</th><th>std. err.</th>\
         <th>% variation</th><th>% cumulative</th><th>[95% conf. interval]</th></tr></thead><tbody>\n",
    );
    let names = ["Hour", "Day", "MY", "Residual"];
    for (name, c) in names.iter().zip(fit.components.as_array()) {
        let se = c.se.map_or("—".into(), |v| format!("{v:.4}"));
        let ci = c
            .ci95
            .map_or("at boundary".into(), |[lo, hi]| format!("{lo:.4}&nbsp;… {hi:.4}"));
        writeln!(
            out,
            "<tr><td>{name}</td><td>{:.4}</td><td>{se}</td><td>{:.1}%</td><td>{:.1}%</td><td>{ci}</td></tr>",
            c.estimate,
            c.share * 100.0,
            c.cumulative_share * 100.0
        )
        .unwrap();
    }
    writeln!(
        out,
        "</tbody></table>\n<p>n = {} · log-likelihood {:.2} · LR test vs. linear model χ² = {:.2}{}</p>",
        fit.n_obs,
        fit.loglik,
        fit.lr_chi2_vs_linear,
        if fit.converged { "" } else { " · <strong>not converged</strong>" }
    )
    .unwrap();
    out
}

pub fn cmd_report(out: &Path) -> Result<()> {
    let mut manifest = ManifestBuilder::new("report", 1);
    let meta_path = out.join("dataset_meta.json");
    if !meta_path.exists() {
        return Err(Error::InvalidConfig(format!(
            "missing {}; run `tempobeat ingest` (or synth + ingest) first",
            meta_path.display()
        )));
    }
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
    manifest.input(&meta_path);

    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\
         <title>tempobeat report</title>\n<style>\n\
         body{font-family:sans-serif;max-width:980px;margin:2em auto;color:#222}\n\
         table{border-collapse:collapse;margin:1em 0}\n\
         td,th{border:1px solid #999;padding:3px 9px;text-align:right}\n\
         th{background:#eee}\ntd:first-child,th:first-child{text-align:left}\n\
         figure{margin:1em 0}\nh2{border-bottom:2px solid #444;padding-bottom:4px}\n\
         </style></head><body>\n<h1>Temporal representativeness report</h1>\n",
    );

    writeln!(
        html,
        "<p>{} hourly observations · timezone {} · mean {:.1} · sd {:.1} · {} filled value(s)</p>",
        meta["n_rows"],
        esc(meta["timezone"].as_str().unwrap_or("?")),
        meta["mean"].as_f64().unwrap_or(f64::NAN),
        meta["sd"].as_f64().unwrap_or(f64::NAN),
        meta["fill_report"].as_array().map_or(0, Vec::len),
    )
    .unwrap();

    html.push_str("<h2>Activity profiles</h2>\n");
    let mut any_profiles = false;
    for name in [
        "profile_hour.svg",
        "profile_weekday.svg",
        "profile_week.svg",
        "profile_histogram.svg",
    ] {
        any_profiles |= inline_svg(&mut html, &mut manifest, &out.join(name));
    }
    if !any_profiles {
        html.push_str("<p>No profiles found; run <code>tempobeat ingest</code>.</p>\n");
    }

    html.push_str("<h2>Autocorrelation</h2>\n");
    let mut any_acf = false;
    for name in [
        "acf_hourly_within_day.svg",
        "acf_hourly_day_step.svg",
        "acf_daily_within_month.svg",
        "acf_daily_week_step.svg",
    ] {
        any_acf |= inline_svg(&mut html, &mut manifest, &out.join(name));
    }
    if !any_acf {
        html.push_str("<p>No correlograms found; run <code>tempobeat acf</code>.</p>\n");
    }

    html.push_str("<h2>Mixed models</h2>\n");
    let mut any_fit = false;
    for kind in [ModelKind::Empty, ModelKind::Full, ModelKind::Restricted] {
        let path = out.join(format!("fit_{}.json", kind.name()));
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        manifest.input(&path);
        let fit = ModelFit::from_json(&text)?;
        any_fit = true;
        writeln!(html, "<h3>{} model</h3>", kind.name()).unwrap();
        if fit.beta.len() > 1 {
            html.push_str(&fixed_effect_table(&fit));
        }
        html.push_str(&components_table(&fit));
    }
    if !any_fit {
        html.push_str("<p>No fits found; run <code>tempobeat fit</code>.</p>\n");
    }

    html.push_str("<h2>Prediction deviation</h2>\n");
    let mut any_rmsd = false;
    for name in ["rmsd_weekday.svg", "rmsd_hour.svg"] {
        any_rmsd |= inline_svg(&mut html, &mut manifest, &out.join(name));
    }
    if !any_rmsd {
        html.push_str("<p>No RMSD charts found; run <code>tempobeat rmsd</code>.</p>\n");
    }

    html.push_str("<h2>Recommended sampling slots</h2>\n");
    let rec_path = out.join("recommendation.json");
    if let Ok(text) = std::fs::read_to_string(&rec_path) {
        manifest.input(&rec_path);
        let rec: Recommendation = serde_json::from_str(&text)?;
        writeln!(
            html,
            "<p>Best weekday: <strong>{}</strong> · best hour: <strong>{:02}:00</strong> \
             · models: {} · minimum slot count: {}</p>",
            esc(&rec.best_weekday_name),
            rec.best_hour,
            esc(&rec.models.join(", ")),
            rec.min_count
        )
        .unwrap();
        html.push_str(
            "<table><thead><tr><th>rank</th><th>weekday</th><th>hour</th>\
             <th>rmsd</th><th>count</th></tr></thead><tbody>\n",
        );
        for (i, slot) in rec.ranked.iter().take(15).enumerate() {
            writeln!(
                html,
                "<tr><td>{}</td><td>{}</td><td>{:02}:00</td><td>{:.5}</td><td>{}</td></tr>",
                i + 1,
                esc(&slot.weekday_name),
                slot.hour,
                slot.rmsd,
                slot.count
            )
            .unwrap();
        }
        html.push_str("</tbody></table>\n");
    } else {
        html.push_str("<p>No recommendation found; run <code>tempobeat recommend</code>.</p>\n");
    }

    let anomalies_path = out.join("anomalies.csv");
    if let Ok(text) = std::fs::read_to_string(&anomalies_path) {
        manifest.input(&anomalies_path);
        let count = text.lines().count().saturating_sub(1);
        writeln!(
            html,
            "<h2>Anomalies</h2>\n<p>{count} flagged hour(s); see <code>anomalies.csv</code>.</p>"
        )
        .unwrap();
    }

    html.push_str("</body></html>\n");
    let path = out.join("report.html");
    std::fs::write(&path, html)?;
    manifest.output(&path);
    manifest.stage("assemble");
    manifest.write(out)?;
    eprintln!("report: wrote {}", path.display());
    Ok(())
}
