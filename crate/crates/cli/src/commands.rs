use std::path::PathBuf;

use serde_json::json;

use rrvalue_core::calibration::{
    operating_characteristics, scenario_comparison, Calibrator, WorldMode, WorldSpec,
};
use rrvalue_core::config::{lexicon_for, sha256_hex, AnalysisConfig, LoadedConfig, COMPUTED_ALPHA};
use rrvalue_core::inference::{
    multiplicity_bound, posterior_result, scenario_posterior, trials_estimate, InferenceInputs, Multiplicity,
    POSTERIOR_FORMULA,
};
use rrvalue_core::numeric::Exact;
use rrvalue_core::onomasticon::{Gender, Lexicon, Onomasticon, Source};
use rrvalue_core::rr_engine::{cluster_rr, RrBreakdown, SlotOutcome};
use rrvalue_core::sensitivity::{compare_all, reports_csv, resolve_alphas, sweep, sweep_csv};
use rrvalue_core::tail_area::{agreement, count_samples, ConfigurationShape, TailModel, ValidityFilter};
use rrvalue_core::talpiot;

use crate::output::{csv_rows, emit, sci, table, CliError, Rendered, RunManifest};
use crate::{Cli, Command, Method};

struct Context {
    loaded: LoadedConfig,
    config: AnalysisConfig,
    onomasticon: Onomasticon,
    lexicon: Lexicon,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let loaded = match &cli.config {
            Some(p) => LoadedConfig::load(p).map_err(CliError::input)?,
            None => LoadedConfig::talpiot(),
        };
        let mut config = loaded.config.clone();
        apply_overrides(cli, &mut config)?;
        let onomasticon = loaded.onomasticon().map_err(CliError::input)?;
        let lexicon = lexicon_for(&config, &onomasticon).map_err(CliError::input)?;
        Ok(Context { loaded, config, onomasticon, lexicon })
    }

    fn manifest(&self, cli: &Cli, seed: Option<u64>) -> RunManifest {
        RunManifest {
            tool: "rrvalue".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: serde_json::to_value(&cli.command).unwrap_or_default(),
            config_path: self.loaded.path.as_ref().map(|p| p.display().to_string()),
            config_sha256: Some(sha256_hex(self.loaded.text.as_bytes())),
            lexicon_path: self.loaded.lexicon_path().map(|p| p.display().to_string()),
            lexicon_sha256: self.lexicon.content_hash(),
            seed,
            resolved_config: Some(self.config.clone()),
        }
    }

    fn shape(&self) -> ConfigurationShape {
        ConfigurationShape::of(&self.config.configuration)
    }

    fn breakdown(&self) -> Result<RrBreakdown, CliError> {
        let c = &self.config;
        cluster_rr(&c.configuration, &c.lists, &self.lexicon, &c.bonuses).map_err(CliError::input)
    }

    fn model(&self) -> Result<TailModel, CliError> {
        let c = &self.config;
        TailModel::new(self.shape(), &c.lists, &self.lexicon, &c.bonuses).map_err(CliError::input)
    }

    fn filter(&self) -> ValidityFilter {
        ValidityFilter::from(&self.config.tail.filter)
    }
}

fn apply_overrides(cli: &Cli, c: &mut AnalysisConfig) -> Result<(), CliError> {
    if let Some(seed) = cli.seed {
        c.tail.seed = seed;
        c.simulation.seed = seed;
    }
    match &cli.command {
        Command::Tail { samples: Some(n), .. } => c.tail.mc_samples = *n,
        Command::Posterior { alpha, thetas } => {
            if let Some(a) = alpha {
                c.inference.alpha = a.clone();
            }
            if !thetas.is_empty() {
                c.inference.thetas = thetas.clone();
            }
        }
        Command::Sensitivity { shared_threshold: true } => c.sensitivity.shared_threshold = true,
        Command::Simulate { tombs, fixed_renditions, scenarios } => {
            if let Some(n) = tombs {
                c.simulation.n_tombs = *n;
            }
            if *fixed_renditions {
                c.simulation.rendition_sampling = false;
            }
            if *scenarios {
                c.simulation.scenario_comparison = true;
            }
        }
        _ => {}
    }
    c.validate().map_err(CliError::input)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Command::Ingest { lexicon } = &cli.command {
        return ingest(cli, lexicon.as_ref());
    }
    let ctx = Context::load(cli)?;
    let (report, seed) = match &cli.command {
        Command::Ingest { .. } => unreachable!("handled above"),
        Command::Rr => (rr(&ctx)?, None),
        Command::Tail { methods, threshold, .. } => {
            let methods = if methods.is_empty() { vec![Method::Exact] } else { methods.clone() };
            let seed = methods.contains(&Method::Mc).then_some(ctx.config.tail.seed);
            (tail(&ctx, &methods, threshold.as_deref())?, seed)
        }
        Command::Posterior { .. } => (posterior(&ctx)?, None),
        Command::Sensitivity { .. } => (sensitivity(&ctx)?, None),
        Command::Simulate { .. } => (simulate(&ctx)?, Some(ctx.config.simulation.seed)),
    };
    emit(report, &ctx.manifest(cli, seed), cli.format, cli.out.as_deref())
}

fn ingest(cli: &Cli, path: Option<&PathBuf>) -> Result<(), CliError> {
    let loaded = match &cli.config {
        Some(p) => Some(LoadedConfig::load(p).map_err(CliError::input)?),
        None => None,
    };
    let (onom, shown_path) = match (path, &loaded) {
        (Some(p), _) => (Onomasticon::load_path(p).map_err(CliError::input)?, Some(p.display().to_string())),
        (None, Some(l)) => (l.onomasticon().map_err(CliError::input)?, l.lexicon_path().map(|p| p.display().to_string())),
        (None, None) => (talpiot::onomasticon(), None),
    };
    let genders = onom.genders();
    let totals: Vec<u64> = genders.iter().filter_map(|&g| onom.total(g, Source::AllSources)).collect();
    let totals_text = totals.iter().map(u64::to_string).collect::<Vec<_>>().join("/");
    let records = onom.records();
    let summary = format!("OK: {} genders, {} totals", genders.len(), totals_text);
    let mut rows = Vec::new();
    for &g in &genders {
        for (generic, count) in onom.generics(g) {
            rows.push(vec![g.to_string(), generic.to_string(), String::new(), count.to_string()]);
            for (r, c) in onom.renditions(g, generic) {
                rows.push(vec![g.to_string(), generic.to_string(), r.to_string(), c.to_string()]);
            }
        }
    }
    let table_text = format!("{summary}\n{}", table(&["gender", "generic", "rendition", "count"], &rows));
    let report = Rendered {
        name: "ingest",
        json: json!({
            "status": "ok",
            "summary": summary,
            "genders": genders,
            "totals": genders.iter().map(|&g| json!({
                "gender": g,
                "all_sources": onom.total(g, Source::AllSources),
                "ossuary": onom.total(g, Source::Ossuary),
            })).collect::<Vec<_>>(),
            "records": records.len(),
            "content_sha256": onom.content_hash(),
        }),
        table: table_text,
        csv: Some(onom.to_csv_string()),
    };
    let manifest = RunManifest {
        tool: "rrvalue".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: serde_json::to_value(&cli.command).unwrap_or_default(),
        config_path: loaded.as_ref().and_then(|l| l.path.as_ref()).map(|p| p.display().to_string()),
        config_sha256: loaded.as_ref().map(|l| sha256_hex(l.text.as_bytes())),
        lexicon_path: shown_path,
        lexicon_sha256: onom.content_hash(),
        seed: None,
        resolved_config: loaded.map(|l| l.config),
    };
    emit(report, &manifest, cli.format, cli.out.as_deref())
}

fn outcome_text(o: &SlotOutcome) -> String {
    match o {
        SlotOutcome::Matched(e) => e.to_string(),
        SlotOutcome::Other => "Other".into(),
        SlotOutcome::Discarded => "Discarded".into(),
    }
}

fn rr(ctx: &Context) -> Result<Rendered, CliError> {
    let b = ctx.breakdown()?;
    let headers = ["slot", "ossuary", "gender", "inscription", "match", "rr"];
    let rows: Vec<Vec<String>> = b
        .per_slot
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.inscription.ossuary.clone().unwrap_or_default(),
                s.inscription.gender.to_string(),
                s.inscription.text.clone().unwrap_or_else(|| s.inscription.to_string()),
                outcome_text(&s.outcome),
                s.factor.as_ref().map_or("Discarded".into(), |f| format!("{:.4}", f.to_f64())),
            ]
        })
        .collect();
    let mut text = table(&headers, &rows);
    for bonus in &b.bonus_factors {
        text.push_str(&format!(
            "bonus {}->{} on slots {}->{}: divide by {}\n",
            bonus.rule.father_generic, bonus.rule.son_generic, bonus.edge.father, bonus.edge.son, bonus.divisor
        ));
    }
    text.push_str(&format!("pre-bonus cluster RR  {}\n", sci(b.pre_bonus_rr.to_f64())));
    text.push_str(&format!("cluster RR            {}\n", sci(b.cluster_rr.to_f64())));
    let csv_table: Vec<Vec<String>> = b
        .per_slot
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.inscription.ossuary.clone().unwrap_or_default(),
                s.inscription.gender.to_string(),
                s.inscription.generic.clone(),
                s.inscription.rendition.clone().unwrap_or_default(),
                outcome_text(&s.outcome),
                s.factor.as_ref().map_or(String::new(), |f| format!("{:e}", f.to_f64())),
                s.factor.as_ref().map_or(String::new(), Exact::to_fraction_string),
            ]
        })
        .collect();
    Ok(Rendered {
        name: "rr",
        json: json!({
            "breakdown": b,
            "pre_bonus_rr_exact": b.pre_bonus_rr.to_fraction_string(),
            "cluster_rr_exact": b.cluster_rr.to_fraction_string(),
        }),
        table: text,
        csv: Some(csv_rows(
            &["slot", "ossuary", "gender", "generic", "rendition", "match", "rr", "rr_exact"],
            &csv_table,
        )),
    })
}

/// The provisos a tail value rests on, in words.
fn assumptions(ctx: &Context, shape: &ConfigurationShape) -> Vec<String> {
    let c = &ctx.config;
    let mut out = vec![
        format!("configuration shape {shape} (discarded slots excluded)"),
        format!("validity filter {}", ctx.filter().describe()),
    ];
    for g in Gender::ALL {
        let list = c.lists.get(g);
        let names: Vec<String> = list.entries.iter().map(|e| e.to_string()).collect();
        out.push(format!("{g} candidates: {}; Other scores {}", names.join(", "), list.other_rr));
        if !list.demoted.is_empty() {
            let d: Vec<String> = list.demoted.iter().map(|e| e.to_string()).collect();
            out.push(format!("{g} names scored as Other: {}", d.join(", ")));
        }
    }
    for s in ctx.lexicon.supplements() {
        let name = match &s.rendition {
            Some(r) => format!("{}/{r}", s.generic),
            None => s.generic.clone(),
        };
        out.push(match &s.frequency {
            Some(f) => format!("{} {name}: supplied frequency {}", s.gender, f),
            None => format!("{} {name}: listed without a frequency, no mass under random draws", s.gender),
        });
    }
    for r in &c.bonuses.rules {
        out.push(format!(
            "bonus {}->{} divides by {} ({} level)",
            r.father_generic,
            r.son_generic,
            r.divisor,
            format!("{:?}", c.bonuses.level).to_lowercase()
        ));
    }
    out
}

fn tail(ctx: &Context, methods: &[Method], threshold: Option<&str>) -> Result<Rendered, CliError> {
    let b = ctx.breakdown()?;
    let t = match threshold {
        Some(s) => Exact::parse_decimal(s).ok_or_else(|| CliError::Input(format!("bad threshold {s:?}")))?,
        None => b.cluster_rr.clone(),
    };
    let shape = ctx.shape();
    let model = ctx.model()?;
    let filter = ctx.filter();
    let tc = &ctx.config.tail;
    let mut results = Vec::new();
    for m in methods {
        results.push(match m {
            Method::Exact => model.exact_tail(&t, &filter, tc.budget),
            Method::Mc => model.mc_tail(&t, &filter, tc.mc_samples, tc.seed),
        }
        .map_err(CliError::input)?);
    }
    let exact = results.iter().find(|r| r.method == rrvalue_core::tail_area::TailMethod::Exact);
    let mc = results.iter().find(|r| r.method == rrvalue_core::tail_area::TailMethod::MonteCarlo);
    let agree = exact.zip(mc).map(|(e, m)| agreement(e, m));
    let beta = results.first().map_or(1.0, |r| r.beta.min(1.0));
    let inf = &ctx.config.inference;
    let counts = [beta, talpiot::QUOTED_BETA]
        .iter()
        .map(|&bt| count_samples(inf.population_male, inf.population_female, &shape, bt))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::input)?;
    let lexicon_counts = count_samples(
        ctx.onomasticon.total(Gender::Male, Source::AllSources).unwrap_or(1),
        ctx.onomasticon.total(Gender::Female, Source::AllSources).unwrap_or(1),
        &shape,
        talpiot::QUOTED_BETA,
    )
    .map_err(CliError::input)?;
    let assumptions = assumptions(ctx, &shape);
    let quoted = talpiot::QUOTED_TAIL_PROPORTION;
    let headline = exact.or(mc).map(|r| r.alpha);
    let discrepancy = format!(
        "quoted valid-sample count {:.4e} does not follow from the stated formula: lexicon totals give {:.4e} and populations give {:.4e} at beta {}",
        talpiot::QUOTED_VALID_SAMPLES,
        lexicon_counts.valid_count,
        counts[1].valid_count,
        talpiot::QUOTED_BETA
    );

    let mut text = format!("threshold {} ({})\n", sci(t.to_f64()), t.to_fraction_string());
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                format!("{:?}", r.method).to_lowercase(),
                sci(r.alpha),
                format!("{:.4}", r.beta),
                r.std_error.map_or("-".into(), sci),
                r.n_samples.map_or("-".into(), |n| n.to_string()),
                r.seed.map_or("-".into(), |s| s.to_string()),
            ]
        })
        .collect();
    text.push_str(&table(&["method", "alpha", "beta", "std_error", "samples", "seed"], &rows));
    if let Some(a) = &agree {
        text.push_str(&format!(
            "agreement: |mc - exact| = {:.2} standard errors ({})\n",
            a.z,
            if a.within_three_se { "within 3" } else { "OUTSIDE 3" }
        ));
    }
    if let Some(h) = headline {
        text.push_str(&format!("ratio to quoted {}: {:.3}\n", sci(quoted), h / quoted));
    }
    text.push_str("assumptions:\n");
    for a in &assumptions {
        text.push_str(&format!("  - {a}\n"));
    }
    text.push_str(&format!("note: {discrepancy}\n"));

    let csv_table: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                format!("{:?}", r.method).to_lowercase(),
                format!("{:e}", r.threshold),
                r.threshold_exact.clone(),
                format!("{:e}", r.alpha),
                format!("{:e}", r.beta),
                r.std_error.map_or(String::new(), |v| format!("{v:e}")),
                r.n_samples.map_or(String::new(), |n| n.to_string()),
                r.hits.map_or(String::new(), |n| n.to_string()),
                r.seed.map_or(String::new(), |s| s.to_string()),
                r.model_hash.clone(),
            ]
        })
        .collect();
    Ok(Rendered {
        name: "tail",
        json: json!({
            "threshold": t.to_f64(),
            "threshold_exact": t.to_fraction_string(),
            "results": results,
            "agreement": agree,
            "quoted_tail_proportion": quoted,
            "quoted_tail_reciprocal": talpiot::QUOTED_TAIL_RECIPROCAL,
            "ratio_to_quoted": headline.map(|h| h / quoted),
            "assumptions": assumptions,
            "sample_counts": counts,
            "lexicon_total_sample_count": lexicon_counts,
            "quoted_valid_samples": talpiot::QUOTED_VALID_SAMPLES,
            "sample_count_note": discrepancy,
        }),
        table: text,
        csv: Some(csv_rows(
            &["method", "threshold", "threshold_exact", "alpha", "beta", "std_error", "n_samples", "hits", "seed", "model_hash"],
            &csv_table,
        )),
    })
}

fn posterior(ctx: &Context) -> Result<Rendered, CliError> {
    let c = &ctx.config;
    let inf = &c.inference;
    let shape = ctx.shape();
    let n = trials_estimate(inf.population_male, inf.population_female, &shape).map_err(CliError::input)?;
    let needs_exact = inf.alpha_variants.iter().any(|v| v.value.is_none());
    let exact_alpha = if needs_exact {
        let b = ctx.breakdown()?;
        ctx.model()?.exact_tail(&b.cluster_rr, &ctx.filter(), c.tail.budget).map_err(CliError::input)?.alpha
    } else {
        f64::NAN
    };
    let alphas = resolve_alphas(c, exact_alpha);
    let (variant, alpha) = alphas
        .iter()
        .find(|(name, _)| name == &inf.alpha)
        .cloned()
        .ok_or_else(|| CliError::Input(format!("unknown alpha variant {:?}", inf.alpha)))?;
    let rows = inf
        .thetas
        .iter()
        .map(|&theta| {
            posterior_result(
                &InferenceInputs {
                    alpha,
                    n_trials: n,
                    theta,
                    population_male: inf.population_male,
                    population_female: inf.population_female,
                },
                inf.method,
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::input)?;
    let sweep_rows = sweep(&inf.thetas, &alphas, n, inf.method).map_err(CliError::input)?;
    let union = multiplicity_bound(alpha, n, Multiplicity::UnionBound);
    let complement = multiplicity_bound(alpha, n, Multiplicity::ExactComplement);
    let scenarios = c.scenarios.expanded();
    let scenario = if scenarios.is_empty() {
        None
    } else {
        Some(
            scenario_posterior(&scenarios, &c.configuration, &ctx.lexicon, &c.lists, c.scenarios.prior)
                .map_err(CliError::input)?,
        )
    };
    let notes = vec![
        format!("posterior = {POSTERIOR_FORMULA}"),
        "theta is the prior probability that a true family tomb is at least as surprising as the observed cluster; how it enters the original derivation is not stated".to_string(),
        format!("{} = exact tail of the configured analysis", COMPUTED_ALPHA),
    ];

    let mut text = format!(
        "alpha {} = {} ; trials N = {} ; {:?}: q = {} (1/{:.1}); exact complement q = {}\n",
        variant,
        sci(alpha),
        n,
        inf.method,
        sci(rows.first().map_or(union, |r| r.q)),
        1.0 / rows.first().map_or(union, |r| r.q),
        sci(complement)
    );
    let table_rows: Vec<Vec<String>> =
        rows.iter().map(|r| vec![format!("{}", r.theta), sci(r.q), format!("{:.4}", r.posterior)]).collect();
    text.push_str(&table(&["theta", "q", "posterior"], &table_rows));
    text.push_str("sweep:\n");
    let sweep_table: Vec<Vec<String>> = sweep_rows
        .iter()
        .map(|r| vec![r.variant.clone(), sci(r.alpha), format!("{}", r.theta), sci(r.q), format!("{:.4}", r.posterior)])
        .collect();
    text.push_str(&table(&["variant", "alpha", "theta", "q", "posterior"], &sweep_table));
    if let Some(s) = &scenario {
        text.push_str(&format!(
            "scenario comparator ({} scenarios, prior {}): P(D|H1) = {}, P(D|H0) = {}, posterior = {:.4}\n",
            s.scenarios.len(),
            s.prior,
            sci(s.likelihood_h1),
            sci(s.likelihood_h0),
            s.posterior
        ));
    }
    for n in &notes {
        text.push_str(&format!("note: {n}\n"));
    }
    let csv_table: Vec<Vec<String>> =
        rows.iter().map(|r| vec![format!("{}", r.theta), format!("{:e}", r.q), format!("{:e}", r.posterior)]).collect();
    Ok(Rendered {
        name: "posterior",
        json: json!({
            "alpha_variant": variant,
            "alpha": alpha,
            "n_trials": n,
            "method": inf.method,
            "q_union_bound": union,
            "q_exact_complement": complement,
            "rows": rows,
            "sweep": sweep_rows,
            "sweep_csv": sweep_csv(&sweep_rows),
            "scenario": scenario,
            "notes": notes,
        }),
        table: text,
        csv: Some(csv_rows(&["theta", "q", "posterior"], &csv_table)),
    })
}

fn sensitivity(ctx: &Context) -> Result<Rendered, CliError> {
    let c = &ctx.config;
    let reports = compare_all(c, &ctx.onomasticon, &c.sensitivity.modifications, c.sensitivity.shared_threshold)
        .map_err(CliError::input)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                sci(r.modified.cluster_rr),
                format!("{:.4}", r.rr_ratio),
                sci(r.modified.alpha),
                r.alpha_ratio.map_or("-".into(), |a| format!("{a:.4}")),
                sci(r.modified.q),
                r.modified.posteriors.iter().map(|p| format!("{:.4}", p.posterior)).collect::<Vec<_>>().join("/"),
            ]
        })
        .collect();
    let mut text = table(&["modification", "cluster_rr", "rr_ratio", "alpha", "alpha_ratio", "q", "posteriors"], &rows);
    text.push_str(&format!(
        "thresholds: {}\n",
        if c.sensitivity.shared_threshold { "shared (base cluster RR)" } else { "each analysis at its own cluster RR" }
    ));
    Ok(Rendered { name: "sensitivity", json: json!({ "reports": reports }), table: text, csv: Some(reports_csv(&reports)) })
}

fn simulate(ctx: &Context) -> Result<Rendered, CliError> {
    let c = &ctx.config;
    let sim = &c.simulation;
    let shape = ctx.shape();
    let cal = Calibrator::new(shape.clone(), &c.lists, &ctx.lexicon, &c.bonuses, &ctx.filter(), c.tail.budget)
        .map_err(CliError::input)?;
    let plant = sim.plant.clone().unwrap_or_else(|| c.configuration.clone());
    let h0_spec = WorldSpec { mode: WorldMode::H0Random, shape: shape.clone(), n_tombs: sim.n_tombs, seed: sim.seed };
    let h1_spec = WorldSpec {
        mode: WorldMode::H1Planted { plant, rendition_sampling: sim.rendition_sampling },
        shape,
        n_tombs: sim.n_tombs,
        seed: sim.seed,
    };
    let h0 = cal.simulate(&h0_spec).map_err(CliError::input)?;
    let h1 = cal.simulate(&h1_spec).map_err(CliError::input)?;
    let mut oc = operating_characteristics(&h0, &h1, &sim.alpha_grid, &cal.distribution).map_err(CliError::input)?;
    if sim.scenario_comparison {
        let scenarios = c.scenarios.expanded();
        let p0 = cal.scenario_posteriors(&h0, &scenarios, c.scenarios.prior).map_err(CliError::input)?;
        let p1 = cal.scenario_posteriors(&h1, &scenarios, c.scenarios.prior).map_err(CliError::input)?;
        oc.scenario = Some(scenario_comparison(c.scenarios.prior, &p0, &p1));
    }
    let rows: Vec<Vec<String>> = oc
        .rows
        .iter()
        .map(|r| {
            vec![
                format!("{:e}", r.threshold),
                format!("{:.6}", r.false_positive_rate),
                sci(r.fpr_std_error),
                format!("{:.6}", r.exact_fpr),
                format!("{:.6}", r.detection_rate),
                sci(r.detection_std_error),
            ]
        })
        .collect();
    let mut text = format!(
        "{} tombs per world, seed {}, planted renditions {}\n",
        sim.n_tombs,
        sim.seed,
        if sim.rendition_sampling { "sampled" } else { "fixed" }
    );
    text.push_str(&table(&["threshold", "fpr", "fpr_se", "exact_fpr", "detection", "detection_se"], &rows));
    if let Some(s) = &oc.scenario {
        text.push_str(&format!(
            "scenario comparator: mean posterior H0 {:.4}, H1 {:.4}; share above 1/2 H0 {:.4}, H1 {:.4}\n",
            s.h0_mean_posterior, s.h1_mean_posterior, s.h0_above_half, s.h1_above_half
        ));
    }
    Ok(Rendered {
        name: "simulate",
        json: json!({ "h0": h0_spec, "h1": h1_spec, "operating_characteristics": oc }),
        table: text,
        csv: Some(rrvalue_core::calibration::oc_csv(&oc.rows)),
    })
}
