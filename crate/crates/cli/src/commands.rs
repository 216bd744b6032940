use chaingraph::conjecture::{
    random_network, run_battery, simulate_temporal, BatteryReport, Hypothesis, TemporalParams,
};
use chaingraph::estimation::{
    bootstrap_effects, default_penalty_grid, fit_model, learn_structure, BootstrapSpec, EffectQuery, FitMethod,
};
use chaingraph::exact::{CovariateLaw, DEFAULT_ENUMERATION_LIMIT};
use chaingraph::sampler::{self, GibbsConfig, ScanOrder, SimulationScaling, DEFAULT_CONFOUNDER_COUPLING};
use chaingraph::{
    reference, scdb, seed, CaseDataset, ChainGraphModel, EffectEstimate, EffectScale, Error, ExactEngine, NetworkGraph,
    Treatment,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::inputs::*;
use crate::run::Run;
use crate::*;

pub fn dispatch(command: &Command, run: &mut Run) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest(a, run),
        Command::Fit(a) => fit(a, run),
        Command::Effect(a) => effect(a, run),
        Command::Simulate(a) => simulate(a, run),
        Command::Gibbs(a) => gibbs(a, run),
        Command::Conjecture(a) => conjecture(a, run),
        Command::Battery(a) => battery(a, run),
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Error::from)?;
    for r in rows {
        w.write_record(r).map_err(Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Core(Error::Io(e.into_error())))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `name.json` from `value`, or `name.csv` from `header`/`rows`.
fn write_report<T: Serialize>(
    run: &mut Run,
    name: &str,
    value: &T,
    header: &[&str],
    rows: &[Vec<String>],
) -> CliResult<()> {
    let file = format!("{name}.{}", run.format.ext());
    match run.format {
        Format::Json => run.write_json(&file, value)?,
        Format::Csv => run.write(&file, &csv_bytes(header, rows)?)?,
    };
    Ok(())
}

fn dataset_bytes(d: &CaseDataset) -> Vec<u8> {
    d.to_csv_string().into_bytes()
}

fn ingest(args: &IngestArgs, run: &mut Run) -> CliResult<()> {
    let terms = parse_terms(&args.terms)?;
    if terms.is_empty() {
        return Err(Error::EmptyDataset(format!("term range {} is empty", args.terms)).into());
    }
    let panel = panel(&args.aliases)?;
    let bytes = run.read(&args.scdb)?;
    let court = scdb::load_cases(bytes.as_slice(), &panel, terms.clone())?;
    let summary = court.summarize();
    let reconciliation = summary.reconcile(args.expected_cases);
    let mut buf = Vec::new();
    court.write_csv(&mut buf)?;
    run.write("court_cases.csv", &buf)?;
    run.write_json(
        "court_summary.json",
        &json!({
            "terms": [terms.start(), terms.end()],
            "summary": summary,
            "reconciliation": reconciliation,
            "exclusions": court.exclusions,
        }),
    )?;
    if run.format == Format::Csv {
        let issues: Vec<Vec<String>> = summary
            .per_issue
            .iter()
            .map(|c| vec![c.code.map(|x| x.to_string()).unwrap_or_default(), c.name.clone(), c.cases.to_string()])
            .collect();
        run.write("court_issues.csv", &csv_bytes(&["issue", "name", "cases"], &issues)?)?;
        let justices: Vec<Vec<String>> = summary
            .per_justice
            .iter()
            .map(|j| vec![j.justice.clone(), j.liberal_rate.to_string(), j.conservative_rate.to_string()])
            .collect();
        run.write("court_justices.csv", &csv_bytes(&["justice", "liberal_rate", "conservative_rate"], &justices)?)?;
    }
    if let Some(code) = args.issue {
        let d = court.binarize_issue(code)?;
        run.write(&format!("issue_{code}.csv"), &dataset_bytes(&d))?;
    }
    println!(
        "{} cases kept, {} excluded; expected {}, difference {}",
        summary.cases, summary.excluded, reconciliation.expected_cases, reconciliation.difference
    );
    Ok(())
}

fn fit(args: &FitArgs, run: &mut Run) -> CliResult<()> {
    let data = load_dataset(run, &args.data.data, args.data.issue)?;
    let (graph, structure) = match &args.edges {
        Some(path) => (load_network(run, path, data.labels())?, None),
        None => {
            let grid = match &args.penalties {
                Some(s) => parse_penalties(s)?,
                None => default_penalty_grid(),
            };
            let learned = learn_structure(&data, &grid, args.rule.into())?;
            (learned.graph.clone(), Some(learned))
        }
    };
    let fitted = fit_model(&data, &graph, args.method.into())?;
    let mut doc = fitted.model.to_document();
    let mut meta = serde_json::to_value(&fitted.meta).map_err(Error::from)?;
    meta["cases"] = json!(data.len());
    meta["structure"] = structure.as_ref().map_or(json!("supplied"), |s| s.meta());
    doc.fit_meta = Some(meta);
    run.write_json(&args.output, &doc)?;
    println!(
        "{} edges, {} log-likelihood {:.4} after {} iterations",
        graph.edge_count(),
        fitted.meta.method,
        fitted.meta.objective,
        fitted.meta.iterations
    );
    Ok(())
}

fn default_law(model: &ChainGraphModel, data: Option<&CaseDataset>) -> CovariateLaw {
    match data.filter(|d| d.has_covariates()) {
        Some(d) => CovariateLaw::empirical_from_masks(d.n_nodes(), &d.covariate_frequencies()),
        None => {
            log::warn!("no confounder law given; using ising:{DEFAULT_CONFOUNDER_COUPLING}");
            CovariateLaw::uniform_ising(model.graph(), DEFAULT_CONFOUNDER_COUPLING)
        }
    }
}

#[derive(Serialize)]
struct LabeledEffect<'a> {
    treatment: &'a str,
    #[serde(flatten)]
    effect: &'a EffectEstimate,
}

const EFFECT_HEADER: [&str; 11] =
    ["event", "treatment", "estimate", "ci_low", "ci_high", "scale", "se", "p1", "p0", "p1_se", "p0_se"];

fn effect(args: &EffectArgs, run: &mut Run) -> CliResult<()> {
    let model = load_model(run, &args.model)?;
    let data = match &args.data {
        Some(p) => Some(load_dataset(run, p, args.issue)?),
        None if args.issue.is_some() => return Err(CliError::usage("--issue needs --data")),
        None => None,
    };
    let labels = model.graph().labels().to_vec();
    let a0 = parse_treatment(&args.a0, &labels, model.mode())?;
    let a1s = args
        .a1
        .iter()
        .map(|s| Ok((s.clone(), parse_treatment(s, &labels, model.mode())?)))
        .collect::<CliResult<Vec<_>>>()?;
    let events = parse_events(&args.events)?;
    let scale: EffectScale = args.scale.into();
    let mut names = Vec::new();
    let mut queries = Vec::new();
    for event in &events {
        for (name, a1) in &a1s {
            names.push(name.clone());
            queries.push(EffectQuery { a1: a1.clone(), a0: a0.clone(), event: event.clone(), scale });
        }
    }
    let estimates = if args.nb > 0 {
        let data = data.as_ref().ok_or_else(|| CliError::usage("--nb needs --data"))?;
        if args.law.as_deref().is_some_and(|l| l != "empirical") {
            return Err(CliError::usage("bootstrap effects use the data's empirical confounder law"));
        }
        let spec = BootstrapSpec {
            nb: args.nb,
            seed: run.seed,
            refit_structure: args.refit_structure,
            method: args.method.into(),
            ..BootstrapSpec::default()
        };
        bootstrap_effects(data, model.graph(), &queries, &spec)?
    } else {
        let law = match (&args.law, model.has_kappa()) {
            (Some(s), true) => Some(parse_law(s, model.graph(), data.as_ref())?),
            (None, true) => Some(default_law(&model, data.as_ref())),
            (Some(_), false) => {
                log::warn!("model has no confounder effects; --law ignored");
                None
            }
            (None, false) => None,
        };
        let engine = ExactEngine::default();
        queries
            .iter()
            .map(|q| engine.causal_effect(&model, &q.a1, &q.a0, &q.event, q.scale, law.as_ref()))
            .collect::<chaingraph::Result<Vec<_>>>()?
    };
    let labeled: Vec<LabeledEffect> =
        names.iter().zip(&estimates).map(|(t, e)| LabeledEffect { treatment: t, effect: e }).collect();
    let rows: Vec<Vec<String>> = labeled
        .iter()
        .map(|l| {
            let e = l.effect;
            vec![
                e.event.clone(),
                l.treatment.to_string(),
                e.point.to_string(),
                opt(e.ci_low),
                opt(e.ci_high),
                e.scale.to_string(),
                opt(e.se),
                e.p1.to_string(),
                e.p0.to_string(),
                opt(e.p1_se),
                opt(e.p0_se),
            ]
        })
        .collect();
    write_report(run, "effects", &labeled, &EFFECT_HEADER, &rows)?;
    for l in &labeled {
        let e = l.effect;
        let se = e.se.map(|s| format!(" (SE {s:.4})")).unwrap_or_default();
        println!("{} [{}] {}: {:.4}{se}, p1 {:.4}, p0 {:.4}", e.event, l.treatment, e.scale, e.point, e.p1, e.p0);
    }
    Ok(())
}

/// Named intervention sets for the counterfactual table: the six court
/// assignments on the court graph, otherwise one per node.
fn assignments(graph: &NetworkGraph) -> Vec<(String, Treatment)> {
    if graph.labels() == reference::court_labels().as_slice() {
        reference::court_assignments().into_iter().map(|(n, t)| (n.to_string(), t)).collect()
    } else {
        (0..graph.len()).map(|i| (graph.label(i).to_string(), Treatment::treating(graph.len(), &[i]))).collect()
    }
}

#[derive(Serialize)]
struct TableRow {
    assignment: String,
    event: String,
    probability: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    event: String,
    treatment: String,
    estimate: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    se: Option<f64>,
    replicate: u64,
}

#[derive(Serialize)]
struct RecoveryRow {
    assignment: String,
    event: String,
    truth: f64,
    mean_estimate: f64,
    mean_abs_bias: f64,
    mean_se: Option<f64>,
}

fn simulate(args: &SimulateArgs, run: &mut Run) -> CliResult<()> {
    if args.replicates == 0 {
        return Err(CliError::usage("--replicates must be positive"));
    }
    let base = match &args.model {
        Some(p) => load_model(run, p)?,
        None => reference::simulation_model(1.0, 1.0, 0.0, 0.0),
    };
    let graph = base.graph().clone();
    let n = graph.len();
    let mut scaling = SimulationScaling::new(&graph, args.alpha, args.beta);
    scaling.gamma_value = args.gamma;
    scaling.kappa_value = args.kappa;
    scaling.confounder_law = CovariateLaw::uniform_ising(&graph, args.confounder_coupling);
    scaling.chain_sweeps = args.chain_sweeps;
    let truth = scaling.model(&base)?;
    let events = parse_events(&args.events)?;
    let none = Treatment::treating(n, &[]);
    let mut cells = Vec::new();
    for (name, a1) in assignments(&graph) {
        for event in &events {
            cells.push((
                name.clone(),
                EffectQuery {
                    a1: a1.clone(),
                    a0: none.clone(),
                    event: event.clone(),
                    scale: EffectScale::RiskDifference,
                },
            ));
        }
    }
    let engine = ExactEngine::default();
    let table = cells
        .iter()
        .map(|(name, q)| {
            Ok(TableRow {
                assignment: name.clone(),
                event: q.event.to_string(),
                probability: engine.counterfactual_event_prob(
                    &truth,
                    &q.a1,
                    &q.event,
                    Some(&scaling.confounder_law),
                )?,
            })
        })
        .collect::<chaingraph::Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> =
        table.iter().map(|r| vec![r.assignment.clone(), r.event.clone(), r.probability.to_string()]).collect();
    write_report(run, "counterfactual_table", &table, &["assignment", "event", "probability"], &rows)?;
    run.write_json("truth_model.json", &truth.to_document())?;

    let queries: Vec<EffectQuery> = cells.iter().map(|(_, q)| q.clone()).collect();
    let method: FitMethod = args.method.into();
    let mut estimates = Vec::new();
    let mut sums = vec![(0.0, 0.0, 0.0); queries.len()];
    for rep in 0..args.replicates {
        let data = sampler::generate_dataset(&base, &scaling, args.n_obs, seed::derive_seed(run.seed, &[rep, 0]))?;
        if !args.no_datasets {
            let name = if args.replicates == 1 {
                "dataset.csv".to_string()
            } else {
                format!("datasets/dataset_{:04}.csv", rep + 1)
            };
            run.write(&name, &dataset_bytes(&data))?;
        }
        let est = if args.nb > 0 {
            let spec = BootstrapSpec {
                nb: args.nb,
                seed: seed::derive_seed(run.seed, &[rep, 1]),
                method,
                ..BootstrapSpec::default()
            };
            bootstrap_effects(&data, &graph, &queries, &spec)?
        } else {
            let fitted = fit_model(&data, &graph, method)?.model;
            let law = CovariateLaw::empirical_from_masks(n, &data.covariate_frequencies());
            queries
                .iter()
                .map(|q| engine.causal_effect(&fitted, &q.a1, &q.a0, &q.event, q.scale, Some(&law)))
                .collect::<chaingraph::Result<Vec<_>>>()?
        };
        for (k, e) in est.iter().enumerate() {
            // normal interval on the probability scale
            let ci = e.p1_se.map(|s| ((e.p1 - 1.96 * s).max(0.0), (e.p1 + 1.96 * s).min(1.0)));
            estimates.push(EstimateRow {
                event: table[k].event.clone(),
                treatment: table[k].assignment.clone(),
                estimate: e.p1,
                ci_low: ci.map(|c| c.0),
                ci_high: ci.map(|c| c.1),
                se: e.p1_se,
                replicate: rep + 1,
            });
            sums[k].0 += e.p1;
            sums[k].1 += (e.p1 - table[k].probability).abs();
            sums[k].2 += e.p1_se.unwrap_or(0.0);
        }
    }
    let rows: Vec<Vec<String>> = estimates
        .iter()
        .map(|r| {
            vec![
                r.event.clone(),
                r.treatment.clone(),
                r.estimate.to_string(),
                opt(r.ci_low),
                opt(r.ci_high),
                opt(r.se),
                r.replicate.to_string(),
            ]
        })
        .collect();
    write_report(
        run,
        "estimates",
        &estimates,
        &["event", "treatment", "estimate", "ci_low", "ci_high", "se", "replicate"],
        &rows,
    )?;
    if args.replicates > 1 {
        let reps = args.replicates as f64;
        let recovery: Vec<RecoveryRow> = table
            .iter()
            .zip(&sums)
            .map(|(t, s)| RecoveryRow {
                assignment: t.assignment.clone(),
                event: t.event.clone(),
                truth: t.probability,
                mean_estimate: s.0 / reps,
                mean_abs_bias: s.1 / reps,
                mean_se: (args.nb > 0).then_some(s.2 / reps),
            })
            .collect();
        let rows: Vec<Vec<String>> = recovery
            .iter()
            .map(|r| {
                vec![
                    r.assignment.clone(),
                    r.event.clone(),
                    r.truth.to_string(),
                    r.mean_estimate.to_string(),
                    r.mean_abs_bias.to_string(),
                    opt(r.mean_se),
                ]
            })
            .collect();
        let header = ["assignment", "event", "truth", "mean_estimate", "mean_abs_bias", "mean_se"];
        write_report(run, "recovery", &recovery, &header, &rows)?;
        let worst = recovery.iter().map(|r| r.mean_abs_bias).fold(0.0, f64::max);
        println!("{} replicates; largest mean absolute bias {worst:.4}", args.replicates);
    } else {
        println!("1 replicate of {} observations", args.n_obs);
    }
    Ok(())
}

fn gibbs(args: &GibbsArgs, run: &mut Run) -> CliResult<()> {
    let model = load_model(run, &args.model)?;
    let labels = model.graph().labels().to_vec();
    let a = parse_treatment(&args.a, &labels, model.mode())?;
    let c = args.c.as_deref().map(|s| parse_covariates(s, &labels)).transpose()?;
    if model.has_kappa() && c.is_none() {
        return Err(CliError::usage("the model has confounder effects; pass --c"));
    }
    let config = GibbsConfig {
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        thin: args.thin,
        seed: run.seed,
        scan_order: match args.scan {
            Scan::Fixed => ScanOrder::Fixed,
            Scan::Random => ScanOrder::RandomPermutationPerSweep,
        },
    };
    let samples = sampler::gibbs_chain(&model, &a, c.as_ref(), &config)?;
    let mut header = vec!["sample".to_string()];
    header.extend(labels.iter().map(|l| format!("y_{l}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = samples
        .iter()
        .enumerate()
        .map(|(s, y)| std::iter::once((s + 1).to_string()).chain(y.values().iter().map(|v| v.to_string())).collect())
        .collect();
    run.write("samples.csv", &csv_bytes(&header_refs, &rows)?)?;
    let exact = if model.n() <= DEFAULT_ENUMERATION_LIMIT {
        Some(ExactEngine::default().liberal_marginals(&model, &a, c.as_ref())?)
    } else {
        None
    };
    let total = samples.len() as f64;
    let summary: Vec<serde_json::Value> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let rate = samples.iter().filter(|y| y.values()[i] > 0).count() as f64 / total;
            json!({ "node": l, "sampled_rate": rate, "exact_rate": exact.as_ref().map(|e| e[i]) })
        })
        .collect();
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|v| {
            vec![
                v["node"].as_str().unwrap_or_default().to_string(),
                v["sampled_rate"].to_string(),
                v["exact_rate"].as_f64().map(|x| x.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_report(run, "gibbs_summary", &summary, &["node", "sampled_rate", "exact_rate"], &rows)?;
    println!("{} samples kept", samples.len());
    Ok(())
}

fn network_bytes(g: &NetworkGraph) -> CliResult<Vec<u8>> {
    let rows: Vec<Vec<String>> = g.label_pairs().into_iter().map(|(a, b)| vec![a, b]).collect();
    csv_bytes(&["from", "to"], &rows)
}

fn battery_bytes(report: &BatteryReport) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    Ok(buf)
}

fn conjecture(args: &ConjectureArgs, run: &mut Run) -> CliResult<()> {
    let mut generator = Vec::new();
    let mut per_network = Vec::new();
    let mut tested = [0usize; 3];
    let mut rejected = [0usize; 3];
    let mut a_beats_b = 0;
    for net in 0..args.networks {
        let network_seed = seed::derive_seed(run.seed, &[net, 0]);
        let data_seed = seed::derive_seed(run.seed, &[net, 1]);
        let g = random_network(args.nodes, args.p, network_seed)?;
        if g.nonadjacent_pairs().is_empty() {
            return Err(Error::NoPairs.into());
        }
        let mut params = TemporalParams::defaults(&g);
        params.self_persistence = args.self_persistence;
        params.neighbor_influence = vec![args.influence; g.edge_count()];
        params.treatment_effect = args.treatment_effect;
        params.horizon = args.horizon;
        params.treatment_prob = args.treatment_prob;
        let data = simulate_temporal(&g, &params, args.replicates, data_seed)?;
        let report = run_battery(&data, &g, args.alpha)?;
        run.write(&format!("network_{net:02}.csv"), &network_bytes(&g)?)?;
        run.write(&format!("battery_{net:02}.csv"), &battery_bytes(&report)?)?;
        if args.write_data {
            run.write(&format!("data_{net:02}.csv"), &dataset_bytes(&data))?;
        }
        for (k, h) in Hypothesis::ALL.iter().enumerate() {
            let tests = report.tests.iter().filter(|t| t.hypothesis == *h);
            tested[k] += tests.clone().count();
            rejected[k] += tests.filter(|t| t.reject).count();
        }
        a_beats_b += usize::from(report.rates.a > report.rates.b);
        generator.push(json!({
            "network": net,
            "network_seed": network_seed,
            "data_seed": data_seed,
            "edges": g.label_pairs(),
            "params": params,
        }));
        per_network.push((net, g.edge_count(), report.tests.len(), report.rates));
    }
    run.write_json(
        "generator.json",
        &json!({ "nodes": args.nodes, "p": args.p, "replicates": args.replicates, "networks": generator }),
    )?;
    let pooled: Vec<f64> = (0..3).map(|k| rejected[k] as f64 / tested[k].max(1) as f64).collect();
    let summary = json!({
        "alpha": args.alpha,
        "pooled_rates": { "a": pooled[0], "b": pooled[1], "c": pooled[2] },
        "networks_a_above_b": a_beats_b,
        "networks": per_network
            .iter()
            .map(|(net, edges, tests, r)| json!({ "network": net, "edges": edges, "tests": tests, "rates": r }))
            .collect::<Vec<_>>(),
    });
    let mut rows: Vec<Vec<String>> = per_network
        .iter()
        .map(|(net, edges, tests, r)| {
            vec![
                net.to_string(),
                edges.to_string(),
                tests.to_string(),
                r.a.to_string(),
                r.b.to_string(),
                r.c.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "pooled".into(),
        String::new(),
        tested[0].to_string(),
        pooled[0].to_string(),
        pooled[1].to_string(),
        pooled[2].to_string(),
    ]);
    write_report(
        run,
        "conjecture_summary",
        &summary,
        &["network", "edges", "tests", "rate_a", "rate_b", "rate_c"],
        &rows,
    )?;
    println!(
        "pooled rejection rates: a {:.4}, b {:.4}, c {:.4}; a above b on {a_beats_b} of {} networks",
        pooled[0], pooled[1], pooled[2], args.networks
    );
    Ok(())
}

fn battery(args: &BatteryArgs, run: &mut Run) -> CliResult<()> {
    let data = load_dataset(run, &args.data.data, args.data.issue)?;
    let g = load_network(run, &args.network, data.labels())?;
    let report = run_battery(&data, &g, args.alpha)?;
    run.write("battery.csv", &battery_bytes(&report)?)?;
    let r = &report.rates;
    let rows = vec![vec![report.tests.len().to_string(), r.a.to_string(), r.b.to_string(), r.c.to_string()]];
    write_report(run, "battery_summary", &report.summary_json(), &["tests", "rate_a", "rate_b", "rate_c"], &rows)?;
    println!("{} tests; rejection rates a {:.4}, b {:.4}, c {:.4}", report.tests.len(), r.a, r.b, r.c);
    Ok(())
}
