//! Subcommand implementations. Each returns the process exit code on
//! success; errors map to status 2 in `main`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use minerscope::dataset::{self, RowLimit, POSITIVE_CLASS};
use minerscope::eval::{self, CvConfig, CvOutcome};
use minerscope::features::{self, WindowConfig};
use minerscope::forest::{self, TrainConfig};
use minerscope::metrics::{BinaryCounts, EvalReport};
use minerscope::synth::{self, ProfileSet, SynthConfig};
use minerscope::trace::{self, Direction, DirectionalTrace, Subnet, TraceLabel};
use minerscope::{seed, Exec, LabeledDataset, RandomForest};

use crate::fsio::{self, write_atomic, write_with};
use crate::report::{Alert, FlowReport, Report, RunConfig};
use crate::{
    CvArgs, DetectArgs, DirectionArg, FeaturizeArgs, IngestArgs, ModelOpts, PredictArgs,
    SummarizeArgs, SynthArgs, TrainArgs,
};

const PCAP_MAGICS: [[u8; 4]; 4] = [
    [0xd4, 0xc3, 0xb2, 0xa1],
    [0xa1, 0xb2, 0xc3, 0xd4],
    [0x4d, 0x3c, 0xb2, 0xa1],
    [0xa1, 0xb2, 0x3c, 0x4d],
];

fn directions(d: DirectionArg) -> Vec<Direction> {
    match d {
        DirectionArg::In => vec![Direction::Ingoing],
        DirectionArg::Out => vec![Direction::Outgoing],
        DirectionArg::Both => Direction::BOTH.to_vec(),
    }
}

/// Per-flow seed, so ingoing and outgoing runs draw independent streams.
fn flow_seed(seed: u64, d: Direction) -> u64 {
    match d {
        Direction::Ingoing => seed::derive(seed, 0),
        Direction::Outgoing => seed::derive(seed, 1),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string())
}

fn is_pcap(path: &Path, bytes: &[u8]) -> bool {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase());
    matches!(ext.as_deref(), Some("pcap" | "cap"))
        || bytes.len() >= 4 && PCAP_MAGICS.iter().any(|m| bytes[..4] == m[..])
}

pub fn ingest(a: &IngestArgs) -> Result<ExitCode> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let packets = if is_pcap(&a.input, &bytes) {
        let subnet: Subnet = a
            .local_subnet
            .as_deref()
            .ok_or_else(|| anyhow!("--local-subnet is required for pcap input"))?
            .parse()?;
        let cap = trace::parse_pcap(&bytes, &subnet)
            .with_context(|| format!("{}", a.input.display()))?;
        let s = &cap.stats;
        println!(
            "records: {}, skipped: {} (non-ip {}, vlan depth {}, short {}, local-to-local {}), reordered: {}",
            s.records,
            s.skipped(),
            s.skipped_non_ip,
            s.skipped_vlan_depth,
            s.skipped_short,
            s.local_to_local,
            s.reordered
        );
        cap.packets
    } else {
        let text = String::from_utf8(bytes).context("input is neither pcap nor UTF-8 CSV")?;
        trace::parse_canonical_csv(&text)
            .with_context(|| format!("parsing {}", a.input.display()))?
    };
    let name = a.name.clone().unwrap_or_else(|| file_stem(&a.input));
    for d in Direction::BOTH {
        let part: Vec<_> = packets.iter().filter(|p| p.direction == d).copied().collect();
        let path = a.out_dir.join(format!("{name}.{}.csv", d.tag()));
        write_with(&path, |w| trace::write_canonical_csv(&part, w))?;
        println!("{}: {} packets -> {}", d.tag(), part.len(), path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn summarize(a: &SummarizeArgs) -> Result<ExitCode> {
    let packets = fsio::read_csv_trace(&a.input)?;
    let label = TraceLabel::new(file_stem(&a.input))?;
    let (i, o) = trace::split_directions(&packets, &label);
    let mut out = BTreeMap::new();
    for t in [i, o] {
        if t.len() >= 2 {
            out.insert(t.direction().tag(), t.summarize()?);
        }
    }
    if out.is_empty() {
        bail!("no direction has at least two packets");
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

pub fn featurize(a: &FeaturizeArgs) -> Result<ExitCode> {
    let cfg = WindowConfig::new(a.window)?;
    let packets = fsio::read_csv_trace(&a.input)?;
    let label = TraceLabel::new(a.label.clone())?;
    let (i, o) = trace::split_directions(&packets, &label);
    let stem = file_stem(&a.input);
    let mut written = 0;
    for t in [i, o] {
        if t.len() < 2 {
            continue;
        }
        let m = features::featurize(&t, cfg)?;
        let path = a
            .out_dir
            .join(format!("{stem}.{}.features.csv", t.direction().tag()));
        write_with(&path, |w| m.write_csv(w))?;
        println!("{}: {} rows -> {}", t.direction().tag(), m.len(), path.display());
        written += 1;
    }
    if written == 0 {
        bail!("no direction has at least two packets");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn synth(a: &SynthArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.profiles)
        .with_context(|| format!("reading {}", a.profiles.display()))?;
    let set = ProfileSet::from_json(&text)?;
    let traces = synth::build_corpus(&SynthConfig {
        n_packets: a.n_packets,
        seed: a.seed,
        profiles: set.profiles,
    })?;
    let mut names = BTreeMap::new();
    for t in &traces {
        let file = format!("{}.{}.csv", fsio::slug(&t.label.class_name()), t.direction().tag());
        if let Some(prev) = names.insert(file.clone(), t.label.class_name()) {
            bail!("profiles `{prev}` and `{}` both map to {file}", t.label.class_name());
        }
    }
    for t in &traces {
        let file = format!("{}.{}.csv", fsio::slug(&t.label.class_name()), t.direction().tag());
        let path = a.out_dir.join(file);
        write_with(&path, |w| trace::write_canonical_csv(t.packets(), w))?;
        println!("{}={}", t.label.class_name(), path.display());
    }
    Ok(ExitCode::SUCCESS)
}

impl ModelOpts {
    fn limit(&self) -> RowLimit {
        self.per_class_rows.map_or(RowLimit::All, RowLimit::PerClass)
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            n_trees: self.trees,
            m_try: self.m_try,
            seed,
            ..TrainConfig::default()
        }
    }

    fn positive(&self) -> Vec<&str> {
        self.positive.iter().map(String::as_str).collect()
    }

    fn run_config(&self) -> RunConfig {
        let mut inputs: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in &self.traces {
            inputs
                .entry(t.name.clone())
                .or_default()
                .push(t.path.display().to_string());
        }
        RunConfig {
            window: Some(self.window),
            trees: Some(self.trees),
            m_try: Some(self.train_config(0).resolved_m_try(features::N_FEATURES)),
            seed: Some(self.seed),
            per_class_rows: self.per_class_rows,
            positive: self.positive.clone(),
            inputs,
            ..RunConfig::default()
        }
    }

    fn require_traces(&self) -> Result<()> {
        if self.traces.is_empty() {
            bail!("no inputs; pass --trace NAME=PATH");
        }
        Ok(())
    }

    fn dataset(&self, d: Direction) -> Result<(Vec<DirectionalTrace>, LabeledDataset)> {
        let traces = fsio::load_direction(&self.traces, d)?;
        let ds = eval::build_dataset(&traces, WindowConfig::new(self.window)?, self.limit())
            .with_context(|| format!("{} flow", d.tag()))?;
        if ds.classes_present() < 2 {
            bail!("{} flow: need at least two classes", d.tag());
        }
        Ok((traces, ds))
    }
}

fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("--window-sweep expects LO:HI, got `{s}`"))?;
    let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo == 0 || hi < lo {
        bail!("--window-sweep range `{s}` is empty or starts at 0");
    }
    Ok((lo..=hi).collect())
}

/// Move the ROC curve out of `report` into `dir/roc.<tag>.csv`.
fn emit_roc(report: &mut EvalReport, dir: Option<&Path>, tag: &str) -> Result<()> {
    let curve = report.roc.take();
    if let (Some(dir), Some(curve)) = (dir, curve) {
        write_with(&dir.join(format!("roc.{tag}.csv")), |w| curve.write_csv(w))?;
    }
    Ok(())
}

fn emit_report(report: &Report, out: Option<&Path>, table: &str) -> Result<()> {
    let json = report.to_json();
    match out {
        Some(path) => {
            write_atomic(path, json.as_bytes())?;
            print!("{table}");
        }
        None => {
            print!("{json}");
            eprint!("{table}");
        }
    }
    Ok(())
}

fn binary_line(table: &mut String, dir: &str, r: &EvalReport) {
    let c = r.confusion;
    let auc = r.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
    let _ = writeln!(
        table,
        "{dir:>4} {:<20} tp={} tn={} fp={} fn={} tpr={:.4} fpr={:.4} precision={:.4} recall={:.4} f1={:.4} auc={auc}",
        r.positive, c.tp, c.tn, c.fp, c.fn_, r.rates.tpr, r.rates.fpr, r.rates.precision, r.rates.recall, r.rates.f1
    );
}

pub fn cv(a: &CvArgs, exec: Exec) -> Result<ExitCode> {
    let m = &a.model;
    m.require_traces()?;
    let sweep = a.window_sweep.as_deref().map(parse_sweep).transpose()?;
    let mut config = m.run_config();
    config.folds = Some(a.folds);
    let mut report = Report::new("cv", config);
    let mut table = String::new();
    for d in directions(a.direction) {
        let (traces, ds) = m.dataset(d)?;
        let s = flow_seed(m.seed, d);
        let cfg = CvConfig {
            k_folds: a.folds,
            train: m.train_config(s),
            seed: s,
            exec,
        };
        let outcome = eval::cross_validate(&ds, &cfg)?;
        let mut flow = FlowReport::new(Some(d.tag()), ds.len() as u64);
        flow.classes = outcome.class_names.clone();
        flow.per_class = outcome.per_class()?;
        let _ = writeln!(table, "{} flow, {} rows, {} folds", d.tag(), ds.len(), a.folds);
        let _ = writeln!(
            table,
            "  {:<24} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "class", "rows", "tpr", "fpr", "prec", "f1", "auc"
        );
        for c in &flow.per_class {
            let _ = writeln!(
                table,
                "  {:<24} {:>7} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                c.class, c.rows, c.tpr, c.fpr, c.precision, c.f1, c.auc
            );
        }
        if !m.positive.is_empty() {
            let mut b = binary_for(&outcome, &m.positive())?;
            emit_roc(&mut b, a.roc.as_deref(), d.tag())?;
            binary_line(&mut table, d.tag(), &b);
            flow.binary = Some(b);
        }
        if let Some(windows) = &sweep {
            flow.importance = eval::importance_sweep(
                &traces,
                windows,
                m.limit(),
                &m.train_config(s),
                s,
                exec,
            )?;
            for w in &flow.importance {
                let scores: Vec<String> = w
                    .importance
                    .features
                    .iter()
                    .map(|f| format!("{}={:.3}", f.feature, f.score))
                    .collect();
                let _ = writeln!(table, "  w={:<3} {}", w.window, scores.join(" "));
            }
        }
        report.flows.push(flow);
    }
    emit_report(&report, a.out.as_deref(), &table)?;
    Ok(ExitCode::SUCCESS)
}

fn binary_for(outcome: &CvOutcome, positive: &[&str]) -> Result<EvalReport> {
    let name = if positive.len() == 1 {
        positive[0].to_string()
    } else {
        positive.join("+")
    };
    Ok(outcome.binary_report_set(positive, &name)?)
}

fn model_meta(model: &RandomForest, key: &str) -> Result<String> {
    model
        .meta
        .get(key)
        .cloned()
        .ok_or_else(|| anyhow!("model has no `{key}` entry in meta"))
}

fn load_model(path: &Path) -> Result<RandomForest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RandomForest::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

/// Featurize the model's flow direction of a target trace; `None` when the
/// target has fewer than two packets in that direction.
fn try_target_rows(model: &RandomForest, target: &Path) -> Result<(Direction, Option<Vec<[f64; 6]>>)> {
    let window: usize = model_meta(model, "window")?.parse().context("model window")?;
    let tag = model_meta(model, "direction")?;
    let d = Direction::from_tag(&tag).ok_or_else(|| anyhow!("model direction `{tag}`"))?;
    let packets = fsio::read_csv_trace(target)?;
    let label = TraceLabel::new("target")?;
    let (i, o) = trace::split_directions(&packets, &label);
    let t = if d == Direction::Ingoing { i } else { o };
    if t.len() < 2 {
        return Ok((d, None));
    }
    let m = features::featurize(&t, WindowConfig::new(window)?)?;
    Ok((d, Some(m.rows.iter().map(|r| r.to_array()).collect())))
}

fn target_rows(model: &RandomForest, target: &Path) -> Result<(Direction, Vec<[f64; 6]>)> {
    match try_target_rows(model, target)? {
        (d, Some(rows)) => Ok((d, rows)),
        (d, None) => bail!("{} has fewer than two {} packets", target.display(), d.tag()),
    }
}

fn save_model(model: &RandomForest, path: &Path) -> Result<()> {
    write_atomic(path, model.to_json().as_bytes())
}

pub fn train(a: &TrainArgs, exec: Exec) -> Result<ExitCode> {
    let m = &a.model;
    m.require_traces()?;
    let d = match a.direction {
        DirectionArg::In => Direction::Ingoing,
        DirectionArg::Out => Direction::Outgoing,
        DirectionArg::Both => bail!("train fits one flow; pass --direction in or out"),
    };
    let (_, mut ds) = m.dataset(d)?;
    if !m.positive.is_empty() {
        ds = dataset::binary_relabel(&ds, &m.positive())?;
    }
    let mut model = forest::train_with(&ds, &m.train_config(flow_seed(m.seed, d)), exec)?;
    model.meta.insert("window".into(), m.window.to_string());
    model.meta.insert("direction".into(), d.tag().to_string());
    if !m.positive.is_empty() {
        model.meta.insert("positive".into(), m.positive.join(","));
    }
    save_model(&model, &a.out)?;
    let oob = model
        .oob_error(&ds)
        .map_or("-".to_string(), |e| format!("{e:.4}"));
    println!(
        "{} flow: {} rows, {} classes, {} trees, oob error {oob} -> {}",
        d.tag(),
        ds.len(),
        ds.n_classes(),
        model.trees().len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn predict(a: &PredictArgs) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let (d, rows) = target_rows(&model, &a.input)?;
    let mut counts: BTreeMap<String, u64> = model
        .class_names()
        .iter()
        .map(|c| (c.clone(), 0))
        .collect();
    let mut csv = String::from("row,class");
    for c in model.class_names() {
        let _ = write!(csv, ",{c}");
    }
    csv.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let class = model.classify(r);
        *counts.get_mut(class).expect("known class") += 1;
        let _ = write!(csv, "{i},{class}");
        for s in model.predict_scores(r) {
            let _ = write!(csv, ",{s}");
        }
        csv.push('\n');
    }
    if let Some(out) = &a.out {
        write_atomic(out, csv.as_bytes())?;
    }
    let summary = serde_json::json!({
        "direction": d.tag(),
        "rows": rows.len(),
        "counts": counts,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn parse_counts(items: &[String]) -> Result<BinaryCounts> {
    let mut c = BinaryCounts::default();
    let mut seen = BTreeMap::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("expected KEY=COUNT, got `{item}`"))?;
        let v: u64 = v.parse().with_context(|| format!("count in `{item}`"))?;
        let slot = match k {
            "tp" => &mut c.tp,
            "tn" => &mut c.tn,
            "fp" => &mut c.fp,
            "fn" => &mut c.fn_,
            _ => bail!("unknown count `{k}`; use tp, tn, fp, fn"),
        };
        *slot = v;
        if seen.insert(k.to_string(), ()).is_some() {
            bail!("count `{k}` given twice");
        }
    }
    if seen.len() != 4 {
        bail!("--from-confusion needs tp, tn, fp and fn");
    }
    Ok(c)
}

fn alert(model: &RandomForest, rows: &[[f64; 6]], positive: &[String], threshold: Option<f64>) -> Result<Alert> {
    let pos: Vec<usize> = positive
        .iter()
        .map(|p| {
            model
                .class_names()
                .iter()
                .position(|c| c == p)
                .ok_or_else(|| anyhow!("class `{p}` is not in the model"))
        })
        .collect::<Result<_>>()?;
    let hits = rows
        .iter()
        .filter(|r| pos.contains(&model.classify_index(&r[..])))
        .count() as u64;
    let n = rows.len() as u64;
    let fraction = hits as f64 / n as f64;
    Ok(Alert {
        rows: n,
        positive_rows: hits,
        fraction,
        threshold,
        triggered: threshold.is_some_and(|t| fraction >= t),
    })
}

fn alert_line(table: &mut String, dir: &str, a: &Alert) {
    let _ = writeln!(
        table,
        "{dir:>4} alert fraction {:.4} ({} of {} rows){}",
        a.fraction,
        a.positive_rows,
        a.rows,
        if a.triggered { " ALERT" } else { "" }
    );
}

pub fn detect(a: &DetectArgs, exec: Exec) -> Result<ExitCode> {
    if a.alert_threshold.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
        bail!("--alert-threshold must lie in [0, 1]");
    }
    if !a.from_confusion.is_empty() {
        return detect_from_counts(a);
    }
    if let Some(path) = &a.model {
        return detect_with_model(a, path);
    }
    let m = &a.model_opts;
    m.require_traces()?;
    if m.positive.is_empty() {
        bail!("detect needs at least one --positive class");
    }
    let mut config = m.run_config();
    config.folds = Some(a.folds);
    config.target = a.target.as_ref().map(|p| p.display().to_string());
    let mut report = Report::new("detect", config);
    let mut table = String::new();
    let (mut triggered, mut scored) = (false, false);
    for d in directions(a.direction) {
        let (_, ds) = m.dataset(d)?;
        let ds = dataset::binary_relabel(&ds, &m.positive())?;
        let s = flow_seed(m.seed, d);
        let cfg = CvConfig {
            k_folds: a.folds,
            train: m.train_config(s),
            seed: s,
            exec,
        };
        let outcome = eval::cross_validate(&ds, &cfg)?;
        let mut b = outcome.binary_report(POSITIVE_CLASS)?;
        emit_roc(&mut b, a.roc.as_deref(), d.tag())?;
        binary_line(&mut table, d.tag(), &b);
        let mut flow = FlowReport::new(Some(d.tag()), ds.len() as u64);
        flow.classes = ds.class_names().to_vec();
        flow.binary = Some(b);
        if let Some(target) = &a.target {
            let mut model = forest::train_with(&ds, &m.train_config(seed::derive(s, 3)), exec)?;
            model.meta.insert("window".into(), m.window.to_string());
            model.meta.insert("direction".into(), d.tag().to_string());
            match try_target_rows(&model, target)?.1 {
                Some(rows) => {
                    let al = alert(&model, &rows, &[POSITIVE_CLASS.to_string()], a.alert_threshold)?;
                    alert_line(&mut table, d.tag(), &al);
                    triggered |= al.triggered;
                    flow.alert = Some(al);
                }
                None => {
                    let _ = writeln!(table, "{:>4} target has no {} flow", d.tag(), d.tag());
                }
            }
            scored |= flow.alert.is_some();
        }
        report.flows.push(flow);
    }
    if a.target.is_some() && !scored {
        bail!("target has no flow with at least two packets in the evaluated directions");
    }
    emit_report(&report, a.out.as_deref(), &table)?;
    Ok(exit_for(triggered))
}

fn exit_for(triggered: bool) -> ExitCode {
    if triggered {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn detect_from_counts(a: &DetectArgs) -> Result<ExitCode> {
    let counts = parse_counts(&a.from_confusion)?;
    let b = EvalReport::from_counts(POSITIVE_CLASS, counts);
    let mut report = Report::new("detect", RunConfig::default());
    let mut flow = FlowReport::new(None, counts.total());
    flow.binary = Some(b.clone());
    report.flows.push(flow);
    let r = &b.rates;
    let mut text = format!(
        "tpr = {:.4}\nfpr = {:.4}\nprecision = {:.4}\nrecall = {:.4}\nf1 = {:.4}\n",
        r.tpr, r.fpr, r.precision, r.recall, r.f1
    );
    for d in &r.degenerate {
        let _ = writeln!(text, "note: {d} is undefined (zero denominator), reported as 0");
    }
    if let Some(out) = &a.out {
        write_atomic(out, report.to_json().as_bytes())?;
    }
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn detect_with_model(a: &DetectArgs, path: &Path) -> Result<ExitCode> {
    let target = a
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("--model needs --target"))?;
    let model = load_model(path)?;
    let positive: Vec<String> = if model.class_names().iter().any(|c| c == POSITIVE_CLASS) {
        vec![POSITIVE_CLASS.to_string()]
    } else if let Some(p) = model.meta.get("positive") {
        p.split(',').map(str::to_string).collect()
    } else if !a.model_opts.positive.is_empty() {
        a.model_opts.positive.clone()
    } else {
        bail!("model has no positive class; pass --positive");
    };
    let (d, rows) = target_rows(&model, target)?;
    let al = alert(&model, &rows, &positive, a.alert_threshold)?;
    let config = RunConfig {
        positive,
        model: Some(path.display().to_string()),
        target: Some(target.display().to_string()),
        ..RunConfig::default()
    };
    let mut report = Report::new("detect", config);
    let mut flow = FlowReport::new(Some(d.tag()), rows.len() as u64);
    flow.classes = model.class_names().to_vec();
    let mut table = String::new();
    alert_line(&mut table, d.tag(), &al);
    let triggered = al.triggered;
    flow.alert = Some(al);
    report.flows.push(flow);
    emit_report(&report, a.out.as_deref(), &table)?;
    Ok(exit_for(triggered))
}
