//! Subcommand CLI orchestrating the pipeline: volumes in as MetaImage,
//! reports out as CSV/JSON. Exit codes: 0 success, 1 usage error, 2 data
//! error. All randomness flows through an explicit `--seed`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Interp, SamplerConfig};
use crate::metrics;
use crate::mhd::{read_volume, write_atomic, write_volume};
use crate::phantom::{self, GradedConfig};
use crate::postprocess::{self, PostprocessConfig, PostprocessReport};
use crate::records::{read_slice_records, write_slice_records, SliceRecord};
use crate::regression::{self, LinearModel};
use crate::uncertainty::{self, Ensemble, MeasureKind, SliceUncertainty, TargetKind};
use crate::volume::Volume;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "sliceuq", version, about = "Slice-level uncertainty toolkit for segmentation ensembles")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print volume header information as JSON.
    Info(InfoArgs),
    /// Resample a volume to a new spacing.
    Resample(ResampleArgs),
    /// Emit variable-input crop specs from a stage-1 label.
    Crops(CropsArgs),
    /// Average an ensemble into a mean probability map and consensus label.
    Aggregate(AggregateArgs),
    /// Volume metrics (JSON) and per-slice metrics (CSV) against GT.
    Metrics(MetricsArgs),
    /// Per-slice uncertainty measures for an ensemble (CSV).
    Uncertainty(UncertaintyArgs),
    /// Pearson correlations between measures and metrics over a record CSV.
    Correlate(CorrelateArgs),
    /// Fit a linear model from one measure to one target.
    Fit(FitArgs),
    /// Case-grouped k-fold cross validation of a linear model.
    Cv(CvArgs),
    /// Evaluate a saved model at a measure value.
    Predict(PredictArgs),
    /// Flag uncertain slices and Gaussian-smooth only those.
    Postprocess(PostprocessArgs),
    /// Generate a synthetic phantom dataset.
    Phantom(PhantomArgs),
    /// End-to-end run producing all reports.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InfoArgs {
    /// Input .mhd volume
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct ResampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Target spacing in mm as z,y,x
    #[arg(long)]
    spacing: String,
    /// trilinear | nearest
    #[arg(long, default_value = "trilinear")]
    mode: String,
}

#[derive(Args)]
struct CropsArgs {
    /// Stage-1 label volume (.mhd)
    #[arg(long)]
    label: PathBuf,
    /// Output CropSpec JSON
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    sets: usize,
    /// Maximum margin per side as z,y,x voxels
    #[arg(long, default_value = "2,16,16")]
    max_margin: String,
    #[arg(long)]
    no_flip: bool,
    /// Second-stage input grid as z,y,x
    #[arg(long, default_value = "16,120,120")]
    target: String,
}

#[derive(Args)]
struct AggregateArgs {
    /// Directory holding member_*.mhd probability maps
    #[arg(long)]
    ensemble_dir: PathBuf,
    #[arg(long)]
    mean: PathBuf,
    #[arg(long)]
    label: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "case")]
    case_id: String,
}

#[derive(Args)]
struct UncertaintyArgs {
    #[arg(long)]
    ensemble_dir: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    case_id: Option<String>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Slice record CSV
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    records: PathBuf,
    /// type1 | type2 | type3 | auto (most correlated)
    #[arg(long, default_value = "auto")]
    measure: String,
    /// dsc | hd
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "auto")]
    measure: String,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON from `fit`
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    value: f64,
}

#[derive(Args)]
struct PostprocessArgs {
    #[arg(long)]
    ensemble_dir: PathBuf,
    /// HD model JSON from `fit`
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    label_out: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    hd_threshold: f64,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
}

#[derive(Args)]
struct PhantomArgs {
    /// Output directory (case_NN/gt.mhd + member_MM.mhd)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    cases: usize,
    #[arg(long, default_value_t = 20)]
    members: usize,
    /// Per-slice noise amplitudes in mm, comma separated
    #[arg(long, default_value = "0,1,2,4")]
    grades: String,
    /// Grid as z,y,x
    #[arg(long, default_value = "12,64,64")]
    dims: String,
}

#[derive(Args)]
struct PipelineArgs {
    /// Output directory for all reports
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Generate a phantom dataset instead of reading --data
    #[arg(long)]
    phantom: bool,
    /// Data root with case_*/gt.mhd and case_*/member_*.mhd
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    cases: usize,
    #[arg(long, default_value_t = 20)]
    members: usize,
    #[arg(long, default_value = "0,1,2,4")]
    grades: String,
    #[arg(long, default_value = "12,64,64")]
    dims: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 8.0)]
    hd_threshold: f64,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
}

/// Entry point used by both `main` and tests. Returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn parse_triple<V: std::str::FromStr + Copy>(s: &str, what: &str) -> Result<(V, V, V)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!("{what} must be z,y,x")));
    }
    let mut vals = Vec::with_capacity(3);
    for p in parts {
        vals.push(
            p.parse::<V>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} component `{p}`")))?,
        );
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn parse_mode(s: &str) -> Result<Interp> {
    match s {
        "trilinear" => Ok(Interp::Trilinear),
        "nearest" => Ok(Interp::Nearest),
        other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
    }
}

fn parse_target(s: &str) -> Result<TargetKind> {
    match s {
        "dsc" => Ok(TargetKind::Dsc),
        "hd" | "hd_mm" => Ok(TargetKind::HdMm),
        other => Err(Error::InvalidArgument(format!("unknown target `{other}`"))),
    }
}

fn resolve_measure(s: &str, records: &[SliceRecord], target: TargetKind) -> Result<MeasureKind> {
    match s {
        "type1" => Ok(MeasureKind::Type1),
        "type2" => Ok(MeasureKind::Type2),
        "type3" => Ok(MeasureKind::Type3),
        "auto" => uncertainty::correlate(records)?
            .most_correlated(target)
            .ok_or_else(|| Error::InsufficientData("no correlations available".into())),
        other => Err(Error::InvalidArgument(format!("unknown measure `{other}`"))),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Versioned<'a, T> {
        schema: u32,
        #[serde(flatten)]
        value: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&Versioned { schema: SCHEMA_VERSION, value })?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.into(), source })?;
        }
    }
    write_atomic(path, text.as_bytes())
}

fn read_model(path: &Path) -> Result<LinearModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    #[derive(serde::Deserialize)]
    struct Versioned {
        #[serde(flatten)]
        model: LinearModel,
    }
    let v: Versioned = serde_json::from_str(&text)?;
    Ok(v.model)
}

fn read_ensemble(dir: &Path, case_id: Option<String>) -> Result<Ensemble> {
    let mut member_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| Error::Io { path: dir.into(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "mhd")
                && p.file_stem().is_some_and(|s| s.to_string_lossy().starts_with("member_"))
        })
        .collect();
    member_paths.sort();
    if member_paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no member_*.mhd files in {}",
            dir.display()
        )));
    }
    let members = member_paths
        .iter()
        .map(|p| read_volume(p))
        .collect::<Result<Vec<_>>>()?;
    let id = case_id.unwrap_or_else(|| {
        dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into())
    });
    Ensemble::new(id, members)
}

#[derive(Serialize)]
struct VolumeInfo {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    origin: (f64, f64, f64),
    element_kind: crate::volume::ElementKind,
    min: f32,
    max: f32,
}

#[derive(Serialize)]
struct CaseMetrics {
    case_id: String,
    dsc: f64,
    msd_mm: Option<f64>,
    hd_mm: Option<f64>,
    hd95_mm: Option<f64>,
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Info(a) => {
            let v = read_volume(&a.input)?;
            let info = VolumeInfo {
                dims: v.dims,
                spacing: v.spacing,
                origin: v.origin,
                element_kind: v.element_kind,
                min: v.data.iter().cloned().fold(f32::INFINITY, f32::min),
                max: v.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max),
            };
            println!("{}", serde_json::to_string_pretty(&info)?);
            Ok(())
        }
        Cmd::Resample(a) => {
            let v = read_volume(&a.input)?;
            let spacing = parse_triple::<f64>(&a.spacing, "spacing")?;
            let out = geometry::resample(&v, spacing, parse_mode(&a.mode)?)?;
            write_volume(&out, &a.output)?;
            println!("resampled {:?} -> {:?}", v.dims, out.dims);
            Ok(())
        }
        Cmd::Crops(a) => {
            let label = read_volume(&a.label)?;
            let box_ = geometry::tight_bbox(&label)?;
            let cfg = SamplerConfig {
                n_margin_sets: a.sets,
                max_margin: parse_triple::<usize>(&a.max_margin, "max-margin")?,
                with_flip: !a.no_flip,
                target_dims: parse_triple::<usize>(&a.target, "target")?,
                seed: a.seed,
            };
            let specs = geometry::sample_crops(box_, label.dims, &cfg)?;
            write_json(&serde_json::json!({ "crops": specs }), &a.out)?;
            println!("{} crop specs -> {}", specs.len(), a.out.display());
            Ok(())
        }
        Cmd::Aggregate(a) => {
            let e = read_ensemble(&a.ensemble_dir, None)?;
            let (mean, label) = uncertainty::aggregate(&e);
            write_volume(&mean, &a.mean)?;
            write_volume(&label, &a.label)?;
            println!(
                "aggregated {} members; consensus foreground {} voxels",
                e.members.len(),
                label.foreground_count()
            );
            Ok(())
        }
        Cmd::Metrics(a) => {
            let gt = read_volume(&a.gt)?;
            let pred = read_volume(&a.pred)?;
            let vm = metrics::volume_metrics(&gt, &pred, gt.spacing)?;
            let summary = CaseMetrics {
                case_id: a.case_id.clone(),
                dsc: vm.dsc,
                msd_mm: vm.msd_mm,
                hd_mm: vm.hd_mm,
                hd95_mm: vm.hd95_mm,
            };
            if let Some(json) = &a.json {
                write_json(&summary, json)?;
            }
            if let Some(csv) = &a.csv {
                let sm = metrics::slice_metrics(&gt, &pred, gt.spacing)?;
                let records: Vec<SliceRecord> = sm
                    .iter()
                    .map(|s| SliceRecord {
                        case_id: a.case_id.clone(),
                        slice_index: s.slice_index,
                        n_fg: s.n_fg_gt,
                        dsc: Some(s.dsc),
                        hd_mm: s.hd_mm,
                        msd_mm: s.msd_mm,
                        hd95_mm: s.hd95_mm,
                        ..Default::default()
                    })
                    .collect();
                write_slice_records(&records, csv)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Cmd::Uncertainty(a) => {
            let e = read_ensemble(&a.ensemble_dir, a.case_id)?;
            let su = uncertainty::slice_uncertainty(&e)?;
            let records: Vec<SliceRecord> = su
                .iter()
                .map(|s| SliceRecord {
                    case_id: e.case_id.clone(),
                    slice_index: s.slice_index,
                    n_fg: s.n_fg,
                    type1: Some(s.type1),
                    type2: Some(s.type2),
                    type3: Some(s.type3),
                    ..Default::default()
                })
                .collect();
            write_slice_records(&records, &a.csv)?;
            println!("{} foreground slices -> {}", records.len(), a.csv.display());
            Ok(())
        }
        Cmd::Correlate(a) => {
            let records = read_slice_records(&a.records)?;
            let report = uncertainty::correlate(&records)?;
            write_json(&report, &a.out)?;
            for e in &report.entries {
                println!("{:?} vs {:?}: r = {:.3} (n = {}, dropped = {})", e.measure, e.target, e.r, e.n, e.dropped);
            }
            Ok(())
        }
        Cmd::Fit(a) => {
            let records = read_slice_records(&a.records)?;
            let target = parse_target(&a.target)?;
            let measure = resolve_measure(&a.measure, &records, target)?;
            let model = regression::fit(&records, measure, target)?;
            write_json(&model, &a.out)?;
            println!(
                "{:?} -> {:?}: slope {:.6}, intercept {:.6} ({} slices, {} cases)",
                measure, target, model.slope, model.intercept, model.trained_on.slices, model.trained_on.cases
            );
            Ok(())
        }
        Cmd::Cv(a) => {
            let records = read_slice_records(&a.records)?;
            let target = parse_target(&a.target)?;
            let measure = resolve_measure(&a.measure, &records, target)?;
            let report = regression::cross_validate(&records, measure, target, a.folds)?;
            write_json(&report, &a.out)?;
            println!("{}-fold CV mean RMSE: {:.6}", report.folds, report.mean_rmse);
            Ok(())
        }
        Cmd::Predict(a) => {
            let model = read_model(&a.model)?;
            let p = regression::predict(&model, a.value);
            println!("{}", serde_json::to_string_pretty(&p)?);
            Ok(())
        }
        Cmd::Postprocess(a) => {
            let e = read_ensemble(&a.ensemble_dir, None)?;
            let model = read_model(&a.model)?;
            let cfg = PostprocessConfig {
                hd_threshold_mm: a.hd_threshold,
                sigma_px: a.sigma,
                ..Default::default()
            };
            let (mean, label) = uncertainty::aggregate(&e);
            let su = uncertainty::slice_uncertainty(&e)?;
            let flags = postprocess::flag_slices(&su, &model, &cfg)?;
            let (new_label, report) = postprocess::apply_postprocess(&mean, &label, &flags, &cfg)?;
            write_volume(&new_label, &a.label_out)?;
            write_json(&report, &a.report)?;
            println!("flagged {} of {} foreground slices", report.flagged.len(), su.len());
            Ok(())
        }
        Cmd::Phantom(a) => {
            let cfg = GradedConfig {
                n_cases: a.cases,
                noise_grades: parse_grades(&a.grades)?,
                dims: parse_triple::<usize>(&a.dims, "dims")?,
                members: a.members,
                seed: a.seed,
                ..Default::default()
            };
            write_phantom_dataset(&cfg, &a.out)?;
            println!("{} cases -> {}", a.cases, a.out.display());
            Ok(())
        }
        Cmd::Pipeline(a) => run_pipeline(a),
    }
}

fn parse_grades(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|g| {
            g.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad grade `{g}`")))
        })
        .collect()
}

fn write_phantom_dataset(cfg: &GradedConfig, out: &Path) -> Result<()> {
    let dataset = phantom::make_graded_dataset(cfg)?;
    for (e, gt) in &dataset {
        let case_dir = out.join(&e.case_id);
        fs::create_dir_all(&case_dir).map_err(|source| Error::Io { path: case_dir.clone(), source })?;
        write_volume(gt, &case_dir.join("gt.mhd"))?;
        for (m, member) in e.members.iter().enumerate() {
            write_volume(member, &case_dir.join(format!("member_{m:02}.mhd")))?;
        }
    }
    Ok(())
}

fn case_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|source| Error::Io { path: root.into(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidArgument(format!("no case directories under {}", root.display())));
    }
    Ok(dirs)
}

#[derive(Serialize)]
struct PipelineSummary {
    cases: usize,
    slices: usize,
    selected_measure_dsc: MeasureKind,
    selected_measure_hd: MeasureKind,
    cv_rmse_dsc: f64,
    cv_rmse_hd_mm: f64,
    flagged_slices: usize,
}

fn run_pipeline(a: PipelineArgs) -> Result<()> {
    let data_root = if a.phantom {
        let root = a.out.join("data");
        let cfg = GradedConfig {
            n_cases: a.cases,
            noise_grades: parse_grades(&a.grades)?,
            dims: parse_triple::<usize>(&a.dims, "dims")?,
            members: a.members,
            seed: a.seed,
            ..Default::default()
        };
        write_phantom_dataset(&cfg, &root)?;
        root
    } else {
        a.data
            .clone()
            .ok_or_else(|| Error::InvalidArgument("either --phantom or --data is required".into()))?
    };

    // per-case aggregation, uncertainty and metrics
    let mut all_records: Vec<SliceRecord> = Vec::new();
    let mut per_case: BTreeMap<String, (Volume, Volume, Vec<SliceUncertainty>)> = BTreeMap::new();
    for dir in case_dirs(&data_root)? {
        let e = read_ensemble(&dir, None)?;
        let gt = read_volume(&dir.join("gt.mhd"))?;
        let (mean, label) = uncertainty::aggregate(&e);
        let su = uncertainty::slice_uncertainty(&e)?;
        let sm = metrics::slice_metrics(&gt, &label, gt.spacing)?;

        let case_out = a.out.join("cases").join(&e.case_id);
        fs::create_dir_all(&case_out).map_err(|source| Error::Io { path: case_out.clone(), source })?;
        write_volume(&mean, &case_out.join("mean.mhd"))?;
        write_volume(&label, &case_out.join("label.mhd"))?;
        let vm = metrics::volume_metrics(&gt, &label, gt.spacing)?;
        write_json(
            &CaseMetrics {
                case_id: e.case_id.clone(),
                dsc: vm.dsc,
                msd_mm: vm.msd_mm,
                hd_mm: vm.hd_mm,
                hd95_mm: vm.hd95_mm,
            },
            &case_out.join("metrics.json"),
        )?;

        // join on slice index: union of consensus-FG and GT-FG slices
        let mut rows: BTreeMap<usize, SliceRecord> = BTreeMap::new();
        for s in &su {
            rows.insert(
                s.slice_index,
                SliceRecord {
                    case_id: e.case_id.clone(),
                    slice_index: s.slice_index,
                    n_fg: s.n_fg,
                    type1: Some(s.type1),
                    type2: Some(s.type2),
                    type3: Some(s.type3),
                    ..Default::default()
                },
            );
        }
        for s in &sm {
            let row = rows.entry(s.slice_index).or_insert_with(|| SliceRecord {
                case_id: e.case_id.clone(),
                slice_index: s.slice_index,
                ..Default::default()
            });
            row.dsc = Some(s.dsc);
            row.hd_mm = s.hd_mm;
            row.msd_mm = s.msd_mm;
            row.hd95_mm = s.hd95_mm;
        }
        all_records.extend(rows.into_values());
        per_case.insert(e.case_id.clone(), (mean, label, su));
    }
    write_slice_records(&all_records, &a.out.join("records.csv"))?;

    // correlation, model selection, fits, CV
    let report = uncertainty::correlate(&all_records)?;
    write_json(&report, &a.out.join("correlation.json"))?;
    let measure_dsc = report
        .most_correlated(TargetKind::Dsc)
        .ok_or_else(|| Error::InsufficientData("no DSC correlations".into()))?;
    let measure_hd = report
        .most_correlated(TargetKind::HdMm)
        .ok_or_else(|| Error::InsufficientData("no HD correlations".into()))?;
    let model_dsc = regression::fit(&all_records, measure_dsc, TargetKind::Dsc)?;
    let model_hd = regression::fit(&all_records, measure_hd, TargetKind::HdMm)?;
    write_json(&model_dsc, &a.out.join("model_dsc.json"))?;
    write_json(&model_hd, &a.out.join("model_hd.json"))?;
    let cv_dsc = regression::cross_validate(&all_records, measure_dsc, TargetKind::Dsc, a.folds)?;
    let cv_hd = regression::cross_validate(&all_records, measure_hd, TargetKind::HdMm, a.folds)?;
    write_json(&cv_dsc, &a.out.join("cv_dsc.json"))?;
    write_json(&cv_hd, &a.out.join("cv_hd.json"))?;

    // targeted post-processing per case
    let cfg = PostprocessConfig {
        hd_threshold_mm: a.hd_threshold,
        sigma_px: a.sigma,
        ..Default::default()
    };
    let mut total_flagged = 0;
    let mut reports: BTreeMap<String, PostprocessReport> = BTreeMap::new();
    for (case_id, (mean, label, su)) in &per_case {
        let flags = postprocess::flag_slices(su, &model_hd, &cfg)?;
        let (new_label, report) = postprocess::apply_postprocess(mean, label, &flags, &cfg)?;
        write_volume(&new_label, &a.out.join("cases").join(case_id).join("label_post.mhd"))?;
        total_flagged += report.flagged.len();
        reports.insert(case_id.clone(), report);
    }
    write_json(&reports, &a.out.join("postprocess.json"))?;

    let summary = PipelineSummary {
        cases: per_case.len(),
        slices: all_records.len(),
        selected_measure_dsc: measure_dsc,
        selected_measure_hd: measure_hd,
        cv_rmse_dsc: cv_dsc.mean_rmse,
        cv_rmse_hd_mm: cv_hd.mean_rmse,
        flagged_slices: total_flagged,
    };
    write_json(&summary, &a.out.join("summary.json"))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
