//! Command implementations. Each returns `Ok` or a [`CliError`] carrying the exit code.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use raylign::datagen::{make_pair, mannequin_base, PairSpec};
use raylign::loss::{freeze_chamfer, gradient_check};
use raylign::{
    aggregate, alpha_recall, bounding_sphere, evaluate, freeze_line_loss, intersect, io,
    sample_chords, solve_first_order, solve_icp, solve_svd_surrogate, ChamferMetric, ChordSampler,
    EvalReport, IndexedCloud, ObjectiveKind, PointCloud, RigidTransform, Se3Params, Solution,
    SolverConfig,
};
use rayon::prelude::*;

use crate::cli::{
    BenchArgs, GenbenchArgs, GradcheckArgs, LinesDebugArgs, RegisterArgs, SolverFlags,
};
use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{matrix_rows, Manifest, ManifestPair, MANIFEST_FILE};
use crate::report::{self, ChordRow, IntersectionRow, PairRow, RecallRow, Status, SummaryRow};

pub const TRANSFORM_FILE: &str = "transform.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Solves `method` from `initial`.
pub fn run_method(
    method: Method,
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    config: &SolverConfig,
) -> raylign::Result<Solution> {
    let config = method.adjust(config);
    match method {
        Method::LineLoss | Method::Insec1 | Method::Sample1 | Method::Sample2 => {
            solve_first_order(source, target, initial, ObjectiveKind::LineLoss, &config)
        }
        Method::Cd => solve_first_order(source, target, initial, ObjectiveKind::Chamfer, &config),
        Method::CdW => solve_first_order(
            source,
            target,
            initial,
            ObjectiveKind::ChamferWelsch,
            &config,
        ),
        Method::Icp => solve_icp(source, target, initial, &config),
        Method::SvdSurrogate => solve_svd_surrogate(source, target, initial, &config),
    }
}

fn load_config(flags: &SolverFlags) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(flags.config.as_deref())?;
    let s = &mut config.solver;
    if let Some(v) = flags.seed {
        s.seed = v;
    }
    if let Some(v) = flags.iterations {
        s.max_iterations = v;
    }
    if let Some(v) = flags.lines {
        s.lines_per_iteration = v;
    }
    if let Some(v) = flags.learning_rate {
        s.learning_rate = v;
    }
    if let Some(v) = flags.nu0 {
        s.nu0 = v;
    }
    if flags.delta.is_some() {
        s.delta = flags.delta;
    }
    Ok(config)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    io::read_cloud(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn required(path: Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    path.ok_or_else(|| CliError::Usage(format!("missing --{what} (flag or config)")))
}

fn print_report(r: &EvalReport) {
    println!(
        "err_r_deg {:.6}  err_t_l1 {:.6}  err_t_l2 {:.6}  err_pw_l1 {:.6}  err_pw_l2 {:.6}",
        r.err_r_deg, r.err_t_l1, r.err_t_l2, r.err_pw_l1, r.err_pw_l2
    );
}

/// Ground truth from a transform file or from a manifest entry.
fn load_gt(path: &Path, pair: Option<&str>) -> CliResult<RigidTransform> {
    let is_manifest = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_manifest {
        return io::read_transform(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())));
    }
    let pair = pair.ok_or_else(|| CliError::Usage("--gt with a manifest needs --pair".into()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        return Ok(manifest.find(pair)?.gt_transform());
    }
    Ok(Manifest::read(dir)?.find(pair)?.gt_transform())
}

pub fn register(args: RegisterArgs) -> CliResult<()> {
    let mut config = load_config(&args.solver)?;
    if let Some(m) = args.method {
        config.method = m;
    }
    config.source = args.source.or(config.source);
    config.target = args.target.or(config.target);
    config.out = args.out.or(config.out);
    config.validate()?;
    let source_path = required(config.source.clone(), "source")?;
    let target_path = required(config.target.clone(), "target")?;
    let out = required(config.out.clone(), "out")?;
    let gt = args
        .gt
        .as_deref()
        .map(|p| load_gt(p, args.pair.as_deref()))
        .transpose()?;

    let source = read_cloud(&source_path)?;
    let target = read_cloud(&target_path)?;
    create_dir(&out)?;
    config.echo(&out)?;

    let solution = run_method(
        config.method,
        &source,
        &target,
        &RigidTransform::identity(),
        &config.solver,
    )?;
    io::write_transform(&out.join(TRANSFORM_FILE), &solution.transform)?;
    let aligned_name = match source_path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ply") => "aligned.ply",
        _ => "aligned.xyz",
    };
    io::write_cloud(
        &out.join(aligned_name),
        &source.transformed(&solution.transform),
    )?;
    report::write_csv(&out.join(TRACE_FILE), &report::trace_rows(&solution.trace))?;

    let final_loss = solution.trace.records.last().map_or(f64::NAN, |r| r.loss);
    println!(
        "method {}  iterations {}  converged {}  final loss {:.9e}",
        config.method.name(),
        solution.iterations(),
        solution.converged,
        final_loss
    );
    if let Some(gt) = gt {
        print_report(&evaluate(&gt, &solution.transform, &source)?);
    }
    Ok(())
}

pub fn genbench(args: GenbenchArgs) -> CliResult<()> {
    let spec = PairSpec {
        rotation_max_deg: args.rotation_max_deg,
        translation_range: args.translation_range,
        crop: args.crop.into(),
        overlap: args.overlap,
        noise_sigma: args.noise_sigma,
        outlier_fraction: args.outlier_fraction,
        points: args.points,
        seed: args.seed,
    };
    spec.validate()?;
    if args.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let base = match &args.base {
        Some(path) => read_cloud(path)?,
        None => mannequin_base(args.base_points, args.base_seed),
    };
    create_dir(&args.out)?;
    let mut pairs = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let seed = args.seed.wrapping_add(i as u64);
        let pair = make_pair(
            &base,
            &PairSpec {
                seed,
                ..spec.clone()
            },
        )?;
        let id = format!("pair_{i:03}");
        let source = PathBuf::from(format!("{id}_source.xyz"));
        let target = PathBuf::from(format!("{id}_target.xyz"));
        io::write_cloud(&args.out.join(&source), &pair.source)?;
        io::write_cloud(&args.out.join(&target), &pair.target)?;
        let d = pair.crop_direction;
        pairs.push(ManifestPair {
            id,
            seed,
            source,
            target,
            gt: matrix_rows(&pair.gt),
            crop_direction: [d.x, d.y, d.z],
            outlier_indices: pair.outlier_indices,
        });
    }
    let manifest = Manifest {
        base: args.base,
        base_points: args.base_points,
        base_seed: args.base_seed,
        spec,
        pairs,
    };
    manifest.write(&args.out)?;
    println!(
        "wrote {} pairs to {}",
        manifest.pairs.len(),
        args.out.display()
    );
    Ok(())
}

struct LoadedPair {
    id: String,
    source: PointCloud,
    target: PointCloud,
    gt: RigidTransform,
}

fn solve_pair(method: Method, pair: &LoadedPair, config: &SolverConfig) -> PairRow {
    let mut row = PairRow {
        method: method.name().to_string(),
        nu0: config.nu0,
        pair_id: pair.id.clone(),
        status: Status::Failed,
        err_r_deg: None,
        err_t_l1: None,
        err_t_l2: None,
        err_pw_l1: None,
        err_pw_l2: None,
        final_loss: None,
        iterations: 0,
        seconds: 0.0,
        message: String::new(),
    };
    let start = std::time::Instant::now();
    let result = run_method(
        method,
        &pair.source,
        &pair.target,
        &RigidTransform::identity(),
        config,
    )
    .and_then(|s| evaluate(&pair.gt, &s.transform, &pair.source).map(|r| (s, r)));
    row.seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((solution, r)) => {
            row.status = Status::Ok;
            row.err_r_deg = Some(r.err_r_deg);
            row.err_t_l1 = Some(r.err_t_l1);
            row.err_t_l2 = Some(r.err_t_l2);
            row.err_pw_l1 = Some(r.err_pw_l1);
            row.err_pw_l2 = Some(r.err_pw_l2);
            row.final_loss = solution.trace.records.last().map(|r| r.loss);
            row.iterations = solution.iterations();
        }
        Err(e) => row.message = e.to_string(),
    }
    row
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> CliResult<Vec<Method>> {
    let methods: Vec<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Method::parse)
        .collect::<CliResult<_>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("--methods lists no method".into()));
    }
    let mut seen = Vec::new();
    for m in &methods {
        if seen.contains(m) {
            return Err(CliError::Usage(format!(
                "method `{}` listed twice",
                m.name()
            )));
        }
        seen.push(*m);
    }
    Ok(methods)
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    let methods = parse_methods(&args.methods)?;
    let mut config = load_config(&args.solver)?;
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    if !args.alphas.is_empty() {
        config.alphas = args.alphas.clone();
    }
    config.out = Some(args.out.clone().unwrap_or_else(|| args.bench_dir.clone()));
    config.validate()?;
    let nu0s = if args.nu0_sweep.is_empty() {
        vec![config.solver.nu0]
    } else {
        args.nu0_sweep.clone()
    };
    if nu0s.iter().any(|v| !(*v > 0.0)) {
        return Err(CliError::Usage(
            "--nu0-sweep values must be positive".into(),
        ));
    }

    let manifest = Manifest::read(&args.bench_dir)?;
    let pairs = manifest
        .pairs
        .iter()
        .map(|p| {
            Ok(LoadedPair {
                id: p.id.clone(),
                source: read_cloud(&args.bench_dir.join(&p.source))?,
                target: read_cloud(&args.bench_dir.join(&p.target))?,
                gt: p.gt_transform(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let out = config.out.clone().expect("set above");
    create_dir(&out)?;
    config.echo(&out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &method in &methods {
        let mut recall_rows = Vec::new();
        for &nu0 in &nu0s {
            let solver = SolverConfig {
                nu0,
                ..config.solver.clone()
            };
            let batch: Vec<PairRow> = pool.install(|| {
                pairs
                    .par_iter()
                    .map(|p| solve_pair(method, p, &solver))
                    .collect()
            });
            let reports: Vec<EvalReport> = batch.iter().filter_map(PairRow::report).collect();
            let failed = batch.len() - reports.len();
            let agg = if reports.is_empty() {
                None
            } else {
                Some(aggregate(&reports)?)
            };
            let row = SummaryRow::new(method.name(), nu0, batch.len(), failed, agg.as_ref());
            println!(
                "{:<14} nu0 {:<8} pairs {:>3} failed {:>3}  mean err_r {:>10.4}  mean err_pw_l2 {:>10.6}",
                method.name(),
                nu0,
                row.pairs,
                row.failed,
                row.mean_err_r_deg.unwrap_or(f64::NAN),
                row.mean_err_pw_l2.unwrap_or(f64::NAN)
            );
            summary.push(row);
            if !reports.is_empty() && !config.alphas.is_empty() {
                // Failed pairs count as misses.
                let curve = alpha_recall(&reports, &config.alphas, config.recall_metric)?;
                let scale = reports.len() as f64 / batch.len() as f64;
                let mut curve_rows = RecallRow::from_curve(nu0, &curve);
                curve_rows.iter_mut().for_each(|r| r.recall *= scale);
                recall_rows.extend(curve_rows);
            }
            rows.extend(batch);
        }
        report::write_csv(
            &out.join(format!("recall_{}.csv", method.name())),
            &recall_rows,
        )?;
    }
    report::write_csv(&out.join(PAIRS_FILE), &rows)?;
    report::write_csv(&out.join(SUMMARY_FILE), &summary)?;
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> CliResult<()> {
    if args.states == 0 || !(args.step > 0.0) || args.lines == 0 {
        return Err(CliError::Usage(
            "--states, --step and --lines must be positive".into(),
        ));
    }
    let (source, target) = match (&args.source, &args.target) {
        (Some(s), Some(t)) => (read_cloud(s)?, read_cloud(t)?),
        _ => {
            let pair = make_pair(
                &mannequin_base(1024, args.seed),
                &PairSpec {
                    seed: args.seed,
                    ..PairSpec::default()
                },
            )?;
            (pair.source, pair.target)
        }
    };
    let config = SolverConfig::default();
    let params = config.intersection_params(&target)?;
    let source_idx = IndexedCloud::new(source.clone(), config.neighbors);
    let target_idx = IndexedCloud::new(target.clone(), config.neighbors);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (mut worst_chamfer, mut worst_line) = (0.0f64, 0.0f64);
    let mut line_states = 0;
    for _ in 0..args.states {
        let state = random_state(&mut rng);
        let (frozen, _) = freeze_chamfer(
            &state,
            &source_idx,
            &target_idx,
            ChamferMetric::SquaredL2,
            config.nu0,
        )?;
        worst_chamfer = worst_chamfer.max(gradient_check(&frozen, &state, args.step));
        let sphere = bounding_sphere(&source.transformed(&state), &target)?;
        let chords = sample_chords(
            &sphere,
            args.lines,
            ChordSampler::default(),
            (&source, &target),
            &mut rng,
        )?;
        match freeze_line_loss(
            &state,
            &source_idx,
            &target_idx,
            &chords,
            config.nu0,
            &params,
        ) {
            Ok(frozen) => {
                worst_line = worst_line.max(gradient_check(&frozen.objective, &state, args.step));
                line_states += 1;
            }
            Err(raylign::Error::NoIntersections) => {}
            Err(e) => return Err(e.into()),
        }
    }
    println!(
        "chamfer   states {:>3}  max relative error {:.3e}",
        args.states, worst_chamfer
    );
    println!(
        "line-loss states {:>3}  max relative error {:.3e}",
        line_states, worst_line
    );
    if line_states == 0 {
        return Err(CliError::Numerical(
            "no state produced line intersections".into(),
        ));
    }
    if worst_chamfer > args.tolerance || worst_line > args.tolerance {
        return Err(CliError::Numerical(format!(
            "gradient error above {:e}",
            args.tolerance
        )));
    }
    Ok(())
}

fn random_state(rng: &mut ChaCha8Rng) -> RigidTransform {
    use rand::Rng;
    let mut v = [0.0; 6];
    for (k, x) in v.iter_mut().enumerate() {
        *x = if k < 3 {
            rng.gen_range(-0.3..0.3)
        } else {
            rng.gen_range(-0.1..0.1)
        };
    }
    Se3Params::from_vector(&v.into()).exp()
}

pub fn lines_debug(args: LinesDebugArgs) -> CliResult<()> {
    let config = load_config(&args.solver)?;
    config.validate()?;
    if args.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let source = read_cloud(&args.source)?;
    let target = read_cloud(&args.target)?;
    let transform = match &args.transform {
        Some(p) => {
            io::read_transform(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
        }
        None => RigidTransform::identity(),
    };
    let moved = source.transformed(&transform);
    let solver = config.method.adjust(&config.solver);
    let params = solver.intersection_params(&target)?;
    let sphere = bounding_sphere(&moved, &target)?;
    let sampler = ChordSampler {
        kind: solver.sampler,
        pair_perturbation: solver.pair_perturbation,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    let chords = sample_chords(&sphere, args.count, sampler, (&moved, &target), &mut rng)?;
    let moved_idx = IndexedCloud::new(moved.clone(), solver.neighbors);
    let target_idx = IndexedCloud::new(target, solver.neighbors);

    let mut chord_rows = Vec::with_capacity(chords.len());
    let mut hits = Vec::new();
    for (line, chord) in chords.iter().enumerate() {
        chord_rows.push(ChordRow {
            line,
            ax: chord.a.x,
            ay: chord.a.y,
            az: chord.a.z,
            bx: chord.b.x,
            by: chord.b.y,
            bz: chord.b.z,
        });
        for (name, cloud) in [("source", &moved_idx), ("target", &target_idx)] {
            for item in intersect(chord, cloud, &params).items {
                hits.push(IntersectionRow {
                    line,
                    cloud: name.to_string(),
                    x: item.point.x,
                    y: item.point.y,
                    z: item.point.z,
                    param: item.param,
                });
            }
        }
    }
    create_dir(&args.out)?;
    config.echo(&args.out)?;
    report::write_csv(&args.out.join("chords.csv"), &chord_rows)?;
    report::write_csv(&args.out.join("intersections.csv"), &hits)?;
    println!(
        "{} chords, {} intersection points",
        chord_rows.len(),
        hits.len()
    );
    Ok(())
}
