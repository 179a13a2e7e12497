//! End-to-end acceptance checks on the default synthetic world. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use antnav::{run, Subcommand};
use antnav_core::compass::{idf, scan, ScanArc};
use antnav_core::imgcore::{preprocess, Panorama, PreprocessConfig};
use antnav_core::mlpnav::{
    classify_report, corner_rate_of_change, corner_zone, evaluate_headings, forward_arc,
    gradient_check, kink_margin, labeled_views, load_model, make_test_set, make_training_set,
    retained_indices, save_model, train, Activation, CornerBoost, LabeledView, MlpConfig, MlpModel,
};
use antnav_core::perfectmem::{
    build_store, evaluate_cells, frequency_sweep, nearest_snapshot, preprocess_sweep, recover,
    SnapshotStore,
};
use antnav_core::stats::lower_median;
use antnav_core::world::{
    default_l_polyline, default_route_polyline, load_db, make_grid_in, make_route_in, save_db,
    GridCell, Pose, Route, World, WorldGrid, WorldSpec, DEFAULT_PITCH, DEFAULT_RADIUS,
    DEFAULT_SPACING,
};

type Outcome = Result<String, String>;

struct Scene {
    route: Route,
    grid: WorldGrid,
}

impl Scene {
    fn new(polyline: &[(f64, f64)]) -> Self {
        let world = World::new(&WorldSpec::default()).unwrap();
        let route = make_route_in(&world, polyline, DEFAULT_SPACING).unwrap();
        let grid = make_grid_in(&world, &route, DEFAULT_RADIUS, DEFAULT_PITCH).unwrap();
        Self { route, grid }
    }

    fn cells(&self) -> Vec<&GridCell> {
        self.grid.within(&self.route.positions(), DEFAULT_RADIUS)
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Training setup shared by the classifier criteria.
fn mlp_config() -> MlpConfig {
    MlpConfig {
        hidden_layers: vec![20],
        activation: Activation::Tanh,
        learning_rate: 1e-2,
        max_iter: 300,
        tol: 0.0,
        batch: 200,
        seed: 1,
        ..MlpConfig::default()
    }
}

const NEGATIVE_ANGLE: f64 = 60.0;

/// Trains with the fast schedule and falls back to a slower one when the
/// fast one does not fit the training set (large sets at step 1e-2 stall).
fn fit(views: &[LabeledView]) -> MlpModel {
    let fast = train(views, &mlp_config()).unwrap();
    if classify_report(&fast, views).unwrap().accuracy == 1.0 {
        return fast;
    }
    let slow = MlpConfig {
        learning_rate: 1e-3,
        max_iter: 1000,
        ..mlp_config()
    };
    train(views, &slow).unwrap()
}

fn rotational_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut scan_time = 0.0;
    let mut misses = Vec::new();
    let mut done = 0;
    while done < 100 {
        let spec = WorldSpec::with_seed(rng.gen_range(0..1_000_000));
        let world = World::new(&spec).unwrap();
        let pose = Pose::new(
            rng.gen_range(0.0..spec.extent),
            rng.gen_range(0.0..spec.extent),
            rng.gen_range(0.0..360.0),
        );
        let Ok(view) = world.render(&pose) else {
            continue; // inside an object
        };
        let k = rng.gen_range(0..view.width());
        let rotated = view.rotate(k as i64);
        let t = Instant::now();
        let rec = scan(&view, &rotated, ScanArc::FULL).unwrap();
        scan_time += t.elapsed().as_secs_f64();
        if rec.shift != k || rec.min_rms != 0.0 {
            misses.push((spec.seed, k, rec.shift, rec.min_rms));
        }
        done += 1;
    }
    check(
        misses.is_empty() && scan_time < 5.0,
        format!(
            "100 triples, {} misses {:?}, scan time {scan_time:.2} s (< 5 s)",
            misses.len(),
            misses
        ),
    )
}

fn random_views(rng: &mut ChaCha8Rng, inputs: usize, n: usize) -> Vec<LabeledView> {
    (0..n)
        .map(|i| LabeledView {
            features: (0..inputs).map(|_| rng.gen_range(0.0..1.0)).collect(),
            label: (i % 2) as u8,
            origin: (i, 0.0),
        })
        .collect()
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut regenerated = 0;
    for net in 0..20 {
        let activation = Activation::ALL[net % 4];
        loop {
            let depth = rng.gen_range(1..=2);
            let cfg = MlpConfig {
                hidden_layers: (0..depth).map(|_| rng.gen_range(2..=6)).collect(),
                activation,
                seed: rng.gen(),
                ..MlpConfig::default()
            };
            let inputs = rng.gen_range(3..=8);
            let views = random_views(&mut rng, inputs, 12);
            if activation == Activation::Relu && kink_margin(&cfg, &views).unwrap() <= 1e-3 {
                regenerated += 1;
                continue;
            }
            worst = worst.max(gradient_check(&cfg, &views, 1e-5).unwrap());
            break;
        }
    }
    check(
        worst < 1e-5,
        format!("20 networks, max relative error {worst:.2e} (< 1e-5), {regenerated} relu draws regenerated"),
    )
}

fn exhaustive(store: &SnapshotStore, q: &Panorama) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for (slot, s) in store.snapshots().iter().enumerate() {
        for k in 0..q.width() {
            let v = idf(&q.rotate(k as i64), &s.view).unwrap();
            if v < best.2 {
                best = (slot, k, v);
            }
        }
    }
    best
}

fn memory_oracle(scene: &Scene) -> Outcome {
    let cfg = PreprocessConfig::new(1.0, 6);
    let store = build_store(&scene.route, 4, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut mismatches = 0;
    for _ in 0..50 {
        let cell = &scene.grid.cells[rng.gen_range(0..scene.grid.cells.len())];
        let q = preprocess(&cell.view, &cfg).unwrap();
        let q = q.rotate(rng.gen_range(0..q.width()) as i64);
        let m = recover(&store, &q).unwrap();
        let (slot, k, v) = exhaustive(&store, &q);
        if (m.slot, m.recovery.shift, m.recovery.min_rms.to_bits()) != (slot, k, v.to_bits()) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("50 queries, {mismatches} differ from the exhaustive search"),
    )
}

fn frequency_trend(scene: &Scene) -> Outcome {
    let cfg = PreprocessConfig::new(1.0, 4);
    let rows = frequency_sweep(
        &scene.route,
        &scene.grid,
        cfg,
        &[1, 2, 4, 20],
        DEFAULT_RADIUS,
    )
    .unwrap();
    let (m1, m20) = (rows[0].stats.median_error, rows[3].stats.median_error);
    let violations = (0..rows[0].stats.n)
        .filter(|&c| {
            let w: Vec<f64> = rows[..3]
                .iter()
                .map(|r| r.stats.per_cell[c].weight)
                .collect();
            !(w[0] <= w[1] && w[1] <= w[2])
        })
        .count();
    check(
        m20 >= m1 && violations == 0,
        format!(
            "median n=1 {m1:.1}°, n=2 {:.1}°, n=4 {:.1}°, n=20 {m20:.1}° (means {}); containment violations {violations}/{}",
            rows[1].stats.median_error,
            rows[2].stats.median_error,
            rows.iter().map(|r| format!("{:.1}", r.stats.mean_error)).collect::<Vec<_>>().join("/"),
            rows[0].stats.n
        ),
    )
}

fn resolution_trend(scene: &Scene) -> Outcome {
    let factors = [4, 6, 10, 20, 45, 90];
    let rows = preprocess_sweep(
        &scene.route,
        &scene.grid,
        &factors,
        &[1.0],
        1,
        DEFAULT_RADIUS,
    )
    .unwrap();
    let mut csv = String::from("factor,sigma,n,mean_error_deg,median_error_deg\n");
    for r in &rows {
        csv += &format!(
            "{},{},{},{:.3},{:.3}\n",
            r.factor, r.sigma, r.n, r.mean_error, r.median_error
        );
    }
    let path = artifact_dir().join("resolution_curve.csv");
    std::fs::write(&path, csv).unwrap();
    let (mid, coarse) = (rows[0].median_error, rows[rows.len() - 1].median_error);
    check(
        coarse >= mid,
        format!(
            "median factor 4 {mid:.1}°, factor 90 {coarse:.1}°; curve [{}] in {}",
            rows.iter()
                .map(|r| format!("{}:{:.1}", r.factor, r.median_error))
                .collect::<Vec<_>>()
                .join(" "),
            path.display()
        ),
    )
}

fn small_route(scene: &Scene) -> Outcome {
    let t = Instant::now();
    let cfg = PreprocessConfig::new(1.0, 6);
    let n = 6;
    let short = scene.route.slice(0..115).unwrap();
    let indices = retained_indices(&short, n, None).unwrap();
    assert_eq!(indices.len(), 20);
    let views = labeled_views(&short, &indices, &cfg, NEGATIVE_ANGLE).unwrap();
    let model = fit(&views);
    let test = make_test_set(&short, &indices, &cfg, NEGATIVE_ANGLE).unwrap();
    let accuracy = classify_report(&model, &test).unwrap().accuracy;

    let store = SnapshotStore::from_indices(&short, &indices, cfg).unwrap();
    let chosen: BTreeSet<usize> = indices
        .iter()
        .map(|&i| {
            let p = short.waypoints[i];
            (0..scene.grid.cells.len())
                .min_by(|&a, &b| {
                    scene.grid.cells[a]
                        .pose
                        .distance(&p)
                        .total_cmp(&scene.grid.cells[b].pose.distance(&p))
                })
                .unwrap()
        })
        .collect();
    let cells: Vec<&GridCell> = chosen.iter().map(|&i| &scene.grid.cells[i]).collect();
    let mlp = evaluate_headings(&model, &cfg, &store, &cells, ScanArc::FULL)
        .unwrap()
        .median_error;
    let pm = evaluate_cells(&store, &cells).unwrap().median_error;
    let secs = t.elapsed().as_secs_f64();
    check(
        accuracy >= 0.9 && mlp < 3.0 * pm.max(f64::MIN_POSITIVE) && secs < 120.0,
        format!(
            "held-out accuracy {accuracy:.3} (>= 0.9), median {mlp:.1}° vs perfect memory {pm:.1}° on {} cells (< 3x), {secs:.1} s",
            cells.len()
        ),
    )
}

fn whole_route_views(scene: &Scene, cfg: &PreprocessConfig) -> Vec<LabeledView> {
    make_training_set(&scene.route, 2, cfg, NEGATIVE_ANGLE, None).unwrap()
}

fn restricted_arcs(scene: &Scene) -> Outcome {
    let cfg = PreprocessConfig::new(1.0, 6);
    let model = fit(&whole_route_views(scene, &cfg));
    let store = build_store(&scene.route, 2, cfg).unwrap();
    let cells = scene.cells();
    let median = |arc| {
        evaluate_headings(&model, &cfg, &store, &cells, arc)
            .unwrap()
            .median_error
    };
    let full = median(ScanArc::FULL);
    let half = median(forward_arc(&scene.route, 180.0));
    let quarter = median(forward_arc(&scene.route, 90.0));
    check(
        half <= full && quarter <= half,
        format!(
            "median 360° {full:.1}°, 180° {half:.1}°, 90° {quarter:.1}° over {} cells",
            cells.len()
        ),
    )
}

fn corner_effect(l: &Scene) -> Outcome {
    let route = &l.route;
    let turns = route.turn_angles();
    let threshold = 15.0;
    let bend = |i: usize| turns[i] > threshold || turns[i + 1] > threshold;
    let mut rate_ok = true;
    let mut rate_detail = String::new();
    for (name, cfg) in [
        ("raw", PreprocessConfig::identity()),
        ("preprocessed", PreprocessConfig::new(1.0, 6)),
    ] {
        let rms = corner_rate_of_change(route, 0..route.len(), &cfg).unwrap();
        let straight: Vec<f64> = (0..rms.len())
            .filter(|&i| !bend(i))
            .map(|i| rms[i])
            .collect();
        let bends: Vec<f64> = (0..rms.len())
            .filter(|&i| bend(i))
            .map(|i| rms[i])
            .collect();
        let base = lower_median(&straight);
        let lowest = bends.iter().copied().fold(f64::INFINITY, f64::min);
        rate_ok &= !bends.is_empty() && lowest > base;
        rate_detail += &format!(
            "{name}: {} bend pairs, min {lowest:.4} vs straight median {base:.4}; ",
            bends.len()
        );
    }

    let cfg = PreprocessConfig::new(1.0, 6);
    let n = 6;
    let zone = corner_zone(route, threshold, n);
    let reference = build_store(route, 1, cfg).unwrap();
    let corner_cells: Vec<&GridCell> = l
        .cells()
        .into_iter()
        .filter(|c| zone[reference.snapshots()[nearest_snapshot(&reference, &c.pose)].index])
        .collect();
    let median = |boost| {
        let views = make_training_set(route, n, &cfg, NEGATIVE_ANGLE, boost).unwrap();
        let model = fit(&views);
        evaluate_headings(&model, &cfg, &reference, &corner_cells, ScanArc::FULL)
            .unwrap()
            .median_error
    };
    let plain = median(None);
    let boosted = median(Some(CornerBoost {
        threshold_deg: threshold,
        frequency: 3,
    }));
    check(
        rate_ok && boosted <= plain,
        format!(
            "{rate_detail}corner-zone median boosted {boosted:.1}° vs plain {plain:.1}° over {} cells",
            corner_cells.len()
        ),
    )
}

fn training_time(scene: &Scene) -> Outcome {
    let cfg = PreprocessConfig::new(1.0, 6);
    let store = build_store(&scene.route, 2, cfg).unwrap();
    let cells = scene.cells();
    let views = whole_route_views(scene, &cfg);
    let median = |epochs| {
        let config = MlpConfig {
            learning_rate: 1e-4,
            max_iter: epochs,
            ..mlp_config()
        };
        let model = train(&views, &config).unwrap();
        evaluate_headings(&model, &cfg, &store, &cells, ScanArc::FULL)
            .unwrap()
            .median_error
    };
    let short = median(600);
    let long = median(3000);
    check(
        long <= short,
        format!("median after 600 epochs {short:.1}°, after 3000 epochs {long:.1}°"),
    )
}

const TINY_WORLD: &str = "[world]\nseed = 5\npanorama_width = 72\npanorama_height = 12\n\
    [route]\npolyline = 3000,6000; 4200,6000; 4200,7200\nspacing_mm = 100\n\
    [grid]\nradius_mm = 150\npitch_mm = 150\n[preprocess]\nfactor = 2\n";

fn csv_bytes(files: &[PathBuf]) -> Vec<(String, Vec<u8>)> {
    files
        .iter()
        .filter(|f| f.extension().is_some_and(|e| e == "csv"))
        .map(|f| {
            (
                f.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(f).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, format!("{TINY_WORLD}{body}")).unwrap();
        p
    };
    let compass = write(
        "compass.ini",
        "[experiment]\nmethod = compass\n[compass]\nsnapshot = 5\n",
    );
    let pm = write(
        "pm.ini",
        "[experiment]\nmethod = perfectmem\n[perfectmem]\nfrequencies = 1, 20\nfactors = 2, 4\nsigmas = 0, 1\n",
    );
    let mlp = write(
        "mlp.ini",
        "[experiment]\nmethod = mlp\n[mlp]\nmax_iter = 20\nsearch_hidden = 4; 8\nsearch_activation = tanh\n\
         search_learning_rate = 0.01\nconfidence_snapshots = 0, 7\n",
    );
    let jobs = [
        (Subcommand::GenWorld, &compass),
        (Subcommand::CompassDemo, &compass),
        (Subcommand::PmEval, &pm),
        (Subcommand::PmFreq, &pm),
        (Subcommand::PmPrep, &pm),
        (Subcommand::MlpTrain, &mlp),
        (Subcommand::MlpGrid, &mlp),
        (Subcommand::MlpEval, &mlp),
        (Subcommand::MlpCorners, &mlp),
        (Subcommand::MlpConfidence, &mlp),
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, (cmd, config)) in jobs.iter().enumerate() {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = dir.path().join(format!("{i}{tag}"));
                csv_bytes(&run(*cmd, config, Some(&out), Some(17)).unwrap())
            })
            .collect();
        if runs[0].is_empty() || runs[0] != runs[1] {
            differing.push(format!("{cmd:?}"));
        }
        compared += runs[0].len();
    }
    check(
        differing.is_empty(),
        format!("10 subcommands, {compared} CSV files compared, differing: {differing:?}"),
    )
}

fn round_trips(scene: &Scene) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PreprocessConfig::new(1.0, 6);
    let views = make_training_set(&scene.route, 10, &cfg, NEGATIVE_ANGLE, None).unwrap();
    let model = train(
        &views,
        &MlpConfig {
            max_iter: 20,
            ..mlp_config()
        },
    )
    .unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    let model_ok = views.iter().all(|v| {
        model.predict(&v.features).unwrap().to_bits()
            == back.predict(&v.features).unwrap().to_bits()
    });

    let db = dir.path().join("db");
    save_db(&db, &scene.grid, &scene.route, Some(&WorldSpec::default())).unwrap();
    let (grid, route) = load_db(&db).unwrap();
    let same = |a: &Panorama, b: &Panorama| {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .all(|(x, y)| x.to_bits() == y.to_bits())
            && a.dims() == b.dims()
    };
    let db_ok = grid.cells.len() == scene.grid.cells.len()
        && route.len() == scene.route.len()
        && grid
            .cells
            .iter()
            .zip(&scene.grid.cells)
            .all(|(a, b)| a.pose == b.pose && same(&a.view, &b.view))
        && route
            .snapshots
            .iter()
            .zip(&scene.route.snapshots)
            .all(|(a, b)| same(a, b));
    check(
        model_ok && db_ok,
        format!(
            "model predictions bit-exact: {model_ok} ({} views); database images bit-exact: {db_ok} ({} cells, {} snapshots)",
            views.len(),
            grid.cells.len(),
            route.len()
        ),
    )
}

fn artifact_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn main() -> ExitCode {
    let t = Instant::now();
    let scene = Scene::new(&default_route_polyline());
    let l = Scene::new(&default_l_polyline());
    println!(
        "default world: {} route snapshots, {} grid cells; L route {} snapshots ({:.1} s to render)",
        scene.route.len(),
        scene.grid.cells.len(),
        l.route.len(),
        t.elapsed().as_secs_f64()
    );
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("rotational oracle", Box::new(rotational_oracle)),
        ("gradient check", Box::new(gradient_oracle)),
        ("perfect-memory oracle", Box::new(|| memory_oracle(&scene))),
        ("frequency trend", Box::new(|| frequency_trend(&scene))),
        ("resolution trend", Box::new(|| resolution_trend(&scene))),
        ("small-route classifier", Box::new(|| small_route(&scene))),
        (
            "restricted-arc improvement",
            Box::new(|| restricted_arcs(&scene)),
        ),
        ("corner effect", Box::new(|| corner_effect(&l))),
        ("training-time tradeoff", Box::new(|| training_time(&scene))),
        ("determinism", Box::new(determinism)),
        ("round trips", Box::new(|| round_trips(&scene))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {:>2} {name}: {detail} [{:.1} s]",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
