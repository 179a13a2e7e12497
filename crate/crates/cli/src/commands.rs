use std::path::{Path, PathBuf};

use antnav_core::compass::{error_vs_distance, scan, ScanArc};
use antnav_core::imgcore::{preprocess, PreprocessConfig};
use antnav_core::mlpnav::{
    classify_report, corner_rate_of_change, corner_zone, evaluate_headings, forward_arc,
    grid_search, held_out_indices, labeled_views, load_model, make_training_set, model_to_bytes,
    retained_indices, scan_confidence, train, MlpModel,
};
use antnav_core::perfectmem::{
    build_store, cells_in_range, evaluate, frequency_sweep, nearest_snapshot, preprocess_sweep,
    RouteErrorStats, SnapshotStore,
};
use antnav_core::stats::{lower_median, spearman};
use antnav_core::world::{
    load_db, load_world_spec, make_grid_in, make_route_in, normalize_heading, save_db, GridCell,
    Route, World, WorldGrid, WorldSpec,
};

use crate::config::{ArcSpec, ExperimentConfig, Method, MlpBlock, WorldSource};
use crate::output::{deg, mm, num, Output};
use crate::svg::{self, Chart, HeadingArrow, WhiskerBox};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    GenWorld,
    CompassDemo,
    PmEval,
    PmFreq,
    PmPrep,
    MlpTrain,
    MlpGrid,
    MlpEval,
    MlpCorners,
    MlpConfidence,
}

impl Subcommand {
    fn method(self) -> Option<Method> {
        match self {
            Subcommand::GenWorld => None,
            Subcommand::CompassDemo => Some(Method::Compass),
            Subcommand::PmEval | Subcommand::PmFreq | Subcommand::PmPrep => {
                Some(Method::PerfectMemory)
            }
            _ => Some(Method::Mlp),
        }
    }
}

const DEFAULT_OUT: &str = "antnav-out";

/// Runs one experiment; returns the files written.
pub fn run(
    cmd: Subcommand,
    config: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s)?;
    }
    if let (Some(want), Some(got)) = (cmd.method(), cfg.method) {
        if want != got {
            return Err(CliError::Config(format!(
                "subcommand needs method {want:?} but the config selects {got:?}"
            )));
        }
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut output = Output::create(&dir)?;
    let scene = Scene::load(&cfg)?;
    match cmd {
        Subcommand::GenWorld => gen_world(&cfg, &scene, &mut output)?,
        Subcommand::CompassDemo => compass_demo(&cfg, &scene, &mut output)?,
        Subcommand::PmEval => pm_eval(&cfg, &scene, &mut output)?,
        Subcommand::PmFreq => pm_freq(&cfg, &scene, &mut output)?,
        Subcommand::PmPrep => pm_prep(&cfg, &scene, &mut output)?,
        Subcommand::MlpTrain => mlp_train(&cfg, &scene, &mut output)?,
        Subcommand::MlpGrid => mlp_grid(&cfg, &scene, &mut output)?,
        Subcommand::MlpEval => mlp_eval(&cfg, &scene, &mut output)?,
        Subcommand::MlpCorners => mlp_corners(&cfg, &scene, &mut output)?,
        Subcommand::MlpConfidence => mlp_confidence(&cfg, &scene, &mut output)?,
    }
    Ok(output.into_written())
}

struct Scene {
    spec: Option<WorldSpec>,
    objects: Vec<(f64, f64, f64)>,
    route: Route,
    grid: WorldGrid,
}

impl Scene {
    fn load(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        match &cfg.world {
            WorldSource::Spec(spec) => {
                let world = World::new(spec)?;
                let route = make_route_in(&world, &cfg.polyline, cfg.spacing)?;
                let grid = make_grid_in(&world, &route, cfg.grid_radius, cfg.grid_pitch)?;
                Ok(Self {
                    spec: Some(spec.clone()),
                    objects: world.objects(),
                    route,
                    grid,
                })
            }
            WorldSource::Database(dir) => {
                let (grid, route) = load_db(dir).map_err(as_data)?;
                let spec = load_world_spec(dir).map_err(as_data)?;
                let objects = match &spec {
                    Some(s) => World::new(s)?.objects(),
                    None => Vec::new(),
                };
                Ok(Self {
                    spec,
                    objects,
                    route,
                    grid,
                })
            }
        }
    }
}

fn as_data(e: antnav_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn arrows(stats: &RouteErrorStats) -> Vec<HeadingArrow> {
    stats
        .per_cell
        .iter()
        .map(|c| HeadingArrow {
            x: c.pose.x,
            y: c.pose.y,
            reference_deg: c.reference_heading,
            recovered_deg: c.recovered_heading,
            weight: c.weight,
        })
        .collect()
}

fn heading_svg(
    out: &mut Output,
    name: &str,
    title: &str,
    route: &Route,
    arrows: &[HeadingArrow],
    pitch: f64,
) -> Result<(), CliError> {
    let doc = svg::heading_map(title, &route.positions(), arrows, pitch)
        .ok_or_else(|| CliError::Method("no recovered headings to draw".into()))?;
    out.write(name, doc.as_bytes())?;
    Ok(())
}

fn gen_world(_cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let db = out.dir().join("db");
    save_db(&db, &scene.grid, &scene.route, scene.spec.as_ref()).map_err(as_data)?;
    out.record(db);
    let rows: Vec<Vec<String>> = scene
        .route
        .waypoints
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), mm(p.x), mm(p.y), deg(p.heading())])
        .collect();
    out.write_csv(
        "world_route.csv",
        &["index", "x_mm", "y_mm", "heading_deg"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = scene
        .grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i.to_string(), mm(c.pose.x), mm(c.pose.y)])
        .collect();
    out.write_csv("world_grid.csv", &["index", "x_mm", "y_mm"], &rows)?;
    let extent = scene.spec.as_ref().map_or(10_000.0, |s| s.extent);
    let cells: Vec<(f64, f64)> = scene
        .grid
        .cells
        .iter()
        .map(|c| (c.pose.x, c.pose.y))
        .collect();
    out.write(
        "world.svg",
        svg::world_map(extent, &scene.objects, &scene.route.positions(), &cells).as_bytes(),
    )?;
    Ok(())
}

fn preprocess_grid(grid: &WorldGrid, pre: &PreprocessConfig) -> Result<WorldGrid, CliError> {
    let cells = grid
        .cells
        .iter()
        .map(|c| {
            Ok(GridCell {
                pose: c.pose,
                view: preprocess(&c.view, pre)?,
            })
        })
        .collect::<Result<Vec<_>, antnav_core::Error>>()?;
    Ok(WorldGrid {
        cells,
        pitch: grid.pitch,
    })
}

fn compass_demo(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let idx = cfg.compass.snapshot;
    if idx >= scene.route.len() {
        return Err(CliError::Config(format!(
            "compass snapshot {idx} is beyond the route's {} snapshots",
            scene.route.len()
        )));
    }
    let goal_pose = scene.route.waypoints[idx];
    let goal = preprocess(&scene.route.snapshots[idx], &cfg.preprocess)?;
    let grid = preprocess_grid(&scene.grid, &cfg.preprocess)?;
    let results = error_vs_distance(&grid, (&goal_pose, &goal), cfg.compass.max_distance)?;

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                mm(r.pose.x),
                mm(r.pose.y),
                mm(r.distance),
                deg(goal_pose.heading()),
                deg(r.recovered_heading),
                deg(r.error),
                num(r.min_rms),
            ]
        })
        .collect();
    out.write_csv(
        "compass_cells.csv",
        &[
            "x_mm",
            "y_mm",
            "distance_mm",
            "reference_heading_deg",
            "recovered_heading_deg",
            "error_deg",
            "min_rms",
        ],
        &rows,
    )?;

    let distances: Vec<f64> = results.iter().map(|r| r.distance).collect();
    let errors: Vec<f64> = results.iter().map(|r| r.error).collect();
    let rho = spearman(&distances, &errors);
    out.write_csv(
        "compass_summary.csv",
        &[
            "snapshot",
            "cells",
            "median_error_deg",
            "spearman_distance_error",
        ],
        &[vec![
            idx.to_string(),
            results.len().to_string(),
            deg(lower_median(&errors)),
            num(rho),
        ]],
    )?;

    // full difference curve at the cell closest to the goal
    let nearest = grid
        .cells
        .iter()
        .min_by(|a, b| {
            a.pose
                .distance(&goal_pose)
                .total_cmp(&b.pose.distance(&goal_pose))
        })
        .expect("error_vs_distance rejects an empty grid");
    let rec = scan(&nearest.view, &goal, ScanArc::FULL)?;
    let curve: Vec<(f64, f64)> = rec
        .curve
        .angles()
        .zip(rec.curve.rms.iter().copied())
        .collect();
    let rows: Vec<Vec<String>> = curve.iter().map(|(a, r)| vec![deg(*a), num(*r)]).collect();
    out.write_csv("compass_idf.csv", &["rotation_deg", "rms"], &rows)?;

    out.write(
        "compass_idf.svg",
        Chart {
            title: "rotational image difference",
            x_label: "rotation (deg)",
            y_label: "rms",
            series: vec![("idf", curve)],
            points_only: false,
        }
        .render()
        .as_bytes(),
    )?;
    out.write(
        "compass_error_distance.svg",
        Chart {
            title: "heading error vs distance",
            x_label: "distance (mm)",
            y_label: "error (deg)",
            series: vec![(
                "cells",
                distances
                    .iter()
                    .copied()
                    .zip(errors.iter().copied())
                    .collect(),
            )],
            points_only: true,
        }
        .render()
        .as_bytes(),
    )?;
    let arrows: Vec<HeadingArrow> = results
        .iter()
        .map(|r| HeadingArrow {
            x: r.pose.x,
            y: r.pose.y,
            reference_deg: goal_pose.heading(),
            recovered_deg: r.recovered_heading,
            weight: r.min_rms,
        })
        .collect();
    heading_svg(
        out,
        "compass_headings.svg",
        "visual compass headings",
        &scene.route,
        &arrows,
        scene.grid.pitch,
    )
}

fn stats_rows(stats: &RouteErrorStats) -> Vec<Vec<String>> {
    stats
        .per_cell
        .iter()
        .map(|c| {
            vec![
                mm(c.pose.x),
                mm(c.pose.y),
                c.matched_index.to_string(),
                c.reference_index.to_string(),
                deg(c.reference_heading),
                deg(c.recovered_heading),
                deg(c.error),
                num(c.weight),
            ]
        })
        .collect()
}

const CELL_HEADER: [&str; 8] = [
    "x_mm",
    "y_mm",
    "matched_index",
    "reference_index",
    "reference_heading_deg",
    "recovered_heading_deg",
    "error_deg",
    "weight",
];

fn pm_eval(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let n = cfg.perfectmem.frequency;
    let store = build_store(&scene.route, n, cfg.preprocess)?;
    let stats = evaluate(&store, &scene.grid, cfg.grid_radius)?;
    out.write_csv("pm_cells.csv", &CELL_HEADER, &stats_rows(&stats))?;
    out.write_csv(
        "pm_summary.csv",
        &[
            "frequency",
            "stored",
            "n",
            "mean_error_deg",
            "median_error_deg",
        ],
        &[vec![
            n.to_string(),
            store.len().to_string(),
            stats.n.to_string(),
            deg(stats.mean_error),
            deg(stats.median_error),
        ]],
    )?;
    heading_svg(
        out,
        "pm_headings.svg",
        "perfect memory headings",
        &scene.route,
        &arrows(&stats),
        scene.grid.pitch,
    )
}

fn pm_freq(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let mut freqs = cfg.perfectmem.frequencies.clone();
    freqs.sort_unstable();
    freqs.dedup();
    let rows = frequency_sweep(
        &scene.route,
        &scene.grid,
        cfg.preprocess,
        &freqs,
        cfg.grid_radius,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.frequency.to_string(),
                scene.route.len().div_ceil(r.frequency).to_string(),
                r.stats.n.to_string(),
                deg(r.stats.mean_error),
                deg(r.stats.median_error),
                deg(r.summary.min),
                deg(r.summary.q1),
                deg(r.summary.q3),
                deg(r.summary.max),
                r.summary.outliers.len().to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "pm_frequency.csv",
        &[
            "frequency",
            "stored",
            "n",
            "mean_error_deg",
            "median_error_deg",
            "whisker_low_deg",
            "q1_deg",
            "q3_deg",
            "whisker_high_deg",
            "outliers",
        ],
        &table,
    )?;
    let boxes: Vec<WhiskerBox> = rows
        .iter()
        .map(|r| WhiskerBox {
            label: format!("1/{}", r.frequency),
            min: r.summary.min,
            q1: r.summary.q1,
            median: r.summary.median,
            q3: r.summary.q3,
            max: r.summary.max,
            outliers: r.summary.outliers.clone(),
        })
        .collect();
    out.write(
        "pm_frequency.svg",
        svg::whisker_plot(
            "heading error by training frequency",
            "snapshots kept",
            "error (deg)",
            &boxes,
        )
        .as_bytes(),
    )?;
    Ok(())
}

fn pm_prep(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let mut factors = cfg.perfectmem.factors.clone();
    factors.sort_unstable();
    factors.dedup();
    let mut sigmas = cfg.perfectmem.sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let rows = preprocess_sweep(
        &scene.route,
        &scene.grid,
        &factors,
        &sigmas,
        cfg.perfectmem.frequency,
        cfg.grid_radius,
    )?;
    let dims = scene.route.snapshots[0].dims();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (w, h) = PreprocessConfig::new(r.sigma, r.factor).output_dims(dims);
            vec![
                r.factor.to_string(),
                format!("{}", r.sigma),
                w.to_string(),
                h.to_string(),
                r.n.to_string(),
                deg(r.mean_error),
                deg(r.median_error),
            ]
        })
        .collect();
    out.write_csv(
        "pm_preprocess.csv",
        &[
            "factor",
            "sigma",
            "width",
            "height",
            "n",
            "mean_error_deg",
            "median_error_deg",
        ],
        &table,
    )?;
    let names: Vec<String> = sigmas.iter().map(|s| format!("sigma {s}")).collect();
    let series = sigmas
        .iter()
        .zip(&names)
        .map(|(s, name)| {
            let pts = rows
                .iter()
                .filter(|r| r.sigma == *s)
                .map(|r| (r.factor as f64, r.median_error))
                .collect();
            (name.as_str(), pts)
        })
        .collect();
    out.write(
        "pm_preprocess.svg",
        Chart {
            title: "median error by resize factor",
            x_label: "resize factor",
            y_label: "median error (deg)",
            series,
            points_only: false,
        }
        .render()
        .as_bytes(),
    )?;
    Ok(())
}

/// Training route (possibly truncated) and the retained indices on it.
fn training_plan(block: &MlpBlock, route: &Route) -> Result<(Route, Vec<usize>), CliError> {
    let mut indices = retained_indices(route, block.frequency, None)?;
    let mut route = route.clone();
    if let Some(limit) = block.snapshot_limit {
        if limit == 0 {
            return Err(CliError::Config("snapshot_limit must be >= 1".into()));
        }
        indices.truncate(limit);
        let end = (indices[indices.len() - 1] + 1).min(route.len());
        // keep the snapshots up to the next retained one for held-out views
        let end = (end + block.frequency - 1).min(route.len()).max(2);
        route = route.slice(0..end)?;
    }
    Ok((route, indices))
}

fn trained_model(
    cfg: &ExperimentConfig,
    route: &Route,
    indices: &[usize],
) -> Result<MlpModel, CliError> {
    let block = &cfg.mlp;
    if let Some(path) = &block.model {
        return load_model(path).map_err(as_data);
    }
    let views = labeled_views(route, indices, &cfg.preprocess, block.negative_angle)?;
    Ok(train(&views, &block.config)?)
}

fn mlp_train(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let block = &cfg.mlp;
    let (route, indices) = training_plan(block, &scene.route)?;
    let views = labeled_views(&route, &indices, &cfg.preprocess, block.negative_angle)?;
    let model = train(&views, &block.config)?;
    out.write("model.bin", &model_to_bytes(&model))?;
    let rows: Vec<Vec<String>> = model
        .loss_history
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), num(*l)])
        .collect();
    out.write_csv("mlp_loss.csv", &["epoch", "loss"], &rows)?;

    let test = labeled_views(
        &route,
        &held_out_indices(&indices)?,
        &cfg.preprocess,
        block.negative_angle,
    )?;
    let report = classify_report(&model, &test)?;
    let mut rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .enumerate()
        .map(|(label, c)| {
            vec![
                label.to_string(),
                num(c.precision),
                num(c.recall),
                num(c.f1),
                c.support.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "accuracy".into(),
        String::new(),
        String::new(),
        num(report.accuracy),
        report.support_total().to_string(),
    ]);
    out.write_csv(
        "mlp_report.csv",
        &["class", "precision", "recall", "f1", "support"],
        &rows,
    )?;
    let pts = model
        .loss_history
        .iter()
        .enumerate()
        .map(|(i, l)| ((i + 1) as f64, *l))
        .collect();
    out.write(
        "mlp_loss.svg",
        Chart {
            title: "training loss",
            x_label: "epoch",
            y_label: "mean cross-entropy",
            series: vec![("loss", pts)],
            points_only: false,
        }
        .render()
        .as_bytes(),
    )?;
    Ok(())
}

fn hidden_label(h: &[usize]) -> String {
    match h {
        [one] => one.to_string(),
        _ => format!(
            "({})",
            h.iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn mlp_grid(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let block = &cfg.mlp;
    let (route, indices) = training_plan(block, &scene.route)?;
    let views = labeled_views(&route, &indices, &cfg.preprocess, block.negative_angle)?;
    let ranked = grid_search(&views, &block.space, block.folds)?;
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(rank, r)| {
            vec![
                num(r.mean_test_score),
                num(r.mean_train_score),
                hidden_label(&r.config.hidden_layers),
                r.config.activation.name().to_string(),
                r.config.solver.name().to_string(),
                format!("{}", r.config.tol),
                format!("{}", r.config.learning_rate),
                (rank + 1).to_string(),
                r.config_index.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "mlp_grid.csv",
        &[
            "mean_test_score",
            "mean_train_score",
            "param_hidden_layer_sizes",
            "param_activation",
            "param_solver",
            "param_tol",
            "param_learning_rate_init",
            "rank_test_score",
            "config_index",
        ],
        &rows,
    )?;
    let bars: Vec<(String, f64)> = ranked
        .iter()
        .map(|r| {
            let c = &r.config;
            (
                format!(
                    "{} {} {} lr={}",
                    hidden_label(&c.hidden_layers),
                    c.activation.name(),
                    c.solver.name(),
                    c.learning_rate
                ),
                r.mean_test_score,
            )
        })
        .collect();
    out.write(
        "mlp_grid.svg",
        svg::bar_chart(
            "cross-validated accuracy",
            "mean validation accuracy",
            &bars,
        )
        .as_bytes(),
    )?;
    Ok(())
}

fn arc_for(spec: ArcSpec, route: &Route) -> ScanArc {
    match spec {
        ArcSpec::Full => ScanArc::FULL,
        ArcSpec::Forward(len) => forward_arc(route, len),
    }
}

fn mlp_eval(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let block = &cfg.mlp;
    let (route, indices) = training_plan(block, &scene.route)?;
    let model = trained_model(cfg, &route, &indices)?;
    let reference = SnapshotStore::from_indices(&route, &indices, cfg.preprocess)?;
    let cells = cells_in_range(&reference, &scene.grid, cfg.grid_radius)?;
    let mut arcs = block.arcs.clone();
    arcs.sort_by(|a, b| b.len_deg().total_cmp(&a.len_deg()));
    arcs.dedup();
    let mut summary = Vec::new();
    let mut cell_rows = Vec::new();
    for spec in arcs {
        let arc = arc_for(spec, &route);
        let stats = evaluate_headings(&model, &cfg.preprocess, &reference, &cells, arc)?;
        summary.push(vec![
            deg(arc.len_deg),
            deg(arc.start_deg),
            stats.n.to_string(),
            deg(stats.mean_error),
            deg(stats.median_error),
        ]);
        for row in stats_rows(&stats) {
            let mut r = vec![deg(arc.len_deg)];
            r.extend(row);
            cell_rows.push(r);
        }
        heading_svg(
            out,
            &format!("mlp_headings_{:.0}.svg", arc.len_deg),
            &format!("classifier headings, {:.0} deg scan", arc.len_deg),
            &route,
            &arrows(&stats),
            scene.grid.pitch,
        )?;
    }
    out.write_csv(
        "mlp_eval.csv",
        &[
            "arc_deg",
            "arc_start_deg",
            "n",
            "mean_error_deg",
            "median_error_deg",
        ],
        &summary,
    )?;
    let mut header = vec!["arc_deg"];
    header.extend(CELL_HEADER);
    out.write_csv("mlp_cells.csv", &header, &cell_rows)?;
    Ok(())
}

fn mlp_corners(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let block = &cfg.mlp;
    let route = &scene.route;
    let rms = corner_rate_of_change(route, 0..route.len(), &cfg.preprocess)?;
    let turns = route.turn_angles();
    let bend = |i: usize| {
        turns[i] > block.corner.threshold_deg || turns[i + 1] > block.corner.threshold_deg
    };
    let rows: Vec<Vec<String>> = rms
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = route.waypoints[i];
            vec![
                i.to_string(),
                mm(p.x),
                mm(p.y),
                deg(turns[i + 1]),
                num(*r),
                (bend(i) as u8).to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "corner_rate.csv",
        &["index", "x_mm", "y_mm", "turn_deg", "rms_to_next", "bend"],
        &rows,
    )?;

    let zone = corner_zone(route, block.corner.threshold_deg, block.frequency);
    let reference = build_store(route, 1, cfg.preprocess)?;
    let corner_cells: Vec<&GridCell> = cells_in_range(&reference, &scene.grid, cfg.grid_radius)?
        .into_iter()
        .filter(|c| zone[reference.snapshots()[nearest_snapshot(&reference, &c.pose)].index])
        .collect();
    if corner_cells.is_empty() {
        return Err(CliError::Method(
            "no grid cell lies in a corner zone".into(),
        ));
    }
    let mut table = Vec::new();
    for (name, boost) in [("plain", None), ("boosted", Some(block.corner))] {
        let views = make_training_set(
            route,
            block.frequency,
            &cfg.preprocess,
            block.negative_angle,
            boost,
        )?;
        let model = train(&views, &block.config)?;
        let stats = evaluate_headings(
            &model,
            &cfg.preprocess,
            &reference,
            &corner_cells,
            ScanArc::FULL,
        )?;
        table.push(vec![
            name.to_string(),
            (views.len() / 2).to_string(),
            stats.n.to_string(),
            deg(stats.mean_error),
            deg(stats.median_error),
        ]);
    }
    out.write_csv(
        "corner_errors.csv",
        &[
            "training",
            "snapshots",
            "corner_cells",
            "mean_error_deg",
            "median_error_deg",
        ],
        &table,
    )?;
    let all: Vec<(f64, f64)> = rms
        .iter()
        .enumerate()
        .map(|(i, r)| (i as f64, *r))
        .collect();
    let bends: Vec<(f64, f64)> = all
        .iter()
        .copied()
        .filter(|(i, _)| bend(*i as usize))
        .collect();
    out.write(
        "corner_rate.svg",
        Chart {
            title: "difference between successive snapshots",
            x_label: "route index",
            y_label: "rms",
            series: vec![("all", all), ("bend", bends)],
            points_only: false,
        }
        .render()
        .as_bytes(),
    )?;
    Ok(())
}

fn mlp_confidence(cfg: &ExperimentConfig, scene: &Scene, out: &mut Output) -> Result<(), CliError> {
    let block = &cfg.mlp;
    let (route, indices) = training_plan(block, &scene.route)?;
    let model = trained_model(cfg, &route, &indices)?;
    let mut arcs = block.arcs.clone();
    arcs.sort_by(|a, b| b.len_deg().total_cmp(&a.len_deg()));
    arcs.dedup();
    let mut curve_rows = Vec::new();
    let mut summary = Vec::new();
    let mut names = Vec::new();
    let mut series_pts = Vec::new();
    for &idx in &block.confidence_snapshots {
        if idx >= scene.route.len() {
            return Err(CliError::Config(format!(
                "confidence snapshot {idx} is beyond the route"
            )));
        }
        let pose = scene.route.waypoints[idx];
        let view = &scene.route.snapshots[idx];
        for &spec in &arcs {
            let arc = arc_for(spec, &scene.route);
            let (curve, rotation) = scan_confidence(
                &model,
                view,
                &cfg.preprocess,
                arc.relative_to(pose.heading()),
            )?;
            let mut pts = Vec::new();
            for (i, s) in curve.scores.iter().enumerate() {
                let heading = normalize_heading(pose.heading() + curve.angle(i));
                curve_rows.push(vec![
                    idx.to_string(),
                    deg(arc.len_deg),
                    deg(heading),
                    num(*s),
                ]);
                pts.push((heading, *s));
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let recovered = normalize_heading(pose.heading() + rotation);
            summary.push(vec![
                idx.to_string(),
                deg(arc.len_deg),
                deg(pose.heading()),
                deg(recovered),
                deg(antnav_core::compass::heading_error(
                    pose.heading(),
                    recovered,
                )),
                num(curve.max()),
            ]);
            names.push(format!("snapshot {idx}, {:.0} deg", arc.len_deg));
            series_pts.push(pts);
        }
    }
    out.write_csv(
        "mlp_confidence.csv",
        &["snapshot", "arc_deg", "heading_deg", "confidence"],
        &curve_rows,
    )?;
    out.write_csv(
        "mlp_confidence_summary.csv",
        &[
            "snapshot",
            "arc_deg",
            "true_heading_deg",
            "recovered_heading_deg",
            "error_deg",
            "max_confidence",
        ],
        &summary,
    )?;
    let series = names.iter().map(String::as_str).zip(series_pts).collect();
    out.write(
        "mlp_confidence.svg",
        Chart {
            title: "familiarity while rotating",
            x_label: "heading (deg)",
            y_label: "confidence",
            series,
            points_only: false,
        }
        .render()
        .as_bytes(),
    )?;
    Ok(())
}
