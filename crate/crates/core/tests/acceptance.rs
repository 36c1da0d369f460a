//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fs;
use std::hash::{Hash, Hasher};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    check_propositions, explicit_equivalent, naive_supervisor, random_clustering, random_dmm,
    random_model, seeded, Explicit, InstanceShape,
};
use mldes::clustering::{cluster, load_clustering, ClusterParams};
use mldes::compose::sync_compose;
use mldes::matrix::{build_dmm, dsm_from_dmm};
use mldes::model::{parse_model, ModelSet};
use mldes::refine::refine;
use mldes::report::{pipeline, ClusteringMode, PipelineConfig};
use mldes::synthesis::{
    check_controllability, check_nonblocking, check_safety, global_equivalence, synthesize,
    synthesize_tree, TreeSynthesisResult, DEFAULT_STATE_BUDGET,
};
use mldes::transform::transform_c_to_t;
use rand::Rng;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn modes() -> [(&'static str, ClusterParams); 3] {
    [
        ("no-bus", ClusterParams { gamma: None, ..ClusterParams::default() }),
        ("global-bus", ClusterParams::default()),
        ("local-bus", ClusterParams { local_bus: true, ..ClusterParams::default() }),
    ]
}

fn tree_result(model: &ModelSet, params: &ClusterParams) -> (TreeSynthesisResult, bool) {
    let ps = refine(&model.plants);
    let dmm = build_dmm(&ps, model);
    let c = cluster(&dsm_from_dmm(&dmm), params, model.requirements.len()).unwrap();
    let names: Vec<String> = model.requirements.iter().map(|r| r.name.clone()).collect();
    let tree = transform_c_to_t(&c, &dmm, ps.names(), &names).unwrap();
    let has_bus = tree.nodes().iter().any(|n| n.is_bus);
    (synthesize_tree(&tree, model, &ps, 1, DEFAULT_STATE_BUDGET).unwrap(), has_bus)
}

/// Draws instances until `count` have 2–6 refined components.
fn instances(seed: u64, count: usize, shape: &InstanceShape) -> Vec<ModelSet> {
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let m = random_model(&mut rng, shape);
        if (2..=6).contains(&refine(&m.plants).len()) {
            out.push(m);
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let shape = InstanceShape {
        plants: 2..=7,
        share: 0.2,
        plant_marking: 1.0,
        ..InstanceShape::default()
    };
    let models = instances(101, 200, &shape);
    let (mut checked, mut with_bus) = (0, 0);
    for (i, m) in models.iter().enumerate() {
        for (mode, params) in modes() {
            let (result, has_bus) = tree_result(m, &params);
            let eq = global_equivalence(&result, m, DEFAULT_STATE_BUDGET).unwrap();
            if !eq.equivalent {
                return Err(format!("instance {i} differs from monolithic under {mode}"));
            }
            checked += 1;
            with_bus += usize::from(has_bus);
        }
    }
    // Extra coverage: random clusterings with bus children anywhere.
    let mut rng = seeded(103);
    let mut extra = 0;
    for (i, m) in models.iter().enumerate() {
        let ps = refine(&m.plants);
        let dmm = build_dmm(&ps, m);
        let c = random_clustering(&mut rng, ps.len(), m.requirements.len());
        let names: Vec<String> = m.requirements.iter().map(|r| r.name.clone()).collect();
        let tree = transform_c_to_t(&c, &dmm, ps.names(), &names).unwrap();
        let result = synthesize_tree(&tree, m, &ps, 1, DEFAULT_STATE_BUDGET).unwrap();
        if !global_equivalence(&result, m, DEFAULT_STATE_BUDGET).unwrap().equivalent {
            return Err(format!("instance {i} differs from monolithic under a random clustering"));
        }
        extra += usize::from(tree.nodes().iter().any(|n| n.is_bus));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!(
        "{} instances x 3 modes = {checked} trees equivalent ({with_bus} with bus nodes), \
         plus {} random clusterings ({extra} with bus nodes), {elapsed:.1?}",
        models.len(),
        models.len()
    ))
}

/// Not a criterion: the same generator with randomly marked plant states.
fn unmarked_plants_note() -> String {
    let shape = InstanceShape {
        plants: 2..=7,
        share: 0.2,
        ..InstanceShape::default()
    };
    let models = instances(102, 200, &shape);
    let mut differ = 0;
    for m in &models {
        for (_, params) in modes() {
            let (result, _) = tree_result(m, &params);
            differ += usize::from(!global_equivalence(&result, m, DEFAULT_STATE_BUDGET).unwrap().equivalent);
        }
    }
    format!("{differ}/{} trees differ from monolithic when plant states may be unmarked", models.len() * 3)
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(201);
    for i in 0..1000 {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(0..=10);
        let density = rng.random_range(0.05..0.7);
        let pr = random_dmm(&mut rng, n, m, density);
        let c = random_clustering(&mut rng, n, m);
        check_propositions(&c, &pr).map_err(|e| format!("pair {i}: {e}"))?;
    }
    Ok("1000 random (clustering, DMM) pairs, 0 violations".into())
}

fn criterion_3() -> Outcome {
    let mut rng = seeded(301);
    let shape = InstanceShape {
        plants: 1..=5,
        states: 2..=4,
        requirements: 0..=4,
        share: 0.3,
        non_prefix_closed: true,
        plant_marking: 0.6,
    };
    let mut nonempty = 0;
    let mut count = 0;
    while count < 500 {
        let model = random_model(&mut rng, &shape);
        let sizes: usize = model.plants.iter().map(|p| p.state_count()).product();
        if sizes > 400 {
            continue;
        }
        count += 1;
        let plants: Vec<usize> = (0..model.plants.len()).collect();
        let reqs: Vec<usize> = (0..model.requirements.len()).collect();
        let sup = synthesize(&model, &plants, &reqs, DEFAULT_STATE_BUDGET).unwrap();
        let oracle = naive_supervisor(&model, &plants, &reqs);
        match (&sup.automaton, &oracle) {
            (None, None) => {}
            (Some(a), Some(o)) => {
                nonempty += 1;
                if !explicit_equivalent(&Explicit::from_automaton(a), o) {
                    return Err(format!("instance {count}: language differs from oracle"));
                }
                let plant = sync_compose(&model.plants);
                if !check_controllability(&plant, a, &model.events)
                    || !check_nonblocking(a)
                    || !check_safety(a, &model, &plants, &reqs)
                {
                    return Err(format!("instance {count}: supervisor fails a check"));
                }
            }
            _ => return Err(format!("instance {count}: emptiness differs from oracle")),
        }
    }
    Ok(format!("{count} instances equal to the naive oracle ({nonempty} nonempty), all checks pass"))
}

fn fixture_result(clustering: &str) -> TreeSynthesisResult {
    let model = parse_model(&fs::read_to_string(fixture("production_cell.des")).unwrap()).unwrap();
    let ps = refine(&model.plants);
    let text = fs::read_to_string(fixture(clustering)).unwrap();
    let c = load_clustering(&text, &model, &ps).unwrap();
    let names: Vec<String> = model.requirements.iter().map(|r| r.name.clone()).collect();
    let tree = transform_c_to_t(&c, &build_dmm(&ps, &model), ps.names(), &names).unwrap();
    synthesize_tree(&tree, &model, &ps, 1, DEFAULT_STATE_BUDGET).unwrap()
}

fn criterion_4() -> Outcome {
    let none = fixture_result("no_bus.clu");
    let global = fixture_result("global_bus.clu");
    let local = fixture_result("local_bus.clu");
    let detail = format!(
        "total css no-bus {} / global-bus {} / local-bus {}; max node css {} / {} / {}",
        none.total_css,
        global.total_css,
        local.total_css,
        none.max_css(),
        global.max_css(),
        local.max_css()
    );
    let ok = local.total_css < none.total_css
        && local.total_css < global.total_css
        && local.max_css() < none.max_css()
        && local.max_css() < global.max_css();
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = seeded(601);
    for i in 0..100 {
        let rows = rng.random_range(1..=30);
        let cols = rng.random_range(0..=60);
        let density = rng.random_range(0.0..1.0);
        let pr = random_dmm(&mut rng, rows, cols, density);
        let p = dsm_from_dmm(&pr);
        for a in 0..rows {
            for b in 0..rows {
                let mut sum = 0u32;
                for k in 0..cols {
                    sum += u32::from(pr.get(a, k)) * u32::from(pr.get(b, k));
                }
                if p.get(a, b) != sum {
                    return Err(format!("matrix {i} differs at ({a}, {b})"));
                }
            }
        }
    }
    Ok("100 random DMMs up to 30x60 equal the triple-loop product".into())
}

fn artifact_hashes(dir: &Path) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let mut h = DefaultHasher::new();
        fs::read(&path).unwrap().hash(&mut h);
        out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), h.finish());
    }
    out
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

/// Runs the pipeline twice into separate directories and compares hashes.
fn deterministic(cfg: &PipelineConfig, tag: &str) -> Result<usize, String> {
    let mut runs = Vec::new();
    for k in 0..2 {
        let mut c = cfg.clone();
        c.out_dir = scratch(&format!("{tag}_{k}"));
        pipeline(&c).map_err(|e| format!("{tag}: {e}"))?;
        runs.push(artifact_hashes(&c.out_dir));
    }
    if runs[0] != runs[1] {
        return Err(format!("{tag}: artifacts differ between runs"));
    }
    Ok(runs[0].len())
}

fn criterion_7() -> Outcome {
    let mut files = 0;
    for (mode, params) in modes() {
        let mut cfg = PipelineConfig::new(fixture("production_cell.des"), "");
        cfg.params = params;
        cfg.jobs = 4;
        files += deterministic(&cfg, mode)?;
    }
    let mut cfg = PipelineConfig::new(fixture("production_cell.des"), "");
    cfg.clustering = ClusteringMode::Manual(fixture("local_bus.clu"));
    cfg.jobs = 4;
    files += deterministic(&cfg, "manual")?;
    Ok(format!("4 configurations run twice, {files} artifacts byte-identical"))
}

fn criterion_8() -> Outcome {
    let dir = scratch("degenerate_models");
    fs::create_dir_all(&dir).unwrap();
    let cases = [
        (
            "single_plant",
            "events\n  a controllable\n  b uncontrollable\nend\nplant P\n  location X initial marked\n    edge a goto Y\n  location Y\n    edge b goto X\nend\nrequirement K\n  invariant a needs P.X\nend\n",
        ),
        (
            "no_requirements",
            "events\n  a controllable\n  b controllable\nend\nplant P\n  location X initial marked\n    edge a goto X\nend\nplant Q\n  location Y initial marked\n    edge b goto Y\nend\n",
        ),
        (
            "fully_connected",
            "events\n  a controllable\n  b controllable\n  c controllable\n  d controllable\nend\n\
             plant P\n  location X initial marked\n    edge a goto X\nend\n\
             plant Q\n  location X initial marked\n    edge b goto X\nend\n\
             plant R\n  location X initial marked\n    edge c goto X\nend\n\
             plant S\n  location X initial marked\n    edge d goto X\nend\n\
             requirement K1\n  invariant a needs Q.X and R.X and S.X\nend\n\
             requirement K2\n  invariant b needs P.X and R.X and S.X\nend\n",
        ),
    ];
    let mut notes = Vec::new();
    for (name, text) in cases {
        let path = dir.join(format!("{name}.des"));
        fs::write(&path, text).unwrap();
        let model = parse_model(text).unwrap();
        let ps = refine(&model.plants);
        let dmm = build_dmm(&ps, &model);
        let dsm = dsm_from_dmm(&dmm);
        if name == "fully_connected" && (0..dsm.len()).any(|i| (0..dsm.len()).any(|j| dsm.get(i, j) == 0)) {
            return Err("fully connected case has a zero DSM entry".into());
        }
        for (mode, params) in modes() {
            let c = cluster(&dsm, &params, model.requirements.len()).map_err(|e| format!("{name}: {e}"))?;
            check_propositions(&c, &dmm).map_err(|e| format!("{name}/{mode}: {e}"))?;
            let mut cfg = PipelineConfig::new(&path, "");
            cfg.params = params;
            deterministic(&cfg, &format!("{name}_{mode}"))?;
        }
        notes.push(name);
    }
    Ok(format!("{} complete in all modes, propositions hold, runs identical", notes.join(", ")))
}

fn run(name: &str, f: fn() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {name}: PASS  {detail}");
            true
        }
        Err(reason) => {
            println!("criterion {name}: FAIL  {reason}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("1 oracle equivalence (prefix-closed)", criterion_1);
    println!("  note: {}", unmarked_plants_note());
    ok &= run("2 transform propositions", criterion_2);
    ok &= run("3 synthesis vs naive oracle", criterion_3);
    ok &= run("4 production cell css direction", criterion_4);
    println!("criterion 5 large-scale literature values: NOT TESTED  documented in README only");
    ok &= run("6 DSM matrix product", criterion_6);
    ok &= run("7 deterministic artifacts", criterion_7);
    ok &= run("8 degenerate inputs", criterion_8);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
