use std::fs;
use std::path::Path;

use cstree::oracle::{oracle_cs_capped, oracle_cs_unrooted_capped, OracleError, HARD_MAX_EDGES};
use cstree::scheduling::{
    check_structural_lemmas, extract_three_partition, feasible_orders, schedule_to_strategy,
    simulate, strategy_to_schedule, tds_to_tree, three_partition_to_tds, Role, ScheduleError,
    TdsTree, ThreePartitionInstance,
};
use cstree::semantics::{verify, verify_weighted, SearchStrategy, VerificationReport};
use cstree::solver::{solve_rooted, solve_unrooted, SolverError, SolverOptions};
use cstree::transform::{
    lift_edge_weights, normalize, normalize_leaf_weights, subdivide_to_node_weighted,
    unrooted_hardness_gadget,
};
use cstree::{Weight, WeightedRootedTree};
use serde_json::{json, Value};

use crate::format::*;
use crate::{Cli, CliError, Command, Direction, GenKind, OutArg, Output, Stage};

fn read(path: &Path) -> Result<InstanceFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    InstanceFile::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_tree(path: &Path) -> Result<WeightedRootedTree, CliError> {
    read(path)?.into_tree()?.to_tree()
}

fn read_tds(path: &Path) -> Result<LoadedTds, CliError> {
    read(path)?.into_tds()?.load()
}

fn emit(out: &mut Output, dest: &OutArg, doc: Payload) -> Result<(), CliError> {
    let text = InstanceFile::new(doc).to_text();
    match &dest.output {
        Some(p) => fs::write(p, text)?,
        None => out.stdout.push_str(&text),
    }
    Ok(())
}

fn note(out: &mut Output, line: impl AsRef<str>) {
    out.stderr.push_str(line.as_ref());
    out.stderr.push('\n');
}

fn trace(out: &mut Output, cli: &Cli, report: &VerificationReport) {
    if cli.trace {
        for line in report.trace_lines() {
            note(out, line);
        }
    }
}

fn meta(pairs: &[(&str, Value)]) -> Meta {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn vertex_in(t: &WeightedRootedTree, v: usize, what: &str) -> Result<(), CliError> {
    if v >= t.vertex_count() {
        return Err(CliError::Input(format!(
            "{what}: vertex {v} is not in the tree"
        )));
    }
    Ok(())
}

fn solver_error(e: SolverError) -> CliError {
    CliError::Cap(e.to_string())
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::TooManyEdges { .. } => CliError::Cap(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

/// Re-verifies an emitted strategy; a failure is a bug, reported as exit 1.
fn self_check(
    out: &mut Output,
    cli: &Cli,
    t: &WeightedRootedTree,
    s: &SearchStrategy,
    k: Weight,
) -> bool {
    let report = verify_weighted(t, s, k);
    trace(out, cli, &report);
    if !report.ok {
        note(
            out,
            format!(
                "self-check failed: {}",
                report.failure.map(|f| f.to_string()).unwrap_or_default()
            ),
        );
        out.code = 1;
    }
    report.ok
}

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let mut out = Output::default();
    match &cli.command {
        Command::Solve {
            tree,
            unrooted,
            root,
            naive_k,
            max_degree,
            dedup,
            out: dest,
        } => {
            let mut t = read_tree(tree)?;
            if let Some(r) = *root {
                vertex_in(&t, r, "--root")?;
                t = t.rerooted(r).map_err(|e| CliError::Input(e.to_string()))?;
            }
            let opts = SolverOptions {
                naive_k: *naive_k,
                max_degree: *max_degree,
                dedup_siblings: *dedup,
                parallel: true,
            };
            let (k, s, mode) = if *unrooted {
                let sol = solve_unrooted(&t, &opts).map_err(solver_error)?;
                (sol.k, sol.strategy, "unrooted")
            } else {
                let sol = solve_rooted(&t, &opts).map_err(solver_error)?;
                (sol.k, sol.strategy, "rooted")
            };
            note(
                &mut out,
                format!("k={k} root={} moves={}", s.start, s.len()),
            );
            self_check(&mut out, cli, &t, &s, k);
            let m = meta(&[("command", json!("solve")), ("mode", json!(mode))]);
            emit(
                &mut out,
                dest,
                Payload::Strategy(StrategyDoc::from_strategy(&t, &s, Some(k), m)),
            )?;
        }
        Command::Oracle {
            tree,
            unrooted,
            root,
            max_edges,
            out: dest,
        } => {
            if *max_edges > HARD_MAX_EDGES {
                return Err(CliError::Input(format!(
                    "--max-edges is at most {HARD_MAX_EDGES}"
                )));
            }
            let t = read_tree(tree)?;
            let start = root.unwrap_or(t.root());
            vertex_in(&t, start, "--root")?;
            let (k, s) = if *unrooted {
                oracle_cs_unrooted_capped(&t, *max_edges)
            } else {
                oracle_cs_capped(&t, start, *max_edges)
            }
            .map_err(oracle_error)?;
            note(
                &mut out,
                format!("k={k} root={} moves={}", s.start, s.len()),
            );
            self_check(&mut out, cli, &t, &s, k);
            let m = meta(&[("command", json!("oracle"))]);
            emit(
                &mut out,
                dest,
                Payload::Strategy(StrategyDoc::from_strategy(&t, &s, Some(k), m)),
            )?;
        }
        Command::Verify { tree, strategy, k } => {
            let t = read_tree(tree)?;
            let doc = read(strategy)?.into_strategy()?;
            let s = doc.to_strategy(&t)?;
            let k = k.or(doc.k).ok_or_else(|| {
                CliError::Input("no budget: pass --k or set `k` in the strategy".into())
            })?;
            let report = verify_weighted(&t, &s, k);
            trace(&mut out, cli, &report);
            let failure = report.failure.as_ref().map(|f| f.to_string());
            note(
                &mut out,
                match &failure {
                    None => format!("valid: {} searchers, budget {k}", report.searchers_used),
                    Some(f) => format!("invalid: {f}"),
                },
            );
            out.code = if report.ok { 0 } else { 1 };
            let body = json!({
                "ok": report.ok,
                "k": k,
                "searchers_used": report.searchers_used,
                "final_guard_weight": report.final_guard_weight,
                "moves": report.per_move.len(),
                "failure": failure,
            });
            emit(&mut out, &OutArg { output: None }, Payload::Report(body))?;
        }
        Command::Gen {
            kind,
            input,
            k,
            out: dest,
        } => gen(&mut out, *kind, input, *k, dest)?,
        Command::Schedule {
            tds,
            order,
            brute,
            out: dest,
        } => schedule(&mut out, tds, order.as_deref(), *brute, dest)?,
        Command::Translate {
            direction,
            tds,
            input,
            out: dest,
        } => translate(&mut out, cli, *direction, tds, input, dest)?,
        Command::Transform {
            tree,
            stage,
            out: dest,
        } => {
            let t = read_tree(tree)?;
            let (res, name) = match stage {
                Stage::Leaves => (normalize_leaf_weights(&t), "leaves"),
                Stage::Lift => (lift_edge_weights(&t), "lift"),
                Stage::Subdivide => (subdivide_to_node_weighted(&t).tree, "subdivide"),
                Stage::Normalize => (normalize(&t).tree, "normalize"),
            };
            note(
                &mut out,
                format!(
                    "{} vertices, {} edges",
                    res.vertex_count(),
                    res.edge_count()
                ),
            );
            let m = meta(&[("generator", json!(format!("transform {name}")))]);
            emit(&mut out, dest, Payload::Tree(TreeDoc::from_tree(&res, m)))?;
        }
    }
    Ok(out)
}

fn role_label(r: Role) -> String {
    match r {
        Role::Root => "r".into(),
        Role::Y0 => "y0".into(),
        Role::Z0 => "z0".into(),
        Role::U { task, i } => format!("u{task}^{i}"),
        Role::V { task, i } => format!("v{task}^{i}"),
        Role::Y { task } => format!("y{task}"),
        Role::Z { task } => format!("z{task}"),
    }
}

fn tree_meta(tt: &TdsTree) -> Meta {
    meta(&[
        ("generator", json!("tds-to-tree")),
        ("k", json!(tt.k)),
        ("L", json!(tt.horizon)),
        (
            "roles",
            json!(tt.roles.iter().map(|&r| role_label(r)).collect::<Vec<_>>()),
        ),
    ])
}

fn schedule_error(e: ScheduleError) -> CliError {
    match e {
        ScheduleError::TooManyTasks { .. } => CliError::Cap(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn gen(
    out: &mut Output,
    kind: GenKind,
    input: &Path,
    k: Option<u64>,
    dest: &OutArg,
) -> Result<(), CliError> {
    match kind {
        GenKind::ThreePartitionToTds => {
            let tp = read(input)?.into_three_partition()?.load()?;
            let g = three_partition_to_tds(&tp).map_err(schedule_error)?;
            let ids: Vec<u64> = (0..g.tds.len() as u64).collect();
            let m = meta(&[
                ("generator", json!("3p-to-tds")),
                ("B", json!(tp.b)),
                ("A", json!(tp.a)),
                ("m", json!(g.m)),
                ("L", json!(g.horizon)),
                ("intervals", json!(g.intervals)),
            ]);
            note(out, format!("{} tasks, L={}", g.tds.len(), g.horizon));
            emit(
                out,
                dest,
                Payload::Tds(TdsDoc::from_instance(&g.tds, &ids, m)),
            )
        }
        GenKind::TdsToTree => {
            let tds = read_tds(input)?;
            let tt = tds_to_tree(&tds.inst).map_err(schedule_error)?;
            note(
                out,
                format!("{} vertices, k={}", tt.tree.vertex_count(), tt.k),
            );
            emit(
                out,
                dest,
                Payload::Tree(TreeDoc::from_tree(&tt.tree, tree_meta(&tt))),
            )
        }
        GenKind::GadgetUnrooted => {
            let t = read_tree(input)?;
            let k = match k {
                Some(k) => k,
                None => {
                    solve_rooted(&t, &SolverOptions::default())
                        .map_err(solver_error)?
                        .k
                }
            };
            let g = unrooted_hardness_gadget(&t, k);
            let m = meta(&[
                ("generator", json!("gadget-unrooted")),
                ("k", json!(k)),
                ("target", json!(g.target)),
            ]);
            note(
                out,
                format!("{} vertices, target={}", g.tree.vertex_count(), g.target),
            );
            emit(out, dest, Payload::Tree(TreeDoc::from_tree(&g.tree, m)))
        }
    }
}

/// Rebuilds the 3-partition gadget a TDS file claims to come from, if it does.
fn gadget_of(
    tds: &LoadedTds,
) -> Option<(ThreePartitionInstance, cstree::scheduling::GadgetInstance)> {
    if tds.meta.get("generator")? != "3p-to-tds" {
        return None;
    }
    let b = tds.meta.get("B")?.as_u64()?;
    let a: Vec<u64> = tds
        .meta
        .get("A")?
        .as_array()?
        .iter()
        .map(|x| x.as_u64())
        .collect::<Option<_>>()?;
    let tp = ThreePartitionInstance::new(b, a).ok()?;
    let g = three_partition_to_tds(&tp).ok()?;
    (g.tds == tds.inst).then_some((tp, g))
}

fn schedule(
    out: &mut Output,
    path: &Path,
    order: Option<&[u64]>,
    brute: bool,
    dest: &OutArg,
) -> Result<(), CliError> {
    let tds = read_tds(path)?;
    let gadget = gadget_of(&tds);
    let order: Vec<usize> = if brute {
        let all = feasible_orders(&tds.inst, true).map_err(schedule_error)?;
        note(out, format!("{} feasible orders", all.len()));
        match all.first() {
            Some(o) => o.clone(),
            None => {
                note(out, "infeasible");
                let body =
                    json!({"feasible": false, "feasible_orders": 0, "tasks": tds.inst.len()});
                return emit(out, dest, Payload::Report(body));
            }
        }
    } else {
        match order {
            Some(ids) => ScheduleDoc {
                order: ids.to_vec(),
                meta: Meta::new(),
            }
            .order_indices(&tds)?,
            None => (0..tds.inst.len()).collect(),
        }
    };
    let d = simulate(&tds.inst, &order).map_err(schedule_error)?;
    let mut doc = ScheduleDoc::from_schedule(&d, &tds);
    if let (true, Some((tp, g))) = (d.feasible, &gadget) {
        let rep = check_structural_lemmas(g, &d).map_err(schedule_error)?;
        let windows: Vec<Value> = rep
            .windows
            .iter()
            .map(|w| json!([w.start, w.end]))
            .collect();
        doc.meta.insert("windows".into(), json!(windows));
        doc.meta
            .insert("lemma_violations".into(), json!(rep.violations));
        if rep.ok() {
            if let Ok(parts) = extract_three_partition(g, &d, &tp.a) {
                doc.meta.insert("partition".into(), json!(parts));
            }
        }
    }
    note(
        out,
        format!(
            "{} makespan={}",
            if d.feasible { "feasible" } else { "infeasible" },
            d.makespan
        ),
    );
    for line in &d.diagnostics {
        note(out, line);
    }
    if !d.feasible {
        out.code = 1;
    }
    emit(out, dest, Payload::Schedule(doc))
}

fn translate(
    out: &mut Output,
    cli: &Cli,
    dir: Direction,
    tds_path: &Path,
    input: &Path,
    dest: &OutArg,
) -> Result<(), CliError> {
    let tds = read_tds(tds_path)?;
    let tt = tds_to_tree(&tds.inst).map_err(schedule_error)?;
    match dir {
        Direction::ScheduleToStrategy => {
            let order = read(input)?.into_schedule()?.order_indices(&tds)?;
            let d = simulate(&tds.inst, &order).map_err(schedule_error)?;
            let s = match schedule_to_strategy(&tt, &d) {
                Ok(s) => s,
                Err(e) => {
                    note(out, format!("rejected: {e}"));
                    out.code = 1;
                    return Ok(());
                }
            };
            let report = verify(&tt.tree, &s, tt.k);
            trace(out, cli, &report);
            if !report.ok {
                note(out, format!("re-verification failed: {:?}", report.failure));
                out.code = 1;
                return Ok(());
            }
            note(
                out,
                format!("valid at k={}: {} searchers", tt.k, report.searchers_used),
            );
            let m = meta(&[("command", json!("translate schedule-to-strategy"))]);
            emit(
                out,
                dest,
                Payload::Strategy(StrategyDoc::from_strategy(&tt.tree, &s, Some(tt.k), m)),
            )
        }
        Direction::StrategyToSchedule => {
            let s = read(input)?.into_strategy()?.to_strategy(&tt.tree)?;
            match strategy_to_schedule(&tds.inst, &tt, &s) {
                Ok(d) => {
                    let check = simulate(&tds.inst, &d.order).map_err(schedule_error)?;
                    if !check.feasible {
                        note(out, "re-verification failed: schedule is infeasible");
                        out.code = 1;
                        return Ok(());
                    }
                    note(out, format!("feasible makespan={}", d.makespan));
                    emit(
                        out,
                        dest,
                        Payload::Schedule(ScheduleDoc::from_schedule(&d, &tds)),
                    )
                }
                Err(e) => {
                    note(out, format!("rejected: {e}"));
                    out.code = 1;
                    Ok(())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn run_args(args: &[&str]) -> Result<Output, CliError> {
        crate::run(
            &Cli::try_parse_from(std::iter::once("cstree").chain(args.iter().copied())).unwrap(),
        )
    }

    fn write(dir: &Path, name: &str, p: Payload) -> String {
        let path = dir.join(name);
        fs::write(&path, InstanceFile::new(p).to_text()).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("cstree-unit-{tag}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn solve_and_verify_a_path() {
        let dir = tmpdir("path");
        let t = cstree::tree::build::path(&[1, 1, 1, 1]);
        let tree = write(
            &dir,
            "t.json",
            Payload::Tree(TreeDoc::from_tree(&t, Meta::new())),
        );
        let o = run_args(&["solve", &tree]).unwrap();
        assert_eq!(o.code, 0);
        assert!(o.stderr.starts_with("k=1"), "{}", o.stderr);
        let strat = dir.join("s.json");
        fs::write(&strat, &o.stdout).unwrap();
        let v = run_args(&["verify", &tree, strat.to_str().unwrap()]).unwrap();
        assert_eq!(v.code, 0);
        let v = run_args(&["verify", &tree, strat.to_str().unwrap(), "--k", "0"]).unwrap();
        assert_eq!(v.code, 1);
    }

    #[test]
    fn degree_cap_is_exit_three() {
        let dir = tmpdir("cap");
        let t = cstree::tree::build::unit_star(5);
        let tree = write(
            &dir,
            "t.json",
            Payload::Tree(TreeDoc::from_tree(&t, Meta::new())),
        );
        let e = run_args(&["solve", &tree, "--max-degree", "4"]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("120"));
    }

    #[test]
    fn missing_file_is_exit_two() {
        let e = run_args(&["solve", "/nonexistent/cstree.json"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
