//! Acceptance suite: one PASS/FAIL line per criterion, then a single verdict.
//!
//! Run with `cargo test -p rsgame --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command as Process;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsgame::commands::CROSS_TOL;
use rsgame::config::{CostTerm, StrategyChoice, TermConfig};
use rsgame::runner::RayonRunner;
use rsgame::{run, Command, RunConfig, Status};
use rsgame_core::discretize::{Discretization, Grid, ThetaGrid};
use rsgame_core::ergodic::{evaluate_ergodic, solve_ergodic_br, vanishing_discount_check, Normalization};
use rsgame_core::hjb::{evaluate_discounted, solve_discounted, ValueField};
use rsgame_core::model::{check_small_cost, ActionField, Diffusion, FunctionTerm, GameSpec};
use rsgame_core::nash::nash_iterate;
use rsgame_core::oracle::{perron_ergodic, ChainGame};
use rsgame_core::{Player, StrategyField};
use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn load(name: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&config_path(name)).unwrap();
    cfg.output.dir = out.to_path_buf();
    cfg
}

fn runner() -> RayonRunner {
    RayonRunner::new(0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn constant_costs(cfg: &mut RunConfig, c: [[f64; 2]; 2]) {
    cfg.game.cost = Vec::new();
    for (k, row) in c.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let m = cfg.game.actions[j];
            cfg.game.cost.push(CostTerm { payer: k as u8 + 1, player: j as u8 + 1, term: TermConfig::Constant { values: vec![*v; m] } });
        }
    }
}

fn max_rel_to(v: &ValueField, level: usize, target: f64) -> f64 {
    v.level(level).iter().map(|p| rel(*p, target)).fold(0.0, f64::max)
}

fn c1_constant_cost(out: &Path) -> Verdict {
    let mut cfg = load("stable_tanh", out);
    constant_costs(&mut cfg, [[0.3, 0.15], [0.1, 0.2]]);
    let (_, disc) = cfg.discretization().unwrap();
    let (theta, alpha) = (0.5, 1.0);
    let init = cfg.init_strategies(disc.len());
    let mut worst = 0.0f64;
    let mut coarse = 0.0f64;
    for (steps, slot) in [(100, &mut coarse), (200, &mut worst)] {
        let th = ThetaGrid::with_default_kappa(theta, steps).unwrap();
        for (k, c) in [(Player::One, 0.45), (Player::Two, 0.3)] {
            let exact = (theta * c / alpha).exp();
            let e = evaluate_discounted(&disc, &th, alpha, k, &init[0], &init[1], &cfg.march()).unwrap();
            let (s, _) = solve_discounted(&disc, &th, alpha, k, &init[k.other().index()], &cfg.march()).unwrap();
            *slot = slot.max(max_rel_to(&e, steps, exact)).max(max_rel_to(&s, steps, exact));
        }
    }
    Verdict {
        id: 1,
        name: "constant-cost closed form",
        pass: worst <= 1e-5,
        detail: format!("max rel err {coarse:.2e} at 100 steps, {worst:.2e} after halving (tol 1e-5)"),
    }
}

fn random_field(rng: &mut ChaCha8Rng, m: usize, cost: bool) -> ActionField {
    let term = if cost {
        match rng.random_range(0..3) {
            0 => FunctionTerm::Constant { values: (0..m).map(|_| rng.random_range(0.0..1.0)).collect() },
            1 => {
                let s: f64 = rng.random_range(-1.0..1.0);
                FunctionTerm::TanhAffine { offset: (0..m).map(|_| rng.random_range(0.0..0.8) + s.abs()).collect(), slope: vec![vec![s]; m] }
            }
            _ => FunctionTerm::GaussBump {
                weight: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
                center: vec![rng.random_range(-2.0..2.0)],
                width: rng.random_range(0.3..2.0),
            },
        }
    } else {
        let s = rng.random_range(-2.0..0.5);
        FunctionTerm::TanhAffine { offset: (0..m).map(|_| rng.random_range(-0.8..0.8)).collect(), slope: vec![vec![s]; m] }
    };
    ActionField::new(m, vec![term]).unwrap()
}

fn random_strategy(rng: &mut ChaCha8Rng, m: usize, n: usize) -> StrategyField {
    let mut w = Vec::with_capacity(m * n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = row.iter().sum();
        w.extend(row.iter().map(|x| x / s));
    }
    StrategyField::stationary(m, w).unwrap()
}

fn bound_violations(v: &ValueField, sup: f64, alpha: f64) -> usize {
    let th = v.thetas();
    let mut bad = 0;
    for j in 0..v.levels() {
        let upper = (th[j] * sup / alpha).exp() * (1.0 + 1e-8);
        for i in 0..v.nodes() {
            let x = v.at(j, i);
            if !(x >= 1.0 && x <= upper) {
                bad += 1;
            }
            if j > 0 && x < v.at(j - 1, i) {
                bad += 1;
            }
        }
    }
    bad
}

fn c2_bound_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = Grid::uniform(&[3.0], &[0.15]).unwrap();
    let specs = 24;
    let mut violations = 0;
    let mut fields = 0;
    for _ in 0..specs {
        let (m1, m2) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let drift = [vec![random_field(&mut rng, m1, false)], vec![random_field(&mut rng, m2, false)]];
        let cost = [
            [random_field(&mut rng, m1, true), random_field(&mut rng, m2, true)],
            [random_field(&mut rng, m1, true), random_field(&mut rng, m2, true)],
        ];
        let spec = GameSpec::new(1, drift, cost, Diffusion::scalar(rng.random_range(0.5..1.5))).unwrap();
        let disc = Discretization::new(&spec, &grid).unwrap();
        let alpha = rng.random_range(0.5..2.0);
        let th = ThetaGrid::with_default_kappa(rng.random_range(0.2..1.0), 60).unwrap();
        let v1 = random_strategy(&mut rng, m1, grid.len());
        let v2 = random_strategy(&mut rng, m2, grid.len());
        for k in Player::BOTH {
            let sup = disc.cost_sup(k);
            let opp = if k == Player::One { &v2 } else { &v1 };
            let (s, _) = solve_discounted(&disc, &th, alpha, k, opp, &Default::default()).unwrap();
            let e = evaluate_discounted(&disc, &th, alpha, k, &v1, &v2, &Default::default()).unwrap();
            violations += bound_violations(&s, sup, alpha) + bound_violations(&e, sup, alpha);
            fields += 2;
        }
    }
    Verdict {
        id: 2,
        name: "value bounds and theta-monotonicity",
        pass: violations == 0,
        detail: format!("{specs} random specs, {fields} value fields, {violations} violations"),
    }
}

fn c3_triangle(out: &Path) -> Verdict {
    let cfg = load("chain5", out);
    let o = run(Command::Crosscheck, &cfg, &runner()).unwrap();
    let r = &o.report["results"];
    let pv = f(&r["pde_vs_vi"]["value"]);
    let mv = &r["mc_vs_vi"];
    let mp = &r["mc_vs_pde"];
    let pass = r["pde_vs_vi"]["pass"] == true && mv["pass"] == true && mp["pass"] == true && f(&r["mc"]["paths"]) >= 1e5;
    Verdict {
        id: 3,
        name: "discounted oracle triangle",
        pass,
        detail: format!(
            "pde-vi max rel {pv:.2e} (tol {CROSS_TOL:.0e}); mc-vi {:.2e} (tol {:.2e}); mc-pde {:.2e} (tol {:.2e}); N = {}",
            f(&mv["diff"]),
            f(&mv["tol"]),
            f(&mp["diff"]),
            f(&mp["tol"]),
            r["mc"]["paths"]
        ),
    }
}

fn c4_perron(out: &Path) -> Verdict {
    let cfg = load("chain5", out);
    let (_, disc) = cfg.discretization().unwrap();
    let pair = cfg.oracle_strategies(disc.len()).unwrap();
    let anchor = cfg.solver.anchor.unwrap();
    let chain = ChainGame::from_discretization(&disc, cfg.oracle.dt).unwrap();
    let mut worst = 0.0f64;
    for k in Player::BOTH {
        let e = evaluate_ergodic(&disc, cfg.theta(), k, &pair[0], &pair[1], anchor, &cfg.eigen_options()).unwrap();
        let p = perron_ergodic(&chain, cfg.theta(), k, &pair[0], &pair[1], anchor).unwrap();
        worst = worst.max(rel(e.rho, p.rho));
        for (a, b) in e.psi.iter().zip(&p.psi) {
            worst = worst.max(rel(*a, *b));
        }
    }
    let mut cc = load("chain5", out);
    constant_costs(&mut cc, [[0.25, 0.15], [0.05, 0.3]]);
    let (_, cdisc) = cc.discretization().unwrap();
    let cchain = ChainGame::from_discretization(&cdisc, cc.oracle.dt).unwrap();
    let mut exact_err = 0.0f64;
    for (k, c) in [(Player::One, 0.4), (Player::Two, 0.35)] {
        let e = evaluate_ergodic(&cdisc, cc.theta(), k, &pair[0], &pair[1], anchor, &cc.eigen_options()).unwrap();
        let p = perron_ergodic(&cchain, cc.theta(), k, &pair[0], &pair[1], anchor).unwrap();
        exact_err = exact_err.max((e.rho - c).abs()).max((p.rho - c).abs());
    }
    Verdict {
        id: 4,
        name: "ergodic Perron agreement",
        pass: worst <= 2e-3 && exact_err <= 1e-10,
        detail: format!("max rel (rho, psi) {worst:.2e} (tol 2e-3); constant cost abs err {exact_err:.2e} (tol 1e-10)"),
    }
}

fn c5_vanishing(out: &Path) -> Verdict {
    let mut cfg = load("stable_tanh", out);
    cfg.solver.init = [StrategyChoice::Pure(0), StrategyChoice::Pure(1)];
    let (_, disc) = cfg.discretization().unwrap();
    let cert = cfg.certificate().unwrap().unwrap();
    let anchor = rsgame_core::ergodic::default_anchor(&cert, disc.grid()).unwrap();
    let pair = cfg.init_strategies(disc.len());
    let th = ThetaGrid::with_default_kappa(0.4, 2000).unwrap();
    let r = vanishing_discount_check(
        &disc,
        &th,
        cfg.theta(),
        Player::One,
        [&pair[0], &pair[1]],
        &cfg.solver.alphas,
        anchor,
        &cfg.march(),
        &cfg.eigen_options(),
    )
    .unwrap();
    let err = match r.normalization {
        Normalization::ThetaRho => r.rel_err_theta_rho,
        Normalization::Rho => r.rel_err_rho,
    };
    Verdict {
        id: 5,
        name: "vanishing-discount consistency",
        pass: err <= 0.05,
        detail: format!(
            "theta {:.4}, etas {:?}, limit {:.6e}, theta*rho {:.6e}, rho {:.6e}; {:?} fits with rel err {err:.2e} (tol 5e-2){}",
            r.theta,
            r.etas.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>(),
            r.limit,
            r.theta * r.rho,
            r.rho,
            r.normalization,
            if r.non_monotone { ", eta not monotone" } else { "" }
        ),
    }
}

fn c6_nash(out: &Path) -> Verdict {
    let cfg = load("stable_tanh", out);
    let o = run(Command::Nash, &cfg, &runner()).unwrap();
    let r = &o.report["results"];
    let worst = f(&r["deviation"]["worst_gain"]["value"]);
    let pass = r["converged"] == true && r["deviation"]["worst_gain"]["pass"] == true;
    Verdict {
        id: 6,
        name: "Nash deviation test",
        pass,
        detail: format!(
            "converged {} in {} iterations (strat_tol {:.0e}); worst relative gain {worst:.2e} over {} deviations (tol {:.0e})",
            r["converged"], r["iterations"], cfg.solver.strat_tol, r["deviation"]["count"], cfg.solver.dev_tol
        ),
    }
}

fn c7_certificate(out: &Path) -> Verdict {
    let cfg = load("stable_tanh", out);
    let chk = run(Command::Check, &cfg, &runner()).unwrap();
    let c = &chk.report["results"]["certificate"];
    let margin = f(&c["drift_condition"]["margin"]["value"]);
    let margin_ok = margin >= 0.05 && c["drift_condition"]["margin"]["pass"] == true;

    let (spec, disc) = cfg.discretization().unwrap();
    let cert = cfg.certificate().unwrap().unwrap();
    let hw = disc.grid().half_width();
    let limit = check_small_cost(&spec, 1.0, cert.delta, hw).theta_limit;
    let small_ok = check_small_cost(&spec, cfg.theta(), cert.delta, hw).holds
        && check_small_cost(&spec, limit * (1.0 - 1e-9), cert.delta, hw).holds
        && !check_small_cost(&spec, limit * (1.0 + 1e-6), cert.delta, hw).holds;

    let sim = run(Command::Simulate, &cfg, &runner()).unwrap();
    let s = &sim.report["results"]["certificate"];
    let hits = s["hitting"].as_array().unwrap();
    let hit_pass = hits.iter().filter(|h| h["holds"] == true && h["inconclusive"] == false).count();
    let hit_ok = hits.len() == 10 && hit_pass == 10;
    let probe_ok = s["moment_probe"]["holds"] == true;
    let worst_hit = hits
        .iter()
        .map(|h| f(&h["estimate"]["value"]) / f(&h["w_x"]))
        .fold(0.0f64, f64::max);
    Verdict {
        id: 7,
        name: "Lyapunov certificate checks",
        pass: margin_ok && small_ok && hit_ok && probe_ok,
        detail: format!(
            "drift margin {margin:.4} (need >= 0.05) {}; small cost up to theta {limit:.4} {}; hitting bound {hit_pass}/{} start points {} (worst E e^(delta tau) / W(x) = {worst_hit:.1}); moment probe excess {:.3e} +- {:.1e} {}",
            ok(margin_ok),
            ok(small_ok),
            hits.len(),
            ok(hit_ok),
            f(&s["moment_probe"]["excess"]["value"]),
            f(&s["moment_probe"]["excess"]["std_error"]),
            ok(probe_ok)
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn c8_truncation(out: &Path) -> Verdict {
    let mut results = Vec::new();
    for l in [6.0, 12.0] {
        let mut cfg = load("stable_tanh", out);
        cfg.grid.half_width = vec![l];
        let (_, disc) = cfg.discretization().unwrap();
        let th = cfg.theta_grid().unwrap();
        let n = disc.len();
        let opp = StrategyField::constant(2, n, 1);
        let (v, _) = solve_discounted(&disc, &th, cfg.solver.alpha, Player::One, &opp, &cfg.march()).unwrap();
        let cert = cfg.certificate().unwrap().unwrap();
        let anchor = rsgame_core::ergodic::default_anchor(&cert, disc.grid()).unwrap();
        let e = solve_ergodic_br(&disc, cfg.theta(), Player::One, &opp, anchor, &cfg.eigen_options()).unwrap();
        let grid = disc.grid().clone();
        results.push((grid, v.level(th.steps()).to_vec(), e.solution));
    }
    let (g6, v6, e6) = &results[0];
    let (g12, v12, e12) = &results[1];
    let origin6 = g6.nearest(&[0.0]);
    let origin12 = g12.nearest(&[0.0]);
    let (mut dv, mut de) = (0.0f64, 0.0f64);
    for i in 0..g6.len() {
        let x = g6.point(i);
        if x[0].abs() <= 3.0 + 1e-9 {
            let j = g12.nearest(&x);
            dv = dv.max(rel(v6[i], v12[j]));
            // Eigenfunctions are compared up to scale, both normalized at the origin.
            de = de.max(rel(e6.psi[i] / e6.psi[origin6], e12.psi[j] / e12.psi[origin12]));
        }
    }
    let dr = rel(e6.rho, e12.rho);
    Verdict {
        id: 8,
        name: "truncation robustness",
        pass: dv <= 1e-3 && de <= 1e-3 && dr <= 1e-3,
        detail: format!("L 6 -> 12: discounted psi {dv:.2e}, eigenfunction {de:.2e}, rho {dr:.2e} (tol 1e-3)"),
    }
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in std::fs::read_dir(dir).unwrap() {
        let sub = sub.unwrap().path();
        for f in std::fs::read_dir(&sub).unwrap() {
            let p = f.unwrap().path();
            let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            out.push((name, std::fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

fn c9_determinism(out: &Path) -> Verdict {
    let runs: [(&str, &str, &[&str]); 8] = [
        ("check", "stable_tanh", &[]),
        ("solve-discounted", "stable_tanh", &[]),
        ("solve-ergodic", "stable_tanh", &[]),
        ("nash", "stable_tanh", &["--n-theta", "100"]),
        ("nash-ergodic", "stable_tanh", &[]),
        ("simulate", "stable_tanh", &["--paths", "400", "--horizon", "5"]),
        ("oracle", "chain5", &[]),
        ("crosscheck", "chain5", &["--mc-paths", "2000"]),
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    let dirs = [out.join("det_a"), out.join("det_b")];
    for (cmd, cfg, extra) in runs {
        for (d, threads) in dirs.iter().zip(["1", "2"]) {
            let status = Process::new(env!("CARGO_BIN_EXE_rsgame"))
                .arg(cmd)
                .arg(config_path(cfg))
                .args(extra)
                .args(["--threads", threads, "--seed", "11", "--out"])
                .arg(d)
                .output()
                .unwrap()
                .status;
            assert!(status.code().is_some(), "{cmd} terminated by a signal");
        }
    }
    let (a, b) = (artifacts(&dirs[0]), artifacts(&dirs[1]));
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        compared += 1;
        if na != nb || ba != bb {
            mismatched.push(na.clone());
        }
    }
    let pass = a.len() == b.len() && mismatched.is_empty() && a.iter().filter(|(n, _)| n.ends_with("report.json")).count() == 8;
    Verdict {
        id: 9,
        name: "CLI determinism",
        pass,
        detail: format!("{compared} artifacts from 8 subcommands compared byte for byte across runs with 1 and 2 threads; mismatches {mismatched:?}"),
    }
}

fn c10_degenerate(out: &Path) -> Verdict {
    let cfg = load("zero_cost", out);
    let (_, disc) = cfg.discretization().unwrap();
    let th = cfg.theta_grid().unwrap();
    let init = cfg.init_strategies(disc.len());
    let rep = nash_iterate(&disc, &th, cfg.solver.alpha, init.clone(), &cfg.nash_options()).unwrap();
    let psi_err = rep.values.iter().flat_map(|v| v.values()).map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    let erg = run(Command::NashErgodic, &cfg, &runner()).unwrap();
    let rho: Vec<f64> = (0..2).map(|k| f(&erg.report["results"]["solutions"][k]["rho"]["value"])).collect();
    let zero_ok = psi_err < 1e-12 && rep.iterations == 1 && rep.converged && erg.status == Status::Ok && rho.iter().all(|r| r.abs() < 1e-12);
    let erg_iter = &erg.report["results"]["iterations"];

    // Player 1 steers and pays on x1, player 2 on x2; the Nash values split into single-agent optima.
    let t2 = |offset: Vec<f64>, s: [f64; 2]| {
        let m = offset.len();
        ActionField::new(m, vec![FunctionTerm::TanhAffine { offset, slope: vec![s.to_vec(); m] }]).unwrap()
    };
    let t1 = |offset: Vec<f64>, s: f64| {
        let m = offset.len();
        ActionField::new(m, vec![FunctionTerm::TanhAffine { offset, slope: vec![vec![s]; m] }]).unwrap()
    };
    let product = GameSpec::new(
        2,
        [vec![t2(vec![0.5, -0.5], [-1.0, 0.0]), ActionField::zero(2)], vec![ActionField::zero(3), t2(vec![0.4, 0.0, -0.4], [0.0, -1.5])]],
        [[t2(vec![0.6, 0.5], [-0.4, 0.0]), ActionField::zero(3)], [ActionField::zero(2), t2(vec![0.3, 0.5, 0.4], [0.0, 0.3])]],
        Diffusion::Constant { sigma: vec![1.0, 0.0, 0.0, 0.8] },
    )
    .unwrap();
    let single = |d: ActionField, r: ActionField, sigma: f64| {
        let m = d.actions();
        GameSpec::new(1, [vec![d], vec![ActionField::zero(1)]], [[r, ActionField::zero(1)], [ActionField::zero(m), ActionField::zero(1)]], Diffusion::scalar(sigma)).unwrap()
    };
    let (l, h) = (3.0, 0.15);
    let disc2 = Discretization::new(&product, &Grid::uniform(&[l, l], &[h, h]).unwrap()).unwrap();
    let th = ThetaGrid::with_default_kappa(0.5, 40).unwrap();
    let n = disc2.len();
    let nash = nash_iterate(&disc2, &th, 1.0, [StrategyField::uniform(2, n), StrategyField::uniform(3, n)], &cfg.nash_options()).unwrap();
    let g1 = Grid::uniform(&[l], &[h]).unwrap();
    let one = StrategyField::uniform(1, g1.len());
    let s1 = Discretization::new(&single(t1(vec![0.5, -0.5], -1.0), t1(vec![0.6, 0.5], -0.4), 1.0), &g1).unwrap();
    let s2 = Discretization::new(&single(t1(vec![0.4, 0.0, -0.4], -1.5), t1(vec![0.3, 0.5, 0.4], 0.3), 0.8), &g1).unwrap();
    let (a, _) = solve_discounted(&s1, &th, 1.0, Player::One, &one, &Default::default()).unwrap();
    let (b, _) = solve_discounted(&s2, &th, 1.0, Player::One, &one, &Default::default()).unwrap();
    let m = g1.len();
    let mut split = 0.0f64;
    for j in 0..th.nodes().len() {
        for i in 0..n {
            split = split.max(rel(nash.values[0].at(j, i), a.at(j, i % m))).max(rel(nash.values[1].at(j, i), b.at(j, i / m)));
        }
    }
    let tol = cfg.solver.resid_tol;
    let split_ok = nash.converged && split <= tol;
    Verdict {
        id: 10,
        name: "degenerate games",
        pass: zero_ok && split_ok,
        detail: format!(
            "zero cost: max |psi - 1| {psi_err:.1e}, Nash iterations {} (ergodic {erg_iter}), rho {rho:?}; decoupled 2-d game vs single-agent optima: max rel {split:.1e} (tol {tol:.0e}) after {} iterations",
            rep.iterations, nash.iterations
        ),
    }
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let criteria: Vec<Box<dyn Fn() -> Verdict>> = vec![
        Box::new(|| c1_constant_cost(out)),
        Box::new(c2_bound_suite),
        Box::new(|| c3_triangle(out)),
        Box::new(|| c4_perron(out)),
        Box::new(|| c5_vanishing(out)),
        Box::new(|| c6_nash(out)),
        Box::new(|| c7_certificate(out)),
        Box::new(|| c8_truncation(out)),
        Box::new(|| c9_determinism(out)),
        Box::new(|| c10_degenerate(out)),
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let v = c();
        println!("[{:>2}] {} {}: {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
        if !v.pass {
            failed.push(v.id);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
