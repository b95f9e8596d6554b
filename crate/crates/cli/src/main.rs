//! Command-line driver: configuration ingestion, subcommand dispatch, and
//! CSV/plot-data emission for the engine.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 identity breach
//! reported by `verify`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use lifesurplus::casebook;
use lifesurplus::config::{parse_config, ModelSet, RunConfig};
use lifesurplus::report::{fmt_sig, statewise_csv};
use lifesurplus::sim;
use lifesurplus::surplus;
use lifesurplus::thiele;
use lifesurplus::{classify, AugmentedValuationBasis, Contract, Designations};

const USAGE: &str = "usage: lifesurplus <subcommand> [case] --config <path> [options]

subcommands:
  price                          pure and contractual premiums per basis
  reserve                        backward policy values + classification
  accumulate                     forward accumulation funds + classification
  surplus                        surplus rates, initial surplus, decompositions, totals table
  simulate                       counting-process simulation and pathwise functionals
  verify                         full identity suite; exit 3 on any breach
  case fig2|lapse|ms             worked cases (lapse/ms take their own config schema)

options:
  --config <path>                JSON configuration (required except `case fig2`)
  --seed <u64>                   override simulation.master_seed
  --paths <n>                    override simulation.paths
  --step <h>                     override numerics.step
  --out <dir>                    override output.directory
  --threads <n>                  worker threads for simulation (default 1)
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Options {
    config: Option<PathBuf>,
    seed: Option<u64>,
    paths: Option<usize>,
    step: Option<f64>,
    out: Option<String>,
    threads: usize,
}

fn parse_options(args: &[String]) -> Result<Options, String> {
    let mut opts = Options {
        config: None,
        seed: None,
        paths: None,
        step: None,
        out: None,
        threads: 1,
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut take = |name: &str| {
            it.next()
                .map(|s| s.to_string())
                .ok_or_else(|| format!("missing value for {name}"))
        };
        match arg.as_str() {
            "--config" => opts.config = Some(PathBuf::from(take("--config")?)),
            "--seed" => {
                opts.seed = Some(
                    take("--seed")?
                        .parse()
                        .map_err(|e| format!("--seed: {e}"))?,
                )
            }
            "--paths" => {
                opts.paths = Some(
                    take("--paths")?
                        .parse()
                        .map_err(|e| format!("--paths: {e}"))?,
                )
            }
            "--step" => {
                opts.step = Some(
                    take("--step")?
                        .parse()
                        .map_err(|e| format!("--step: {e}"))?,
                )
            }
            "--out" => opts.out = Some(take("--out")?),
            "--threads" => {
                opts.threads = take("--threads")?
                    .parse()
                    .map_err(|e| format!("--threads: {e}"))?
            }
            other => return Err(format!("unknown option {other}")),
        }
    }
    Ok(opts)
}

fn run(args: &[String]) -> Result<ExitCode, String> {
    let Some(subcommand) = args.first() else {
        eprint!("{USAGE}");
        return Ok(ExitCode::from(2));
    };
    let (case_name, rest) = if subcommand == "case" {
        match args.get(1) {
            Some(name) => (Some(name.as_str()), &args[2..]),
            None => return Err("case requires a name: fig2, lapse or ms".into()),
        }
    } else {
        (None, &args[1..])
    };
    let opts = parse_options(rest)?;

    match subcommand.as_str() {
        "price" => cmd_price(&load(&opts)?, &opts),
        "reserve" => cmd_reserve(&load(&opts)?, &opts),
        "accumulate" => cmd_accumulate(&load(&opts)?, &opts),
        "surplus" => cmd_surplus(&load(&opts)?, &opts),
        "simulate" => cmd_simulate(&load(&opts)?, &opts),
        "verify" => cmd_verify(&load(&opts)?, &opts),
        "case" => match case_name.unwrap() {
            "fig2" => cmd_case_fig2(&opts),
            "lapse" => cmd_case_lapse(&opts),
            "ms" => cmd_case_ms(&opts),
            other => Err(format!("unknown case {other}; expected fig2, lapse or ms")),
        },
        other => {
            eprint!("{USAGE}");
            Err(format!("unknown subcommand {other}"))
        }
    }
}

/// Parse + validate + apply flag overrides + build engine objects.
fn load(opts: &Options) -> Result<(RunConfig, ModelSet), String> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| "--config is required".to_string())?;
    let mut cfg = parse_config(path).map_err(|e| e.to_string())?;
    if let Some(seed) = opts.seed {
        cfg.simulation.master_seed = seed;
    }
    if let Some(paths) = opts.paths {
        if paths == 0 {
            return Err("--paths: must be at least 1".into());
        }
        cfg.simulation.paths = paths;
    }
    if let Some(step) = opts.step {
        cfg.numerics.step = step;
    }
    if let Some(out) = &opts.out {
        cfg.output.directory = out.clone();
    }
    let model = cfg.build().map_err(|e| e.to_string())?;
    Ok((cfg, model))
}

fn out_dir(model: &ModelSet) -> Result<PathBuf, String> {
    let dir = PathBuf::from(&model.output.directory);
    std::fs::create_dir_all(&dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), String> {
    std::fs::write(dir.join(name), content).map_err(|e| format!("writing {name}: {e}"))
}

fn cmd_price(ctx: &(RunConfig, ModelSet), _opts: &Options) -> Result<ExitCode, String> {
    let (cfg, model) = ctx;
    let digits = model.output.significant_digits;
    let dir = out_dir(model)?;
    let mut csv = String::from("basis,pure_premium,benefit_epv,annuity_epv\n");
    println!(
        "contractual premium P = {:.7}  (premium basis {:?})",
        model.contractual_scale, model.premium_basis_name
    );
    for b in &cfg.bases {
        let basis = if b.name == model.premium_basis_name {
            model.premium_basis.clone()
        } else {
            // rebuild from config to price every named basis
            cfg.build_basis(&b.name).map_err(|e| e.to_string())?
        };
        let pp = lifesurplus::pure_premium(&basis, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        println!(
            "pure premium {:?}: {:.7}  (benefit EPV {}, annuity EPV {})",
            b.name,
            pp.scale,
            fmt_sig(pp.benefit_epv, digits),
            fmt_sig(pp.annuity_epv, digits)
        );
        csv.push_str(&format!(
            "{},{},{},{}\n",
            b.name,
            fmt_sig(pp.scale, digits),
            fmt_sig(pp.benefit_epv, digits),
            fmt_sig(pp.annuity_epv, digits)
        ));
    }
    write_file(&dir, "premiums.csv", &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn classify_line(
    name: &str,
    solution: &lifesurplus::StatewiseFunction,
    contract: &Contract,
    tol: f64,
    flags: Designations,
) -> String {
    let class = classify(solution, contract, tol, flags)
        .map(|c| format!("{c:?}"))
        .unwrap_or_else(|e| format!("unclassifiable: {e}"));
    format!(
        "basis {:?}: class {class}, V(0) in start state = {:.6e}",
        name,
        solution.at(0, 0)
    )
}

fn cmd_reserve(ctx: &(RunConfig, ModelSet), _opts: &Options) -> Result<ExitCode, String> {
    let (_, model) = ctx;
    let digits = model.output.significant_digits;
    let dir = out_dir(model)?;
    // the premium basis is itself a proper valuation basis with π^L = P
    let premium_aug =
        AugmentedValuationBasis::new(model.premium_basis.clone(), model.contractual.clone());
    let mut entries: Vec<(String, AugmentedValuationBasis, Designations)> = vec![(
        model.premium_basis_name.clone(),
        premium_aug,
        Designations {
            pricing: true,
            experience: false,
        },
    )];
    for (name, aug) in &model.valuations {
        entries.push((name.clone(), aug.clone(), Designations::default()));
    }
    for (name, aug, flags) in &entries {
        let v = thiele::solve_backward(aug, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        println!(
            "{}",
            classify_line(name, &v, &model.contract, model.classification_tol, *flags)
        );
        write_file(
            &dir,
            &format!("reserve_{name}.csv"),
            &statewise_csv(&v, "V", digits),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_accumulate(ctx: &(RunConfig, ModelSet), _opts: &Options) -> Result<ExitCode, String> {
    let (_, model) = ctx;
    let digits = model.output.significant_digits;
    let dir = out_dir(model)?;
    let zeros = vec![0.0; model.states];
    for (name, basis) in &model.accumulations {
        let a = thiele::solve_forward(basis, &model.contract, &model.contractual, &zeros, &model.grid)
            .map_err(|e| e.to_string())?;
        let flags = Designations {
            pricing: false,
            experience: *name == model.experience_name,
        };
        println!(
            "{}",
            classify_line(name, &a, &model.contract, model.classification_tol, flags)
        );
        let terminal: Vec<String> = (0..model.states)
            .map(|i| fmt_sig(a.at(model.grid.steps(), i), digits))
            .collect();
        println!("  terminal values A(n) = [{}]", terminal.join(", "));
        write_file(
            &dir,
            &format!("accumulation_{name}.csv"),
            &statewise_csv(&a, "A", digits),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_surplus(ctx: &(RunConfig, ModelSet), _opts: &Options) -> Result<ExitCode, String> {
    let (_, model) = ctx;
    let digits = model.output.significant_digits;
    let dir = out_dir(model)?;
    let n = model.grid.term();
    let report_times: Vec<f64> = vec![0.0, 0.25 * n, 0.5 * n, 0.75 * n, n];

    for (vname, aug) in &model.valuations {
        let s = surplus::initial_surplus(aug, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        println!(
            "initial surplus, basis {:?}: V0 solver {} | quadrature {} | diff {:.3e} | released {} ({})",
            vname,
            fmt_sig(s.from_solver, digits),
            fmt_sig(s.from_quadrature, digits),
            s.difference(),
            fmt_sig(s.released(), digits),
            surplus::SurplusEpvReport::strain_label(s.released()),
        );
        let pure = lifesurplus::pure_premium(&aug.basis, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        let pure_rates = lifesurplus::PremiumRates::from_pattern(
            model.contract.premium_pattern(),
            pure.scale,
        );
        let decomp =
            surplus::premium_decomposition(&model.contractual, &pure_rates, &aug.valuation_premiums)
                .map_err(|e| e.to_string())?;
        println!(
            "  premium split at t=0, start state: risk {} + capitalized {} + emerging {}",
            fmt_sig(decomp.risk(0, 0.0), digits),
            fmt_sig(decomp.capitalized_loading(0, 0.0), digits),
            fmt_sig(decomp.emerging_loading(0, 0.0), digits)
        );

        let v = thiele::solve_backward(aug, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        for (aname, acc) in &model.accumulations {
            let w = thiele::surplus_rates(aug, &v, acc, &model.contractual, &model.contract)
                .map_err(|e| e.to_string())?;
            write_file(
                &dir,
                &format!("surplus_rates_{vname}_{aname}.csv"),
                &statewise_csv(&w, "W", digits),
            )?;
            let mut rows = String::from(
                "t,initial_surplus,loading_epv,systematic_epv,martingale_epv,total\n",
            );
            for &t in &report_times {
                let rep = surplus::surplus_epv_report(
                    aug,
                    &v,
                    acc,
                    &model.experience,
                    &model.contractual,
                    &model.contract,
                    t,
                    &model.grid,
                )
                .map_err(|e| e.to_string())?;
                rows.push_str(&format!(
                    "{t},{},{},{},{},{}\n",
                    fmt_sig(rep.initial_surplus, digits),
                    fmt_sig(rep.loading_epv, digits),
                    fmt_sig(rep.systematic_epv, digits),
                    fmt_sig(rep.martingale_epv, digits),
                    fmt_sig(rep.total, digits)
                ));
            }
            write_file(&dir, &format!("surplus_epv_{vname}_{aname}.csv"), &rows)?;
        }
    }

    if model.valuations.len() >= 2 {
        for (aname, acc) in &model.accumulations {
            let table = surplus::corollary3_report(
                &model.valuations,
                acc,
                &model.experience,
                &model.contractual,
                &model.contract,
                &model.grid,
                *aname == model.experience_name,
            )
            .map_err(|e| e.to_string())?;
            let mut csv =
                String::from("valuation_basis,v0,expected_gamma_l,loading_epv,systematic_epv,total\n");
            println!(
                "totals across valuation bases, accumulation {:?} (experience basis: {}):",
                aname, table.accumulation_is_experience
            );
            for row in &table.rows {
                println!("  {:<18} total = {}", row.label, fmt_sig(row.total, digits));
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.label,
                    fmt_sig(row.v0, digits),
                    fmt_sig(row.expected_gamma_l, digits),
                    fmt_sig(row.loading_epv, digits),
                    fmt_sig(row.systematic_epv, digits),
                    fmt_sig(row.total, digits)
                ));
            }
            println!("  spread = {:.3e}", table.spread);
            write_file(&dir, &format!("cor3_totals_{aname}.csv"), &csv)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Per-path functional values for the simulation command; slot order makes
/// the CSV byte-identical under any thread count.
struct PathRow {
    jumps: usize,
    gamma_l: f64,
    gamma_la: f64,
    martingale: f64,
    prop2_residual: f64,
}

fn cmd_simulate(ctx: &(RunConfig, ModelSet), opts: &Options) -> Result<ExitCode, String> {
    let (_, model) = ctx;
    let digits = model.output.significant_digits;
    let dir = out_dir(model)?;
    let n = model.grid.term();
    let n_paths = model.simulation.paths;
    let seed = sim::SeedPolicy::new(model.simulation.master_seed);

    // reference bases for the pathwise functionals: first valuation basis
    // (or the premium basis) and first accumulation basis (or experience)
    let aug = model
        .valuations
        .first()
        .map(|(_, a)| a.clone())
        .unwrap_or_else(|| {
            AugmentedValuationBasis::new(model.premium_basis.clone(), model.contractual.clone())
        });
    let acc = model
        .accumulations
        .first()
        .map(|(_, b)| b.clone())
        .unwrap_or_else(|| model.experience.clone());
    let v = thiele::solve_backward(&aug, &model.contract, &model.grid)
        .map_err(|e| e.to_string())?;
    let w = thiele::surplus_rates(&aug, &v, &acc, &model.contractual, &model.contract)
        .map_err(|e| e.to_string())?;
    let risk = thiele::sums_at_risk(&v, &model.contract);
    let delta = aug.basis.delta;

    let eval = |k: u64| -> PathRow {
        let path = sim::simulate_path(&model.experience, n, &seed, k).expect("bounded intensities");
        let gamma_l =
            sim::path_gamma_l(&path, &v, &model.contract, &model.contractual, delta, n)
                .expect("grid covers [0, n]");
        let gamma_la = sim::path_gamma_la(&path, &w, delta, n).expect("grid covers [0, n]");
        let (mart, _) = sim::martingale_residual(&path, &model.experience, &risk, delta, n)
            .expect("grid covers [0, n]");
        let prop2 = sim::pathwise_prop2_check(
            &path,
            &aug,
            &v,
            &w,
            &risk,
            &acc,
            &model.experience,
            &model.contract,
            &model.contractual,
        )
        .expect("grid covers [0, n]");
        PathRow {
            jumps: path.jumps().len(),
            gamma_l,
            gamma_la,
            martingale: mart,
            prop2_residual: prop2,
        }
    };

    let mut rows: Vec<Option<PathRow>> = Vec::with_capacity(n_paths);
    rows.resize_with(n_paths, || None);
    let workers = opts.threads.max(1).min(n_paths.max(1));
    let chunk = n_paths.div_ceil(workers);
    std::thread::scope(|scope| {
        for (ci, slots) in rows.chunks_mut(chunk).enumerate() {
            let start = ci * chunk;
            let eval = &eval;
            scope.spawn(move || {
                for (off, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(eval((start + off) as u64));
                }
            });
        }
    });
    let rows: Vec<PathRow> = rows.into_iter().map(|r| r.unwrap()).collect();

    let mut csv = String::from("path,jumps,gamma_l,gamma_la,martingale_residual,prop2_residual\n");
    for (k, r) in rows.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            r.jumps,
            fmt_sig(r.gamma_l, digits),
            fmt_sig(r.gamma_la, digits),
            fmt_sig(r.martingale, digits),
            fmt_sig(r.prop2_residual, digits)
        ));
    }
    write_file(&dir, "paths.csv", &csv)?;

    let gl: Vec<f64> = rows.iter().map(|r| r.gamma_l).collect();
    let gla: Vec<f64> = rows.iter().map(|r| r.gamma_la).collect();
    let mart: Vec<f64> = rows.iter().map(|r| r.martingale).collect();
    let est_gl = sim::estimate(&gl).map_err(|e| e.to_string())?;
    let est_gla = sim::estimate(&gla).map_err(|e| e.to_string())?;
    let est_m = sim::estimate(&mart).map_err(|e| e.to_string())?;
    let worst_prop2 = rows.iter().map(|r| r.prop2_residual).fold(0.0f64, f64::max);
    let mut summary = String::new();
    summary.push_str(&format!(
        "paths = {n_paths}, master seed = {}\n",
        model.simulation.master_seed
    ));
    summary.push_str(&format!(
        "mean gamma_l = {} (se {})\n",
        fmt_sig(est_gl.mean, digits),
        fmt_sig(est_gl.std_error, digits)
    ));
    summary.push_str(&format!(
        "mean gamma_la = {} (se {})\n",
        fmt_sig(est_gla.mean, digits),
        fmt_sig(est_gla.std_error, digits)
    ));
    summary.push_str(&format!(
        "mean martingale residual = {} (se {})\n",
        fmt_sig(est_m.mean, digits),
        fmt_sig(est_m.std_error, digits)
    ));
    summary.push_str(&format!("max prop2 residual = {worst_prop2:.3e}\n"));
    print!("{summary}");
    write_file(&dir, "simulation_summary.txt", &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(ctx: &(RunConfig, ModelSet), opts: &Options) -> Result<ExitCode, String> {
    let (_, model) = ctx;
    let mut failures = 0usize;
    let mut check = |name: &str, value: f64, bound: f64| {
        let ok = value.abs() <= bound;
        println!(
            "{} {name}: |{value:.3e}| <= {bound:.1e}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures += 1;
        }
    };

    // occupancy row sums and Chapman–Kolmogorov under the experience basis
    let occ = lifesurplus::markov::occupancy_path(
        &model.experience.intensities,
        model.states,
        &model.grid,
    )
    .map_err(|e| e.to_string())?;
    let worst_row = occ
        .iter()
        .flat_map(|p| p.row_sums())
        .map(|s| (s - 1.0).abs())
        .fold(0.0f64, f64::max);
    check("occupancy row sums", worst_row, 1e-10);

    let n = model.grid.term();
    let mut worst_ck = 0.0f64;
    for (i, frac) in [(1usize, 0.3), (2, 0.55), (3, 0.8)] {
        let t = n * 0.1 * i as f64;
        let s = (n - t) * frac * 0.5;
        let u = (n - t - s) * 0.5;
        let lhs =
            lifesurplus::occupancy_matrix(&model.experience.intensities, model.states, t, s + u, &model.grid)
                .map_err(|e| e.to_string())?;
        let rhs = lifesurplus::occupancy_matrix(&model.experience.intensities, model.states, t, s, &model.grid)
            .map_err(|e| e.to_string())?
            .matmul(
                &lifesurplus::occupancy_matrix(
                    &model.experience.intensities,
                    model.states,
                    t + s,
                    u,
                    &model.grid,
                )
                .map_err(|e| e.to_string())?,
            );
        worst_ck = worst_ck.max(lhs.max_abs_diff(&rhs));
    }
    check("Chapman-Kolmogorov", worst_ck, 1e-8);

    // per valuation basis: initial-surplus double computation and the exact
    // premium decomposition
    for (name, aug) in &model.valuations {
        let s = surplus::initial_surplus(aug, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        check(&format!("initial surplus two routes ({name})"), s.difference(), 1e-8);
        let pure = lifesurplus::pure_premium(&aug.basis, &model.contract, &model.grid)
            .map_err(|e| e.to_string())?;
        let pure_rates = lifesurplus::PremiumRates::from_pattern(
            model.contract.premium_pattern(),
            pure.scale,
        );
        let decomp =
            surplus::premium_decomposition(&model.contractual, &pure_rates, &aug.valuation_premiums)
                .map_err(|e| e.to_string())?;
        check(
            &format!("premium decomposition identity ({name})"),
            decomp.identity_defect(&model.grid),
            1e-15,
        );
    }

    // Γ^{L,A} two assemblies, and the Corollary-3 table per accumulation basis
    for (aname, acc) in &model.accumulations {
        for (vname, aug) in &model.valuations {
            let v = thiele::solve_backward(aug, &model.contract, &model.grid)
                .map_err(|e| e.to_string())?;
            let w = thiele::surplus_rates(aug, &v, acc, &model.contractual, &model.contract)
                .map_err(|e| e.to_string())?;
            let direct =
                surplus::expected_gamma_la(&w, &model.experience, aug.basis.delta, n, &model.grid)
                    .map_err(|e| e.to_string())?;
            let gamma_l =
                surplus::expected_gamma_l(aug, &v, &model.experience, &model.contract, n, &model.grid)
                    .map_err(|e| e.to_string())?;
            let loading = surplus::loading_epv(
                &model.contractual,
                &aug.valuation_premiums,
                &model.experience,
                aug.basis.delta,
                &model.contract,
                n,
                &model.grid,
            )
            .map_err(|e| e.to_string())?;
            let sys = surplus::systematic_surplus_epv(
                acc,
                &model.experience,
                &v,
                &model.contract,
                aug.basis.delta,
                n,
                &model.grid,
            )
            .map_err(|e| e.to_string())?;
            // expected_gamma_l already carries the −V_0^1 of its defining
            // identity, so the Γ^{L,A} route subtracts V_0^1 once on its side
            check(
                &format!("total-surplus assemblies agree ({vname}/{aname})"),
                (direct - v.at(0, 0)) - (loading + gamma_l - sys),
                1e-8,
            );
        }
        if model.valuations.len() >= 2 {
            let table = surplus::corollary3_report(
                &model.valuations,
                acc,
                &model.experience,
                &model.contractual,
                &model.contract,
                &model.grid,
                *aname == model.experience_name,
            )
            .map_err(|e| e.to_string())?;
            if table.accumulation_is_experience {
                check(
                    &format!("valuation-independence of totals ({aname})"),
                    table.spread,
                    1e-8,
                );
            } else {
                println!(
                    "INFO valuation-basis dependence ({aname}): spread = {:.3e}",
                    table.spread
                );
            }
        }
    }

    // pathwise identities on a capped number of simulated paths
    let aug = model
        .valuations
        .first()
        .map(|(_, a)| a.clone())
        .unwrap_or_else(|| {
            AugmentedValuationBasis::new(model.premium_basis.clone(), model.contractual.clone())
        });
    let acc = model
        .accumulations
        .first()
        .map(|(_, b)| b.clone())
        .unwrap_or_else(|| model.experience.clone());
    let v = thiele::solve_backward(&aug, &model.contract, &model.grid)
        .map_err(|e| e.to_string())?;
    let w = thiele::surplus_rates(&aug, &v, &acc, &model.contractual, &model.contract)
        .map_err(|e| e.to_string())?;
    let risk = thiele::sums_at_risk(&v, &model.contract);
    let seed = sim::SeedPolicy::new(model.simulation.master_seed);
    let delta = aug.basis.delta;
    let check_paths = model.simulation.paths.min(200);
    let mut worst_prop2 = 0.0f64;
    let mut worst_eq27 = 0.0f64;
    for k in 0..check_paths as u64 {
        let path = sim::simulate_path(&model.experience, n, &seed, k).map_err(|e| e.to_string())?;
        worst_prop2 = worst_prop2.max(
            sim::pathwise_prop2_check(
                &path,
                &aug,
                &v,
                &w,
                &risk,
                &acc,
                &model.experience,
                &model.contract,
                &model.contractual,
            )
            .map_err(|e| e.to_string())?,
        );
        worst_eq27 =
            worst_eq27.max(sim::pathwise_key_identity(&path, &v, delta).map_err(|e| e.to_string())?);
    }
    check("pathwise total-surplus identity", worst_prop2, 1e-5);
    check("pathwise integration-by-parts identity", worst_eq27, 1e-6);

    // martingale zero-mean on a capped sample
    let n_mc = model.simulation.paths.clamp(2, 2_000);
    let est = sim::monte_carlo(n_mc, opts.threads, |k| {
        let path = sim::simulate_path(&model.experience, n, &seed, k).expect("bounded");
        sim::martingale_residual(&path, &model.experience, &risk, delta, n)
            .expect("grid")
            .0
    })
    .map_err(|e| e.to_string())?;
    let bound = 3.0 * est.std_error;
    check("martingale residual zero mean", est.mean, bound.max(1e-12));

    if failures == 0 {
        println!("verify: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: {failures} check(s) failed");
        Ok(ExitCode::from(3))
    }
}

fn cmd_case_fig2(opts: &Options) -> Result<ExitCode, String> {
    // the desk parameters of the figure itself; only numerics are configurable
    let step = opts.step.unwrap_or(1.0 / 256.0);
    let case = casebook::fig2_case(
        0.05,
        &lifesurplus::IntensityFunction::gm82_males(40.0),
        20.0,
        step,
        10,
    )
    .map_err(|e| e.to_string())?;
    let dir = PathBuf::from(opts.out.clone().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for (name, content) in &case.csvs {
        write_file(&dir, name, content)?;
    }
    write_file(&dir, "fig2_summary.txt", &case.summary)?;
    print!("{}", case.summary);
    Ok(ExitCode::SUCCESS)
}

fn cmd_case_lapse(opts: &Options) -> Result<ExitCode, String> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| "--config is required for case lapse".to_string())?;
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut cfg = casebook::LapseCaseConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(step) = opts.step {
        cfg.step = step;
    }
    let report = casebook::lapse_case(&cfg, 10).map_err(|e| e.to_string())?;
    let dir = PathBuf::from(opts.out.clone().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for (name, content) in &report.csvs {
        write_file(&dir, name, content)?;
    }
    write_file(&dir, "lapse_summary.txt", &report.summary)?;
    print!("{}", report.summary);
    Ok(ExitCode::SUCCESS)
}

fn cmd_case_ms(opts: &Options) -> Result<ExitCode, String> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| "--config is required for case ms".to_string())?;
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut cfg = casebook::MsCaseConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(step) = opts.step {
        cfg.step = step;
    }
    let report = casebook::ms_calibrate_second_order(&cfg, 10).map_err(|e| e.to_string())?;
    let dir = PathBuf::from(opts.out.clone().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for (name, content) in &report.csvs {
        write_file(&dir, name, content)?;
    }
    write_file(&dir, "ms_summary.txt", &report.summary)?;
    print!("{}", report.summary);
    Ok(ExitCode::SUCCESS)
}
