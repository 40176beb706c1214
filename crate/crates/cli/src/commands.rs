//! Subcommand bodies. Each resolves its flags in place (so the echoed config
//! is the one actually used), runs, and returns the JSON report.

use std::path::Path;

use heston_degen::analytic_pricer::{call_price, call_price_with, price_ladder, put_price, put_price_with, CharFnParams, QuadConfig};
use heston_degen::fichera::{classify_boundary, heston_faces, DEFAULT_TOL_DEG, DEFAULT_TOL_H};
use heston_degen::grid::{build_grid, Frame, GridFunction, GridSpec};
use heston_degen::growth::{check_singularity, check_sublinear, check_tacklind, uniqueness_verdict, AuxiliaryG, CandidateSamples, GrowthClassSpec, TacklindH};
use heston_degen::heston2d::{solve_heston_pde, superpose_witness, AdiScheme, Grid2D, HestonSolution, ResidualWindow, SliceStore, SolverConfig2D, TraceStencil};
use heston_degen::heston_model::{feller_check, feller_check_form, HestonParams, OperatorForm, Payoff};
use heston_degen::par::Execution;
use heston_degen::pde1d::{convergence_study, solve_backward, Equation1D, FarFieldBc, FellerForm, Oracle, SolverConfig1D, DEFAULT_STRETCH};
use heston_degen::transform::{make_map, pushforward, MapParams};
use heston_degen::witness::{eval_witness, relative_residual, witness_partials, WitnessKind, WitnessParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{report, Csv, Meta};
use crate::{CliError, Progress};

type Out = Result<Value, CliError>;

fn or<T: Clone>(slot: &mut Option<T>, default: T) -> T {
    slot.get_or_insert(default).clone()
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::BadFlag(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("--{name} must be a positive number, got {x}")))
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn parse_kind(s: &str) -> Result<WitnessKind, CliError> {
    WitnessKind::parse(s).ok_or_else(|| bad(format!("unknown witness '{s}' (pi_heston, pi_cev2, pi_cev32)")))
}

fn parse_frame(s: &str) -> Result<Frame, CliError> {
    Frame::parse(s).map_err(|e| bad(e.to_string()))
}

fn parse_grid_spec(s: &str) -> Result<GridSpec, CliError> {
    GridSpec::parse(s).map_err(|e| bad(format!("--grid: {e}")))
}

fn parse_grid3(s: &str) -> Result<(usize, usize, usize), CliError> {
    let n: Vec<usize> = s.split(',').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad(format!("--grid '{s}': expected nx,nv,nt")))?;
    match n[..] {
        [nx, nv, nt] if nt > 0 => Ok((nx, nv, nt)),
        _ => Err(bad(format!("--grid '{s}': expected three counts nx,nv,nt"))),
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1).max(1) as f64)).collect()
}

fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = || bad(format!("--range '{s}': expected lo:hi:n with 0 < lo < hi"));
    let [lo, hi, n] = parts[..] else { return Err(err()) };
    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| err())?, hi.parse().map_err(|_| err())?);
    let n: usize = n.parse().map_err(|_| err())?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(err());
    }
    Ok(logspace(lo, hi, n))
}

impl ModelArgs {
    /// Fills unset fields; the special-model forms default to `κ = θ = 0`, `ρ = 1`.
    fn resolve(&mut self, default_form: &str) -> Result<(HestonParams, OperatorForm), CliError> {
        let form = match or(&mut self.form, default_form.into()).as_str() {
            "full_heston" => OperatorForm::FullHeston,
            "special_model" => OperatorForm::SpecialModel,
            "log_spot" => OperatorForm::LogSpot,
            other => return Err(bad(format!("--form '{other}': expected full_heston, special_model or log_spot"))),
        };
        let special = form != OperatorForm::FullHeston;
        let p = HestonParams::new(
            or(&mut self.kappa, if special { 0.0 } else { 1.5 }),
            or(&mut self.theta, if special { 0.0 } else { 0.04 }),
            or(&mut self.sigma, if special { 1.0 } else { 0.3 }),
            or(&mut self.rho, if special { 1.0 } else { -0.7 }),
            or(&mut self.r, if special { 0.02 } else { 0.025 }),
            or(&mut self.q, 0.0),
            or(&mut self.v0, 0.04),
            or(&mut self.maturity, 1.0),
        )?
        .with_lambda(or(&mut self.lambda, 0.0))?;
        Ok((p, form))
    }
}

fn form_name(f: OperatorForm) -> &'static str {
    match f {
        OperatorForm::FullHeston => "full_heston",
        OperatorForm::SpecialModel => "special_model",
        OperatorForm::LogSpot => "log_spot",
    }
}

pub fn feller(mut a: FellerArgs) -> Out {
    let (p, form) = a.model.resolve("full_heston")?;
    let rep = feller_check_form(&p, form)?;
    let meta = Meta::new("feller", &a, json!({ "form": form_name(form) }));
    Ok(report(&meta, json!({
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "satisfied": rep.satisfied,
        "form": form_name(form),
        "kappa_theta_check": feller_check(&p),
    })))
}

pub fn fichera(mut a: FicheraArgs) -> Out {
    let (p, form) = a.model.resolve("full_heston")?;
    let (dlo, dhi) = if form == OperatorForm::LogSpot { (-5.0, 5.0) } else { (0.0, 200.0) };
    let lo = or(&mut a.lo, dlo);
    let hi = or(&mut a.hi, dhi);
    if !(hi > lo) {
        return Err(bad(format!("--hi ({hi}) must exceed --lo ({lo})")));
    }
    let v_max = positive("v-max", or(&mut a.v_max, 1.0))?;
    let n = or(&mut a.n, 8);
    let tol_deg = or(&mut a.tol_deg, DEFAULT_TOL_DEG);
    let tol_h = or(&mut a.tol_h, DEFAULT_TOL_H);
    let op = heston_degen::heston_model::assemble_operator(&p, form)?;
    let faces = heston_faces(form, (lo, hi), v_max, p.maturity, n)
        .iter()
        .map(|f| classify_boundary(&op, f, tol_deg, tol_h))
        .collect::<Result<Vec<_>, _>>()?;
    let needs: Vec<&str> = faces.iter().filter(|f| f.bc_required).map(|f| f.face.as_str()).collect();
    let meta = Meta::new("fichera", &a, json!({ "form": form_name(form), "coordinates": form.coordinate_labels() }));
    Ok(report(&meta, json!({ "faces": faces, "bc_required_on": needs })))
}

pub fn witness_eval(mut a: WitnessEvalArgs) -> Out {
    let kind = parse_kind(&or(&mut a.kind, "pi_heston".into()))?;
    let wp = WitnessParams::new(or(&mut a.sigma, 1.0), or(&mut a.r, 0.0), or(&mut a.maturity, 1.0))?;
    let space = a.space.ok_or_else(|| bad("--space is required"))?;
    let time = a.time.ok_or_else(|| bad("--time is required"))?;
    let w = eval_witness(kind, &wp, space, time)?;
    let d = witness_partials(kind, &wp, space, time)?;
    let (sname, tname) = kind.coordinates();
    let meta = Meta::new("witness eval", &a, json!({ "space": sname, "time": tname }));
    Ok(report(&meta, json!({
        "value": w.value,
        "extended": w.extended,
        "partials": d,
        "relative_residual": relative_residual(kind, &wp, space, time)?,
    })))
}

pub fn witness_verify(mut a: WitnessVerifyArgs) -> Out {
    let which = or(&mut a.kind, "all".into());
    let kinds = if which == "all" { WitnessKind::ALL.to_vec() } else { vec![parse_kind(&which)?] };
    let wp = WitnessParams::new(or(&mut a.sigma, 1.0), or(&mut a.r, 0.0), or(&mut a.maturity, 1.0))?;
    let n = or(&mut a.n, 1000);
    let seed = or(&mut a.seed, 7);
    let mut rows = Vec::new();
    for kind in kinds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let space = rng.gen_range(0.05..5.0);
            let time = match kind {
                WitnessKind::PiHeston => rng.gen_range(0.01..0.99) * wp.maturity,
                _ => rng.gen_range(0.01..2.0),
            };
            worst = worst.max(relative_residual(kind, &wp, space, time)?);
        }
        // epoch distance 1e-8 from the vanishing time
        let epoch = match kind {
            WitnessKind::PiHeston => wp.maturity - 1e-8,
            _ => 1e-8,
        };
        let mut terminal: f64 = 0.0;
        for k in 0..=200 {
            let z = 0.5 + 4.5 * k as f64 / 200.0;
            terminal = terminal.max(eval_witness(kind, &wp, z, epoch)?.value.abs());
        }
        let terminal_tol = if kind == WitnessKind::PiCev2 { 1e-10 } else { 1e-12 };
        rows.push(json!({
            "kind": kind,
            "points": n,
            "max_relative_residual": worst,
            "terminal_max_abs": terminal,
            "pass": worst <= 1e-10 && terminal <= terminal_tol,
        }));
    }
    let meta = Meta::new("witness verify", &a, Value::Null);
    Ok(report(&meta, json!({ "witnesses": rows })))
}

fn natural_frame(kind: WitnessKind, sigma: f64) -> Frame {
    match kind {
        WitnessKind::PiHeston => Frame::VarTime,
        WitnessKind::PiCev32 => Frame::InvY,
        WitnessKind::PiCev2 => Frame::Cev { alpha: 2.0, a: 0.5 * sigma * sigma },
    }
}

pub fn transform(mut a: TransformArgs, progress: &Progress) -> Out {
    let from = parse_frame(&or(&mut a.from, "var_time".into()))?;
    let to = parse_frame(&or(&mut a.to, "inv_y".into()))?;
    let mp = MapParams::new(or(&mut a.sigma, 1.0), or(&mut a.r, 0.0), or(&mut a.maturity, 1.0));
    let map = make_map(from, to, &mp)?;
    let mut result = json!({ "source": from.to_string(), "target": to.to_string(), "jacobian_note": map.jacobian_note });
    if let Some(pt) = &a.point {
        if pt.len() != from.spatial_dims() + 1 {
            return Err(bad(format!("--point needs {} coordinates for frame {from}", from.spatial_dims() + 1)));
        }
        let fwd = map.forward(pt);
        result["point"] = json!({ "forward": fwd, "round_trip": map.inverse(&fwd) });
    }
    if let Some(w) = a.witness.clone() {
        let kind = parse_kind(&w)?;
        let natural = natural_frame(kind, mp.sigma);
        if natural != from {
            return Err(heston_degen::Error::FrameMismatch { expected: natural.to_string(), found: from.to_string() }.into());
        }
        let spec = parse_grid_spec(&or(&mut a.grid, "0.05:4:64:3".into()))?.with_frame(from);
        let times = or(&mut a.times, vec![0.0, 0.25, 0.5, 0.75, 0.9]);
        let wp = WitnessParams::new(mp.sigma, mp.r, mp.maturity)?;
        progress.note(&format!("sampling {w} on {} nodes x {} times", spec.n, times.len()));
        let f = GridFunction::sample(from, vec![build_grid(&spec)?], times, |p, t| eval_witness(kind, &wp, p[0], t).map(|v| v.value).unwrap_or(f64::NAN))?;
        let out = pushforward(&f, &map, None)?;
        let labels = out.frame.labels();
        let meta = Meta::new("transform", &a, json!({ "source": from.to_string(), "target": out.frame.to_string() }));
        if let Some(path) = &a.out {
            let mut csv = Csv::new(&meta, &[labels[0], labels[1], "value"]);
            let zs = out.axes[0].nodes();
            for (t, slice) in out.times.iter().zip(&out.values) {
                for (z, v) in zs.iter().zip(slice) {
                    csv.row(&[*z, *t, *v]);
                }
            }
            csv.write(path)?;
        }
        result["pushforward"] = json!({
            "frame": out.frame.to_string(),
            "nodes": out.axes[0].len(),
            "times": out.times,
            "max_abs": out.max_abs(),
            "interp_error_bound": out.interp_error_bound,
        });
    }
    let meta = Meta::new("transform", &a, json!({ "source": from.to_string(), "target": to.to_string() }));
    Ok(report(&meta, result))
}

fn parse_witness_or_constant(s: &str, what: &str) -> Result<(Option<f64>, Option<WitnessKind>), CliError> {
    match s.split_once(':') {
        Some(("constant", c)) => Ok((Some(c.parse().map_err(|_| bad(format!("--{what} '{s}'")))?), None)),
        Some(("witness", k)) => Ok((None, Some(parse_kind(k)?))),
        _ => Err(bad(format!("--{what} '{s}': expected constant:<c> or witness:<kind>"))),
    }
}

pub fn solve1d(mut a: Solve1dArgs, progress: &Progress) -> Out {
    let sigma = or(&mut a.sigma, 1.0);
    let r = or(&mut a.r, 0.05);
    let maturity = or(&mut a.maturity, 1.0);
    let horizon = or(&mut a.horizon, 1.0);
    let eq = match or(&mut a.equation, "pi_add".into()).as_str() {
        "pi_add" => Equation1D::PiAdd { sigma, r, maturity },
        "feller" => Equation1D::Feller {
            a: or(&mut a.a, 2.0),
            b: or(&mut a.b, 0.0),
            c: or(&mut a.c, 4.0),
            form: match or(&mut a.feller_form, "generator".into()).as_str() {
                "generator" => FellerForm::Generator,
                "divergence" => FellerForm::Divergence,
                o => return Err(bad(format!("--feller-form '{o}': expected generator or divergence"))),
            },
            horizon,
        },
        "cev" => Equation1D::Cev { a: or(&mut a.a, 2.0), alpha: or(&mut a.alpha, 1.5), horizon },
        o => return Err(bad(format!("--equation '{o}': expected pi_add, feller or cev"))),
    };
    eq.validate()?;
    let spec = parse_grid_spec(&or(&mut a.grid, format!("0:4:65:{DEFAULT_STRETCH}")))?.with_frame(eq.frame());
    let farfield = match or(&mut a.farfield, "zero_second".into()).as_str() {
        "zero_second" => FarFieldBc::DirichletZeroSecond,
        "neumann" => FarFieldBc::NeumannZero,
        "zero" => FarFieldBc::zero(),
        o => return Err(bad(format!("--farfield '{o}': expected zero_second, neumann or zero"))),
    };
    let cfg = SolverConfig1D {
        theta: or(&mut a.theta, 0.5),
        rannacher_steps: or(&mut a.rannacher, 2),
        n_time: or(&mut a.steps, 100),
        farfield_bc: farfield,
        ..Default::default()
    };
    cfg.validate()?;
    let frames = json!({ "solution": eq.frame().to_string() });

    if let Some(study) = a.study.clone() {
        let levels = or(&mut a.levels, 3);
        let oracle = match parse_witness_or_constant(&study, "study")? {
            (Some(value), _) => Oracle::Constant { value },
            (_, Some(kind)) => Oracle::Witness { kind, params: WitnessParams::new(sigma, r, maturity)? },
            _ => unreachable!(),
        };
        progress.note(&format!("refinement study over {levels} levels"));
        let rep = convergence_study(&eq, &spec, &oracle, &cfg, levels)?;
        let meta = Meta::new("solve1d", &a, frames);
        return Ok(report(&meta, json!({ "equation": eq, "oracle": oracle, "study": rep })));
    }

    let terminal = or(&mut a.terminal, "constant:1".into());
    let data: Box<dyn Fn(f64) -> f64> = match terminal.split_once(':') {
        None if terminal == "zero" => Box::new(|_| 0.0),
        Some(("constant", c)) => {
            let c: f64 = c.parse().map_err(|_| bad(format!("--terminal '{terminal}'")))?;
            Box::new(move |_| c)
        }
        Some(("exp", k)) => {
            let k: f64 = k.parse().map_err(|_| bad(format!("--terminal '{terminal}'")))?;
            Box::new(move |z| (-k * z).exp())
        }
        _ => return Err(bad(format!("--terminal '{terminal}': expected zero, constant:<c> or exp:<k>"))),
    };
    let g = build_grid(&spec)?;
    let f = GridFunction::sample(eq.frame(), vec![g], vec![eq.native_time(0.0)], |p, _| data(p[0]))?;
    progress.note(&format!("solving on {} nodes, {} steps", spec.n, cfg.n_time));
    let sol = solve_backward(&eq, &f, &cfg)?;
    let meta = Meta::new("solve1d", &a, frames);
    if let Some(path) = &a.out {
        let labels = sol.frame.labels();
        let mut csv = Csv::new(&meta, &[labels[0], labels[1], "value"]);
        let zs = sol.axes[0].nodes();
        for (t, slice) in sol.times.iter().zip(&sol.values) {
            for (z, v) in zs.iter().zip(slice) {
                csv.row(&[*z, *t, *v]);
            }
        }
        csv.write(path)?;
    }
    let last = sol.values.last().expect("at least one slice");
    Ok(report(&meta, json!({
        "equation": eq,
        "nodes": sol.axes[0].len(),
        "steps": cfg.n_time,
        "final_time": sol.times.last(),
        "final_max_abs": last.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        "max_abs": sol.max_abs(),
    })))
}

fn parse_scheme(s: &str) -> Result<AdiScheme, CliError> {
    match s {
        "douglas" => Ok(AdiScheme::Douglas),
        "hundsdorfer_verwer" | "hv" => Ok(AdiScheme::HundsdorferVerwer),
        o => Err(bad(format!("--scheme '{o}': expected douglas or hundsdorfer_verwer"))),
    }
}

fn surface_csv(meta: &Meta, sol: &GridFunction, all: bool, path: &Path) -> Result<(), CliError> {
    let mut csv = Csv::new(meta, &["x", "S", "v", "t", "value"]);
    let xs = sol.axes[0].nodes();
    let vs = sol.axes[1].nodes();
    let first = if all { 0 } else { sol.values.len() - 1 };
    for k in first..sol.values.len() {
        let t = sol.times[k];
        for (i, x) in xs.iter().enumerate() {
            for (j, v) in vs.iter().enumerate() {
                csv.row(&[*x, x.exp(), *v, t, sol.values[k][i * vs.len() + j]]);
            }
        }
    }
    csv.write(path)
}

pub fn solve2d(mut a: Solve2dArgs, progress: &Progress) -> Out {
    let (p, form) = a.model.resolve("full_heston")?;
    let strike = positive("strike", or(&mut a.strike, 100.0))?;
    let payoff = match or(&mut a.payoff, "call".into()).as_str() {
        "call" => Payoff::call(strike)?,
        "put" => Payoff::put(strike)?,
        o => return Err(bad(format!("--payoff '{o}': expected call or put"))),
    };
    let (nx, nv, nt) = parse_grid3(&or(&mut a.grid, "200,100,100".into()))?;
    let v_stretch = positive("v-stretch", or(&mut a.v_stretch, 1.0))?;
    let spot = positive("spot", or(&mut a.spot, 100.0))?;
    let var = or(&mut a.var, p.v0);
    if !(var >= 0.0) {
        return Err(bad(format!("--var must be >= 0, got {var}")));
    }
    let cfg = SolverConfig2D {
        scheme: parse_scheme(&or(&mut a.scheme, "douglas".into()))?,
        trace: match or(&mut a.trace, "second_order".into()).as_str() {
            "first_order" => TraceStencil::FirstOrder,
            "second_order" => TraceStencil::SecondOrder,
            o => return Err(bad(format!("--trace '{o}': expected first_order or second_order"))),
        },
        theta: or(&mut a.theta_scheme, 0.5),
        rannacher_steps: or(&mut a.rannacher, 2),
        n_time: nt,
        slices: match or(&mut a.slices, "ends".into()).as_str() {
            "ends" => SliceStore::Ends,
            "all" => SliceStore::All,
            o => return Err(bad(format!("--slices '{o}': expected ends or all"))),
        },
        exec: exec(or(&mut a.sequential, false)),
    };
    let grid = Grid2D::for_payoff(&p, form, strike, nx, nv, v_stretch)?;
    progress.note(&format!("ADI {nx}x{nv}x{nt} ({:?})", cfg.scheme));
    let sol = solve_heston_pde(&p, form, &payoff, &grid, &cfg)?;
    let value = sol.value_at(spot, var);
    let mut result = json!({ "value": value, "spot": spot, "var": var, "metadata": sol.metadata, "grid": [nx, nv, nt] });
    if var == p.v0 {
        if let Ok(cf) = CharFnParams::from_heston(&p, form) {
            let exact = match payoff {
                Payoff::Put(k) => put_price(&cf, spot, k),
                _ => call_price(&cf, spot, strike),
            };
            if let Ok(exact) = exact {
                result["closed_form"] = json!(exact);
                result["abs_error"] = json!((value - exact).abs());
                result["rel_error"] = json!((value - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    let meta = Meta::new("solve2d", &a, json!({ "surface": sol.surface.frame.to_string(), "form": form_name(form) }));
    if let Some(path) = &a.out {
        surface_csv(&meta, &sol.surface, true, path)?;
    }
    Ok(report(&meta, result))
}

pub fn price(mut a: PriceArgs) -> Out {
    let (p, form) = a.model.resolve("full_heston")?;
    let spot = positive("spot", or(&mut a.spot, 100.0))?;
    let strikes = or(&mut a.strike, vec![100.0]);
    if strikes.is_empty() {
        return Err(bad("--strike needs at least one value"));
    }
    for &k in &strikes {
        positive("strike", k)?;
    }
    let cf = CharFnParams::from_heston(&p, form)?;
    let quad = QuadConfig { max_doublings: or(&mut a.max_doublings, QuadConfig::default().max_doublings), ..Default::default() };
    let mut rows = Vec::new();
    if quad == QuadConfig::default() {
        let calls = price_ladder(&cf, spot, &strikes, exec(or(&mut a.sequential, false)))?;
        for (&k, &c) in strikes.iter().zip(&calls) {
            rows.push(json!({ "strike": k, "call": c, "put": put_price(&cf, spot, k)? }));
        }
    } else {
        or(&mut a.sequential, true);
        for &k in &strikes {
            rows.push(json!({ "strike": k, "call": call_price_with(&cf, spot, k, &quad)?, "put": put_price_with(&cf, spot, k, &quad)? }));
        }
    }
    let meta = Meta::new("price", &a, json!({ "form": form_name(form) }));
    Ok(report(&meta, json!({ "spot": spot, "prices": rows })))
}

pub fn growth(mut a: GrowthArgs) -> Out {
    let check = or(&mut a.check, "singularity".into());
    let (p, form) = a.model.resolve("special_model")?;
    let wp = WitnessParams::new(p.sigma, p.r, p.maturity)?;
    let spec = GrowthClassSpec {
        h: TacklindH::parse(&or(&mut a.h, "default".into())).ok_or_else(|| bad("--h: expected default, one, linear, square or slog"))?,
        aux: AuxiliaryG::new(or(&mut a.epsilon, AuxiliaryG::default().epsilon))?,
    };
    let frames = json!({ "form": form_name(form) });

    if check == "uniqueness" {
        let time = or(&mut a.time, 0.0);
        let cand = match or(&mut a.witness, "pi_heston".into()).as_str() {
            "zero" => CandidateSamples::from_fn(|_, _, _| 0.0, time),
            "pi_heston" => CandidateSamples::from_fn(|_, v, t| eval_witness(WitnessKind::PiHeston, &wp, v, t).map(|w| w.value).unwrap_or(0.0), time),
            o => return Err(bad(format!("--witness '{o}': uniqueness candidates are zero or pi_heston"))),
        };
        let rep = uniqueness_verdict(&cand, &p, form, &spec)?;
        let meta = Meta::new("growth", &a, frames);
        return Ok(report(&meta, rep));
    }

    let samples = match (&a.samples, a.witness.clone()) {
        (Some(path), None) => crate::output::read_pairs(path)?,
        (None, Some(w)) => {
            let kind = parse_kind(&w)?;
            let time = or(&mut a.time, if kind == WitnessKind::PiHeston { 0.0 } else { 1.0 });
            let default_range = if check == "singularity" { "1e-6:1e-2:25" } else { "10:1e4:25" };
            let zs = parse_range(&or(&mut a.range, default_range.into()))?;
            zs.into_iter().map(|z| eval_witness(kind, &wp, z, time).map(|w| (z, w.value))).collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(bad("give exactly one of --samples or --witness")),
    };
    let verdict = match check.as_str() {
        "sublinear" => serde_json::to_value(check_sublinear(&samples)?),
        "singularity" => serde_json::to_value(check_singularity(&samples)?),
        "tacklind" => serde_json::to_value(check_tacklind(&samples, &spec)?),
        o => return Err(bad(format!("--check '{o}': expected sublinear, singularity, tacklind or uniqueness"))),
    }
    .expect("verdicts serialise");
    let meta = Meta::new("growth", &a, frames);
    Ok(report(&meta, json!({ "check": check, "samples": samples.len(), "verdict": verdict })))
}

pub fn nonuniqueness(mut a: DemoArgs, progress: &Progress) -> Out {
    let p = HestonParams::special(or(&mut a.sigma, 1.0), or(&mut a.r, 0.02), or(&mut a.v0, 0.04), or(&mut a.maturity, 1.0))?;
    let form = OperatorForm::SpecialModel;
    let strike = positive("strike", or(&mut a.strike, 100.0))?;
    let (nx, nv, nt) = parse_grid3(&or(&mut a.grid, "128,96,64".into()))?;
    let v_stretch = positive("v-stretch", or(&mut a.v_stretch, DEFAULT_STRETCH))?;
    let scheme = parse_scheme(&or(&mut a.scheme, "douglas".into()))?;
    let lam = or(&mut a.scale, 1.0);
    let ln_k = strike.ln();
    let w = or(&mut a.window, vec![ln_k - 1.0, ln_k + 1.0, 0.25, 2.0, 0.0, 0.9 * p.maturity]);
    let [x0, x1, v0, v1, t0, t1] = w[..] else {
        return Err(bad("--window needs six numbers x_lo,x_hi,v_lo,v_hi,t_lo,t_hi"));
    };
    let window = ResidualWindow { axis0: (x0, x1), axis1: (v0, v1), time: (t0, t1) };
    let all_slices = or(&mut a.all_slices, false);
    let exec = exec(or(&mut a.sequential, false));

    let feller = feller_check_form(&p, form)?;
    let op = heston_degen::heston_model::assemble_operator(&p, form)?;
    let v_face = heston_faces(form, (0.5 * strike, 2.0 * strike), 1.0, p.maturity, 4).remove(0);
    let v_face = classify_boundary(&op, &v_face, DEFAULT_TOL_DEG, DEFAULT_TOL_H)?;

    let grid = Grid2D::for_payoff(&p, form, strike, nx, nv, v_stretch)?;
    progress.note(&format!("solving V1 on {nx}x{nv}x{nt} ({scheme:?})"));
    let cfg = SolverConfig2D { scheme, n_time: nt, slices: SliceStore::All, exec, ..Default::default() };
    let sol: HestonSolution = solve_heston_pde(&p, form, &Payoff::call(strike)?, &grid, &cfg)?;
    progress.note("superposing the witness and measuring residuals");
    let sp = superpose_witness(&sol, WitnessKind::PiHeston, lam, &window, exec)?;

    let wp = WitnessParams::new(p.sigma, p.r, p.maturity)?;
    let pi = |v: f64, t: f64| eval_witness(WitnessKind::PiHeston, &wp, v, t).map(|w| w.value).unwrap_or(0.0);
    let near_zero: Vec<(f64, f64)> = logspace(1e-6, 1e-2, 25).into_iter().map(|v| (v, pi(v, 0.0))).collect();
    let singularity = check_singularity(&near_zero)?;
    let candidate = CandidateSamples::from_fn(|_, v, t| lam * pi(v, t), 0.0);
    let class = uniqueness_verdict(&candidate, &p, form, &GrowthClassSpec::default())?;

    let cf = CharFnParams::from_heston(&p, form)?;
    let v1_at = sol.value_at(strike, p.v0);
    // ρ = 1 slows the integrand's decay; allow a longer cutoff
    let closed = match call_price_with(&cf, strike, strike, &QuadConfig { max_doublings: 10, ..Default::default() }) {
        Ok(c) => json!(c),
        Err(e) => json!({ "error": e.code(), "message": e.to_string() }),
    };

    let meta = Meta::new("demo nonuniqueness", &a, json!({ "surface": Frame::LogSpotVar.to_string(), "form": form_name(form), "witness": "var_time" }));
    let mut files = Vec::new();
    if let Some(dir) = &a.out_dir {
        for (name, f) in [("v1.csv", &sp.v1), ("v2.csv", &sp.v2)] {
            let path = dir.join(name);
            surface_csv(&meta, f, all_slices, &path)?;
            files.push(path.display().to_string());
        }
    }
    Ok(report(&meta, json!({
        "feller": feller,
        "v_zero_face": { "h": v_face.points[0].h, "class": v_face.points[0].sigma_class, "bc_required": v_face.bc_required },
        "v1_at_spot_v0": v1_at,
        "v2_at_spot_v0": v1_at + lam * pi(p.v0, 0.0),
        "closed_form": closed,
        "residuals": sp.report,
        "pi_singularity": singularity,
        "pi_uniqueness_class": class,
        "files": files,
    })))
}
