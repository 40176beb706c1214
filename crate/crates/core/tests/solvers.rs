use heston_degen::analytic_pricer::{call_price, price_ladder, put_price, CharFnParams};
use heston_degen::error::Error;
use heston_degen::grid::{build_grid, GridFunction, GridSpec};
use heston_degen::heston2d::{solve_heston_pde, superpose_witness, AdiScheme, Grid2D, ResidualWindow, SliceStore, SolverConfig2D, TraceStencil};
use heston_degen::heston_model::{HestonParams, OperatorForm, Payoff};
use heston_degen::par::Execution;
use heston_degen::pde1d::{convergence_study, residual_fd, solve_backward, Equation1D, FarFieldBc, FellerForm, Oracle, SolverConfig1D, DEFAULT_STRETCH};
use heston_degen::witness::{WitnessKind, WitnessParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn full() -> HestonParams {
    HestonParams::new(1.5, 0.04, 0.3, -0.7, 0.025, 0.0, 0.04, 1.0).unwrap()
}

fn solve(p: &HestonParams, form: OperatorForm, payoff: &Payoff, nx: usize, nv: usize, cfg: SolverConfig2D) -> heston_degen::heston2d::HestonSolution {
    let strike = payoff.strike().unwrap_or(100.0);
    let grid = Grid2D::for_payoff(p, form, strike, nx, nv, 1.0).unwrap();
    solve_heston_pde(p, form, payoff, &grid, &cfg).unwrap()
}

#[test]
fn adi_put_call_parity() {
    let p = full();
    let cfg = SolverConfig2D { n_time: 50, slices: SliceStore::Ends, ..Default::default() };
    let c = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 100, 50, cfg);
    let q = solve(&p, OperatorForm::FullHeston, &Payoff::put(100.0).unwrap(), 100, 50, cfg);
    for s in [80.0, 100.0, 125.0] {
        let fwd = s - 100.0 * (-0.025f64).exp();
        let gap = c.value_at(s, 0.04) - q.value_at(s, 0.04) - fwd;
        // call − put solves the same linear problem; the gap is the O(h²) error on e^x
        assert!(gap.abs() < 1e-3, "S = {s}: {gap}");
    }
}

#[test]
fn adi_call_increases_with_variance_and_spot() {
    let p = full();
    let cfg = SolverConfig2D { n_time: 50, slices: SliceStore::Ends, ..Default::default() };
    let c = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 100, 50, cfg);
    let by_v: Vec<f64> = [0.01, 0.02, 0.04, 0.08, 0.16].iter().map(|&v| c.value_at(100.0, v)).collect();
    assert!(by_v.windows(2).all(|w| w[1] > w[0]), "{by_v:?}");
    let by_s: Vec<f64> = [70.0, 90.0, 100.0, 110.0, 140.0].iter().map(|&s| c.value_at(s, 0.04)).collect();
    assert!(by_s.windows(2).all(|w| w[1] > w[0]), "{by_s:?}");
}

#[test]
fn adi_matches_closed_form_off_the_money() {
    let p = full();
    let cf = CharFnParams::from_heston(&p, OperatorForm::FullHeston).unwrap();
    let spots = [60.0, 70.0, 85.0, 115.0, 140.0];
    let errs: Vec<Vec<f64>> = [(200, 100, 100), (400, 200, 200)]
        .iter()
        .map(|&(nx, nv, nt)| {
            let cfg = SolverConfig2D { scheme: AdiScheme::HundsdorferVerwer, n_time: nt, slices: SliceStore::Ends, ..Default::default() };
            let c = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), nx, nv, cfg);
            spots.iter().map(|&s| (c.value_at(s, 0.04) - call_price(&cf, s, 100.0).unwrap()).abs()).collect()
        })
        .collect();
    for (k, s) in spots.iter().enumerate() {
        assert!(errs[0][k] < 1e-2 && errs[1][k] < 3e-3, "S = {s}: {:?}", (errs[0][k], errs[1][k]));
        assert!(errs[1][k] < 0.5 * errs[0][k] || errs[1][k] < 2e-4, "S = {s}: no decrease {:?}", (errs[0][k], errs[1][k]));
    }
}

#[test]
fn schemes_and_trace_stencils_agree() {
    let p = full();
    let cf = CharFnParams::from_heston(&p, OperatorForm::FullHeston).unwrap();
    let exact = call_price(&cf, 100.0, 100.0).unwrap();
    for scheme in [AdiScheme::Douglas, AdiScheme::HundsdorferVerwer] {
        for trace in [TraceStencil::FirstOrder, TraceStencil::SecondOrder] {
            let cfg = SolverConfig2D { scheme, trace, n_time: 60, slices: SliceStore::Ends, ..Default::default() };
            let got = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 120, 60, cfg).value_at(100.0, 0.04);
            // the two-point trace is only first order
            let tol = if trace == TraceStencil::FirstOrder { 3e-3 } else { 1e-3 };
            assert!((got - exact).abs() / exact < tol, "{scheme:?}/{trace:?}: {got} vs {exact}");
        }
    }
}

#[test]
fn sequential_and_parallel_adi_are_identical() {
    let p = full();
    let mk = |exec| SolverConfig2D { exec, n_time: 20, ..Default::default() };
    let a = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 64, 40, mk(Execution::Sequential));
    let b = solve(&p, OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 64, 40, mk(Execution::Parallel));
    assert_eq!(a.surface.values, b.surface.values);
}

#[test]
fn superposition_keeps_terminal_data() {
    let p = HestonParams::special(1.0, 0.02, 0.04, 1.0).unwrap();
    let cfg = SolverConfig2D { n_time: 32, ..Default::default() };
    let sol = solve(&p, OperatorForm::SpecialModel, &Payoff::call(100.0).unwrap(), 64, 48, cfg);
    let sp = superpose_witness(&sol, WitnessKind::PiHeston, 2.5, &ResidualWindow::everything(), Execution::Parallel).unwrap();
    assert_eq!(sp.report.terminal_gap, 0.0);
    assert!(sp.report.edge_max_gap > 1.0);
    let r = superpose_witness(&sol, WitnessKind::PiCev2, 1.0, &ResidualWindow::everything(), Execution::Parallel);
    assert!(matches!(r, Err(Error::InvalidParams(_))));
    let fsol = solve(&full(), OperatorForm::FullHeston, &Payoff::call(100.0).unwrap(), 64, 48, cfg);
    let r = superpose_witness(&fsol, WitnessKind::PiHeston, 1.0, &ResidualWindow::everything(), Execution::Parallel);
    assert!(matches!(r, Err(Error::FrameMismatch { .. })));
}

#[test]
fn ladder_is_convex_and_decreasing() {
    let cf = CharFnParams::from_heston(&full(), OperatorForm::FullHeston).unwrap();
    let strikes: Vec<f64> = (0..41).map(|k| 50.0 + 2.5 * k as f64).collect();
    let seq = price_ladder(&cf, 100.0, &strikes, Execution::Sequential).unwrap();
    let par = price_ladder(&cf, 100.0, &strikes, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert!(seq.windows(2).all(|w| w[1] < w[0]));
    assert!(seq.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-8));
}

#[test]
fn random_parameters_stay_in_envelope_with_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut priced = 0;
    for _ in 0..100 {
        let kappa = rng.gen_range(0.1..4.0);
        let theta = rng.gen_range(0.01..0.2);
        let cf = CharFnParams::new(
            kappa,
            kappa * theta,
            rng.gen_range(0.1..1.0),
            rng.gen_range(-0.9..0.5),
            rng.gen_range(0.0..0.06),
            rng.gen_range(0.0..0.03),
            rng.gen_range(0.01..0.2),
            rng.gen_range(0.25..3.0),
        )
        .unwrap();
        let k = rng.gen_range(60.0..150.0);
        let (Ok(c), Ok(p)) = (call_price(&cf, 100.0, k), put_price(&cf, 100.0, k)) else {
            continue;
        };
        priced += 1;
        let (ds, dk) = (100.0 * (-cf.q * cf.maturity).exp(), k * (-cf.r * cf.maturity).exp());
        assert!(c >= (ds - dk).max(0.0) - 1e-12 && c <= ds + 1e-12);
        assert!((c - p - (ds - dk)).abs() < 1e-8, "{cf:?} K={k}");
    }
    assert!(priced >= 95, "only {priced} of 100 draws priced");
}

#[test]
fn cev_witness_convergence_is_monotone() {
    let wp = WitnessParams::new(1.0, 0.0, 1.0).unwrap();
    let eq = Equation1D::Cev { a: 2.0, alpha: 1.5, horizon: 1.0 };
    let spec = GridSpec::new(0.0, 3.0, 33, DEFAULT_STRETCH);
    let cfg = SolverConfig1D { n_time: 32, ..Default::default() };
    let rep = convergence_study(&eq, &spec, &Oracle::Witness { kind: WitnessKind::PiCev32, params: wp }, &cfg, 3).unwrap();
    assert!(rep.errors.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.errors);
    assert_eq!(rep.nodes, vec![33, 65, 129]);
    let pi2 = WitnessParams::new(1.0, 0.0, 1.0).unwrap();
    let eq2 = Equation1D::Cev { a: 0.5, alpha: 2.0, horizon: 1.0 };
    let rep = convergence_study(&eq2, &GridSpec::new(0.0, 3.0, 33, DEFAULT_STRETCH), &Oracle::Witness { kind: WitnessKind::PiCev2, params: pi2 }, &cfg, 3).unwrap();
    assert!(rep.errors.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.errors);
}

#[test]
fn constant_data_temporal_order() {
    for eq in [
        Equation1D::PiAdd { sigma: 0.7, r: 0.2, maturity: 2.0 },
        Equation1D::Feller { a: 2.0, b: 0.5, c: 4.0, form: FellerForm::Divergence, horizon: 1.0 },
    ] {
        let cfg = SolverConfig1D { farfield_bc: FarFieldBc::NeumannZero, n_time: 16, ..Default::default() };
        let rep = convergence_study(&eq, &GridSpec::new(0.0, 4.0, 33, DEFAULT_STRETCH), &Oracle::Constant { value: 1.5 }, &cfg, 3).unwrap();
        assert!(rep.observed_order.unwrap() >= 1.9, "{eq:?}: {rep:?}");
    }
}

#[test]
fn fd_residual_of_a_solution_shrinks_with_refinement() {
    let eq = Equation1D::PiAdd { sigma: 1.0, r: 0.05, maturity: 1.0 };
    let res: Vec<f64> = [(41, 40), (81, 80), (161, 160)]
        .iter()
        .map(|&(n, nt)| {
            let g = build_grid(&GridSpec::new(0.0, 4.0, n, DEFAULT_STRETCH)).unwrap();
            let f = GridFunction::sample(eq.frame(), vec![g], vec![1.0], |p, _| (-p[0]).exp()).unwrap();
            let sol = solve_backward(&eq, &f, &SolverConfig1D { n_time: nt, ..Default::default() }).unwrap();
            let r = residual_fd(&sol, &eq).unwrap();
            // skip the start-up steps near the data
            r.values[8 * nt / 40..].iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .collect();
    assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
}
