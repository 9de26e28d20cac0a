use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvd_core::autodiff::{param_gradient, Jet2};
use pvd_core::eval::{l_inf, relative_l2, EvalGrid};
use pvd_core::linalg::Matrix;
use pvd_core::nn::{DeepOnet, Mlp, Surrogate};
use pvd_core::problem::{analytic_solution_constant_jet, BoundaryLayerProblem, ProblemKind};
use pvd_core::pvd_net::loss::{AsymptoticLoss, LossParts, LossWeights, INNER_C};
use pvd_core::pvd_net::{composite_values, point_nets, CollocationSets, CompositeOptions, InnerExtension, Order};
use pvd_core::pvd_onet::{operator_nets, pairs_matrix, OperatorShape};

#[derive(Debug, Clone)]
enum Op {
    Affine(f64, f64),
    Silu,
    Scale(f64),
    Exp,
    MulPrev,
    AddPrev,
    SubFirst,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        (-1.5..1.5f64, -1.0..1.0f64).prop_map(|(w, b)| Op::Affine(w, b)),
        Just(Op::Silu),
        (-2.0..2.0f64).prop_map(Op::Scale),
        Just(Op::Exp),
        Just(Op::MulPrev),
        Just(Op::AddPrev),
        Just(Op::SubFirst),
    ]
}

fn run_jet(ops: &[Op], s: f64) -> Jet2 {
    let mut stack = vec![Jet2::variable(s)];
    for op in ops {
        let top = *stack.last().unwrap();
        let prev = stack[stack.len().saturating_sub(2)];
        let next = match op {
            Op::Affine(w, b) => top.affine(*w, *b),
            Op::Silu => top.silu(),
            Op::Scale(c) => top.scale(*c),
            Op::Exp => top.scale(0.2).silu().scale(0.5).exp(),
            Op::MulPrev => top * prev,
            Op::AddPrev => top + prev,
            Op::SubFirst => top - stack[0],
        };
        stack.push(next);
    }
    *stack.last().unwrap()
}

fn run_scalar(ops: &[Op], s: f64) -> f64 {
    let silu = |z: f64| z / (1.0 + (-z).exp());
    let mut stack = vec![s];
    for op in ops {
        let top = *stack.last().unwrap();
        let prev = stack[stack.len().saturating_sub(2)];
        let next = match op {
            Op::Affine(w, b) => w * top + b,
            Op::Silu => silu(top),
            Op::Scale(c) => c * top,
            Op::Exp => (0.5 * silu(0.2 * top)).exp(),
            Op::MulPrev => top * prev,
            Op::AddPrev => top + prev,
            Op::SubFirst => top - stack[0],
        };
        stack.push(next);
    }
    *stack.last().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn jet_compositions_match_finite_differences(ops in prop::collection::vec(op_strategy(), 1..8), s in -2.0..2.0f64) {
        let j = run_jet(&ops, s);
        prop_assume!(j.v.abs() < 1e3);
        let h1 = 1e-5;
        let fd1 = (run_scalar(&ops, s + h1) - run_scalar(&ops, s - h1)) / (2.0 * h1);
        let h2 = 1e-4;
        let fd2 = (run_scalar(&ops, s + h2) - 2.0 * run_scalar(&ops, s) + run_scalar(&ops, s - h2)) / (h2 * h2);
        prop_assert!((j.d1 - fd1).abs() <= 1e-6 * (1.0 + j.d1.abs()), "d1 {} vs {}", j.d1, fd1);
        prop_assert!((j.d2 - fd2).abs() <= 1e-4 * (1.0 + j.d2.abs()), "d2 {} vs {}", j.d2, fd2);
    }

    #[test]
    fn even_compositions_have_zero_slope_at_origin(w in -2.0..2.0f64, c in -2.0..2.0f64) {
        let x = Jet2::variable(0.0);
        let f = |z: Jet2| (z.scale(w).silu() + z.scale(-w).silu()).scale(c);
        let y = f(x);
        prop_assert_eq!(y.d1, 0.0);
        let g = (x * x).affine(w, 0.3).silu();
        prop_assert_eq!(g.d1, 0.0);
    }

    #[test]
    fn param_gradient_is_linear(theta in prop::collection::vec(-2.0..2.0f64, 4), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        fn l1<'t>(p: &[pvd_core::autodiff::Var<'t>]) -> pvd_core::autodiff::Var<'t> {
            p[0] * p[1] + p[2] * p[2] * p[3]
        }
        fn l2<'t>(p: &[pvd_core::autodiff::Var<'t>]) -> pvd_core::autodiff::Var<'t> {
            use pvd_core::autodiff::Real;
            p[0].sigmoid() * p[3] - p[1].exp()
        }
        let (_, g1) = param_gradient(&theta, l1).unwrap();
        let (_, g2) = param_gradient(&theta, l2).unwrap();
        let (_, g) = param_gradient(&theta, |p| {
            use pvd_core::autodiff::Real;
            l1(p).scale(a) + l2(p).scale(b)
        }).unwrap();
        for i in 0..4 {
            let want = a * g1[i] + b * g2[i];
            prop_assert!((g[i] - want).abs() <= 1e-13 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn stretch_round_trip(x in 0.0..1.0f64, eps in 1e-4..0.1f64) {
        let p = BoundaryLayerProblem::new(ProblemKind::Constant, eps, 1.0, 2.0, 20.0).unwrap();
        prop_assert!((p.unstretch(p.stretch(x)) - x).abs() <= 1e-12);
    }

    #[test]
    fn relative_l2_is_scale_invariant(
        pairs in prop::collection::vec((-5.0..5.0f64, 0.5..5.0f64), 2..40),
        c in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
    ) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = relative_l2(&pred, &truth).unwrap();
        let sp: Vec<f64> = pred.iter().map(|v| v * c).collect();
        let st: Vec<f64> = truth.iter().map(|v| v * c).collect();
        prop_assert!((relative_l2(&sp, &st).unwrap() - r).abs() <= 1e-12 * (1.0 + r));
    }

    #[test]
    fn max_norm_dominates_the_junction_sample(noise in prop::collection::vec(-1.0..1.0f64, 64), k in 0usize..64) {
        let truth: Vec<f64> = (0..64).map(|i| (i as f64).sin() + 2.0).collect();
        let pred: Vec<f64> = truth.iter().zip(&noise).map(|(t, n)| t + n).collect();
        prop_assert!(l_inf(&pred, &truth).unwrap() >= (pred[k] - truth[k]).abs());
    }

    #[test]
    fn inner_residual_reduces_to_leading_form(v in -3.0..3.0f64, d1 in -3.0..3.0f64, d2 in -3.0..3.0f64, xi in 0.0..20.0f64, eps in 1e-5..1e-2f64) {
        let p = BoundaryLayerProblem::new(ProblemKind::Variable, eps, 1.0, 2.0, 20.0).unwrap();
        let psi0 = Jet2::new(v, d1, d2);
        let zero = Jet2::constant(0.0);
        let full = p.inner_residual_full(xi, p.assemble_inner(xi, psi0, zero, zero));
        let lead = p.inner_residual_leading(psi0);
        // a(eps xi) - a(0) = eps xi and |b| <= 5
        let bound = eps * (xi * d1.abs() + 5.0 * v.abs()) * (1.0 + 1e-12);
        prop_assert!((full - lead).abs() <= bound + 1e-14);
    }
}

#[test]
fn analytic_solution_satisfies_the_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x: f64 = rng.random();
        let u = analytic_solution_constant_jet(1e-3, 1.0, 2.0, x).unwrap();
        let r = 1e-3 * u.d2 + u.d1 + u.v;
        assert!(r.abs() <= 1e-6 * (1.0 + u.v.abs()), "x = {x}: residual {r}");
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> BoundaryLayerProblem {
    let kind = if rng.random() { ProblemKind::Constant } else { ProblemKind::Variable };
    BoundaryLayerProblem::new(kind, 10f64.powf(rng.random_range(-4.0..-2.0)), rng.random_range(0.4..1.4), rng.random_range(1.5..2.5), 20.0)
        .unwrap()
}

fn randomize_biases(nets: &mut [Surrogate], rng: &mut ChaCha8Rng) {
    for n in nets {
        if let Surrogate::Point(m) = n {
            let widths = m.widths().to_vec();
            let mut off = 0;
            for w in widths.windows(2) {
                off += w[0] * w[1];
                for b in &mut m.params_mut()[off..off + w[1]] {
                    *b = rng.random_range(-1.0..1.0);
                }
                off += w[1];
            }
        }
    }
}

fn add_constant(net: &mut Surrogate, delta: f64) {
    let Surrogate::Point(m) = net else { unreachable!() };
    *m.params_mut().last_mut().unwrap() += delta;
}

#[test]
fn composite_identities_hold_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sensors = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
    for case in 0..20 {
        let p = random_problem(&mut rng);
        let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).chain([0.0, p.junction(), 1.0]).collect();
        for ext in [InnerExtension::Clamp, InnerExtension::Extrapolate] {
            let opts = CompositeOptions { inner_extension: ext, ..Default::default() };
            let mut nets = point_nets(Order::High, 2, 6, case).unwrap();
            randomize_biases(&mut nets, &mut rng);
            let base = composite_values(Order::High, &p, &nets, &sensors, &xs, opts).unwrap().remove(0);

            let delta = rng.random_range(-3.0..3.0);
            let mut shifted = nets.clone();
            add_constant(&mut shifted[INNER_C], delta);
            let moved = composite_values(Order::High, &p, &shifted, &sensors, &xs, opts).unwrap().remove(0);
            for (a, b) in base.iter().zip(&moved) {
                assert!((a - b).abs() <= 1e-12, "shift changed composite: {a} vs {b}");
            }

            // psi_c drops out at xi = 0
            let at0 = composite_values(Order::High, &p, &nets, &sensors, &[p.x0], opts).unwrap()[0][0];
            let mut no_c = nets.clone();
            if let Surrogate::Point(m) = &mut no_c[INNER_C] {
                m.params_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            let at0_no_c = composite_values(Order::High, &p, &no_c, &sensors, &[p.x0], opts).unwrap()[0][0];
            assert!((at0 - at0_no_c).abs() <= 1e-12);

            let c = rng.random_range(-4.0..4.0);
            let mut constant = nets.clone();
            for n in &mut constant[..2] {
                let Surrogate::Point(m) = n else { unreachable!() };
                m.params_mut().iter_mut().for_each(|v| *v = 0.0);
                *m.params_mut().last_mut().unwrap() = c;
            }
            let lead = composite_values(Order::Leading, &p, &constant[..2], &sensors, &xs, opts).unwrap().remove(0);
            assert!(lead.iter().all(|v| (v - c).abs() <= 1e-12));
        }
    }
}

fn small_loss(order: Order, p: BoundaryLayerProblem, colloc: CollocationSets, sensors: Matrix) -> AsymptoticLoss {
    AsymptoticLoss { order, problem: p, colloc, weights: LossWeights::default(), sensors }
}

fn close(a: &LossParts, b: &LossParts) -> bool {
    let pairs = [(a.outer, b.outer), (a.inner, b.inner), (a.matching, b.matching), (a.boundary, b.boundary), (a.total, b.total)];
    pairs.iter().all(|(x, y)| (x - y).abs() <= 1e-11 * (1.0 + x.abs()))
}

#[test]
fn loss_parts_are_nonnegative_and_order_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (case, order) in [Order::Leading, Order::High, Order::Leading, Order::High].into_iter().enumerate() {
        let p = random_problem(&mut rng);
        let colloc = CollocationSets::sample(&p, 30, 30, case as u64);
        let sensors = Matrix::from_vec(1, 2, vec![p.alpha, p.beta]).unwrap();
        let nets = point_nets(order, 2, 8, case as u64).unwrap();
        let parts = small_loss(order, p, colloc.clone(), sensors.clone()).evaluate(&nets, None).unwrap();
        for v in [parts.outer, parts.inner, parts.matching, parts.boundary] {
            assert!(v >= 0.0);
        }
        let sum = parts.outer + parts.inner + parts.matching + parts.boundary;
        assert!((parts.total - sum).abs() <= 1e-15 * sum.max(1.0));

        let mut shuffled = colloc.clone();
        shuffled.outer.reverse();
        shuffled.inner.rotate_left(7);
        let again = small_loss(order, p, shuffled, sensors).evaluate(&nets, None).unwrap();
        assert!(close(&parts, &again), "{parts:?} vs {again:?}");
    }
}

#[test]
fn family_loss_is_the_mean_of_single_function_losses() {
    let p = BoundaryLayerProblem::standard(ProblemKind::Variable);
    let colloc = CollocationSets::sample(&p, 20, 20, 4);
    let pairs = [(0.5, 1.7), (1.2, 2.3), (0.9, 2.0), (1.4, 1.5)];
    let shape = OperatorShape { hidden: 2, width: 8, latent: 5 };
    for order in [Order::Leading, Order::High] {
        let nets = operator_nets(order.net_count(), shape, 9).unwrap();
        let all = small_loss(order, p, colloc.clone(), pairs_matrix(&pairs)).evaluate(&nets, None).unwrap();
        let mut mean = LossParts::zero();
        for &pair in &pairs {
            let one = small_loss(order, p, colloc.clone(), pairs_matrix(&[pair])).evaluate(&nets, None).unwrap();
            mean.outer += one.outer / 4.0;
            mean.inner += one.inner / 4.0;
            mean.matching += one.matching / 4.0;
            mean.boundary += one.boundary / 4.0;
            mean.total += one.total / 4.0;
        }
        assert!(close(&all, &mean), "{all:?} vs {mean:?}");
        let mut rev = pairs;
        rev.reverse();
        let permuted = small_loss(order, p, colloc.clone(), pairs_matrix(&rev)).evaluate(&nets, None).unwrap();
        assert!(close(&all, &permuted));
    }
}

/// A branch/trunk pair that reproduces a scalar network for every sensor:
/// the trunk repeats the hidden layers and emits `[h, 1]`, the branch is
/// constant and emits the output weights and bias.
fn operator_copy(m: &Mlp) -> Surrogate {
    let w = m.widths().to_vec();
    let last = w[w.len() - 2];
    let p = last + 1;
    let head = m.params().len() - (last + 1);
    let mut trunk_w = w.clone();
    *trunk_w.last_mut().unwrap() = p;
    let mut trunk = m.params()[..head].to_vec();
    for o in 0..p {
        trunk.extend((0..last).map(|i| if i == o { 1.0 } else { 0.0 }));
    }
    trunk.extend((0..p).map(|o| if o == last { 1.0 } else { 0.0 }));
    let branch_w = vec![2, 3, p];
    let mut branch = vec![0.0; 2 * 3 + 3 + 3 * p];
    branch.extend_from_slice(&m.params()[head..]);
    let d = DeepOnet::new(Mlp::from_params(&branch_w, branch).unwrap(), Mlp::from_params(&trunk_w, trunk).unwrap()).unwrap();
    Surrogate::Operator(d)
}

#[test]
fn single_function_operator_loss_equals_pointwise_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for order in [Order::Leading, Order::High] {
        let p = random_problem(&mut rng);
        let colloc = CollocationSets::sample(&p, 25, 25, 1);
        let sensors = Matrix::from_vec(1, 2, vec![p.alpha, p.beta]).unwrap();
        let mut nets = point_nets(order, 2, 6, 3).unwrap();
        randomize_biases(&mut nets, &mut rng);
        let ops: Vec<Surrogate> = nets
            .iter()
            .map(|n| match n {
                Surrogate::Point(m) => operator_copy(m),
                _ => unreachable!(),
            })
            .collect();
        let loss = small_loss(order, p, colloc, sensors);
        let a = loss.evaluate(&nets, None).unwrap();
        let b = loss.evaluate(&ops, None).unwrap();
        assert!(close(&a, &b), "{a:?} vs {b:?}");
    }
}

#[test]
fn evaluation_grid_partitions_every_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let p = random_problem(&mut rng);
        let g = EvalGrid::new(&p);
        assert_eq!(g.len(), 10_101);
        assert!(g.points.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.points[g.junction_index()], p.junction());
    }
}
