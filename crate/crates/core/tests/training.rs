use ni_core::instances::{generate, ProblemKind, RngSeed};
use ni_core::model::{backward, forward_batch, Hyper, MaskPolicy, Mode, ModelParams, StateBatch};
use ni_core::operators::{apply, neighborhood, OperatorKind};
use ni_core::training::{
    reward, train, Optimizer, OptimizerKind, RewardVariant, TrainConfig, TrainOutputs, Trainer, TRAIN_LOG_HEADER,
};
use rand::Rng;

fn small(problem: ProblemKind, op: OperatorKind) -> TrainConfig {
    TrainConfig {
        problem,
        operator: op,
        instance_size: 8,
        d: 8,
        layers: 2,
        n_epochs: 3,
        batch_size: 4,
        learning_rate: 1e-3,
        episode_len: 3,
        k_max: 3,
        max_steps_per_epoch: Some(12),
        seed: RngSeed(11),
        ..TrainConfig::default()
    }
}

fn stripped(r: &ni_core::training::EpochReport) -> (usize, f64, f64, usize, usize) {
    (r.epoch, r.mean_return, r.mean_best_objective, r.steps, r.updates)
}

#[test]
fn zero_learning_rate_freezes_weights() {
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let cfg = TrainConfig { learning_rate: 0.0, optimizer, ..small(ProblemKind::Prp, OperatorKind::Insert) };
        let mut t = Trainer::new(cfg).unwrap();
        let before = t.params.clone();
        for _ in 0..3 {
            assert!(t.run_epoch().unwrap().updates > 0);
        }
        let (a, b) = (before.trainable_vector(), t.params.trainable_vector());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        // batch-norm running statistics still track the data
        assert_ne!(before.layers[0].node_norm.running_mean, t.params.layers[0].node_norm.running_mean);
    }
}

#[test]
fn training_is_deterministic() {
    for (problem, op) in [
        (ProblemKind::Prp, OperatorKind::Insert),
        (ProblemKind::Tsp, OperatorKind::TwoOpt),
        (ProblemKind::Gpp, OperatorKind::GppSwap),
    ] {
        let cfg = small(problem, op);
        let (pa, ra) = train(&cfg, &TrainOutputs::default()).unwrap();
        let (pb, rb) = train(&cfg, &TrainOutputs::default()).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ra.iter().map(stripped).collect::<Vec<_>>(), rb.iter().map(stripped).collect::<Vec<_>>());
        let other = TrainConfig { seed: RngSeed(12), ..cfg };
        assert_ne!(train(&other, &TrainOutputs::default()).unwrap().0, pa);
    }
}

#[test]
fn zero_epochs_and_log_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { n_epochs: 0, ..small(ProblemKind::Prp, OperatorKind::Swap) };
    let (p, reports) = train(&cfg, &TrainOutputs::default()).unwrap();
    assert!(reports.is_empty());
    assert_eq!(p, ModelParams::init(cfg.hyper(), cfg.seed));

    let log = dir.path().join("log.csv");
    let ckpt = dir.path().join("m.ckpt");
    let out = TrainOutputs { log: Some(log.clone()), checkpoint: Some(ckpt.clone()), ..TrainOutputs::default() };
    let cfg = small(ProblemKind::Gpp, OperatorKind::GppSwap);
    let (p, _) = train(&cfg, &out).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRAIN_LOG_HEADER);
    assert_eq!(lines.len(), cfg.n_epochs + 1);
    assert!(lines[1..].iter().all(|l| l.ends_with(",0")));
    assert_eq!(ni_core::model::load_checkpoint(&ckpt).unwrap(), p);
}

#[test]
fn update_direction_follows_reward_sign() {
    let inst = generate(ProblemKind::Prp, 6, RngSeed(3)).unwrap();
    let sol = inst.random_solution(&mut RngSeed(4).rng());
    let input = StateBatch::<f32>::build(&[(&inst, &sol)], OperatorKind::Insert, MaskPolicy::Invalid).unwrap();
    let p0 = ModelParams::<f32>::init(Hyper::new(8, 2, ProblemKind::Prp), RngSeed(5));
    let cell = 1;
    let prob = |p: &ModelParams<f32>| forward_batch(p, &input, Mode::Eval, false).unwrap().probs[[0, cell]];
    for (ret, grows) in [(1.0, true), (-1.0, false)] {
        let mut p = p0.clone();
        let fwd = forward_batch(&p, &input, Mode::Eval, true).unwrap();
        let mut g = p.zeros_like();
        backward(&p, &fwd, &[cell], &[ret], &mut g).unwrap();
        Optimizer::new(OptimizerKind::Sgd, &p).step(&mut p, &g, 1e-2);
        assert_eq!(prob(&p) > prob(&p0), grows, "return {ret}");
    }
}

#[test]
fn reward_algebra_over_random_episodes() {
    let mut rng = RngSeed(99).rng();
    for ep in 0..1000u64 {
        let problem = [ProblemKind::Prp, ProblemKind::Tsp, ProblemKind::Gpp][ep as usize % 3];
        let op = [OperatorKind::Swap, OperatorKind::TwoOpt, OperatorKind::GppSwap][ep as usize % 3];
        let inst = generate(problem, 6, RngSeed(ep)).unwrap();
        let sense = inst.sense();
        let mut sol = inst.random_solution(&mut rng);
        let f0 = inst.objective(&sol).unwrap();
        let (mut f, mut best, mut rf3_sum) = (f0, f0, 0.0);
        for _ in 0..rng.gen_range(1..30) {
            let nb = neighborhood(op, &sol);
            sol = apply(op, &sol, nb[rng.gen_range(0..nb.len())]).unwrap();
            let next = inst.objective(&sol).unwrap();
            rf3_sum += reward(RewardVariant::Rf3, next, f, f0, best, sense);
            let rf2 = reward(RewardVariant::Rf2, next, f, f0, best, sense);
            assert!(rf2 >= 0.0);
            if sense.better(next, best) {
                best = next;
            }
            f = next;
        }
        let rf1 = reward(RewardVariant::Rf1, f, f, f0, best, sense);
        assert!((rf3_sum - rf1).abs() <= 1e-9 * f0.abs().max(1.0), "episode {ep}: {rf3_sum} vs {rf1}");
    }
}
