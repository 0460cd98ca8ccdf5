//! Scratch probe: inverse-model accuracy vs excitation level range.

use memctrl::config::RunConfig;
use memctrl::harness::{avg_tracking_error, run_episode};
use memctrl::lstm_ctrl::{generate_dataset, train_inverse, ClosedLoopLstm, OpenLoopLstm};
use memctrl::plant::SurrogateFinger;

fn main() {
    let config = RunConfig::default();
    let theta_max = config.plant.theta_max;
    let reference = config
        .harness
        .test
        .build(config.harness.episode_steps, theta_max)
        .unwrap();

    for (label, seed) in [("cap80-s0", 0u64), ("cap80-s1", 1), ("cap80-s2", 2)] {
        let epochs = 200;
        let t0 = std::time::Instant::now();
        let mut gen_plant = SurrogateFinger::new(config.plant.clone()).unwrap();
        let mut excitation = config.lstm.excitation;
        excitation.seed = seed;
        let ds = generate_dataset(&mut gen_plant, &excitation, config.lstm.samples).unwrap();

        let mut bands = [0usize; 9];
        for &p in &ds.p {
            let idx = ((p / 10.0) as usize).min(8);
            bands[idx] += 1;
        }
        let mut tcfg = config.lstm.train;
        tcfg.epochs = epochs;
        tcfg.seed = seed;
        let (model, stats) = train_inverse(&ds, &tcfg).unwrap();

        // Steady-state inverse bias: feed (p, p) until the state settles,
        // compare predicted u against the closed-form steady actuation.
        let mut bias = Vec::new();
        for p in [5.0, 10.0, 25.0, 40.0, 60.0] {
            let net = model.network();
            let mut state = net.new_state();
            let x = [model.norm.norm_p(p), model.norm.norm_p(p)];
            let mut u_hat = 0.0;
            for _ in 0..60 {
                u_hat = model.norm.denorm_u(net.step(&x, &mut state)[0]);
            }
            let u_true = config.plant.u_scale * (p / theta_max).atanh();
            bias.push(format!("{p}:{:+.2}", u_hat - u_true));
        }

        let mut plant = SurrogateFinger::new(config.plant.clone()).unwrap();
        let mut closed = ClosedLoopLstm::new(model.clone());
        let closed_trace =
            run_episode(&mut closed, &mut plant, &reference, 1000.0, None).unwrap();
        let mut plant = SurrogateFinger::new(config.plant.clone()).unwrap();
        let mut open = OpenLoopLstm::new(model);
        let open_trace = run_episode(&mut open, &mut plant, &reference, 1000.0, None).unwrap();

        println!(
            "{label}: val_mse={:.3e} closed={:.3} open={:.3} bias[{}] bands={:?} ({:.0}s)",
            stats.val_mse,
            avg_tracking_error(&closed_trace),
            avg_tracking_error(&open_trace),
            bias.join(" "),
            bands,
            t0.elapsed().as_secs_f64()
        );
    }
}
