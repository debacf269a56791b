use dpdd::sim::{default_fit_config, generate, scenario_kind, DgpSpec};
use dpdd::sliding::sw_dpdd_forecast;
use dpdd::transport::w2_density_vs_samples;

fn main() {
    let spec = DgpSpec { kind: scenario_kind("drifting_ou").unwrap(), n_paths: 400, t_len: 20, seed: 7 };
    let panel = generate(&spec).unwrap();
    let cfg = default_fit_config(1);
    let w = 2;
    for t in 14..20 {
        let obs = panel.cross_section(t);
        let om: f64 = obs.as_1d().iter().sum::<f64>() / obs.len() as f64;
        let ov: f64 = obs.as_1d().iter().map(|v| (v - om) * (v - om)).sum::<f64>() / (obs.len() - 1) as f64;
        let fc = sw_dpdd_forecast(&panel, t - 1, w, 1, &cfg).unwrap();
        let xs = fc.grid().axis(0);
        let cell = xs[1] - xs[0];
        let (mut m1, mut m2) = (0.0, 0.0);
        for (x, v) in xs.iter().zip(fc.values()) {
            m1 += x * v * cell;
            m2 += x * x * v * cell;
        }
        let e = w2_density_vs_samples(&fc, &obs, t as u64).unwrap();
        println!(
            "t={t}: W2²={:.4} | obs mean {:+.3} std {:.3} | fc mean {:+.3} std {:.3} clip {:.4} modes {}",
            e * e, om, ov.sqrt(), m1, (m2 - m1 * m1).sqrt(), fc.clipped_mass, fc.mode_count
        );
    }
}
