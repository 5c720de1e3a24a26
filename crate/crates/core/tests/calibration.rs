//! Scratch calibration harness (timing + statistical sanity at small budgets).

mod common;

use rotorsim_core::config::{Geometry, RunConfig};
use rotorsim_core::drivers;
use std::time::Instant;

#[test]
#[ignore]
fn calibrate_single_rotor() {
    let (e0, ct) = common::rotor_ground(3.0, 24);
    println!("oracle: E0={e0:.10} <cos>={ct:.10}");
    for sweeps in [5_000usize, 20_000] {
        let mut cfg = RunConfig::desk(Geometry::Square, 4, 0.0, 3.0, 42);
        cfg.n = 4; // smallest admissible; g = 0 so rotors decouple
        cfg.beta = 5.1;
        cfg.tau = 0.0375;
        cfg.sweeps_equil = 1_000;
        cfg.sweeps_measure = sweeps;
        let t = Instant::now();
        let out = drivers::run_pigs(&cfg).unwrap();
        println!(
            "n=4 g=0 u=3 sweeps={sweeps}: E={:.6}±{:.6} (oracle {e0:.6}), phi_z={:.5}±{:.5} (oracle {ct:.5}), wall={:.2?}",
            out.report.e_total.0,
            out.report.e_total.1,
            out.report.phi_z.0,
            out.report.phi_z.1,
            t.elapsed()
        );
    }
}

#[test]
#[ignore]
fn calibrate_lattice_runs() {
    for (geometry, n, g, u) in [
        (Geometry::Triangular, 12, 3.0, 0.0),
        (Geometry::Triangular, 12, 1.5, 0.5),
        (Geometry::Square, 16, 3.0, 0.0),
        (Geometry::Square, 16, 1.25, 0.0),
        (Geometry::Triangular, 48, 3.0, 0.0),
    ] {
        let mut cfg = RunConfig::desk(geometry, n, g, u, 7);
        cfg.sweeps_equil = 1_000;
        cfg.sweeps_measure = 4_000;
        let t = Instant::now();
        let out = drivers::run_pigs(&cfg).unwrap();
        let xy = out
            .report
            .phi_xy
            .map(|v| format!(" phi_xy={:.4}±{:.4}", v.0, v.1))
            .unwrap_or_default();
        println!(
            "{:?} n={n} g={g} u={u}: phi_pol={:.4}±{:.4} phi_z={:.4}±{:.4}{xy} v={:.4}±{:.4} e={:.4}±{:.4} wall={:.2?}",
            geometry,
            out.report.phi_pol.0,
            out.report.phi_pol.1,
            out.report.phi_z.0,
            out.report.phi_z.1,
            out.report.v_mid.0,
            out.report.v_mid.1,
            out.report.e_total.0,
            out.report.e_total.1,
            t.elapsed()
        );
    }
}

#[test]
#[ignore]
fn calibrate_order_fit() {
    let alpha = rotorsim_core::trial::optimize_alpha(3.0).unwrap();
    let oracle = common::MatrixPigs::new(3.0, alpha);
    let beta = 5.1;
    let eref = oracle.reference_energy(beta);
    println!("E_ref(beta=5.1) = {eref:.12}");
    let links = [17usize, 20, 24, 30, 40, 60, 80, 100];
    let mut taus = Vec::new();
    let mut prim = Vec::new();
    let mut mpe = Vec::new();
    for &m in &links {
        let tau = beta / m as f64;
        let ep = oracle.energy(tau, m, false);
        let em = oracle.energy(tau, m, true);
        println!("tau={tau:.5}: prim {:+.3e}  mpe6 {:+.3e}", ep - eref, em - eref);
        taus.push(tau.ln());
        prim.push((ep - eref).abs().ln());
        mpe.push((em - eref).abs().ln());
    }
    let slope = |y: &[f64]| rotorsim_core::numerics::linear_fit_slope(&taus, y);
    println!("primitive exponent: {:.3}", slope(&prim));
    println!("mpe6 exponent:      {:.3}", slope(&mpe));
}
