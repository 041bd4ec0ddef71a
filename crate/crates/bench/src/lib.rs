//! Fixtures for the solver benchmarks: one surrogate of each algorithm,
//! built at the usual warm start on the reference scenario.

use fdisac::linalg::{cr, CMat};
use fdisac::power_min::{build_power_surrogate, PowerMinSpec, PowerSurrogate, ScaState, RADAR_ILLUMINATION_FLOOR_W};
use fdisac::sinr::{optimal_rx, RxDesign, TxDesign};
use fdisac::special_case::{build_special_socp, compute_tilde_constants, SpecialSocp};
use fdisac::{generate_scenario, Scenario, ScenarioConfig};

/// Reference scenario in normalized power units, optionally without
/// downlink users.
pub fn scenario(seed: u64, downlink: bool) -> Scenario {
    let mut cfg = ScenarioConfig { seed, ..Default::default() };
    if !downlink {
        cfg.users.l = 0;
    }
    generate_scenario(&cfg).expect("reference scenario is valid").normalized().scenario
}

fn warm_start(s: &Scenario) -> ScaState {
    let nt = s.n_tx();
    let mut v_blocks = vec![CMat::zeros(nt, nt); s.l() + 1];
    v_blocks[0] = CMat::identity(nt, nt) * cr(s.p_max_bs / (2.0 * nt as f64));
    ScaState { v_blocks, ul_powers: s.p_max_ul.iter().map(|p| p / 2.0).collect(), iteration: 0, objective_trace: vec![] }
}

/// First power-minimization surrogate at the 6/5/8 dB thresholds.
pub fn power_surrogate(s: &Scenario) -> PowerSurrogate {
    let spec = PowerMinSpec::from_db(s.clone(), 6.0, 5.0, 8.0);
    build_power_surrogate(&spec, &warm_start(s), true, RADAR_ILLUMINATION_FLOOR_W).expect("surrogate builds")
}

/// First transmit-side SOCP of the alternating scheme, for a scenario
/// without downlink users.
pub fn special_socp(s: &Scenario) -> SpecialSocp {
    let st = warm_start(s);
    let tx = TxDesign { dl_beams: vec![], radar_cov: st.v_blocks[0].clone(), ul_powers: st.ul_powers };
    let rx = optimal_rx(&tx, s).expect("warm start is well conditioned");
    let unit = |v: &fdisac::CVec| v.normalize();
    let rx = RxDesign { radar_rx: unit(&rx.radar_rx), ul_rx: rx.ul_rx.iter().map(unit).collect() };
    let k = compute_tilde_constants(&rx, s);
    build_special_socp(&k, 10f64.powf(0.6), &vec![10f64.powf(0.5); s.k()])
}
