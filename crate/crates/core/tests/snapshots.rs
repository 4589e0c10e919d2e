//! Frozen outputs for a seeded 5-state Garnet. A change here means instance
//! generation, sampling order or an update rule changed.

use pmdlab::algo::{run_config, AlgoConfig, AlgoKind, BatchSchedule, EtaMode};
use pmdlab::analysis::extract_constants;
use pmdlab::chain::{run_rng, BehaviorModel};
use pmdlab::garnet::{gen_garnet, GarnetSpec};
use pmdlab::mdp::{Policy, TabularMdp};
use pmdlab::mirror::{MirrorKind, MirrorMap};
use pmdlab::oracle::value_iteration;

const TOL: f64 = 1e-12;

fn instance() -> TabularMdp<f64> {
    let spec = GarnetSpec {
        num_states: 5,
        num_actions: 3,
        branching: 3,
        seed: 42,
    };
    gen_garnet(&spec, 0.9).unwrap()
}

fn close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= TOL * w.abs().max(1.0), "{g} vs {w}");
    }
}

#[test]
fn garnet_instance() {
    let mdp = instance();
    close(
        &mdp.transitions()[..5],
        &[0.32482372786448654, 0.3620987782247572, 0.31307749391075623, 0.0, 0.0],
    );
    let sol = value_iteration(&mdp, 1e-12).unwrap();
    close(
        &sol.v_star,
        &[7.827069072125424, 7.68756858386628, 7.995625324724197, 7.97812923572422, 8.031942544935252],
    );
}

#[test]
fn garnet_constants() {
    let mdp = instance();
    let behavior = BehaviorModel::uniform(&mdp).unwrap();
    let sol = value_iteration(&mdp, 1e-12).unwrap();
    let map = MirrorMap::negative_entropy();
    let c = extract_constants(&mdp, &behavior, &map, &Policy::uniform(5, 3), &sol.pi_star, 1.0).unwrap();
    close(
        &[c.sigma_floor, c.mixing.m, c.mixing.kappa, c.d0],
        &[0.042800864679376174, 1.0012340451182398, 0.2617383302029748, 1.0986122886681098],
    );
    assert_eq!(c.mixing.horizon, 8);
}

#[test]
fn seeded_runs() {
    let mdp = instance();
    let behavior = BehaviorModel::uniform(&mdp).unwrap();
    let cases = [
        (
            AlgoKind::Expected,
            [0.10794321479746287, 0.46806569732011805, 0.5758299426578999],
            [0.09425737813002982, 0.22066700355676602, 0.6850756183132042],
            88,
        ),
        (
            AlgoKind::Approximate,
            [0.14031791085654116, 0.19809566162522146, 0.6381275100783191],
            [0.04661358869044637, 0.09315755955971268, 0.8602288517498411],
            88,
        ),
        (
            AlgoKind::BatchQ,
            [0.07403917456238977, 0.1781418426402331, 0.29790348560490937],
            [0.0, 0.0, 1.0],
            80,
        ),
    ];
    for (kind, q, pi, samples) in cases {
        let cfg = AlgoConfig {
            algo_kind: kind,
            map: MirrorKind::NegativeEntropy,
            k: 10,
            alpha: 0.8,
            eta_mode: EtaMode::Constant(1.0),
            batch_schedule: BatchSchedule::Constant(8),
            theta: 0.5,
            seed: 7,
            run_id: 0,
            noise_free: false,
            s0: 0,
        };
        let r = run_config(&mdp, &behavior, &cfg, &mut run_rng(7, 0)).unwrap();
        close(&r.q_final[..3], &q);
        close(&r.pi_final.probs()[..3], &pi);
        assert_eq!(r.total_samples, samples);
    }
}
