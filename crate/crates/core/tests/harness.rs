use imnoma::constellation::Family;
use imnoma::detectors::DetectorKind;
use imnoma::harness::{
    load_manifest, load_records, persist, run_point, run_sweep, ChannelId, ExperimentSpec, Modulation,
    Scheme, StopRule, RESULTS_FILE,
};
use imnoma::superposition::{IndexUserMode, SystemConfig};
use imnoma::Error;

fn spec(scheme: Scheme, detector: DetectorKind, grid: &[f64], min_errors: u64) -> ExperimentSpec {
    ExperimentSpec {
        scheme,
        detector,
        snr_grid_db: grid.to_vec(),
        stop: StopRule {
            max_bits: 50_000_000,
            min_bit_errors: min_errors,
        },
        ..ExperimentSpec::two_user_default()
    }
}

fn rayleigh_bpsk(snr_db: f64) -> f64 {
    let g = 10f64.powf(snr_db / 10.0);
    0.5 * (1.0 - (g / (1.0 + g)).sqrt())
}

#[test]
fn same_seed_gives_identical_records() {
    let s = spec(Scheme::Imnomarc, DetectorKind::Ml, &[0.0, 10.0], 300);
    let a = run_sweep(&s).unwrap().records;
    let b = run_sweep(&s).unwrap().records;
    let key = |v: &[imnoma::harness::BerRecord]| {
        v.iter()
            .map(|r| (r.user, r.snr_db.to_bits(), r.bits_sent, r.bit_errors))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&a), key(&b));

    let mut other = s.clone();
    other.master_seed = 2;
    assert_ne!(key(&a), key(&run_sweep(&other).unwrap().records));
}

#[test]
fn ofdm_bpsk_matches_rayleigh_closed_form() {
    let mut s = spec(Scheme::Ofdm, DetectorKind::Ml, &[10.0], 3000);
    s.ofdm = Modulation {
        mod_order: 2,
        family: Family::Psk,
    };
    let r = &run_point(&s, 10.0).unwrap()[0];
    let expected = rayleigh_bpsk(10.0);
    let se = (expected * (1.0 - expected) / r.bits_sent as f64).sqrt();
    assert!((r.ber - expected).abs() <= 3.0 * se, "{} vs {expected}", r.ber);
}

#[test]
fn ber_decreases_along_the_grid() {
    let s = spec(Scheme::Imnomarc, DetectorKind::Sic, &[0.0, 5.0, 10.0], 1000);
    let recs = run_sweep(&s).unwrap().records;
    assert_eq!(recs.len(), 3 * s.tracked_channels().len());
    for ch in s.tracked_channels() {
        let curve: Vec<_> = recs.iter().filter(|r| r.user == ch).collect();
        for w in curve.windows(2) {
            let slack = 3.0 * (w[0].std_error() + w[1].std_error());
            assert!(
                w[1].ber <= w[0].ber + slack,
                "{ch}: {} then {}",
                w[0].ber,
                w[1].ber
            );
        }
    }
}

#[test]
fn counted_points_meet_the_confidence_target() {
    let s = spec(Scheme::Pdnoma, DetectorKind::Ml, &[5.0, 15.0], 100);
    for r in run_sweep(&s).unwrap().records {
        assert!(r.bit_errors >= 100);
        assert!(r.relative_std_error() <= 0.1, "{r:?}");
        assert_eq!(r.ber, r.bit_errors as f64 / r.bits_sent as f64);
    }
}

#[test]
fn persist_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(Scheme::Imnomarc, DetectorKind::Sic, &[0.0, 5.0], 100);
    let result = run_sweep(&s).unwrap();
    let files = persist(
        &result.records,
        std::slice::from_ref(&result.manifest),
        dir.path(),
    )
    .unwrap();
    assert_eq!(files.len(), 2);

    let text = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scheme,detector,user,snr_db,bits_sent,bit_errors,ber"
    );
    assert!(text.lines().any(|l| l.starts_with("imnomarc,sic,index,5,")));

    let manifest = load_manifest(&files[1]).unwrap();
    assert_eq!(manifest, result.manifest);
    assert_eq!(manifest.master_seed, s.master_seed);
    assert_eq!(manifest.spec, s);
    assert_eq!(manifest.points.len(), 2);

    let loaded = load_records(&files[0], &[manifest]).unwrap();
    assert_eq!(loaded, result.records);

    // Writing again overwrites in place.
    persist(
        &result.records,
        std::slice::from_ref(&result.manifest),
        dir.path(),
    )
    .unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap(),
        text
    );
}

#[test]
fn sic_and_ml_agree_at_high_snr() {
    let system = SystemConfig {
        n_users: 3,
        n_far: 1,
        power_coeffs: vec![0.75, 0.2, 0.05],
        ..SystemConfig::two_user_bpsk()
    };
    let mk = |detector| ExperimentSpec {
        system: system.clone(),
        stop: StopRule {
            max_bits: 200_000,
            min_bit_errors: 20_000,
        },
        ..spec(Scheme::Imnomarc, detector, &[40.0], 1)
    };
    let ml = run_point(&mk(DetectorKind::Ml), 40.0).unwrap();
    let sic = run_point(&mk(DetectorKind::Sic), 40.0).unwrap();
    for (a, b) in ml.iter().zip(&sic) {
        assert_eq!(a.bits_sent, b.bits_sent);
        let gap = a.bit_errors.abs_diff(b.bit_errors) as f64 / a.bits_sent as f64;
        assert!(gap <= 1e-3, "{:?} {a:?} {b:?}", a.user);
    }
}

#[test]
fn virtual_user_mode_tracks_index_separately() {
    let mut s = spec(Scheme::Imnomarc, DetectorKind::Ml, &[20.0], 200);
    s.system.index_user_mode = IndexUserMode::VirtualUser;
    let recs = run_point(&s, 20.0).unwrap();
    let users: Vec<_> = recs.iter().map(|r| r.user).collect();
    assert_eq!(
        users,
        vec![ChannelId::User(1), ChannelId::User(2), ChannelId::Index]
    );
    assert_eq!(recs[0].bits_sent, recs[1].bits_sent);
    assert_eq!(recs[1].bits_sent, recs[2].bits_sent);
}

#[test]
fn oversized_ml_alphabet_is_rejected() {
    let s = ExperimentSpec {
        system: SystemConfig {
            n_users: 5,
            n_far: 1,
            mod_order: 16,
            family: Family::Qam,
            power_coeffs: vec![0.5, 0.25, 0.15, 0.07, 0.03],
            ..SystemConfig::two_user_bpsk()
        },
        ..spec(Scheme::Imnomarc, DetectorKind::Ml, &[10.0], 100)
    };
    assert!(matches!(run_point(&s, 10.0), Err(Error::EnumerationCap { .. })));
}
