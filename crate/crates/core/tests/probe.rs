use std::collections::BTreeMap;
use std::time::Instant;

use appcast_core::eval::{
    compute_metrics, pooled_rank_precision, replay, ReplayConfig, RunTrace,
};
use appcast_core::features::hashing::fnv1a64;
use appcast_core::predictors::{AucPaModel, AucPaParams, FrecencyPredictor, KmfuPredictor, Predictor};
use appcast_core::simulator::{generate_stream, stream_dynamics, SimConfig};

const SEED: u64 = 20260815;

fn rank_band_mean(trace: &RunTrace, lo: usize, hi: usize) -> f64 {
    let report = compute_metrics(trace);
    let pts: Vec<f64> = report
        .usage_rank_curve
        .iter()
        .filter(|p| p.rank >= lo && p.rank <= hi)
        .map(|p| p.precision)
        .collect();
    pts.iter().sum::<f64>() / pts.len().max(1) as f64
}

#[test]
#[ignore]
fn probe_orderings() {
    let devices = 10;
    let (events, personas) = generate_stream(SEED, devices, 90, &SimConfig::default()).unwrap();
    let cfg = ReplayConfig::default();

    let kmfu = replay(&events, &cfg, |_| KmfuPredictor::new()).unwrap().trace;
    let frec = replay(&events, &cfg, |_| FrecencyPredictor::default()).unwrap().trace;
    let t0 = Instant::now();
    let aucpa = replay(&events, &cfg, |d| {
        AucPaModel::new(AucPaParams::default(), SEED ^ fnv1a64(d.as_bytes(), 0))
    })
    .unwrap()
    .trace;
    println!("aucpa replay: {:.1}s", t0.elapsed().as_secs_f64());

    for (name, t) in [("kmfu", &kmfu), ("frecency", &frec), ("aucpa", &aucpa)] {
        let m = compute_metrics(t);
        println!(
            "{name:9} raw={:.4} per-app={:.4} | rank>=4 pooled={:.4} | ranks5-15 mean={:.4}",
            m.fleet.precision.unwrap(),
            m.fleet.per_app_precision.unwrap(),
            pooled_rank_precision(&t.rounds, 4..=usize::MAX).unwrap(),
            rank_band_mean(t, 5, 15),
        );
    }

    // Where do frecency and kmfu diverge, by app?
    let mut diff: BTreeMap<(&str, &str), (i64, u64)> = BTreeMap::new();
    for (k, f) in kmfu.rounds.iter().zip(frec.rounds.iter()) {
        assert_eq!(k.clicked, f.clicked);
        if k.warmup || k.hit == f.hit {
            continue;
        }
        let e = diff.entry((k.device_id.as_str(), k.clicked.as_str())).or_default();
        e.0 += if f.hit { 1 } else { -1 };
        e.1 += 1;
    }
    let mut by_app: Vec<_> = diff.into_iter().collect();
    by_app.sort_by_key(|(_, (net, _))| -net.abs());
    println!("\nfrecency-vs-kmfu biggest divergences (net rounds frecency wins):");
    for ((dev, app), (net, n)) in by_app.iter().take(20) {
        println!("  {dev} {app}: net {net:+} over {n} diverging rounds");
    }
    let total_net: i64 = by_app.iter().map(|(_, (net, _))| *net).sum();
    println!("  total net: {total_net:+} rounds over {devices} devices");

    // Does aucpa catch habit apps? Per-app hits for contextual apps of dev0.
    let persona = &personas[0];
    let dynamics = stream_dynamics(persona, 90, SEED);
    println!("\ndev0000 habit apps: {:?}", persona.habits.iter().map(|h| h.app.as_str()).collect::<Vec<_>>());
    println!(
        "dev0000 burst apps: {:?}",
        dynamics.bursts.iter().map(|b| persona.installed[b.app_idx].as_str()).collect::<Vec<_>>()
    );
    println!(
        "dev0000 riser apps: {:?}",
        dynamics.risers.iter().map(|r| persona.installed[r.app_idx].as_str()).collect::<Vec<_>>()
    );
    println!(
        "dev0000 heads: {:?} soft4={}",
        (0..3).map(|i| persona.installed[persona.home_screen_set.len() + i].as_str()).collect::<Vec<_>>(),
        persona.installed[persona.home_screen_set.len() + 3].as_str(),
    );
    let mut per_app: BTreeMap<&str, (u64, u64, u64)> = BTreeMap::new();
    for (a, f) in aucpa.rounds.iter().zip(frec.rounds.iter()) {
        if a.device_id != "dev0000" || a.warmup {
            continue;
        }
        let e = per_app.entry(a.clicked.as_str()).or_default();
        e.0 += 1;
        e.1 += u64::from(a.hit);
        e.2 += u64::from(f.hit);
    }
    let mut rows: Vec<_> = per_app.into_iter().collect();
    rows.sort_by_key(|(_, (n, _, _))| std::cmp::Reverse(*n));
    println!("dev0000 per-app rounds/aucpa-hits/frec-hits (top 25):");
    for (app, (n, ha, hf)) in rows.iter().take(25) {
        println!("  {app}: {n:4} rounds  aucpa {ha:4}  frec {hf:4}");
    }
}

fn role_of(
    persona: &appcast_core::simulator::Persona,
    dynamics: &appcast_core::simulator::StreamDynamics,
    app: &appcast_core::event::AppId,
) -> &'static str {
    let h = persona.home_screen_set.len();
    let idx = match persona.installed.iter().position(|a| a == app) {
        Some(i) => i,
        None => return "unknown",
    };
    if dynamics.risers.iter().any(|r| r.app_idx == idx) {
        return "riser";
    }
    if dynamics.bursts.iter().any(|b| b.app_idx == idx) {
        return "burst";
    }
    if idx < h {
        return "home";
    }
    if idx < h + 3 {
        return "head";
    }
    if idx == h + 3 {
        return "soft4";
    }
    if idx < h + 7 {
        return "daily";
    }
    if idx == h + 7 {
        return "weekly";
    }
    if idx < h + 11 {
        return "tail0-2";
    }
    "tail"
}

#[test]
#[ignore]
fn probe_roles() {
    let devices: usize = std::env::var("PROBE_DEVICES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(15);
    let (events, personas) = generate_stream(SEED, devices, 90, &SimConfig::default()).unwrap();
    let cfg = ReplayConfig::default();
    let kmfu = replay(&events, &cfg, |_| KmfuPredictor::new()).unwrap().trace;
    let frec = replay(&events, &cfg, |_| FrecencyPredictor::default()).unwrap().trace;
    let aucpa = replay(&events, &cfg, |d| {
        AucPaModel::new(AucPaParams::default(), SEED ^ fnv1a64(d.as_bytes(), 0))
    })
    .unwrap()
    .trace;

    let roles: BTreeMap<&str, (&_, appcast_core::simulator::StreamDynamics)> = personas
        .iter()
        .map(|p| (p.device_id.as_str(), (p, stream_dynamics(p, 90, SEED))))
        .collect();

    // Per role: rounds, hits per algo, and per-app precision units per algo.
    #[derive(Default)]
    struct Acc {
        rounds: u64,
        hits: [u64; 3],
        apps: u64,
        units: [f64; 3],
    }
    let mut by_role: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut per_app: BTreeMap<(&str, &str), (u64, [u64; 3])> = BTreeMap::new();
    for ((k, f), a) in kmfu.rounds.iter().zip(&frec.rounds).zip(&aucpa.rounds) {
        if k.warmup {
            continue;
        }
        let (p, dyns) = &roles[k.device_id.as_str()];
        let role = role_of(p, dyns, &k.clicked);
        let e = per_app.entry((k.device_id.as_str(), k.clicked.as_str())).or_insert((0, [0; 3]));
        e.0 += 1;
        e.1[0] += u64::from(k.hit);
        e.1[1] += u64::from(f.hit);
        e.1[2] += u64::from(a.hit);
        let acc = by_role.entry(role).or_default();
        acc.rounds += 1;
        acc.hits[0] += u64::from(k.hit);
        acc.hits[1] += u64::from(f.hit);
        acc.hits[2] += u64::from(a.hit);
    }
    let mut total_apps = 0u64;
    for ((dev, app), (n, hits)) in &per_app {
        let (p, dyns) = &roles[dev];
        let role = role_of(p, dyns, &appcast_core::event::AppId::new(*app));
        let acc = by_role.entry(role).or_default();
        acc.apps += 1;
        total_apps += 1;
        for i in 0..3 {
            acc.units[i] += hits[i] as f64 / *n as f64;
        }
    }
    println!("total (device,app) groups: {total_apps} over {devices} devices");
    println!(
        "{:8} {:>7} {:>6} | {:>6} {:>6} {:>6} raw-hits | {:>7} {:>7} {:>7} pa-units",
        "role", "rounds", "apps", "kmfu", "frec", "aucpa", "kmfu", "frec", "aucpa"
    );
    for (role, acc) in &by_role {
        println!(
            "{:8} {:>7} {:>6} | {:>6} {:>6} {:>6}          | {:>7.2} {:>7.2} {:>7.2}",
            role, acc.rounds, acc.apps, acc.hits[0], acc.hits[1], acc.hits[2],
            acc.units[0], acc.units[1], acc.units[2]
        );
    }
    for (name, t) in [("kmfu", &kmfu), ("frecency", &frec), ("aucpa", &aucpa)] {
        let m = compute_metrics(t);
        println!(
            "{name:9} raw={:.4} per-app={:.4} | rank>=4 pooled={:.4} | ranks5-15 mean={:.4}",
            m.fleet.precision.unwrap(),
            m.fleet.per_app_precision.unwrap(),
            pooled_rank_precision(&t.rounds, 4..=usize::MAX).unwrap(),
            rank_band_mean(t, 5, 15),
        );
    }
}

#[test]
#[ignore]
fn probe_predict_pathways() {
    let (events, personas) = generate_stream(SEED, 1, 90, &SimConfig::default()).unwrap();
    let persona = &personas[0];
    let mut model = AucPaModel::new(AucPaParams::default(), SEED ^ fnv1a64(b"dev0000", 0));
    let mut frec = FrecencyPredictor::default();
    let mut candidates: Vec<appcast_core::event::AppId> = Vec::new();

    let mut rounds = 0u64;
    let mut pos_counts = [0u64; 5];
    let mut set_eq = 0u64;
    for ev in &events {
        if !ev.slot.is_first_tier() {
            let pm = model.predict(&ev.ctx, &candidates, 4);
            let pf = frec.predict(&ev.ctx, &candidates, 4);
            let pos = pm.entries().iter().filter(|(_, s)| *s > 0.0).count();
            pos_counts[pos] += 1;
            let ma: Vec<_> = pm.apps().collect();
            let fa: Vec<_> = pf.apps().collect();
            set_eq += u64::from(ma == fa);
            rounds += 1;
            if !candidates.contains(&ev.app) {
                candidates.push(ev.app.clone());
            }
        }
        model.observe(ev);
        frec.observe(ev);
    }
    println!("rounds={rounds} set-eq-frac={:.3}", set_eq as f64 / rounds as f64);
    println!("positive-score entries per prediction: {pos_counts:?}");

    let w = model.w();
    println!("w phi1={:?}", &w[0..3]);
    println!("w phi2={:?}", &w[3..6]);
    println!("w phi3={:?}", &w[6..9]);

    let h = persona.home_screen_set.len();
    let mut roles: Vec<(&str, &appcast_core::event::AppId)> = vec![
        ("head1", &persona.installed[h]),
        ("head2", &persona.installed[h + 1]),
        ("head3", &persona.installed[h + 2]),
        ("soft4", &persona.installed[h + 3]),
    ];
    for (i, hr) in persona.habits.iter().enumerate() {
        roles.push((if i == 0 { "habit0" } else if i == 1 { "habit1" } else if i == 2 { "habit2" } else { "habit3plus" }, &hr.app));
    }
    for (tag, app) in roles {
        let wa = model.w_a().get(app);
        let (sum, maxabs, hours): (f64, f64, Vec<(usize, f64)>) = match wa {
            Some(b) => (
                b.iter().sum(),
                b.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                b.iter().take(24).enumerate().filter(|(_, v)| v.abs() > 0.02).map(|(i, v)| (i, (*v * 1000.0).round() / 1000.0)).collect(),
            ),
            None => (0.0, 0.0, vec![]),
        };
        println!("{tag:9} {app}: wa_sum={sum:+.3} max|wa|={maxabs:.3} hot-hours={hours:?}");
    }
    for hr in &persona.habits {
        println!(
            "habit {} days={:?} hours={}..{} anchor={:?} trigger={:?} mult={:.1}",
            hr.app, hr.days, hr.hour_start, hr.hour_end, hr.anchor, hr.trigger, hr.multiplier
        );
    }
}

#[test]
#[ignore]
fn probe_aucpa_aggressiveness() {
    let (events, _) = generate_stream(SEED, 6, 90, &SimConfig::default()).unwrap();
    let cfg = ReplayConfig::default();
    let frec = compute_metrics(&replay(&events, &cfg, |_| FrecencyPredictor::default()).unwrap().trace);
    println!(
        "frecency : raw={:.4} per-app={:.4}",
        frec.fleet.precision.unwrap(),
        frec.fleet.per_app_precision.unwrap()
    );
    for c in [0.02, 0.1, 0.5, 1.0, 5.0] {
        let t0 = Instant::now();
        let trace = replay(&events, &cfg, |d| {
            AucPaModel::new(
                AucPaParams { c, ..AucPaParams::default() },
                SEED ^ fnv1a64(d.as_bytes(), 0),
            )
        })
        .unwrap()
        .trace;
        let m = compute_metrics(&trace);
        println!(
            "aucpa C={c:<4}: raw={:.4} per-app={:.4} auc={:.4} rank5-15={:.4} ({:.0}s)",
            m.fleet.precision.unwrap(),
            m.fleet.per_app_precision.unwrap(),
            m.fleet.cumulative_auc.unwrap(),
            rank_band_mean(&trace, 5, 15),
            t0.elapsed().as_secs_f64(),
        );
    }
}
