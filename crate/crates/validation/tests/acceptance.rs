//! Acceptance run: one PASS/FAIL line per criterion, preceded by the measured
//! values. Exits non-zero if any criterion fails.

use std::process::ExitCode;

use fsolink::channel::{
    FadingModel, LinkGeometry, ModulationOrder, OperatingPoint, HEADLINE_POINTS, REFERENCE_GRID,
};
use fsolink::errorrates::{
    avg_ber_ook_approx_piecewise, avg_ber_ook_exact, avg_ber_ook_exact_nested, avg_ser_approx,
    avg_ser_dense, avg_ser_dense_highpower, avg_ser_exact, avg_ser_exact_nested, delta_gap_refined,
    dense_power_step_db, ln_avg_ber_ook_approx_simple, power_increase_for_next_bit, Expression,
    PowerStepVariant, SerExpressionKind, BER_THRESHOLD, SER_THRESHOLD,
};
use fsolink::montecarlo::{brgc_decode, brgc_encode, simulate, simulate_with_workers, McConfig};
use fsolink::quadrature::{integrate, QuadratureSpec};
use fsolink_validation::Criterion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PUBLISHED_MEANS: [(f64, f64, f64); 9] = [
    (0.35, 0.9, 4.16e-4),
    (0.35, 0.5, 5.09e-4),
    (0.35, 0.1, 6.21e-4),
    (0.25, 0.9, 4.18e-4),
    (0.25, 0.5, 5.11e-4),
    (0.25, 0.1, 6.24e-4),
    (0.2, 0.9, 4.19e-4),
    (0.2, 0.5, 5.11e-4),
    (0.2, 0.1, 6.25e-4),
];

const APPROX: Expression = Expression::Ser(SerExpressionKind::Approx);
const HIGH_POWER: Expression = Expression::Ser(SerExpressionKind::DenseHighPower);

fn op(point: (f64, f64), m: u32, p_dbm: f64) -> OperatingPoint {
    OperatingPoint::reference(point.0, point.1, m, p_dbm).expect("reference operating point")
}

fn tag(point: (f64, f64)) -> String {
    format!("({}, {})", point.0, point.1)
}

fn c1() -> Criterion {
    let mut c = Criterion::new(1, "link budget derivations from the default link");
    let g = LinkGeometry::reference();
    c.near("h_l", g.h_l(), 0.516, 0.001);
    c.near("h_g [1e-3]", g.h_g() * 1e3, 1.3, 0.05);
    c.check(
        (g.beam_waist() - 1.98).abs() < 1e-12,
        format!("w_z = {} m (target 1.98 from θ·z/2)", g.beam_waist()),
    );
    c
}

fn c2() -> Criterion {
    let mut c = Criterion::new(
        2,
        "E[H] at the nine operating points, closed form and quadrature",
    );
    let g = LinkGeometry::reference();
    let spec = QuadratureSpec::with_tolerances(1e-11, 0.0);
    for (s, r, printed) in PUBLISHED_MEANS {
        let f = FadingModel::new(&g, r, s).expect("fading model");
        let closed = f.moment(1).expect("closed-form mean");
        match f.expectation(|h| h, f64::INFINITY, &spec) {
            Ok(quad) => {
                let ok =
                    (closed / printed - 1.0).abs() <= 0.01 && (quad / printed - 1.0).abs() <= 0.01;
                c.check(ok, format!("({s}, {r}): closed {closed:.4e}, quadrature {quad:.4e}, printed {printed:.2e}"));
            }
            Err(e) => c.error(&format!("({s}, {r}) quadrature"), e),
        }
    }
    c
}

fn c3() -> Criterion {
    let mut c = Criterion::new(3, "second-moment normalisations of H_a and H_p");
    let g = LinkGeometry::reference();
    let spec = QuadratureSpec::with_tolerances(1e-12, 0.0);
    let n = 10_000_000u64;
    for (i, &(s, r)) in REFERENCE_GRID.iter().enumerate() {
        let f = FadingModel::new(&g, r, s).expect("fading model");
        let sig2 = f.sigma2();
        let gauss = |x: f64| {
            let z = x - f.delta();
            (2.0 * x - z * z / (2.0 * sig2)).exp() / (2.0 * std::f64::consts::PI * sig2).sqrt()
        };
        let (g2, k) = (f.gamma_sq(), f.kappa());
        let ha = integrate(gauss, f64::NEG_INFINITY, f64::INFINITY, &spec).map(|e| e.value);
        let hp =
            integrate(|h: f64| g2 / k.powf(g2) * h.powf(g2 + 1.0), 0.0, k, &spec).map(|e| e.value);
        match (ha, hp) {
            (Ok(ha), Ok(hp)) => {
                c.check(
                    (ha - 1.0).abs() <= 1e-7 && (hp - 1.0).abs() <= 1e-7,
                    format!(
                        "({s}, {r}) quadrature: E[H_a²] − 1 = {:.1e}, E[H_p²] − 1 = {:.1e}",
                        ha - 1.0,
                        hp - 1.0
                    ),
                );
            }
            (a, b) => c.error(&format!("({s}, {r}) quadrature"), format!("{a:?} {b:?}")),
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let (mut sa, mut sa2, mut sp, mut sp2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a2 = f.sample_turbulence(&mut rng).powi(2);
            let p2 = f.sample_pointing(&mut rng).powi(2);
            sa += a2;
            sa2 += a2 * a2;
            sp += p2;
            sp2 += p2 * p2;
        }
        let nf = n as f64;
        let z = |sum: f64, sq: f64| {
            let mean = sum / nf;
            (mean - 1.0) / ((sq / nf - mean * mean) / nf).sqrt()
        };
        let (za, zp) = (z(sa, sa2), z(sp, sp2));
        c.check(
            za.abs() <= 3.0 && zp.abs() <= 3.0,
            format!("({s}, {r}) sampling n = 1e7: z-scores {za:+.2}, {zp:+.2}"),
        );
    }
    c
}

fn gap(
    c: &mut Criterion,
    label: &str,
    expr: Expression,
    o: &OperatingPoint,
    thr: f64,
    range: (f64, f64),
    target: f64,
    tol: f64,
) {
    match delta_gap_refined(expr, o, thr, range.0, range.1) {
        Ok(d) => {
            c.near(label, d, target, tol);
        }
        Err(e) => c.error(label, e),
    }
}

fn c4() -> Criterion {
    let mut c = Criterion::new(4, "OOK power gaps at BER 3.84e-3");
    let piecewise = [0.20, 0.07, 0.09];
    let simple = [1.13, 0.44, 0.69];
    for (i, &pt) in HEADLINE_POINTS.iter().enumerate() {
        let o = op(pt, 2, 0.0);
        let t = tag(pt);
        gap(
            &mut c,
            &format!("{t} piecewise Δ"),
            Expression::BerOokPiecewise,
            &o,
            BER_THRESHOLD,
            (-4.0, 20.0),
            piecewise[i],
            0.03,
        );
        gap(
            &mut c,
            &format!("{t} simple-tail Δ"),
            Expression::BerOokSimple,
            &o,
            BER_THRESHOLD,
            (-4.0, 20.0),
            simple[i],
            0.05,
        );
    }
    c
}

fn c5() -> Criterion {
    let mut c = Criterion::new(5, "OOK approximation/exact ratios at high power");
    let p_top = 20.0;
    for &pt in HEADLINE_POINTS.iter() {
        let o = op(pt, 2, p_top);
        match (avg_ber_ook_approx_piecewise(&o), avg_ber_ook_exact(&o)) {
            (Ok(a), Ok(e)) => {
                let ratio = a / e;
                c.check(
                    (1.02..=1.06).contains(&ratio),
                    format!(
                        "{} piecewise/exact at {p_top} dBm = {ratio:.4} (target [1.02, 1.06])",
                        tag(pt)
                    ),
                );
            }
            (a, e) => c.error(&tag(pt), format!("{a:?} {e:?}")),
        }
    }
    // The simple-tail form underflows f64 beyond ~15 dBm; compare in logs.
    let pt = HEADLINE_POINTS[0];
    let log10_ratio = |p: f64| -> Result<f64, fsolink::Error> {
        let o = op(pt, 2, p);
        Ok(
            (ln_avg_ber_ook_approx_simple(&o)? - avg_ber_ook_exact(&o)?.ln())
                / std::f64::consts::LN_10,
        )
    };
    match (log10_ratio(p_top - 1.0), log10_ratio(p_top)) {
        (Ok(before), Ok(last)) => {
            c.check(
                last < 0.5f64.log10() && last < before,
                format!(
                    "{} simple-tail/exact: 10^{before:.1} at {} dBm, 10^{last:.1} at {p_top} dBm (target < 0.5, decreasing)",
                    tag(pt),
                    p_top - 1.0
                ),
            );
        }
        (a, b) => c.error("simple-tail ratio", format!("{a:?} {b:?}")),
    }
    c
}

fn c6() -> Criterion {
    let mut c = Criterion::new(6, "4-PAM power gaps at SER 1e-3");
    for (&pt, target) in HEADLINE_POINTS.iter().zip([0.19, 0.06, 0.07]) {
        gap(
            &mut c,
            &format!("{} Δ", tag(pt)),
            APPROX,
            &op(pt, 4, 0.0),
            SER_THRESHOLD,
            (0.0, 30.0),
            target,
            0.03,
        );
    }
    c
}

fn c7() -> Criterion {
    let mut c = Criterion::new(7, "M-PAM family at (0.35, 0.1): gaps and ordering");
    let pt = HEADLINE_POINTS[0];
    let orders = [2u32, 4, 8, 16, 32];
    for m in orders {
        let label = format!("M = {m} Δ");
        match delta_gap_refined(APPROX, &op(pt, m, 0.0), SER_THRESHOLD, -10.0, 40.0) {
            Ok(d) => {
                c.check(
                    (0.18..=0.21).contains(&d),
                    format!("{label} = {d:.4} (target [0.18, 0.21])"),
                );
            }
            Err(e) => c.error(&label, e),
        }
    }
    let powers: Vec<f64> = (0..=64).map(|i| -5.0 + 0.5 * i as f64).collect();
    let mut violations = Vec::new();
    for &p in &powers {
        let curve: Result<Vec<f64>, _> = orders
            .iter()
            .map(|&m| avg_ser_exact(&op(pt, m, p)))
            .collect();
        match curve {
            Ok(v) if v.windows(2).all(|w| w[0] < w[1]) => {}
            Ok(_) => violations.push(p),
            Err(e) => {
                c.error(&format!("SER at {p} dBm"), e);
            }
        }
    }
    c.check(
        violations.is_empty(),
        format!("exact SER strictly increasing in M at {} powers in [-5, 27] dBm; violations at {violations:?}", powers.len()),
    );
    c
}

fn c8() -> Criterion {
    let mut c = Criterion::new(8, "power increase per extra bit at SER 1e-3");
    let m2 = [5.06, 5.23, 5.36];
    for (i, &pt) in HEADLINE_POINTS.iter().enumerate() {
        let o = op(pt, 2, 0.0);
        for (m, target) in [(2, m2[i]), (9, 3.02)] {
            let label = format!("{} m = {m} ΔP", tag(pt));
            match power_increase_for_next_bit(&o, m, 1e-3, PowerStepVariant::Exact) {
                Ok(d) => {
                    c.near(&label, d, target, 0.1);
                }
                Err(e) => c.error(&label, e),
            }
        }
        match power_increase_for_next_bit(&o, 5, 1e-3, PowerStepVariant::Dense) {
            Ok(d) => {
                c.check(
                    d == dense_power_step_db(),
                    format!(
                        "{} dense ΔP = {d:.16} (10·log10 2 = {:.16})",
                        tag(pt),
                        dense_power_step_db()
                    ),
                );
            }
            Err(e) => c.error("dense", e),
        }
    }
    c
}

fn ratio_at(
    expr: fn(&OperatingPoint) -> fsolink::Result<f64>,
    o: &OperatingPoint,
) -> fsolink::Result<f64> {
    Ok(expr(o)? / avg_ser_exact(o)?)
}

fn c9() -> Criterion {
    let mut c = Criterion::new(9, "64-PAM gaps and high-power ratios");
    let range = (16.0, 38.0);
    let thm2 = [0.18, 0.06, 0.07];
    let thm3 = [0.32, 0.39, 0.59];
    let plateau3 = [1.32, 0.83, 0.63];
    for (i, &pt) in HEADLINE_POINTS.iter().enumerate() {
        let o = op(pt, 64, 0.0);
        let t = tag(pt);
        gap(
            &mut c,
            &format!("{t} approximation Δ"),
            APPROX,
            &o,
            SER_THRESHOLD,
            range,
            thm2[i],
            0.03,
        );
        gap(
            &mut c,
            &format!("{t} high-power form Δ"),
            HIGH_POWER,
            &o,
            SER_THRESHOLD,
            range,
            thm3[i],
            0.05,
        );
        let top = o.with_power_dbm(range.1);
        match ratio_at(avg_ser_approx, &top) {
            Ok(r) => {
                c.near(&format!("{t} approximation/exact at 38 dBm"), r, 1.03, 0.05);
            }
            Err(e) => c.error(&t, e),
        }
        match ratio_at(avg_ser_dense_highpower, &top) {
            Ok(r) => {
                c.near(
                    &format!("{t} high-power/exact at 38 dBm"),
                    r,
                    plateau3[i],
                    0.05,
                );
            }
            Err(e) => c.error(&t, e),
        }
    }
    c
}

fn c10() -> Criterion {
    let mut c = Criterion::new(10, "nested double quadrature against the erfc-reduced form");
    let powers = |m: u32| -> [f64; 5] {
        let start = match m {
            2 => 0.0,
            4 => 5.0,
            _ => 20.0,
        };
        std::array::from_fn(|i| start + 5.0 * i as f64)
    };
    for &pt in HEADLINE_POINTS.iter() {
        for m in [2u32, 4, 64] {
            let mut worst: f64 = 0.0;
            let mut failure = None;
            for p in powers(m) {
                let o = op(pt, m, p);
                let mut pairs = vec![(avg_ser_exact(&o), avg_ser_exact_nested(&o))];
                if m == 2 {
                    pairs.push((avg_ber_ook_exact(&o), avg_ber_ook_exact_nested(&o)));
                }
                for pair in pairs {
                    match pair {
                        (Ok(a), Ok(b)) => worst = worst.max((a / b - 1.0).abs()),
                        (a, b) => failure = Some(format!("{p} dBm: {a:?} {b:?}")),
                    }
                }
            }
            match failure {
                None => {
                    c.check(
                        worst <= 1e-8,
                        format!(
                            "{} M = {m}: worst relative difference {worst:.2e} over 5 powers",
                            tag(pt)
                        ),
                    );
                }
                Some(e) => c.error(&format!("{} M = {m}", tag(pt)), e),
            }
        }
    }
    c
}

fn c11() -> Criterion {
    let mut c = Criterion::new(11, "Monte Carlo against exact SER where SER ≥ 1e-4");
    let mc = McConfig::new(10_000_000, 20_240_501).exhaustive();
    let powers: Vec<f64> = (0..=9).map(|i| -3.0 + 3.0 * i as f64).collect();
    for &pt in HEADLINE_POINTS.iter() {
        for m in [2u32, 4, 8, 16] {
            let mut worst: f64 = 0.0;
            let mut count = 0;
            let mut outside = Vec::new();
            for &p in &powers {
                let o = op(pt, m, p);
                let exact = match avg_ser_exact(&o) {
                    Ok(v) => v,
                    Err(e) => {
                        c.error(&format!("{} M = {m} {p} dBm", tag(pt)), e);
                        continue;
                    }
                };
                if exact < 1e-4 {
                    continue;
                }
                match simulate(&o, &mc) {
                    Ok(est) => {
                        let z = (est.ser_hat - exact) / est.ser_standard_error(exact);
                        count += 1;
                        worst = worst.max(z.abs());
                        if z.abs() > 3.0 {
                            outside.push(format!("{p} dBm z = {z:+.2}"));
                        }
                    }
                    Err(e) => c.error(&format!("{} M = {m} {p} dBm", tag(pt)), e),
                }
            }
            c.check(
                outside.is_empty() && count > 0,
                format!(
                    "{} M = {m}: {count} points at n = 1e7, max |z| = {worst:.2}{}",
                    tag(pt),
                    if outside.is_empty() {
                        String::new()
                    } else {
                        format!(", outside: {outside:?}")
                    }
                ),
            );
        }
    }
    c
}

fn c12() -> Criterion {
    let mut c = Criterion::new(12, "property checks");
    let g = LinkGeometry::reference();
    let spec = QuadratureSpec::with_tolerances(1e-11, 0.0);
    let worst_norm = REFERENCE_GRID
        .iter()
        .map(|&(s, r)| {
            let f = FadingModel::new(&g, r, s).expect("fading model");
            f.expectation(|_| 1.0, f64::INFINITY, &spec)
                .map(|v| (v - 1.0).abs())
        })
        .collect::<Result<Vec<_>, _>>();
    match worst_norm {
        Ok(v) => {
            let w = v.into_iter().fold(0.0, f64::max);
            c.check(
                w <= 1e-7,
                format!("composite PDF integrates to 1, worst |∫f − 1| = {w:.1e}"),
            );
        }
        Err(e) => c.error("PDF normalisation", e),
    }

    let mut bounds_ok = true;
    for &pt in HEADLINE_POINTS.iter() {
        for m in [2u32, 4, 16, 64] {
            for p in [-5.0, 5.0, 15.0, 25.0, 35.0] {
                let o = op(pt, m, p);
                let cap = (m as f64 - 1.0) / m as f64;
                bounds_ok &= avg_ser_exact(&o).is_ok_and(|v| v > 0.0 && v <= cap);
                if m == 2 {
                    bounds_ok &= avg_ber_ook_exact(&o).is_ok_and(|v| v > 0.0 && v <= 0.5);
                }
            }
        }
    }
    c.check(
        bounds_ok,
        "exact SER in (0, (M−1)/M] and OOK BER in (0, 1/2] on 60 points",
    );

    let mut worst: f64 = 0.0;
    let mut invariance_err = None;
    for &pt in HEADLINE_POINTS.iter() {
        for m in [2u32, 8, 64] {
            for p in [0.0, 10.0, 20.0] {
                let small = op(pt, m, p);
                let large = small
                    .with_order(ModulationOrder::new(2 * m).expect("order"))
                    .with_power(2.0 * small.power);
                match (avg_ser_dense(&small), avg_ser_dense(&large)) {
                    (Ok(a), Ok(b)) => worst = worst.max((a - b).abs() / a),
                    (a, b) => invariance_err = Some(format!("{a:?} {b:?}")),
                }
            }
        }
    }
    match invariance_err {
        None => {
            c.check(
                worst <= 1e-10,
                format!("dense SER(M, P) = SER(2M, 2P), worst relative gap {worst:.1e}"),
            );
        }
        Some(e) => c.error("dense invariance", e),
    }

    let gray_ok = (1..=10u32).all(|m| {
        let codes: Vec<Vec<bool>> = (0..1u32 << m)
            .map(|j| brgc_encode(j, m).expect("code"))
            .collect();
        let bijective = codes
            .iter()
            .enumerate()
            .all(|(j, b)| brgc_decode(b) == j as u32);
        let mut sorted = codes.clone();
        sorted.sort();
        sorted.dedup();
        let gray = codes
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count() == 1);
        bijective && gray && sorted.len() == codes.len()
    });
    c.check(
        gray_ok,
        "Gray code bijective with unit Hamming steps for m = 1..10",
    );

    let o = op(HEADLINE_POINTS[1], 8, 14.0);
    let mc = McConfig {
        n_symbols: 500_000,
        seed: 5,
        batch_size: 20_000,
        min_errors: Some(200),
    };
    let runs: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&w| simulate_with_workers(&o, &mc, w))
        .collect();
    let same = runs
        .iter()
        .all(|r| r.is_ok() && r.as_ref().ok() == runs[0].as_ref().ok());
    c.check(same, "Monte Carlo identical with 1, 2 and 4 workers");
    c
}

fn main() -> ExitCode {
    let suite: [fn() -> Criterion; 12] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12];
    let mut failed = Vec::new();
    for run in suite {
        let c = run();
        print!("{}", c.render());
        if !c.passed() {
            failed.push(c.id());
        }
    }
    println!();
    if failed.is_empty() {
        println!("acceptance: all 12 criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!(
            "acceptance: {} of 12 criteria FAIL: {failed:?}",
            failed.len()
        );
        ExitCode::FAILURE
    }
}
