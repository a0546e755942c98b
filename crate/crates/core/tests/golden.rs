//! Golden-file checks. Set `MECHLAB_BLESS=1` to rewrite the generated
//! fixtures after an intentional format change.

#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;

use mechlab::analysis::{fit_lpm, Model, RegressionSpec};
use mechlab::equilibrium::DEFAULT_PROFILE_CAP;
use mechlab::sim::dataset::{read_csv, to_csv_string};
use mechlab::sim::{PeriodRecord, RecordKey, SessionDataset};
use mechlab::{BuiltinMechanism, Environment, Game, Mechanism, WorkerType};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check_or_bless(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("MECHLAB_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

/// Cells of the two reference tables, worker 1's report by row.
const DIRECT: [[&str; 2]; 2] = [["(L,M),(L,M)", "(L,P),(H,D)"], ["(H,D),(L,P)", "(H,M),(H,M)"]];
const EXTENDED: [[&str; 3]; 3] = [
    ["(L,M),(L,M)", "(L,P),(H,D)", "(L,P),(H,D)"],
    ["(H,D),(L,P)", "(H,M),(H,M)", "(H,D),(L,P)"],
    ["(H,D),(L,P)", "(L,P),(H,D)", "(L,M),(L,M)"],
];

#[test]
fn rendered_tables_match_golden_files_and_reference_cells() {
    for m in BuiltinMechanism::ALL {
        let mech = m.build();
        let text = mech.render().unwrap();
        check_or_bless(&format!("render_{}.txt", m.name()), &text);
        let labels: Vec<&str> = if m.is_extended() {
            if m.is_explicit() {
                vec!["Beginner", "Expert", "Decline to State"]
            } else {
                vec!["Option A", "Option B", "Option C"]
            }
        } else if m.is_explicit() {
            vec!["Beginner", "Expert"]
        } else {
            vec!["Option A", "Option B"]
        };
        let body: Vec<&str> = text.lines().skip(4).collect();
        assert_eq!(body.len(), labels.len());
        for (r, line) in body.iter().enumerate() {
            let cells: Vec<&str> = line.split('|').map(str::trim).collect();
            assert_eq!(cells[0], labels[r]);
            let expected: Vec<&str> =
                if m.is_extended() { EXTENDED[r].to_vec() } else { DIRECT[r].to_vec() };
            assert_eq!(&cells[1..], expected.as_slice(), "{} row {r}", m.name());
        }
    }
}

/// Ex-post and dominant-strategy counts by a direct double loop over
/// strategy pairs, independent of the library's enumerator.
fn naive_counts(mech: &Mechanism) -> (usize, usize) {
    let env = Environment::principal_worker();
    let k = [mech.messages(0).len(), mech.messages(1).len()];
    let u = |agent: usize, msgs: [usize; 2], own: usize| {
        let outcome = mech.outcome(&msgs).unwrap();
        env.payoff(agent, outcome, own).unwrap()
    };
    let strategies = |n: usize| -> Vec<[usize; 2]> { (0..n * n).map(|s| [s / n, s % n]).collect() };
    let (mut ex_post, mut dominant) = (0, 0);
    for s1 in strategies(k[0]) {
        for s2 in strategies(k[1]) {
            let s = [s1, s2];
            let mut is_ex_post = true;
            for t1 in 0..2 {
                for t2 in 0..2 {
                    let t = [t1, t2];
                    let played = [s1[t1], s2[t2]];
                    for agent in 0..2 {
                        for dev in 0..k[agent] {
                            let mut alt = played;
                            alt[agent] = dev;
                            if u(agent, alt, t[agent]) > u(agent, played, t[agent]) {
                                is_ex_post = false;
                            }
                        }
                    }
                }
            }
            if !is_ex_post {
                continue;
            }
            ex_post += 1;
            let mut is_dominant = true;
            for agent in 0..2 {
                for own in 0..2 {
                    let mine = s[agent][own];
                    for other in 0..k[1 - agent] {
                        for dev in 0..k[agent] {
                            let pack = |m: usize| if agent == 0 { [m, other] } else { [other, m] };
                            if u(agent, pack(dev), own) > u(agent, pack(mine), own) {
                                is_dominant = false;
                            }
                        }
                    }
                }
            }
            if is_dominant {
                dominant += 1;
            }
        }
    }
    (ex_post, dominant)
}

#[test]
fn equilibrium_counts_match_golden_file_and_brute_force() {
    let env = Environment::principal_worker();
    let mut csv = String::from("mechanism,ex_post,dominant_strategy\n");
    for m in BuiltinMechanism::ALL {
        let mech = m.build();
        let reports = Game::new(&env, &mech).unwrap().enumerate_ex_post_equilibria(DEFAULT_PROFILE_CAP).unwrap();
        let dominant = reports.iter().filter(|r| r.dominant_strategy).count();
        assert_eq!((reports.len(), dominant), naive_counts(&mech), "{}", m.name());
        csv.push_str(&format!("{},{},{}\n", m.name(), reports.len(), dominant));
    }
    check_or_bless("equilibrium_counts.csv", &csv);
}

/// Six group-periods in two sessions: session 1 has two 2x2-I and two
/// 2x2-E groups, session 2 one of each. Both workers are beginners; `wo`
/// marks groups that coordinate on claiming expert.
fn lpm_fixture_dataset() -> SessionDataset {
    let env = Environment::principal_worker();
    let rows = [
        (1, BuiltinMechanism::DirectImplicit, true),
        (1, BuiltinMechanism::DirectImplicit, false),
        (1, BuiltinMechanism::DirectExplicit, true),
        (1, BuiltinMechanism::DirectExplicit, true),
        (2, BuiltinMechanism::DirectImplicit, false),
        (2, BuiltinMechanism::DirectExplicit, false),
    ];
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(session, builtin, wo))| {
            let mech = builtin.build();
            let claim = if wo { WorkerType::Expert } else { WorkerType::Beginner };
            let msg = |seat| mech.canonical_message(seat, claim.index()).unwrap();
            PeriodRecord::evaluate(
                &env,
                &mech,
                builtin,
                RecordKey { session, period: 4, group: i + 1 },
                [3 * i + 1, 3 * i + 2, 3 * i + 3],
                [WorkerType::Beginner; 2],
                [msg(0), msg(1)],
                false,
                true,
            )
            .unwrap()
        })
        .collect();
    SessionDataset { records, meta: Default::default() }
}

#[test]
fn lpm_fixture_matches_closed_form() {
    let text = to_csv_string(&lpm_fixture_dataset()).unwrap();
    check_or_bless("lpm_fixture.csv", &text);
    let ds = read_csv(std::fs::read(golden("lpm_fixture.csv")).unwrap().as_slice()).unwrap();
    let fit = fit_lpm(&ds, &RegressionSpec::standard(Model::EqWorkerOptimal)).unwrap();

    let expected = std::fs::read_to_string(golden("lpm_fixture_expected.csv")).unwrap();
    let mut rows = 0;
    for line in expected.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (coef, se): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let got_coef = fit.coef_of(f[0]).unwrap();
        let got_se = fit.se_of(f[0]).unwrap();
        assert!((got_coef - coef).abs() <= 1e-8 * coef.abs(), "{}: {got_coef} vs {coef}", f[0]);
        assert!((got_se - se).abs() <= 1e-8 * se.abs(), "{}: {got_se} vs {se}", f[0]);
        rows += 1;
    }
    assert_eq!(rows, 2);
    assert_eq!(fit.names, ["2x2-E", "Constant"]);
    assert_eq!(fit.n_clusters, 2);
}
