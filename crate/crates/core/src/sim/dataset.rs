//! CSV export and import of session datasets.
//!
//! One row per subject per group-period: worker in seat 1, worker in seat
//! 2, then the staffer. Columns:
//! `session,period,group,mechanism,subject,role,true_type,message,lie_flag,payoff,practice,paid`.
//! `role` is `worker1`, `worker2` or `staffer`; staffer rows leave
//! `true_type` and `message` empty and have `lie_flag = 0`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::session::{DatasetMeta, PeriodRecord, SessionDataset, StafferObs, WorkerObs};
use crate::env::{Environment, Payoff, WorkerType};
use crate::error::{Error, Result};
use crate::mechanism::{BuiltinMechanism, Mechanism};
use crate::rational;

pub const HEADER: [&str; 12] = [
    "session",
    "period",
    "group",
    "mechanism",
    "subject",
    "role",
    "true_type",
    "message",
    "lie_flag",
    "payoff",
    "practice",
    "paid",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    session: usize,
    period: u32,
    group: usize,
    mechanism: String,
    subject: usize,
    role: String,
    true_type: String,
    message: String,
    lie_flag: u8,
    payoff: String,
    practice: u8,
    paid: u8,
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

fn rows_of(r: &PeriodRecord) -> [Row; 3] {
    let worker = |seat: usize| {
        let w = &r.workers[seat];
        Row {
            session: r.session,
            period: r.period,
            group: r.group,
            mechanism: r.mechanism.name().into(),
            subject: w.subject,
            role: format!("worker{}", seat + 1),
            true_type: w.true_type.code().into(),
            message: w.message_id.clone(),
            lie_flag: flag(w.lie),
            payoff: rational::format(w.payoff),
            practice: flag(r.practice),
            paid: flag(r.paid),
        }
    };
    [
        worker(0),
        worker(1),
        Row {
            session: r.session,
            period: r.period,
            group: r.group,
            mechanism: r.mechanism.name().into(),
            subject: r.staffer.subject,
            role: "staffer".into(),
            true_type: String::new(),
            message: String::new(),
            lie_flag: 0,
            payoff: r.staffer.payoff.to_string(),
            practice: flag(r.practice),
            paid: flag(r.paid),
        },
    ]
}

pub fn write_csv<W: Write>(ds: &SessionDataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in &ds.records {
        for row in rows_of(r) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(ds: &SessionDataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn schema(line: u64, column: &str, msg: impl std::fmt::Display) -> Error {
    Error::DataIntegrity(format!("line {line}, column {column}: {msg}"))
}

fn bool_flag(line: u64, column: &str, v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(schema(line, column, format!("expected 0 or 1, found {v}"))),
    }
}

/// Reads a dataset, re-deriving claims, lies and payoffs from the named
/// mechanism and checking them against the recorded columns.
pub fn read_csv<R: Read>(input: R) -> Result<SessionDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    for (i, expected) in HEADER.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *expected => {}
            Some(h) => return Err(schema(1, expected, format!("header has {h:?} in position {}", i + 1))),
            None => return Err(schema(1, expected, "missing from header")),
        }
    }
    if headers.len() > HEADER.len() {
        return Err(schema(1, &headers[HEADER.len()], "unexpected extra column"));
    }

    let env = Environment::principal_worker();
    let mut mechs: BTreeMap<BuiltinMechanism, Mechanism> = BTreeMap::new();
    type Key = (usize, u32, usize);
    let mut groups: BTreeMap<Key, (BuiltinMechanism, Vec<(u64, Row)>)> = BTreeMap::new();

    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => {
                    err.field().and_then(|f| HEADER.get(f as usize)).copied().unwrap_or("?")
                }
                _ => "?",
            };
            schema(line, column, e)
        })?;
        let builtin = BuiltinMechanism::from_name(&row.mechanism)
            .ok_or_else(|| schema(line, "mechanism", format!("unknown mechanism {:?}", row.mechanism)))?;
        let entry = groups.entry((row.session, row.period, row.group)).or_insert_with(|| (builtin, Vec::new()));
        if entry.0 != builtin {
            return Err(schema(line, "mechanism", "mechanism changes within a group"));
        }
        mechs.entry(builtin).or_insert_with(|| builtin.build());
        entry.1.push((line, row));
    }

    let mut records = Vec::with_capacity(groups.len());
    for ((session, period, group), (builtin, rows)) in groups {
        let mech = &mechs[&builtin];
        let first_line = rows[0].0;
        let find = |role: &str| -> Result<&(u64, Row)> {
            let mut it = rows.iter().filter(|(_, r)| r.role == role);
            let found = it.next().ok_or_else(|| schema(first_line, "role", format!("group lacks a {role} row")))?;
            if let Some((l, _)) = it.next() {
                return Err(schema(*l, "role", format!("duplicate {role} row")));
            }
            Ok(found)
        };
        if let Some((l, r)) = rows.iter().find(|(_, r)| !matches!(r.role.as_str(), "worker1" | "worker2" | "staffer")) {
            return Err(schema(*l, "role", format!("unknown role {:?}", r.role)));
        }
        let (practice, paid) = {
            let (l, r) = &rows[0];
            (bool_flag(*l, "practice", r.practice)?, bool_flag(*l, "paid", r.paid)?)
        };
        for (l, r) in &rows {
            if bool_flag(*l, "practice", r.practice)? != practice || bool_flag(*l, "paid", r.paid)? != paid {
                return Err(schema(*l, "practice", "flags differ within a group"));
            }
        }
        let mut msgs = [0usize; 2];
        let mut partial = Vec::with_capacity(2);
        for (seat, slot) in msgs.iter_mut().enumerate() {
            let (l, r) = find(&format!("worker{}", seat + 1))?;
            let ty = WorkerType::from_code(&r.true_type)
                .ok_or_else(|| schema(*l, "true_type", format!("expected B or E, found {:?}", r.true_type)))?;
            let m = mech
                .message_index(seat, &r.message)
                .ok_or_else(|| schema(*l, "message", format!("{:?} is not a {} message", r.message, mech.name)))?;
            *slot = m;
            partial.push((*l, r, ty, m));
        }
        let outcome = mech.outcome(&msgs)?;
        let mut workers = Vec::with_capacity(2);
        for (seat, (l, r, ty, m)) in partial.into_iter().enumerate() {
            let lie = mech.message_is_lie(seat, ty.index(), m)?;
            if bool_flag(l, "lie_flag", r.lie_flag)? != lie {
                return Err(schema(l, "lie_flag", "does not match the message and type"));
            }
            let payoff: Payoff = rational::parse(&r.payoff).map_err(|e| schema(l, "payoff", e))?;
            if payoff != env.payoff(seat, outcome, ty.index())? {
                return Err(schema(l, "payoff", "does not match the mechanism outcome"));
            }
            let msg = &mech.messages(seat)[m];
            workers.push(WorkerObs {
                subject: r.subject,
                true_type: ty,
                message: m,
                message_id: msg.id.clone(),
                claim: msg.canonical.and_then(WorkerType::from_index),
                payoff,
                lie,
            });
        }
        let (sl, sr) = find("staffer")?;
        let staffer_pay: i64 = sr.payoff.parse().map_err(|_| schema(*sl, "payoff", "staffer payoff must be an integer"))?;
        let types = [workers[0].true_type, workers[1].true_type];
        let inferred = mech.inferred_types(&msgs)?;
        let identified = [0, 1].map(|i| WorkerType::from_index(inferred[i]).expect("binary types"));
        if staffer_pay != crate::env::staffer_payoff(types, identified) {
            return Err(schema(*sl, "payoff", "staffer payoff does not match the identified types"));
        }
        let [w0, w1]: [WorkerObs; 2] = workers.try_into().expect("two workers");
        records.push(PeriodRecord {
            session,
            mechanism: builtin,
            period,
            group,
            workers: [w0, w1],
            staffer: StafferObs { subject: sr.subject, payoff: staffer_pay },
            practice,
            paid,
        });
    }
    Ok(SessionDataset { records, meta: DatasetMeta::default() })
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

pub fn write_files(ds: &SessionDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(ds, std::io::BufWriter::new(file))?;
    let meta = toml::to_string(&ds.meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(meta_path(path), meta)?;
    Ok(())
}

/// Reads the CSV and, if present, its metadata sidecar.
pub fn read_files(path: &Path) -> Result<SessionDataset> {
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(std::io::BufReader::new(file))?;
    let mp = meta_path(path);
    if mp.exists() {
        let text = std::fs::read_to_string(&mp)?;
        ds.meta = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", mp.display())))?;
    }
    Ok(ds)
}
