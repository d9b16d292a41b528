//! Per-client feature engineering: note-tag features, transaction RFM
//! features and VIX-weighted trading frequency, joined with labels.
//!
//! Every feature is computed from data dated on or before `as_of`; later
//! records are rejected with [`Error::Leakage`] rather than filtered.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::RawNote;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::tagging::TagEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxnType {
    Buy,
    Sell,
    Exchange,
    Other,
}

impl TxnType {
    pub const ALL: [TxnType; 4] = [TxnType::Buy, TxnType::Sell, TxnType::Exchange, TxnType::Other];

    pub fn name(self) -> &'static str {
        match self {
            TxnType::Buy => "buy",
            TxnType::Sell => "sell",
            TxnType::Exchange => "exchange",
            TxnType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub client_id: String,
    pub date: NaiveDate,
    pub account_id: String,
    pub instrument: String,
    pub txn_type: TxnType,
    pub amount: f64,
}

pub fn read_transactions<R: Read>(r: R) -> Result<Vec<TransactionRecord>> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let line = i + 2;
        let rec: TransactionRecord = row.map_err(|e| Error::parse("transactions", line, e))?;
        if !(rec.amount.is_finite() && rec.amount >= 0.0) {
            return Err(Error::parse("transactions", line, "amount must be finite and nonnegative"));
        }
        if rec.client_id.is_empty() {
            return Err(Error::parse("transactions", line, "empty client_id"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_transactions<W: Write>(w: W, records: &[TransactionRecord]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if records.is_empty() {
        out.write_record(["client_id", "date", "account_id", "instrument", "txn_type", "amount"])?;
    }
    for r in records {
        out.serialize(r)?;
    }
    out.flush()
}

/// Daily closes with strictly increasing dates and positive values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VixSeries {
    points: Vec<(NaiveDate, f64)>,
}

impl VixSeries {
    pub fn new(points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        for (i, &(d, c)) in points.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Schema(format!("VIX close on {d} must be positive")));
            }
            if i > 0 && points[i - 1].0 >= d {
                return Err(Error::Schema(format!("VIX dates not strictly increasing at {d}")));
            }
        }
        Ok(VixSeries { points })
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn until(&self, as_of: NaiveDate) -> VixSeries {
        VixSeries {
            points: self.points.iter().copied().filter(|(d, _)| *d <= as_of).collect(),
        }
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            close: f64,
        }
        let points = csv::Reader::from_reader(r)
            .deserialize()
            .enumerate()
            .map(|(i, row)| row.map(|r: Row| (r.date, r.close)).map_err(|e| Error::parse("vix", i + 2, e)))
            .collect::<Result<_>>()?;
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,close")?;
        for (d, c) in &self.points {
            writeln!(w, "{d},{}", fmt_f64(*c))?;
        }
        Ok(())
    }
}

/// Monday of the ISO week containing `d`.
pub fn week_start(d: NaiveDate) -> NaiveDate {
    d - Duration::days(d.weekday().num_days_from_monday() as i64)
}

/// Mean close per ISO week, keyed by the week's Monday.
pub fn weekly_vix(series: &VixSeries) -> Vec<(NaiveDate, f64)> {
    let mut weeks: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for &(d, c) in series.points() {
        let e = weeks.entry(week_start(d)).or_default();
        e.0 += c;
        e.1 += 1;
    }
    weeks.into_iter().map(|(w, (s, n))| (w, s / n as f64)).collect()
}

/// Sample standard deviation of log returns.
pub fn volatility(prices: &[f64]) -> Result<f64> {
    if prices.len() < 2 {
        return Err(Error::Config("volatility needs at least two prices".into()));
    }
    if prices.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::Schema("prices must be positive and finite".into()));
    }
    let r: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if r.len() < 2 {
        return Ok(0.0);
    }
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let ss: f64 = r.iter().map(|x| (x - mean).powi(2)).sum();
    Ok((ss / (r.len() - 1) as f64).sqrt())
}

/// Named feature columns for a set of clients. Clients absent from `rows`
/// take `empty` (zeros plus any sentinels).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureGroup {
    pub names: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
    pub empty: Vec<f64>,
}

impl FeatureGroup {
    pub fn row(&self, client: &str) -> &[f64] {
        self.rows.get(client).map_or(&self.empty, Vec::as_slice)
    }

    pub fn value(&self, client: &str, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.row(client)[i])
    }
}

fn leakage<'a>(as_of: NaiveDate, late: impl Iterator<Item = (NaiveDate, &'a str)>) -> Result<()> {
    let late: Vec<(NaiveDate, &str)> = late.filter(|(d, _)| *d > as_of).collect();
    match late.first() {
        None => Ok(()),
        Some((d, what)) => Err(Error::Leakage {
            as_of,
            count: late.len(),
            first: format!("{what} dated {d}"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxnFeatureConfig {
    pub lookback_days: i64,
}

impl Default for TxnFeatureConfig {
    fn default() -> Self {
        TxnFeatureConfig { lookback_days: 182 }
    }
}

pub const TXN_FEATURES: [&str; 22] = [
    "recency_days",
    "trades_7d",
    "trades_30d",
    "gap_std_days",
    "trade_count",
    "buy_count",
    "sell_count",
    "exchange_count",
    "other_count",
    "account_count",
    "max_account_trades",
    "repeat_instrument_trades",
    "trading_days",
    "total_amount",
    "buy_amount",
    "sell_amount",
    "exchange_amount",
    "other_amount",
    "max_account_amount",
    "repeat_instrument_amount",
    "vix_weighted_weekly_trades",
    "mean_weekly_trades",
];

/// Transaction features over `[as_of − lookback, as_of]` for every client in
/// `records` or `clients`. Clients without trades get zeros and
/// `recency_days = lookback` (the sentinel).
pub fn txn_features(
    records: &[TransactionRecord],
    vix: &VixSeries,
    as_of: NaiveDate,
    config: &TxnFeatureConfig,
    clients: &[String],
) -> Result<FeatureGroup> {
    leakage(as_of, records.iter().map(|r| (r.date, r.client_id.as_str())))?;
    if config.lookback_days < 1 {
        return Err(Error::Config("lookback_days must be at least 1".into()));
    }
    let start = as_of - Duration::days(config.lookback_days);
    let weeks: Vec<(NaiveDate, f64)> = weekly_vix(&vix.until(as_of))
        .into_iter()
        .filter(|(w, _)| *w + Duration::days(6) >= start)
        .collect();
    let vix_mass: f64 = weeks.iter().map(|(_, v)| v).sum();

    let mut by_client: BTreeMap<&str, Vec<&TransactionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.date >= start) {
        by_client.entry(&r.client_id).or_default().push(r);
    }
    let mut empty = vec![0.0; TXN_FEATURES.len()];
    empty[0] = config.lookback_days as f64;

    let mut rows = BTreeMap::new();
    for c in clients {
        rows.insert(c.clone(), empty.clone());
    }
    for (client, mut recs) in by_client {
        recs.sort_by_key(|r| r.date);
        let age = |d: NaiveDate| (as_of - d).num_days();
        let days: BTreeSet<NaiveDate> = recs.iter().map(|r| r.date).collect();
        let days: Vec<NaiveDate> = days.into_iter().collect();
        let gaps: Vec<f64> = days.windows(2).map(|w| (w[1] - w[0]).num_days() as f64).collect();
        let gap_std = if gaps.len() < 2 {
            0.0
        } else {
            let m = gaps.iter().sum::<f64>() / gaps.len() as f64;
            (gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64).sqrt()
        };
        let mut type_count = HashMap::new();
        let mut type_amount = HashMap::new();
        let mut acct: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        let mut instr: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        let mut per_week: HashMap<NaiveDate, f64> = HashMap::new();
        for r in &recs {
            *type_count.entry(r.txn_type).or_insert(0.0) += 1.0;
            *type_amount.entry(r.txn_type).or_insert(0.0) += r.amount;
            let a = acct.entry(&r.account_id).or_default();
            a.0 += 1.0;
            a.1 += r.amount;
            let i = instr.entry(&r.instrument).or_default();
            i.0 += 1.0;
            i.1 += r.amount;
            *per_week.entry(week_start(r.date)).or_default() += 1.0;
        }
        let repeat = instr.values().filter(|(n, _)| *n >= 2.0);
        let (repeat_n, repeat_amt) = repeat.fold((0.0, 0.0), |(n, a), (rn, ra)| (n + rn, a + ra));
        let (vix_weighted, mean_weekly) = if weeks.is_empty() {
            (0.0, 0.0)
        } else {
            let counts = weeks.iter().map(|(w, v)| (per_week.get(w).copied().unwrap_or(0.0), v));
            let weighted: f64 = counts.clone().map(|(n, v)| n * v).sum::<f64>() / vix_mass;
            let plain = counts.map(|(n, _)| n).sum::<f64>() / weeks.len() as f64;
            (weighted, plain)
        };
        let tc = |t: TxnType| type_count.get(&t).copied().unwrap_or(0.0);
        let ta = |t: TxnType| type_amount.get(&t).copied().unwrap_or(0.0);
        let row = vec![
            age(days[days.len() - 1]) as f64,
            recs.iter().filter(|r| age(r.date) < 7).count() as f64,
            recs.iter().filter(|r| age(r.date) < 30).count() as f64,
            gap_std,
            recs.len() as f64,
            tc(TxnType::Buy),
            tc(TxnType::Sell),
            tc(TxnType::Exchange),
            tc(TxnType::Other),
            acct.len() as f64,
            acct.values().map(|a| a.0).fold(0.0, f64::max),
            repeat_n,
            days.len() as f64,
            recs.iter().map(|r| r.amount).sum(),
            ta(TxnType::Buy),
            ta(TxnType::Sell),
            ta(TxnType::Exchange),
            ta(TxnType::Other),
            acct.values().map(|a| a.1).fold(0.0, f64::max),
            repeat_amt,
            vix_weighted,
            mean_weekly,
        ];
        rows.insert(client.to_string(), row);
    }
    Ok(FeatureGroup {
        names: TXN_FEATURES.iter().map(|s| s.to_string()).collect(),
        rows,
        empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteFeatureConfig {
    pub half_life_days: f64,
    /// Value of `days_since_last` for a topic never tagged; also its cap.
    pub sentinel_days: f64,
}

impl Default for NoteFeatureConfig {
    fn default() -> Self {
        NoteFeatureConfig {
            half_life_days: 30.0,
            sentinel_days: 182.0,
        }
    }
}

pub const NOTE_STATS: [&str; 6] = ["count", "rate", "recency_weighted", "mean_similarity", "max_similarity", "days_since_last"];

/// Notes per client dated on or before `as_of`; later notes are leakage.
pub fn note_counts(notes: &[RawNote], as_of: NaiveDate) -> Result<BTreeMap<String, usize>> {
    leakage(as_of, notes.iter().map(|n| (n.date, n.note_id.as_str())))?;
    let mut counts = BTreeMap::new();
    for n in notes {
        *counts.entry(n.client_id.clone()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Six features per topic: tag count, count per note, recency-weighted count
/// `Σ 2^(−age/half_life)`, mean and max similarity, days since last tag.
pub fn note_features(
    events: &[TagEvent],
    note_counts: &BTreeMap<String, usize>,
    topics: &[String],
    as_of: NaiveDate,
    config: &NoteFeatureConfig,
) -> Result<FeatureGroup> {
    leakage(as_of, events.iter().map(|e| (e.date, e.note_id.as_str())))?;
    if !(config.half_life_days > 0.0) {
        return Err(Error::Config("half_life_days must be positive".into()));
    }
    let topic_index: HashMap<&str, usize> = topics.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let stats = NOTE_STATS.len();
    let mut empty = vec![0.0; stats * topics.len()];
    for t in 0..topics.len() {
        empty[t * stats + 5] = config.sentinel_days;
    }
    let mut rows: BTreeMap<String, Vec<f64>> = note_counts.keys().map(|c| (c.clone(), empty.clone())).collect();
    let mut sims: HashMap<(&str, usize), Vec<f64>> = HashMap::new();
    for e in events {
        let Some(&t) = topic_index.get(e.topic.as_str()) else {
            continue;
        };
        let row = rows.entry(e.client_id.clone()).or_insert_with(|| empty.clone());
        let age = (as_of - e.date).num_days() as f64;
        row[t * stats] += 1.0;
        row[t * stats + 2] += (-age / config.half_life_days).exp2();
        row[t * stats + 5] = row[t * stats + 5].min(age);
        sims.entry((&e.client_id, t)).or_default().push(e.similarity);
    }
    for ((client, t), s) in sims {
        let row = rows.get_mut(client).expect("row created with event");
        row[t * stats + 3] = s.iter().sum::<f64>() / s.len() as f64;
        row[t * stats + 4] = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    for (client, row) in rows.iter_mut() {
        let notes = note_counts.get(client).copied().unwrap_or(0).max(1) as f64;
        for t in 0..topics.len() {
            row[t * stats + 1] = row[t * stats] / notes;
        }
    }
    let names = topics
        .iter()
        .flat_map(|t| NOTE_STATS.iter().map(move |s| format!("{t}.{s}")))
        .collect();
    Ok(FeatureGroup { names, rows, empty })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub client_id: String,
    pub label: u8,
    pub values: Vec<f64>,
}

/// Joined feature table: `note.*` columns then `txn.*` columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

/// Outer join of both groups and every labeled client, ordered by client id.
pub fn build_dataset(notes: &FeatureGroup, txns: &FeatureGroup, labels: &BTreeMap<String, u8>) -> Result<FeatureTable> {
    let clients: BTreeSet<&String> = notes.rows.keys().chain(txns.rows.keys()).chain(labels.keys()).collect();
    let missing: Vec<String> = clients.iter().filter(|c| !labels.contains_key(**c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    if let Some((c, l)) = labels.iter().find(|(_, &l)| l > 1) {
        return Err(Error::Schema(format!("label {l} for {c} is not 0 or 1")));
    }
    let names = notes
        .names
        .iter()
        .map(|n| format!("note.{n}"))
        .chain(txns.names.iter().map(|n| format!("txn.{n}")))
        .collect::<Vec<_>>();
    let unique: HashSet<&String> = names.iter().collect();
    if unique.len() != names.len() {
        return Err(Error::Schema("duplicate feature names".into()));
    }
    let rows = clients
        .into_iter()
        .map(|c| {
            let values: Vec<f64> = notes.row(c).iter().chain(txns.row(c)).copied().collect();
            FeatureRow { client_id: c.clone(), label: labels[c], values }
        })
        .collect::<Vec<_>>();
    if rows.iter().flat_map(|r| &r.values).any(|v| !v.is_finite()) {
        return Err(Error::Schema("non-finite feature value".into()));
    }
    Ok(FeatureTable { names, rows })
}

impl FeatureTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "client_id,label")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{},{}", r.client_id, r.label)?;
            for v in &r.values {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers().map_err(|e| Error::parse("dataset", 1, e))?.clone();
        if header.len() < 2 || &header[0] != "client_id" || &header[1] != "label" {
            return Err(Error::parse("dataset", 1, "header must start with client_id,label"));
        }
        let names: Vec<String> = header.iter().skip(2).map(String::from).collect();
        if let Some(bad) = names.iter().find(|n| !(n.starts_with("note.") || n.starts_with("txn."))) {
            return Err(Error::parse("dataset", 1, format!("feature `{bad}` lacks a note./txn. prefix")));
        }
        if names.iter().collect::<HashSet<_>>().len() != names.len() {
            return Err(Error::parse("dataset", 1, "duplicate feature names"));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse("dataset", line, e))?;
            let label = match &rec[1] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::parse("dataset", line, format!("label `{other}` is not 0 or 1"))),
            };
            let values = rec
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::parse("dataset", line, "non-finite or unparsable value"))?;
            rows.push(FeatureRow { client_id: rec[0].to_string(), label, values });
        }
        Ok(FeatureTable { names, rows })
    }
}

pub fn read_labels<R: Read>(r: R) -> Result<BTreeMap<String, u8>> {
    #[derive(Deserialize)]
    struct Row {
        client_id: String,
        label: u8,
    }
    let mut out = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let row: Row = row.map_err(|e| Error::parse("labels", i + 2, e))?;
        if row.label > 1 {
            return Err(Error::parse("labels", i + 2, "label must be 0 or 1"));
        }
        if out.insert(row.client_id.clone(), row.label).is_some() {
            return Err(Error::parse("labels", i + 2, format!("duplicate client `{}`", row.client_id)));
        }
    }
    Ok(out)
}

pub fn write_labels<W: Write>(mut w: W, labels: &BTreeMap<String, u8>) -> std::io::Result<()> {
    writeln!(w, "client_id,label")?;
    for (c, l) in labels {
        writeln!(w, "{c},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        crate::io::parse_date(s).unwrap()
    }

    fn txn(client: &str, date: &str, kind: TxnType, amount: f64) -> TransactionRecord {
        TransactionRecord {
            client_id: client.into(),
            date: d(date),
            account_id: "acct".into(),
            instrument: "SPY".into(),
            txn_type: kind,
            amount,
        }
    }

    fn event(client: &str, date: &str, topic: &str, sim: f64) -> TagEvent {
        TagEvent {
            note_id: format!("{client}-{date}"),
            client_id: client.into(),
            date: d(date),
            topic: topic.into(),
            token: "market".into(),
            similarity: sim,
            position: 0,
        }
    }

    #[test]
    fn weekly_means_and_volatility() {
        // 2024-01-01 is a Monday.
        let s = VixSeries::new((1..=5).map(|i| (d(&format!("2024-01-0{i}")), 10.0)).collect()).unwrap();
        assert_eq!(weekly_vix(&s), vec![(d("2024-01-01"), 10.0)]);
        let s = VixSeries::new(vec![(d("2024-01-02"), 10.0), (d("2024-01-05"), 20.0), (d("2024-01-08"), 30.0)]).unwrap();
        assert_eq!(weekly_vix(&s), vec![(d("2024-01-01"), 15.0), (d("2024-01-08"), 30.0)]);
        assert!(VixSeries::new(vec![(d("2024-01-02"), 10.0), (d("2024-01-02"), 11.0)]).is_err());
        assert!(VixSeries::new(vec![(d("2024-01-02"), 0.0)]).is_err());

        assert_eq!(volatility(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((volatility(&[1.0, e, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(volatility(&[1.0, -1.0]).is_err());
        assert!(volatility(&[1.0]).is_err());
    }

    #[test]
    fn single_buy_and_sentinel() {
        let vix = VixSeries::default();
        let g = txn_features(&[txn("c1", "2024-06-30", TxnType::Buy, 100.0)], &vix, d("2024-06-30"), &Default::default(), &["c2".into()]).unwrap();
        assert_eq!(g.value("c1", "recency_days"), Some(0.0));
        assert_eq!(g.value("c1", "buy_count"), Some(1.0));
        assert_eq!(g.value("c1", "buy_amount"), Some(100.0));
        assert_eq!(g.value("c2", "recency_days"), Some(182.0));
        assert!(g.row("c2")[1..].iter().all(|&v| v == 0.0));
        assert_eq!(g.row("nobody"), g.row("c2"));
    }

    #[test]
    fn leakage_is_rejected() {
        let late = [txn("c1", "2024-07-01", TxnType::Sell, 1.0), txn("c1", "2024-01-01", TxnType::Sell, 1.0)];
        let err = txn_features(&late, &VixSeries::default(), d("2024-06-30"), &Default::default(), &[]).unwrap_err();
        assert!(matches!(err, Error::Leakage { count: 1, .. }));
        let events = [event("c1", "2024-07-02", "t", 0.9)];
        assert!(matches!(
            note_features(&events, &BTreeMap::new(), &["t".into()], d("2024-06-30"), &Default::default()),
            Err(Error::Leakage { .. })
        ));
    }

    #[test]
    fn constant_vix_weighting_is_plain_mean() {
        let days: Vec<(NaiveDate, f64)> = (0..70).map(|i| (d("2024-01-01") + Duration::days(i), 17.5)).collect();
        let vix = VixSeries::new(days).unwrap();
        let recs: Vec<TransactionRecord> = [3, 4, 10, 30, 31, 32, 60]
            .iter()
            .map(|&o| txn("c", &(d("2024-01-01") + Duration::days(o)).to_string(), TxnType::Buy, 1.0))
            .collect();
        let g = txn_features(&recs, &vix, d("2024-03-10"), &Default::default(), &[]).unwrap();
        let w = g.value("c", "vix_weighted_weekly_trades").unwrap();
        assert!((w - g.value("c", "mean_weekly_trades").unwrap()).abs() < 1e-12);
        assert!((w - 7.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn note_feature_definitions() {
        let events = [
            event("c1", "2024-05-31", "t", 0.8),
            event("c1", "2024-06-30", "t", 1.0),
            event("c1", "2024-06-30", "other", 1.0),
        ];
        let counts = BTreeMap::from([("c1".to_string(), 4), ("c2".to_string(), 2)]);
        let topics = vec!["t".to_string(), "u".to_string()];
        let g = note_features(&events, &counts, &topics, d("2024-06-30"), &Default::default()).unwrap();
        assert_eq!(g.value("c1", "t.count"), Some(2.0));
        assert_eq!(g.value("c1", "t.rate"), Some(0.5));
        assert!((g.value("c1", "t.recency_weighted").unwrap() - 1.5).abs() < 1e-12);
        assert!((g.value("c1", "t.mean_similarity").unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(g.value("c1", "t.max_similarity"), Some(1.0));
        assert_eq!(g.value("c1", "t.days_since_last"), Some(0.0));
        assert_eq!(g.value("c1", "u.days_since_last"), Some(182.0));
        assert_eq!(g.value("c2", "t.count"), Some(0.0));
    }

    #[test]
    fn dataset_join_and_csv() {
        let counts = BTreeMap::from([("a".to_string(), 1)]);
        let notes = note_features(&[], &counts, &["t".into()], d("2024-06-30"), &Default::default()).unwrap();
        let txns = txn_features(&[txn("b", "2024-06-01", TxnType::Sell, 5.0)], &VixSeries::default(), d("2024-06-30"), &Default::default(), &[]).unwrap();
        let labels = BTreeMap::from([("a".to_string(), 0u8), ("b".to_string(), 1), ("c".to_string(), 0)]);
        let table = build_dataset(&notes, &txns, &labels).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.names.iter().all(|n| n.starts_with("note.") || n.starts_with("txn.")));
        let b = &table.rows[1];
        assert_eq!(b.values[..6], notes.empty[..]);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureTable::read_csv(&buf[..]).unwrap(), table);

        let partial = BTreeMap::from([("a".to_string(), 0u8)]);
        assert!(matches!(build_dataset(&notes, &txns, &partial), Err(Error::MissingLabels(c)) if c == ["b"]));
    }

    #[test]
    fn transactions_csv() {
        let recs = vec![txn("c1", "2024-01-02", TxnType::Exchange, 12.5)];
        let mut buf = Vec::new();
        write_transactions(&mut buf, &recs).unwrap();
        assert!(buf.starts_with(b"client_id,date,account_id,instrument,txn_type,amount\n"));
        assert_eq!(read_transactions(&buf[..]).unwrap(), recs);
        let bad = "client_id,date,account_id,instrument,txn_type,amount\nc,2024-01-01,a,X,buy,-1\n";
        assert!(read_transactions(bad.as_bytes()).is_err());
        let bad = "client_id,date,account_id,instrument,txn_type,amount\nc,2024-01-01,a,X,gift,1\n";
        assert!(read_transactions(bad.as_bytes()).is_err());
    }
}
