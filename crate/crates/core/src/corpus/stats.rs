//! Note-volume and note-length statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::Datelike;

use super::RawNote;
use crate::error::Result;
use crate::io::{fmt_f64, write_file};

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyCount {
    /// `YYYY-MM`
    pub month: String,
    pub total_notes: u64,
    pub active_advisors: u64,
    pub notes_per_advisor: f64,
}

/// Fixed-width histogram; bin `i` covers `[i*width, (i+1)*width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: u64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn from_values(values: impl IntoIterator<Item = u64>, bin_width: u64) -> Self {
        let mut counts = Vec::new();
        for v in values {
            let bin = (v / bin_width) as usize;
            if counts.len() <= bin {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        Histogram { bin_width, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub monthly: Vec<MonthlyCount>,
    /// (month, advisor) → notes written.
    pub advisor_monthly: BTreeMap<(String, String), u64>,
    pub note_length: Histogram,
    pub advisor_avg_length: Histogram,
}

/// Characters excluding whitespace.
pub fn note_length(text: &str) -> u64 {
    text.chars().filter(|c| !c.is_whitespace()).count() as u64
}

pub fn corpus_stats(notes: &[RawNote], bin_width: u64) -> StatsReport {
    let bin_width = bin_width.max(1);
    let mut advisor_monthly: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut per_advisor: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for n in notes {
        let month = format!("{:04}-{:02}", n.date.year(), n.date.month());
        *advisor_monthly.entry((month, n.advisor_id.clone())).or_default() += 1;
        let e = per_advisor.entry(&n.advisor_id).or_default();
        e.0 += note_length(&n.text);
        e.1 += 1;
    }

    let mut months: BTreeMap<&str, (u64, BTreeSet<&str>)> = BTreeMap::new();
    for ((month, advisor), count) in &advisor_monthly {
        let e = months.entry(month).or_default();
        e.0 += count;
        e.1.insert(advisor);
    }
    let monthly = months
        .into_iter()
        .map(|(month, (total, advisors))| MonthlyCount {
            month: month.to_string(),
            total_notes: total,
            active_advisors: advisors.len() as u64,
            notes_per_advisor: total as f64 / advisors.len() as f64,
        })
        .collect();

    let note_length = Histogram::from_values(notes.iter().map(|n| note_length(&n.text)), bin_width);
    let advisor_avg_length = Histogram::from_values(
        per_advisor.values().map(|&(chars, count)| chars / count),
        bin_width,
    );
    StatsReport {
        monthly,
        advisor_monthly,
        note_length,
        advisor_avg_length,
    }
}

fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "bin_start,bin_end,count")?;
        for (i, c) in h.counts.iter().enumerate() {
            let start = i as u64 * h.bin_width;
            writeln!(w, "{},{},{}", start, start + h.bin_width, c)?;
        }
        Ok(())
    })
}

impl StatsReport {
    /// Writes `monthly_counts.csv`, `note_length_hist.csv` and
    /// `advisor_avg_length_hist.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("monthly_counts.csv"), |w| {
            writeln!(w, "month,total_notes,active_advisors,notes_per_advisor")?;
            for m in &self.monthly {
                writeln!(
                    w,
                    "{},{},{},{}",
                    m.month,
                    m.total_notes,
                    m.active_advisors,
                    fmt_f64(m.notes_per_advisor)
                )?;
            }
            Ok(())
        })?;
        write_histogram(&dir.join("note_length_hist.csv"), &self.note_length)?;
        write_histogram(&dir.join("advisor_avg_length_hist.csv"), &self.advisor_avg_length)
    }
}
