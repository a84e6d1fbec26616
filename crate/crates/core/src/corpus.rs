//! Roll-call datasets: lawmakers, bills with their texts, and binary votes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "D")]
    Democrat,
    #[serde(rename = "R")]
    Republican,
    #[serde(rename = "O")]
    Other,
}

impl Party {
    pub fn code(self) -> &'static str {
        match self {
            Party::Democrat => "D",
            Party::Republican => "R",
            Party::Other => "O",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s.trim() {
            "D" | "d" => Some(Party::Democrat),
            "R" | "r" => Some(Party::Republican),
            "O" | "o" => Some(Party::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chamber {
    House,
    Senate,
}

impl Chamber {
    pub fn code(self) -> &'static str {
        match self {
            Chamber::House => "house",
            Chamber::Senate => "senate",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "house" => Some(Chamber::House),
            "senate" => Some(Chamber::Senate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lawmaker {
    pub id: String,
    pub name: String,
    pub party: Party,
    pub chamber: Chamber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillDoc {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    Yea,
    Nay,
}

impl Vote {
    pub fn is_yea(self) -> bool {
        matches!(self, Vote::Yea)
    }

    pub fn flipped(self) -> Self {
        match self {
            Vote::Yea => Vote::Nay,
            Vote::Nay => Vote::Yea,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub lawmaker_id: String,
    pub bill_id: String,
    pub vote: Vote,
}

/// A validated roll-call matrix.
///
/// Lawmakers and bills are kept sorted by id and every one of them has at
/// least one vote. Votes are sorted by `(lawmaker_id, bill_id)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RollCallDataset {
    pub lawmakers: Vec<Lawmaker>,
    pub bills: Vec<BillDoc>,
    pub votes: Vec<VoteRecord>,
}

impl RollCallDataset {
    /// Validates and canonicalizes a dataset. Lawmakers and bills with no
    /// votes are dropped.
    pub fn new(
        lawmakers: Vec<Lawmaker>,
        bills: Vec<BillDoc>,
        mut votes: Vec<VoteRecord>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in &lawmakers {
            if !seen.insert(l.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate lawmaker id {}", l.id)));
            }
        }
        let mut seen_bills = HashSet::new();
        for b in &bills {
            if !seen_bills.insert(b.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate bill id {}", b.id)));
            }
        }
        let mut pairs = HashSet::new();
        for v in &votes {
            if !seen.contains(v.lawmaker_id.as_str()) {
                return Err(Error::Integrity(format!(
                    "vote references unknown lawmaker id {}",
                    v.lawmaker_id
                )));
            }
            if !seen_bills.contains(v.bill_id.as_str()) {
                return Err(Error::Integrity(format!(
                    "vote references unknown bill id {}",
                    v.bill_id
                )));
            }
            if !pairs.insert((v.lawmaker_id.as_str(), v.bill_id.as_str())) {
                return Err(Error::Integrity(format!(
                    "duplicate vote for lawmaker {} on bill {}",
                    v.lawmaker_id, v.bill_id
                )));
            }
        }
        if votes.is_empty() {
            return Err(Error::Integrity("dataset has no votes".into()));
        }

        let voted_l: HashSet<String> = votes.iter().map(|v| v.lawmaker_id.clone()).collect();
        let voted_b: HashSet<String> = votes.iter().map(|v| v.bill_id.clone()).collect();
        let mut lawmakers: Vec<Lawmaker> = lawmakers
            .into_iter()
            .filter(|l| voted_l.contains(&l.id))
            .collect();
        let mut bills: Vec<BillDoc> = bills.into_iter().filter(|b| voted_b.contains(&b.id)).collect();
        lawmakers.sort_by(|a, b| a.id.cmp(&b.id));
        bills.sort_by(|a, b| a.id.cmp(&b.id));
        votes.sort_by(|a, b| (&a.lawmaker_id, &a.bill_id).cmp(&(&b.lawmaker_id, &b.bill_id)));
        Ok(Self {
            lawmakers,
            bills,
            votes,
        })
    }

    pub fn n_lawmakers(&self) -> usize {
        self.lawmakers.len()
    }

    pub fn n_bills(&self) -> usize {
        self.bills.len()
    }

    pub fn n_votes(&self) -> usize {
        self.votes.len()
    }

    pub fn lawmaker_index(&self, id: &str) -> Option<usize> {
        self.lawmakers.binary_search_by(|l| l.id.as_str().cmp(id)).ok()
    }

    pub fn bill_index(&self, id: &str) -> Option<usize> {
        self.bills.binary_search_by(|b| b.id.as_str().cmp(id)).ok()
    }

    /// Dataset restricted to the votes for which `keep` returns true.
    pub fn with_votes<F: FnMut(usize, &VoteRecord) -> bool>(&self, mut keep: F) -> Result<Self> {
        let votes = self
            .votes
            .iter()
            .enumerate()
            .filter(|(i, v)| keep(*i, v))
            .map(|(_, v)| v.clone())
            .collect();
        Self::new(self.lawmakers.clone(), self.bills.clone(), votes)
    }

    /// Writes the three corpus files.
    pub fn save(&self, votes_path: &Path, lawmakers_path: &Path, bills_path: &Path) -> Result<()> {
        write_lawmakers(lawmakers_path, &self.lawmakers)?;
        write_bills(bills_path, &self.bills)?;
        write_votes(votes_path, &self.votes)
    }
}

/// Loads and validates a dataset from its three files.
pub fn load_dataset(votes_path: &Path, lawmakers_path: &Path, bills_path: &Path) -> Result<RollCallDataset> {
    let lawmakers = read_lawmakers(lawmakers_path)?;
    let bills = read_bills(bills_path)?;
    let votes = read_votes(votes_path)?;
    let (nl, nb) = (lawmakers.len(), bills.len());
    let ds = RollCallDataset::new(lawmakers, bills, votes)?;
    if ds.n_lawmakers() < nl || ds.n_bills() < nb {
        log::info!(
            "dropped {} lawmakers and {} bills with no votes",
            nl - ds.n_lawmakers(),
            nb - ds.n_bills()
        );
    }
    Ok(ds)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(open(path)?);
    let got = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = got.iter().collect();
    if got != header {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
        ));
    }
    Ok(rdr)
}

fn records(
    path: &Path,
    header: &[&str],
) -> Result<impl Iterator<Item = Result<(usize, csv::StringRecord)>>> {
    let rdr = csv_reader(path, header)?;
    let p = path.to_path_buf();
    let width = header.len();
    Ok(rdr.into_records().map(move |r| {
        let rec = r.map_err(|e| {
            let line = e.position().map(|pos| pos.line() as usize).unwrap_or(0);
            Error::parse(&p, line, e.to_string())
        })?;
        let line = rec.position().map(|pos| pos.line() as usize).unwrap_or(0);
        if rec.len() != width {
            return Err(Error::parse(&p, line, format!("expected {width} fields, found {}", rec.len())));
        }
        Ok((line, rec))
    }))
}

pub fn read_lawmakers(path: &Path) -> Result<Vec<Lawmaker>> {
    let mut out = Vec::new();
    for r in records(path, &["id", "name", "party", "chamber"])? {
        let (line, rec) = r?;
        let party = Party::from_code(&rec[2])
            .ok_or_else(|| Error::parse(path, line, format!("unknown party `{}`", &rec[2])))?;
        let chamber = Chamber::from_code(&rec[3])
            .ok_or_else(|| Error::parse(path, line, format!("unknown chamber `{}`", &rec[3])))?;
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty lawmaker id"));
        }
        out.push(Lawmaker {
            id: id.to_string(),
            name: rec[1].to_string(),
            party,
            chamber,
        });
    }
    Ok(out)
}

pub fn write_lawmakers(path: &Path, lawmakers: &[Lawmaker]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let res = (|| -> csv::Result<()> {
        w.write_record(["id", "name", "party", "chamber"])?;
        for l in lawmakers {
            w.write_record([l.id.as_str(), &l.name, l.party.code(), l.chamber.code()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e.into()))
}

pub fn read_bills(path: &Path) -> Result<Vec<BillDoc>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bill: BillDoc =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if bill.id.is_empty() {
            return Err(Error::parse(path, i + 1, "empty bill id"));
        }
        out.push(bill);
    }
    Ok(out)
}

pub fn write_bills(path: &Path, bills: &[BillDoc]) -> Result<()> {
    let mut w = create(path)?;
    for b in bills {
        let s = serde_json::to_string(b).map_err(|e| Error::json(path, e))?;
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Vote values that are recognised but not modeled.
const NON_BINARY: &[&str] = &["present", "abstain", "not voting", "absent", "nv"];

pub fn read_votes(path: &Path) -> Result<Vec<VoteRecord>> {
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for r in records(path, &["lawmaker_id", "bill_id", "vote"])? {
        let (line, rec) = r?;
        let v = rec[2].trim().to_ascii_lowercase();
        let vote = match v.as_str() {
            "yea" => Vote::Yea,
            "nay" => Vote::Nay,
            other if NON_BINARY.contains(&other) => {
                dropped += 1;
                continue;
            }
            other => return Err(Error::parse(path, line, format!("unknown vote `{other}`"))),
        };
        out.push(VoteRecord {
            lawmaker_id: rec[0].trim().to_string(),
            bill_id: rec[1].trim().to_string(),
            vote,
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} non-binary votes from {}", path.display());
    }
    Ok(out)
}

pub fn write_votes(path: &Path, votes: &[VoteRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let res = (|| -> csv::Result<()> {
        w.write_record(["lawmaker_id", "bill_id", "vote"])?;
        for v in votes {
            let s = if v.vote.is_yea() { "yea" } else { "nay" };
            w.write_record([v.lawmaker_id.as_str(), &v.bill_id, s])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io(path, e.into()))
}

/// Index-based view of the votes used by the numerical code.
#[derive(Debug, Clone)]
pub struct VoteIndex {
    pub lawmaker: Vec<usize>,
    pub bill: Vec<usize>,
    pub yea: Vec<bool>,
    /// Vote positions per lawmaker.
    pub by_lawmaker: Vec<Vec<usize>>,
    /// Vote positions per bill.
    pub by_bill: Vec<Vec<usize>>,
}

impl VoteIndex {
    pub fn new(ds: &RollCallDataset) -> Self {
        let lidx: HashMap<&str, usize> = ds
            .lawmakers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        let bidx: HashMap<&str, usize> = ds
            .bills
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect();
        let n = ds.votes.len();
        let mut idx = VoteIndex {
            lawmaker: Vec::with_capacity(n),
            bill: Vec::with_capacity(n),
            yea: Vec::with_capacity(n),
            by_lawmaker: vec![Vec::new(); ds.n_lawmakers()],
            by_bill: vec![Vec::new(); ds.n_bills()],
        };
        for (i, v) in ds.votes.iter().enumerate() {
            let u = lidx[v.lawmaker_id.as_str()];
            let d = bidx[v.bill_id.as_str()];
            idx.lawmaker.push(u);
            idx.bill.push(d);
            idx.yea.push(v.vote.is_yea());
            idx.by_lawmaker[u].push(i);
            idx.by_bill[d].push(i);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.yea.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yea.is_empty()
    }
}

/// Assignment of every vote to one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    /// Seed used to draw the partition; `None` when read back from a file.
    pub seed: Option<u64>,
    pub n_folds: usize,
    pub assignment: BTreeMap<(String, String), usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, v: &VoteRecord) -> Option<usize> {
        self.assignment
            .get(&(v.lawmaker_id.clone(), v.bill_id.clone()))
            .copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Training and held-out splits for fold `k`.
    pub fn split(&self, ds: &RollCallDataset, k: usize) -> Result<(RollCallDataset, Vec<VoteRecord>)> {
        let heldout: Vec<VoteRecord> = ds
            .votes
            .iter()
            .filter(|v| self.fold_of(v) == Some(k))
            .cloned()
            .collect();
        let train = ds.with_votes(|_, v| self.fold_of(v) != Some(k))?;
        Ok((train, heldout))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(create(path)?);
        let res = (|| -> csv::Result<()> {
            w.write_record(["lawmaker_id", "bill_id", "fold"])?;
            for ((l, b), f) in &self.assignment {
                w.write_record([l.as_str(), b.as_str(), &f.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| Error::io(path, e.into()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        let mut n_folds = 0;
        for r in records(path, &["lawmaker_id", "bill_id", "fold"])? {
            let (line, rec) = r?;
            let f: usize = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad fold index `{}`", &rec[2])))?;
            n_folds = n_folds.max(f + 1);
            if assignment
                .insert((rec[0].trim().to_string(), rec[1].trim().to_string()), f)
                .is_some()
            {
                return Err(Error::parse(path, line, "duplicate vote pair"));
            }
        }
        Ok(Self {
            seed: None,
            n_folds,
            assignment,
        })
    }
}

/// Seeded Fisher–Yates shuffle of the votes followed by round-robin
/// assignment, so fold sizes differ by at most one.
pub fn split_folds(ds: &RollCallDataset, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_folds > ds.n_votes() {
        return Err(Error::InvalidArgument(format!(
            "{n_folds} folds exceed the {} available votes",
            ds.n_votes()
        )));
    }
    let mut order: Vec<usize> = (0..ds.n_votes()).collect();
    order.shuffle(&mut rng::stream(seed, &[0xf01d]));
    let assignment = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let v = &ds.votes[i];
            ((v.lawmaker_id.clone(), v.bill_id.clone()), pos % n_folds)
        })
        .collect();
    Ok(FoldAssignment {
        seed: Some(seed),
        n_folds,
        assignment,
    })
}
