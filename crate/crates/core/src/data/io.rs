//! Plain-text dataset files.
//!
//! * interactions: `user_id<TAB>item_id`
//! * groups: `group_id<TAB>u1,u2,...<TAB>item_id` (one line per group item)
//! * check-ins: `user_id<TAB>poi_id<TAB>unix_seconds`
//! * social: `user_id<TAB>friend_id`
//!
//! Fields may be separated by any whitespace. Blank lines and lines starting
//! with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Checkin, CheckinLog, GroupRecord, InteractionMatrix, SocialGraph};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(n, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#'))
            .then(|| (n + 1, line.split_whitespace().collect()))
    })
}

fn field<T: FromStr>(path: &Path, line: usize, fields: &[&str], idx: usize, name: &str) -> Result<T> {
    let raw = fields.get(idx).ok_or_else(|| Error::Parse {
        path: path.into(),
        line,
        message: format!("missing field `{name}`"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

fn expect_fields(path: &Path, line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

fn check_range(path: &Path, line: usize, what: &str, v: usize, limit: usize) -> Result<()> {
    if v >= limit {
        return Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("{what} {v} out of range (limit {limit})"),
        });
    }
    Ok(())
}

pub fn load_interactions(path: &Path, num_users: usize, num_items: usize) -> Result<InteractionMatrix> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (line, f) in records(&text) {
        expect_fields(path, line, &f, 2)?;
        let u: usize = field(path, line, &f, 0, "user_id")?;
        let i: usize = field(path, line, &f, 1, "item_id")?;
        check_range(path, line, "user_id", u, num_users)?;
        check_range(path, line, "item_id", i, num_items)?;
        pairs.push((u, i));
    }
    InteractionMatrix::from_pairs(num_users, num_items, pairs)
}

pub fn format_interactions(m: &InteractionMatrix) -> String {
    let mut out = String::new();
    for (u, row) in m.rows().enumerate() {
        for i in row {
            let _ = writeln!(out, "{u}\t{i}");
        }
    }
    out
}

pub fn save_interactions(path: &Path, m: &InteractionMatrix) -> Result<()> {
    write(path, &format_interactions(m))
}

/// Reads a groups file; lines sharing a group id are merged into one record
/// and must agree on the member list. Records keep first-appearance order.
pub fn load_groups(path: &Path, num_users: usize, num_items: usize) -> Result<Vec<GroupRecord>> {
    let text = read(path)?;
    let mut groups: Vec<GroupRecord> = Vec::new();
    let mut by_id = std::collections::BTreeMap::new();
    for (line, f) in records(&text) {
        expect_fields(path, line, &f, 3)?;
        let gid: u64 = field(path, line, &f, 0, "group_id")?;
        let mut members = Vec::new();
        for m in f[1].split(',') {
            let u: usize = m.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("invalid member `{m}`"),
            })?;
            check_range(path, line, "member", u, num_users)?;
            members.push(u);
        }
        let item: usize = field(path, line, &f, 2, "item_id")?;
        check_range(path, line, "item_id", item, num_items)?;
        let rec = GroupRecord::new(gid, members, vec![item]);
        if rec.members.len() < 2 {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: "group needs at least 2 distinct members".into(),
            });
        }
        match by_id.get(&gid) {
            Some(&idx) => {
                let g: &mut GroupRecord = &mut groups[idx];
                if g.members != rec.members {
                    return Err(Error::Parse {
                        path: path.into(),
                        line,
                        message: format!("group {gid} redeclared with different members"),
                    });
                }
                if let Err(pos) = g.items.binary_search(&item) {
                    g.items.insert(pos, item);
                }
            }
            None => {
                by_id.insert(gid, groups.len());
                groups.push(rec);
            }
        }
    }
    Ok(groups)
}

pub fn format_groups(groups: &[GroupRecord]) -> String {
    let mut out = String::new();
    for g in groups {
        let members = g
            .members
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        for i in &g.items {
            let _ = writeln!(out, "{}\t{members}\t{i}", g.group_id);
        }
    }
    out
}

pub fn save_groups(path: &Path, groups: &[GroupRecord]) -> Result<()> {
    write(path, &format_groups(groups))
}

/// Loads a check-in log; user and POI universes are sized from the largest id seen.
pub fn load_checkins(path: &Path) -> Result<CheckinLog> {
    let text = read(path)?;
    let mut recs = Vec::new();
    for (line, f) in records(&text) {
        expect_fields(path, line, &f, 3)?;
        recs.push(Checkin {
            user: field(path, line, &f, 0, "user_id")?,
            poi: field(path, line, &f, 1, "poi_id")?,
            timestamp: field(path, line, &f, 2, "unix_seconds")?,
        });
    }
    let num_users = recs.iter().map(|c| c.user + 1).max().unwrap_or(0);
    let num_pois = recs.iter().map(|c| c.poi + 1).max().unwrap_or(0);
    CheckinLog::new(num_users, num_pois, recs)
}

pub fn load_social(path: &Path, num_users: usize) -> Result<SocialGraph> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (line, f) in records(&text) {
        expect_fields(path, line, &f, 2)?;
        let a: usize = field(path, line, &f, 0, "user_id")?;
        let b: usize = field(path, line, &f, 1, "friend_id")?;
        // friends that never check in are irrelevant to group construction
        if a < num_users && b < num_users {
            edges.push((a, b));
        }
    }
    SocialGraph::from_edges(num_users, edges)
}
