use std::fmt;

use super::roc::auc;
use crate::error::{Error, Result};

/// Below this many positives a group's AUC is reported with a warning.
pub const MIN_RELIABLE_POSITIVES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupStatus {
    Ok,
    Empty,
    InsufficientData,
}

impl fmt::Display for GroupStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupStatus::Ok => "ok",
            GroupStatus::Empty => "empty",
            GroupStatus::InsufficientData => "insufficient data",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAuc {
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auc: Option<f64>,
    pub status: GroupStatus,
    pub warning: Option<String>,
}

/// AUCs computed separately for rows inside and outside a group.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupReport {
    pub in_group: GroupAuc,
    pub out_group: GroupAuc,
}

fn group_auc(scores: &[f64], labels: &[u8], keep: impl Fn(usize) -> bool) -> Result<GroupAuc> {
    let (s, l): (Vec<f64>, Vec<u8>) = (0..scores.len()).filter(|&i| keep(i)).map(|i| (scores[i], labels[i])).unzip();
    let n_pos = l.iter().filter(|&&v| v == 1).count();
    let n_neg = l.len() - n_pos;
    let (auc, status) = if l.is_empty() {
        (None, GroupStatus::Empty)
    } else if n_pos == 0 || n_neg == 0 {
        (None, GroupStatus::InsufficientData)
    } else {
        (Some(auc(&s, &l)?), GroupStatus::Ok)
    };
    let warning = (status == GroupStatus::Ok && n_pos < MIN_RELIABLE_POSITIVES)
        .then(|| format!("AUC rests on only {n_pos} positive rows (n_pos={n_pos})"));
    Ok(GroupAuc {
        n: l.len(),
        n_pos,
        n_neg,
        auc,
        status,
        warning,
    })
}

pub fn subgroup_auc(scores: &[f64], labels: &[u8], group: &[bool]) -> Result<SubgroupReport> {
    if scores.len() != labels.len() || scores.len() != group.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores, {} labels and {} group flags",
            scores.len(),
            labels.len(),
            group.len()
        )));
    }
    Ok(SubgroupReport {
        in_group: group_auc(scores, labels, |i| group[i])?,
        out_group: group_auc(scores, labels, |i| !group[i])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_flag_leaves_other_group_empty() {
        let r = subgroup_auc(&[0.1, 0.9, 0.4], &[0, 1, 0], &[true; 3]).unwrap();
        assert_eq!(r.in_group.auc, Some(1.0));
        assert_eq!(r.out_group.status, GroupStatus::Empty);
        assert_eq!(r.out_group.n, 0);
    }

    #[test]
    fn single_class_group_is_insufficient() {
        let r = subgroup_auc(&[0.1, 0.9, 0.4, 0.3], &[0, 1, 0, 0], &[true, true, false, false]).unwrap();
        assert_eq!(r.out_group.status, GroupStatus::InsufficientData);
        assert_eq!((r.out_group.n_pos, r.out_group.n_neg), (0, 2));
    }

    #[test]
    fn mirrored_groups_agree() {
        let s = [0.2, 0.7, 0.5, 0.1, 0.2, 0.7, 0.5, 0.1];
        let l = [0, 1, 1, 0, 0, 1, 1, 0];
        let g = [true, true, true, true, false, false, false, false];
        let r = subgroup_auc(&s, &l, &g).unwrap();
        assert_eq!(r.in_group.auc, r.out_group.auc);
    }

    #[test]
    fn few_positives_carry_a_warning() {
        let s: Vec<f64> = (0..40).map(f64::from).collect();
        let l: Vec<u8> = (0..40).map(|i| u8::from(i % 10 == 9)).collect();
        let g: Vec<bool> = (0..40).map(|i| i < 30).collect();
        let r = subgroup_auc(&s, &l, &g).unwrap();
        assert_eq!(r.in_group.n_pos, 3);
        assert!(r.in_group.warning.as_deref().unwrap().contains("n_pos=3"));
        assert!(r.out_group.warning.is_some());
    }
}
