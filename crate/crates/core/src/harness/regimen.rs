use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::architectures::Task;
use crate::error::{Error, Result};

/// Which identification tasks receive targets during a span of epochs.
/// Phone auto-association is always trained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveTasks {
    All,
    Only(Vec<Task>),
}

impl ActiveTasks {
    pub fn flags(&self, task_count: usize) -> Vec<bool> {
        (0..task_count)
            .map(|i| match self {
                ActiveTasks::All => true,
                ActiveTasks::Only(ts) => ts.contains(&Task::from_index(i)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub epochs: Range<usize>,
    pub active: ActiveTasks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regimen {
    pub total_epochs: usize,
    pub eval_every: usize,
    pub phases: Vec<Phase>,
}

impl Regimen {
    pub fn new(total_epochs: usize, eval_every: usize, phases: Vec<Phase>) -> Result<Self> {
        if total_epochs == 0 || eval_every == 0 {
            return Err(Error::Config("epochs and eval cadence must be positive".into()));
        }
        let mut next = 0;
        for p in &phases {
            if p.epochs.start != next || p.epochs.end <= p.epochs.start {
                return Err(Error::Config(format!(
                    "regimen phases must partition [0, {total_epochs}) in order"
                )));
            }
            next = p.epochs.end;
        }
        if next != total_epochs {
            return Err(Error::Config(format!(
                "regimen phases cover [0, {next}) but training runs {total_epochs} epochs"
            )));
        }
        Ok(Regimen {
            total_epochs,
            eval_every,
            phases,
        })
    }

    /// Every target active throughout.
    pub fn uniform(total_epochs: usize, eval_every: usize) -> Result<Self> {
        Self::staged(total_epochs, eval_every, 0)
    }

    /// Root targets only for the first `root_only` epochs, then everything.
    pub fn staged(total_epochs: usize, eval_every: usize, root_only: usize) -> Result<Self> {
        if root_only >= total_epochs && total_epochs > 0 {
            return Err(Error::Config(format!(
                "root-only phase ({root_only}) must be shorter than training ({total_epochs})"
            )));
        }
        let mut phases = Vec::new();
        if root_only > 0 {
            phases.push(Phase {
                epochs: 0..root_only,
                active: ActiveTasks::Only(vec![Task::Root]),
            });
        }
        phases.push(Phase {
            epochs: root_only..total_epochs,
            active: ActiveTasks::All,
        });
        Self::new(total_epochs, eval_every, phases)
    }

    pub fn active_at(&self, epoch: usize) -> &ActiveTasks {
        &self
            .phases
            .iter()
            .find(|p| p.epochs.contains(&epoch))
            .expect("phases partition the epochs")
            .active
    }

    /// Epochs after which the network is evaluated, starting with the
    /// untrained network and always ending with the final one.
    pub fn eval_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = (0..=self.total_epochs).step_by(self.eval_every).collect();
        if pts.last() != Some(&self.total_epochs) {
            pts.push(self.total_epochs);
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_protocol() {
        let r = Regimen::uniform(150, 25).unwrap();
        assert_eq!(r.eval_points(), vec![0, 25, 50, 75, 100, 125, 150]);
        assert_eq!(r.active_at(0), &ActiveTasks::All);
    }

    #[test]
    fn staged_protocol() {
        let r = Regimen::staged(200, 25, 80).unwrap();
        assert_eq!(r.active_at(79).flags(3), vec![true, false, false]);
        assert_eq!(r.active_at(80).flags(3), vec![true, true, true]);
        assert_eq!(r.eval_points().last(), Some(&200));
    }

    #[test]
    fn phases_must_partition() {
        let gap = vec![
            Phase {
                epochs: 0..10,
                active: ActiveTasks::All,
            },
            Phase {
                epochs: 12..20,
                active: ActiveTasks::All,
            },
        ];
        assert!(Regimen::new(20, 5, gap).is_err());
        let short = vec![Phase {
            epochs: 0..10,
            active: ActiveTasks::All,
        }];
        assert!(Regimen::new(20, 5, short).is_err());
        assert!(Regimen::staged(10, 5, 10).is_err());
    }

    #[test]
    fn odd_cadence_keeps_final_point() {
        let r = Regimen::uniform(120, 50).unwrap();
        assert_eq!(r.eval_points(), vec![0, 50, 100, 120]);
    }
}
