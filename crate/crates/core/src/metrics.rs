//! Per-episode counters and their population summary.

use alloc::vec::Vec;

use crate::env::StepRecord;
use crate::math;
use crate::shield::Substitution;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeMetrics {
    pub steps: u32,
    #[cfg_attr(feature = "serde", serde(rename = "return"))]
    pub episode_return: f64,
    pub cost: u32,
    pub interventions: u32,
    pub replaced: u32,
    pub projected: u32,
    pub zero_actions: u32,
    pub goals_reached: u32,
    /// Agent steps with true contact between the robot and any obstacle.
    pub contacts: u32,
}

impl EpisodeMetrics {
    pub const FIELDS: [&'static str; 9] = [
        "steps",
        "return",
        "cost",
        "interventions",
        "replaced",
        "projected",
        "zero_actions",
        "goals_reached",
        "contacts",
    ];

    pub fn record(&mut self, rec: &StepRecord) {
        self.steps += 1;
        self.episode_return += rec.reward;
        self.cost += u32::from(rec.cost);
        self.interventions += u32::from(rec.intervention);
        match rec.substituted {
            Substitution::Original => {}
            Substitution::Replaced => self.replaced += 1,
            Substitution::Projected => self.projected += 1,
            Substitution::ZeroAction => self.zero_actions += 1,
        }
        self.goals_reached += u32::from(rec.goal_reached);
        self.contacts += u32::from(rec.contact);
    }

    /// Values in [`Self::FIELDS`] order.
    pub fn values(&self) -> [f64; 9] {
        [
            f64::from(self.steps),
            self.episode_return,
            f64::from(self.cost),
            f64::from(self.interventions),
            f64::from(self.replaced),
            f64::from(self.projected),
            f64::from(self.zero_actions),
            f64::from(self.goals_reached),
            f64::from(self.contacts),
        ]
    }
}

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Stat {
    pub name: &'static str,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub episodes: usize,
    pub stats: Vec<Stat>,
}

impl Summary {
    pub fn of(episodes: &[EpisodeMetrics]) -> Summary {
        let n = episodes.len();
        let stats = EpisodeMetrics::FIELDS
            .iter()
            .enumerate()
            .map(|(k, &name)| {
                if n == 0 {
                    return Stat { name, mean: 0.0, std: 0.0 };
                }
                let mean = episodes.iter().map(|e| e.values()[k]).sum::<f64>() / n as f64;
                let var =
                    episodes.iter().map(|e| (e.values()[k] - mean) * (e.values()[k] - mean)).sum::<f64>() / n as f64;
                Stat { name, mean, std: math::sqrt(var) }
            })
            .collect();
        Summary { episodes: n, stats }
    }

    pub fn get(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let mk = |c| EpisodeMetrics { interventions: c, ..Default::default() };
        let s = Summary::of(&[mk(1), mk(3)]);
        let st = s.get("interventions").unwrap();
        assert_eq!(st.mean, 2.0);
        assert_eq!(st.std, 1.0);
        assert_eq!(s.episodes, 2);
    }

    #[test]
    fn empty_summary_is_zero() {
        let s = Summary::of(&[]);
        assert!(s.stats.iter().all(|x| x.mean == 0.0 && x.std == 0.0));
    }
}
