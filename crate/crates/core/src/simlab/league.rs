use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::SimAgent;
use crate::ids::{AgentId, ParticipantId, QuestionId, SeedId, SubmissionId, TaskId};
use crate::store::{AgentRegistration, CalibrationExample, Question, Store, StoreError, TaskConfig};

/// A made-up competition: tasks, one agent per participant per task, and the
/// latent qualities simulated raters judge them by.
#[derive(Clone, Debug)]
pub struct League {
    pub tasks: Vec<TaskConfig>,
    pub registrations: Vec<AgentRegistration>,
    pub agents: Vec<SimAgent>,
}

impl League {
    /// Participants `team-00..`; on every task their qualities are a shuffled
    /// ladder `0, 1, 2, ...`, shuffled independently per task.
    pub fn synthetic(n_tasks: usize, n_participants: usize, n_seeds: usize, rng_seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(rng_seed);
        let seeds: Vec<SeedId> = (0..n_seeds).map(|s| SeedId::new(format!("seed-{s}"))).collect();
        let mut tasks = Vec::new();
        let mut registrations = Vec::new();
        let mut agents = Vec::new();
        for t in 0..n_tasks {
            let task_id = TaskId::new(format!("task-{t}"));
            tasks.push(TaskConfig {
                task_id: task_id.clone(),
                description: format!("Synthetic task {t}."),
                questions: vec![Question {
                    id: QuestionId::from("notes"),
                    prompt: "Anything notable about either video?".into(),
                    required: false,
                }],
                eval_seeds: seeds.clone(),
                calibration: (0..3)
                    .map(|k| CalibrationExample {
                        id: format!("cal-{k}"),
                        video: format!("https://videos.example/{task_id}/calibration-{k}.mp4"),
                        explanation: format!("Reference level {k}."),
                    })
                    .collect(),
            });
            let mut ladder: Vec<usize> = (0..n_participants).collect();
            ladder.shuffle(&mut rng);
            for (p, quality) in ladder.into_iter().enumerate() {
                let participant = format!("team-{p:02}");
                let agent_id = AgentId::new(format!("{participant}-{task_id}"));
                registrations.push(AgentRegistration {
                    agent_id: agent_id.clone(),
                    participant_id: ParticipantId::new(participant.clone()),
                    submission_id: SubmissionId::new(format!("{participant}-sub-1")),
                    task_id: task_id.clone(),
                    videos: seeds
                        .iter()
                        .map(|s| (s.clone(), format!("https://videos.example/{agent_id}/{s}.mp4")))
                        .collect::<BTreeMap<_, _>>(),
                });
                agents.push(SimAgent::new(agent_id, 0.0).with_quality(task_id.clone(), quality as f64));
            }
        }
        Self {
            tasks,
            registrations,
            agents,
        }
    }

    pub fn task_ids(&self) -> Vec<TaskId> {
        self.tasks.iter().map(|t| t.task_id.clone()).collect()
    }

    /// Configure the tasks and register every agent.
    pub fn install(&self, store: &mut Store) -> Result<(), StoreError> {
        for task in &self.tasks {
            store.configure_task(task.clone())?;
        }
        for reg in &self.registrations {
            store.register_agent(reg.clone())?;
        }
        Ok(())
    }
}
