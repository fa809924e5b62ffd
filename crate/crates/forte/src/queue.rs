//! Background job queue running one experiment at a time.

use std::collections::HashSet;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread;

use forte_core::{Dataset, ExperimentStatus};

use crate::datadir::ModelRegistry;
use crate::runner::{run_experiment, RunControl, RunError};
use crate::store::{ExperimentStore, StoreError};

/// Everything a job needs besides its spec.
#[derive(Clone)]
pub struct JobEnv {
    pub dataset: Arc<Dataset>,
    pub models: Arc<RwLock<ModelRegistry>>,
    pub context_days: u32,
    pub workers: usize,
}

#[derive(Default)]
struct QueueState {
    running: Option<(String, Arc<RunControl>)>,
    cancelled: HashSet<String>,
}

struct Shared {
    store: ExperimentStore,
    state: Mutex<QueueState>,
    changed: Condvar,
}

#[derive(Clone)]
pub struct JobQueue {
    shared: Arc<Shared>,
    tx: mpsc::Sender<String>,
}

impl JobQueue {
    /// Starts the worker thread. It exits once every handle is dropped.
    pub fn start(store: ExperimentStore, env: JobEnv) -> JobQueue {
        let shared = Arc::new(Shared { store, state: Mutex::default(), changed: Condvar::new() });
        let (tx, rx) = mpsc::channel::<String>();
        let worker = Arc::clone(&shared);
        thread::Builder::new()
            .name("forte-jobs".into())
            .spawn(move || {
                for id in rx {
                    worker.run_one(&id, &env);
                }
            })
            .expect("spawn job worker");
        JobQueue { shared, tx }
    }

    pub fn enqueue(&self, id: String) {
        let _ = self.tx.send(id);
    }

    /// Live progress of the running experiment, if `id` is the one running.
    pub fn live_progress(&self, id: &str) -> Option<f64> {
        let state = self.shared.state.lock().expect("queue lock");
        state.running.as_ref().filter(|(r, _)| r == id).map(|(_, c)| c.progress())
    }

    pub fn running(&self) -> Option<String> {
        self.shared.state.lock().expect("queue lock").running.as_ref().map(|(id, _)| id.clone())
    }

    /// Cancels `id` if queued or running, waits for the worker to let go of
    /// it, then removes it from the store.
    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        self.shared.store.status(id)?;
        let mut state = self.shared.state.lock().expect("queue lock");
        state.cancelled.insert(id.to_string());
        if let Some((_, control)) = state.running.as_ref().filter(|(r, _)| r == id) {
            control.cancel();
        }
        while state.running.as_ref().is_some_and(|(r, _)| r == id) {
            state = self.shared.changed.wait(state).expect("queue lock");
        }
        drop(state);
        self.shared.store.delete(id)
    }

    /// Blocks until `id` reaches a terminal status or disappears.
    pub fn wait(&self, id: &str) {
        loop {
            match self.shared.store.status(id) {
                Ok(s) if !s.status.is_terminal() => {}
                _ => return,
            }
            let state = self.shared.state.lock().expect("queue lock");
            let _ = self.shared.changed.wait_timeout(state, std::time::Duration::from_millis(50));
        }
    }
}

impl Shared {
    fn run_one(&self, id: &str, env: &JobEnv) {
        let control = Arc::new(RunControl::new());
        {
            let mut state = self.state.lock().expect("queue lock");
            if state.cancelled.remove(id) {
                return;
            }
            state.running = Some((id.to_string(), Arc::clone(&control)));
        }
        self.execute(id, env, &control);
        let mut state = self.state.lock().expect("queue lock");
        state.running = None;
        state.cancelled.remove(id);
        self.changed.notify_all();
    }

    fn execute(&self, id: &str, env: &JobEnv, control: &RunControl) {
        let fail = |msg: String| {
            let _ = self.store.set_status(id, ExperimentStatus::Failed, control.progress(), Some(msg));
        };
        let Ok(stored) = self.store.load(id) else { return };
        if stored.status.is_terminal() {
            return;
        }
        let spec = stored.spec;
        let model = env.models.read().expect("model lock").get(&(spec.penetration, spec.horizon)).cloned();
        let Some(model) = model else {
            return fail(format!("no fitted model for {}/{}", spec.penetration, spec.horizon));
        };
        if self.store.set_status(id, ExperimentStatus::Running, 0.0, None).is_err() {
            return;
        }
        match run_experiment(&spec, &env.dataset, model.as_ref(), env.context_days, env.workers, control) {
            Ok(results) => {
                if let Err(e) = self.store.commit_results(id, &results) {
                    fail(format!("could not store results: {e}"));
                }
            }
            Err(RunError::Cancelled) => {}
            Err(e) => fail(e.to_string()),
        }
    }
}
