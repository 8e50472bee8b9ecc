//! Background cartographer jobs.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use feaslab_core::{progressive_cartographer, AlgorithmConfig, Constellation, MapBatch, Region};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobState {
    Running { progress: f64 },
    Done,
    Failed { message: String },
}

impl JobState {
    pub fn is_running(&self) -> bool {
        matches!(self, JobState::Running { .. })
    }
}

pub struct Job {
    pub id: String,
    pub constellation_id: String,
    pub total_pages: u64,
    state: Mutex<JobState>,
    pages: RwLock<Vec<Arc<MapBatch>>>,
    cancelled: AtomicBool,
}

impl Job {
    pub fn new(id: String, constellation_id: String, total_pages: u64) -> Self {
        Self {
            id,
            constellation_id,
            total_pages,
            state: Mutex::new(JobState::Running { progress: 0.0 }),
            pages: RwLock::new(Vec::new()),
            cancelled: AtomicBool::new(false),
        }
    }

    pub fn state(&self) -> JobState {
        self.state.lock().unwrap().clone()
    }

    pub fn pages_available(&self) -> usize {
        self.pages.read().unwrap().len()
    }

    /// Pages `from..` as of now, or `None` when `from` is past what exists.
    pub fn pages_from(&self, from: usize) -> Option<Vec<Arc<MapBatch>>> {
        let pages = self.pages.read().unwrap();
        (from <= pages.len()).then(|| pages[from..].to_vec())
    }

    /// Marks a running job as cancelled. Finished jobs are left alone.
    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
        let mut state = self.state.lock().unwrap();
        if state.is_running() {
            *state = JobState::Failed { message: "cancelled".into() };
        }
    }

    fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    fn push(&self, batch: MapBatch, progress: f64) {
        // Publish the page before the progress that covers it.
        self.pages.write().unwrap().push(Arc::new(batch));
        let mut state = self.state.lock().unwrap();
        if let JobState::Running { progress: p } = &mut *state {
            *p = p.max(progress);
        }
    }

    fn finish(&self, result: JobState) {
        let mut state = self.state.lock().unwrap();
        if state.is_running() {
            *state = result;
        }
    }
}

pub struct MapRequest {
    pub config: AlgorithmConfig,
    pub region: Region,
    pub budget: u64,
    pub chunk: u64,
}

/// Blocking job body: walks the progressive stream until done or cancelled.
pub fn run(job: &Job, constellation: &Constellation, req: &MapRequest) {
    let mut stream = match progressive_cartographer(&req.config, constellation, req.region, req.budget, req.chunk) {
        Ok(s) => s,
        Err(e) => return job.finish(JobState::Failed { message: e.to_string() }),
    };
    loop {
        if job.is_cancelled() {
            return;
        }
        match stream.next() {
            Some(batch) => job.push(batch, stream.progress()),
            None => break,
        }
    }
    job.finish(JobState::Done);
}
