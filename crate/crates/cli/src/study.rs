//! `suggest` / `complete`: an interactive study persisted in a JSON state
//! file.

use std::fs;
use std::io::Write;
use std::path::Path;

use gpbo_core::designer::{DesignerConfig, Outcome, StudyState};
use gpbo_core::search_space::{ProblemStatement, Trial};

use crate::error::{CliError, CliResult};

/// Write `contents` to `path` through a temporary file in the same
/// directory followed by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}

pub fn read_study(path: &Path) -> CliResult<ProblemStatement> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read study file {}: {e}", path.display())))?;
    let problem: ProblemStatement = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed study file {}: {e}", path.display())))?;
    problem.validate()?;
    Ok(problem)
}

pub fn read_state(path: &Path) -> CliResult<Option<StudyState>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::State(format!("cannot read state file {}: {e}", path.display())))?;
    let state: StudyState = serde_json::from_str(&text)
        .map_err(|e| CliError::State(format!("corrupt state file {}: {e}", path.display())))?;
    state.validate().map_err(|e| CliError::State(e.to_string()))?;
    Ok(Some(state))
}

pub fn write_state(path: &Path, state: &StudyState) -> CliResult<()> {
    let text = serde_json::to_vec_pretty(state).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(path, &text)
}

/// Pending trials created after the most recent completion: the answer to
/// a `suggest` call that has not been acted on yet.
fn unanswered(state: &StudyState) -> Vec<Trial> {
    let last_completion = state.trials.iter().filter_map(|t| t.completed_at).max().unwrap_or(0);
    state.pending().filter(|t| t.created_at > last_completion).cloned().collect()
}

pub struct SuggestArgs<'a> {
    pub study: &'a Path,
    pub state: &'a Path,
    pub count: usize,
    pub seed: u64,
    pub designer: Option<DesignerConfig>,
}

/// Suggest `count` trials. Re-running without intervening completions
/// returns the same pending trials instead of creating new ones.
pub fn suggest(args: &SuggestArgs<'_>) -> CliResult<Vec<Trial>> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let problem = read_study(args.study)?;
    let mut state = match read_state(args.state)? {
        Some(s) => {
            if s.problem != problem {
                return Err(CliError::State(format!(
                    "state file {} belongs to a different study",
                    args.state.display()
                )));
            }
            s
        }
        None => StudyState::new(problem, args.designer.clone().unwrap_or_default(), args.seed)?,
    };
    let mut out = unanswered(&state);
    if out.len() >= args.count {
        out.truncate(args.count);
        return Ok(out);
    }
    let fresh = state.suggest(args.count - out.len())?;
    out.extend(fresh);
    write_state(args.state, &state)?;
    Ok(out)
}

pub fn complete(state_path: &Path, id: u64, outcome: Outcome) -> CliResult<Trial> {
    let mut state =
        read_state(state_path)?.ok_or_else(|| CliError::State(format!("no state file at {}", state_path.display())))?;
    state.complete_trial(id, outcome)?;
    write_state(state_path, &state)?;
    Ok(state.trial(id).cloned().expect("trial exists after completion"))
}
